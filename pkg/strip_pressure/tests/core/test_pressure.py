"""Test the pressure pipeline.
Run this test with command: pytest strip_pressure/tests/core/test_pressure.py
"""
import json
import math
import os

import numpy as np
import pytest

import strip_pressure.core.pressure as pressure
from strip_pressure.core.errors import GateFailedError
from strip_pressure.core.interactions import builtin_model, hard_square_sft
from strip_pressure.core.lattice import PeriodicRow, build_column_system

HARD_SQUARE_ENTROPY = 0.4074951
ZERO = PeriodicRow.constant(0)


def config(name, params=None, **kwargs):
    return pressure.RunConfig(model=builtin_model(name, params or {}), **kwargs)


class TestRunConfig:
    @pytest.mark.parametrize(
        "kwargs, message",
        [
            ({"n_min": 0, "n_max": 3}, "n_min must be at least 1, got 0."),
            (
                {"n_min": 3, "n_max": 3},
                "n_max must exceed n_min to give a difference, got 3..3.",
            ),
            ({"n_min": 1, "n_max": 3, "rel_tol": 0.0}, "rel_tol must be positive, got 0.0."),
            ({"n_min": 1, "n_max": 3, "workers": 0}, "workers must be at least 1, got 0."),
        ],
    )
    def test_invalid(self, kwargs, message):
        with pytest.raises(ValueError) as e:
            config("hard_square", **kwargs)
        assert str(e.value) == message

    def test_period_and_power(self):
        cfg = config("checkerboard", {"k": 5}, n_min=1, n_max=2)
        assert cfg.period == 2
        assert cfg.p == 2
        assert config("checkerboard", {"k": 5}, n_min=1, n_max=2, power=4).p == 4
        with pytest.raises(ValueError) as e:
            config("checkerboard", {"k": 5}, n_min=1, n_max=2, power=3)
        assert str(e.value) == "Power 3 must be a positive multiple of the row period 2."


class TestRecode:
    def test_power_one_keeps_model(self):
        model = builtin_model("hard_core", {"a": 2.0})
        sft, phi, t, b = pressure.recode(model, 1)
        assert sft is model.sft and phi is model.interaction
        assert (t, b) == (model.t, model.b)

    def test_periodic_rows_need_power(self):
        model = builtin_model("checkerboard", {"k": 5})
        with pytest.raises(ValueError):
            pressure.recode(model, 1)
        sft, _, t, b = pressure.recode(model, 2)
        assert t.is_constant and b.is_constant
        assert sft.alphabet.name(t.word[0]) == "12"

    def test_bad_rows(self):
        model = builtin_model("checkerboard", {"k": 5})
        # Two equal neighbors are not a checkerboard block.
        rows = model.with_rows(PeriodicRow(word=(0, 0, 1)), PeriodicRow(word=(0, 1, 2)))
        with pytest.raises(ValueError) as e:
            pressure.power_boundary_rows(rows.sft, rows.t, rows.b, 3)
        assert str(e.value).startswith("Row t block (1,1,2)^inf is not a symbol")
        with pytest.raises(ValueError) as e:
            pressure.power_boundary_rows(rows.sft, rows.t, rows.b, 2)
        assert str(e.value) == "Row t has period 3, which does not divide 2."


class TestFitRate:
    def test_synthetic(self):
        diffs = [(n, 0.4 + 3 * math.exp(-0.7 * n)) for n in range(1, 9)]
        fit, note = pressure.fit_rate(diffs)
        assert note is None
        assert fit.R == pytest.approx(0.7, abs=1e-6)
        assert fit.Q == pytest.approx(3.0, abs=1e-6)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-9)
        assert fit.heights == (1, 2, 3, 4, 5, 6, 7)

    def test_equal_diffs(self):
        fit, note = pressure.fit_rate([(n, math.log(2)) for n in range(1, 6)])
        assert fit is None
        assert note == pressure.ZERO_GAP_NOTE

    def test_too_few(self):
        fit, note = pressure.fit_rate([(1, 0.5), (2, 0.4)])
        assert fit is None
        assert note == "rate fit needs at least 3 differences, got 2"

    def test_growing_gaps(self):
        fit, note = pressure.fit_rate([(n, math.exp(0.5 * n)) for n in range(1, 6)])
        assert fit is None
        assert note.startswith("differences do not decay")

    def test_gaps_below_noise_floor_are_dropped(self):
        diffs = []
        for n in range(1, 31):
            value = 0.4 + 3 * math.exp(-0.7 * n)
            if n >= 22:
                value += 1e-7 * (-1) ** n
            if n == 27:
                # A noisy jump above the floor after the run has ended.
                value += 5e-6
            diffs.append((n, value))
        fit, note = pressure.fit_rate(diffs, noise_floor=1e-6)
        assert fit.heights == tuple(range(1, 21))
        assert fit.R == pytest.approx(0.7, abs=1e-6)
        assert fit.Q == pytest.approx(3.0, abs=1e-5)
        assert fit.r_squared > 0.999999
        assert note == (
            "gaps from height 21 on are below the noise floor 1.0e-06 "
            + "and were left out of the rate fit"
        )

    def test_noise_floor_leaves_too_few(self):
        diffs = [(n, 0.4 + 3 * math.exp(-0.7 * n)) for n in range(1, 6)]
        fit, note = pressure.fit_rate(diffs, noise_floor=1.0)
        assert fit is None
        assert note == pressure.ZERO_GAP_NOTE

    def test_noise_floor_from_enclosures(self):
        rows = [
            pressure.PressureRow(1, 2, 0.0, 1.0, 1.0 + 1e-6, 0.1, 0.0, 1.0),
            pressure.PressureRow(2, 3, 0.0, 2.0, 2.0 + 8e-6, 0.1, 0.0, 1.0),
            pressure.PressureRow(3, 5, 0.0, 3.0, 3.0, None, 0.0, 1.0),
        ]
        expected = pressure.NOISE_FLOOR_WIDTHS * math.log1p(4e-6)
        assert pressure.noise_floor(rows, 1) == pytest.approx(expected, rel=1e-9)
        assert pressure.noise_floor(rows, 2) == pytest.approx(expected / 2, rel=1e-9)
        assert pressure.noise_floor(rows[2:], 1) == 0.0


def test_first_stable_height():
    assert pressure.first_stable_height({1: 2, 2: 0, 3: 0}) == 2
    assert pressure.first_stable_height({1: 1, 2: 1}) is None


class TestRunPressure:
    @pytest.mark.parametrize("k", [2, 3])
    def test_full_shift(self, k):
        run = pressure.run_pressure(config("full_shift", {"k": k}, n_min=1, n_max=4))
        assert len(run.diffs) == 3
        for _, diff in run.diffs:
            assert diff == pytest.approx(math.log(k), abs=1e-12)
        assert run.estimate == pytest.approx(math.log(k), abs=1e-12)
        assert run.rate_fit is None
        assert pressure.ZERO_GAP_NOTE in run.notes
        assert run.p == 1
        assert not run.forced

    def test_hard_square(self):
        run = pressure.run_pressure(config("hard_square", n_min=1, n_max=4))
        assert [row.n for row in run.rows] == [1, 2, 3, 4]
        assert [row.columns for row in run.rows] == [2, 3, 5, 8]
        assert run.rows[0].log_lambda == pytest.approx(math.log((1 + math.sqrt(5)) / 2), abs=1e-11)
        assert run.rows[1].log_lambda == pytest.approx(math.log(1 + math.sqrt(2)), abs=1e-11)
        assert run.rows[0].diff == pytest.approx(0.400162, abs=1e-6)
        assert run.rows[-1].diff is None
        assert run.estimate == run.rows[-2].diff
        assert run.error_bar == pytest.approx(2 * abs(run.rows[-2].diff - run.rows[-3].diff))
        assert pressure.HEURISTIC_NOTE in run.notes
        assert run.first_stable_height == 1
        for row in run.rows:
            assert row.lambda_lo <= row.lambda_hi
            assert row.identity_residual < 1e-9

    def test_hard_core_half(self):
        run = pressure.run_pressure(config("hard_core", {"a": 0.5}, n_min=1, n_max=2))
        assert run.rows[0].log_lambda == pytest.approx(0.312349, abs=1e-6)
        assert run.rows[0].log_lambda == pytest.approx(
            math.log((1 + math.sqrt(3)) / 2), abs=1e-11
        )
        assert run.gate.passes

    def test_gate_failure(self):
        with pytest.raises(GateFailedError) as e:
            pressure.run_pressure(config("hard_core", {"a": 1.3}, n_min=1, n_max=2))
        assert str(e.value).startswith("Applicability gate failed for hard_core: q_hat=")
        assert str(e.value).endswith("Use force to run anyway.")

    def test_gate_failure_never_builds_strips(self, mocker):
        spy = mocker.spy(pressure, "_evaluate_height")
        with pytest.raises(GateFailedError):
            pressure.run_pressure(config("hard_core", {"a": 1.3}, n_min=1, n_max=3))
        assert spy.call_count == 0

    def test_force(self):
        run = pressure.run_pressure(
            config("hard_core", {"a": 1.3}, n_min=1, n_max=3, force=True)
        )
        assert run.forced
        assert pressure.NOT_CERTIFIED_NOTE in run.notes
        assert not run.gate.passes

    def test_simulated_bound_is_annotated(self):
        run = pressure.run_pressure(
            config("hard_core", {"a": 1.3}, n_min=1, n_max=2, p_c_bound=0.5927)
        )
        assert run.gate.non_rigorous
        assert not run.forced
        assert any("non-rigorous" in note for note in run.notes)

    @pytest.mark.parametrize(
        "name, params, n_max", [("hard_core", {"a": 0.7}, 6), ("ising", {"beta": 0.02}, 4)]
    )
    def test_power_recoding_agrees(self, name, params, n_max):
        direct = pressure.run_pressure(config(name, params, n_min=1, n_max=n_max))
        recoded = pressure.run_pressure(config(name, params, n_min=1, n_max=n_max, power=2))
        assert recoded.p == 2
        for plain, blocked in zip(direct.rows, recoded.rows):
            assert blocked.log_lambda / 2 == pytest.approx(plain.log_lambda, abs=1e-11)
        for (_, plain), (_, blocked) in zip(direct.diffs, recoded.diffs):
            assert blocked == pytest.approx(plain, abs=1e-11)

    def test_workers(self):
        serial = pressure.run_pressure(config("hard_core", {"a": 1.1}, n_min=1, n_max=5))
        parallel = pressure.run_pressure(
            config("hard_core", {"a": 1.1}, n_min=1, n_max=5, workers=2)
        )
        assert [row.log_lambda for row in parallel.rows] == [
            row.log_lambda for row in serial.rows
        ]
        assert parallel.estimate == serial.estimate

    def test_checkpoint_resume(self, tmp_path, mocker):
        path = os.path.join(tmp_path, "run.json")
        first = pressure.run_pressure(
            config("hard_square", n_min=1, n_max=3, checkpoint_path=path)
        )
        with open(path) as f:
            assert sorted(json.load(f)["heights"]) == ["1", "2", "3"]
        spy = mocker.spy(pressure, "_evaluate_height")
        second = pressure.run_pressure(
            config("hard_square", n_min=1, n_max=4, checkpoint_path=path)
        )
        assert spy.call_count == 1
        assert spy.call_args.args[0][4] == 4
        assert [row.log_lambda for row in second.rows[:3]] == [
            row.log_lambda for row in first.rows
        ]

    def test_checkpoint_of_another_run(self, tmp_path, mocker):
        path = os.path.join(tmp_path, "run.json")
        pressure.run_pressure(config("hard_square", n_min=1, n_max=3, checkpoint_path=path))
        spy = mocker.spy(pressure, "_evaluate_height")
        pressure.run_pressure(
            config("hard_square", n_min=1, n_max=3, checkpoint_path=path, rel_tol=1e-10)
        )
        assert spy.call_count == 3


class TestRunEntropy:
    def test_ignores_interaction(self):
        run = pressure.run_entropy(config("hard_core", {"a": 3.0}, n_min=1, n_max=4))
        plain = pressure.run_pressure(config("hard_square", n_min=1, n_max=4))
        assert run.label == "topological entropy"
        assert run.estimate == pytest.approx(plain.estimate, abs=1e-12)
        assert run.gate.zero_interaction

    def test_full_shift(self):
        run = pressure.run_entropy(config("full_shift", {"k": 2}, n_min=1, n_max=3))
        assert run.estimate == pytest.approx(math.log(2), abs=1e-12)

    def test_ising_has_no_ising_gate(self):
        run = pressure.run_entropy(config("ising", {"beta": 0.5}, n_min=1, n_max=2))
        assert run.gate.ising_condition is None
        assert run.estimate == pytest.approx(math.log(2), abs=1e-12)

    def test_checkerboard_with_period_two(self):
        run = pressure.run_entropy(config("checkerboard", {"k": 5}, n_min=1, n_max=2, force=True))
        assert run.p == 2
        assert run.rows[0].diff > 0


class TestCsv:
    def test_round_trip(self, tmp_path):
        path = os.path.join(tmp_path, "run.csv")
        run = pressure.run_pressure(
            config("hard_core", {"a": 0.9}, n_min=1, n_max=5, out_path=path)
        )
        assert pressure.read_csv(path) == run

    def test_round_trip_without_fit(self, tmp_path):
        path = os.path.join(tmp_path, "run.csv")
        run = pressure.run_pressure(config("hard_square", n_min=2, n_max=3))
        pressure.write_csv(run, path)
        loaded = pressure.read_csv(path)
        assert loaded == run
        assert loaded.rate_fit is None
        assert loaded.error_bar is None

    def test_layout(self, tmp_path):
        path = os.path.join(tmp_path, "run.csv")
        run = pressure.run_pressure(config("hard_square", n_min=1, n_max=3))
        pressure.write_csv(run, path)
        with open(path) as f:
            lines = f.read().splitlines()
        assert lines[0] == '# label="pressure"'
        assert lines[1] == "# p=1"
        assert "# gate.q_hat=0.5" in lines
        body = [line for line in lines if not line.startswith("#")]
        assert body[0] == ",".join(pressure.CSV_COLUMNS)
        assert len(body) == 4
        last = body[-1].split(",")
        assert last[0] == "3"
        assert last[pressure.CSV_COLUMNS.index("diff")] == ""

    def test_render(self):
        run = pressure.run_pressure(config("hard_square", n_min=1, n_max=4))
        text = pressure.render_run(run)
        assert text.startswith("pressure estimate = ")
        assert "(heuristic)" in text
        assert ",".join(pressure.CSV_COLUMNS) in text.splitlines()


@pytest.mark.slow
class TestAcceptance:
    def test_hard_square_entropy(self):
        run = pressure.run_entropy(config("hard_square", n_min=1, n_max=16))
        assert run.estimate == pytest.approx(HARD_SQUARE_ENTROPY, abs=1e-5)
        assert run.error_bar < 1e-5

    def test_hard_square_diffs_increase(self):
        run = pressure.run_pressure(config("hard_square", n_min=1, n_max=13))
        # The hard-square transfer matrix is a symmetric 0/1 matrix.
        dense = [
            math.log(
                np.linalg.eigvalsh(
                    build_column_system(hard_square_sft(), n, ZERO, ZERO).adjacency().toarray()
                ).max()
            )
            for n in range(1, 14)
        ]
        oracle = np.diff(dense)
        assert np.all(np.diff(oracle) > 0)
        values = np.array([diff for _, diff in run.diffs])
        np.testing.assert_allclose(values, oracle, rtol=0, atol=3e-12)
        assert np.all(np.diff(values)[:10] > 0)

    @pytest.mark.parametrize("name, params", [("hard_square", {}), ("hard_core", {"a": 0.5})])
    def test_exponential_rate(self, name, params):
        run = pressure.run_pressure(config(name, params, n_min=3, n_max=15))
        assert [n for n, _ in run.diffs] == list(range(3, 15))
        fit = run.rate_fit
        assert fit is not None
        assert fit.heights[0] == 3
        assert len(fit.heights) >= 5
        assert fit.R > 0.2
        assert fit.r_squared > 0.98
        refit, _ = pressure.fit_rate(run.diffs, noise_floor=pressure.noise_floor(run.rows, run.p))
        assert refit == fit

    def test_checkerboard_diffs_are_cauchy(self):
        run = pressure.run_entropy(config("checkerboard", {"k": 5}, n_min=1, n_max=3, force=True))
        (_, first), (_, second) = run.diffs
        assert first > 0 and second > 0
        assert abs(second - first) < first
