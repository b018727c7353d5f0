"""Test the interactions and the built-in models.
Run this test with command: pytest strip_pressure/tests/core/test_interactions.py
"""
import math

import numpy as np
import pytest

import strip_pressure.core.interactions as interactions
from strip_pressure.core.lattice import (
    Configuration,
    PeriodicRow,
    build_column_system,
    higher_power_sft,
    power_blocks,
)

ZERO = PeriodicRow.constant(0)


def random_interaction(rng, size):
    return interactions.NnInteraction(
        vertex=rng.normal(size=size),
        hedge=rng.normal(size=(size, size)),
        vedge=rng.normal(size=(size, size)),
    )


class TestNnInteraction:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError) as e:
            interactions.NnInteraction(
                vertex=np.zeros(2), hedge=np.zeros((3, 3)), vedge=np.zeros((2, 2))
            )
        assert str(e.value) == (
            "Interaction tables disagree on the alphabet size: vertex (2,), "
            + "hedge (3, 3), vedge (2, 2)."
        )

    def test_not_finite(self):
        with pytest.raises(ValueError) as e:
            interactions.NnInteraction(
                vertex=np.array([0.0, math.inf]), hedge=np.zeros((2, 2)), vedge=np.zeros((2, 2))
            )
        assert str(e.value) == "Interaction values must be finite (vertex)."

    def test_from_maps_and_add(self):
        first = interactions.NnInteraction.from_maps(2, vertex={1: 0.5}, hedge={(0, 1): 1.0})
        second = interactions.NnInteraction.from_maps(2, vedge={(1, 0): -2.0})
        total = first + second
        np.testing.assert_array_equal(total.vertex, [0.0, 0.5])
        np.testing.assert_array_equal(total.hedge, [[0.0, 1.0], [0.0, 0.0]])
        np.testing.assert_array_equal(total.vedge, [[0.0, 0.0], [-2.0, 0.0]])
        assert not total.is_zero
        assert interactions.NnInteraction.zero(3).is_zero

    def test_tables_are_read_only(self):
        phi = interactions.NnInteraction.zero(2)
        with pytest.raises(ValueError):
            phi.vertex[0] = 1.0


class TestPhiHat:
    @pytest.mark.parametrize("beta, h", [(0.3, 0.0), (0.1, 0.7), (1.0, -1.5)])
    def test_ising(self, beta, h):
        _, phi = interactions.model_ising(beta, h)
        # x(0,0) = +1, x(0,1) = +1, x(1,0) = -1 with +1 at index 0.
        x = Configuration(values={(0, 0): 0, (0, 1): 0, (1, 0): 1})
        assert interactions.phi_hat(phi, x) == pytest.approx(-beta * h, abs=1e-15)

    def test_zero_and_hard_core(self):
        _, phi = interactions.model_hard_core(2.0)
        zeros = Configuration(values={(0, 0): 0, (0, 1): 0, (1, 0): 0})
        assert interactions.phi_hat(phi, zeros) == 0.0
        assert interactions.phi_hat(interactions.NnInteraction.zero(2), zeros) == 0.0

    def test_missing_site(self):
        _, phi = interactions.model_hard_core(2.0)
        x = Configuration(values={(0, 0): 0, (1, 0): 0})
        with pytest.raises(ValueError) as e:
            interactions.phi_hat(phi, x)
        assert str(e.value) == "Configuration is missing site (0, 1) of Delta."


class TestStripInteraction:
    def test_zero_interaction(self):
        sft = interactions.hard_square_sft()
        cs = build_column_system(sft, 4, ZERO, ZERO)
        strip = interactions.strip_interaction(interactions.NnInteraction.zero(2), cs)
        assert not strip.weights.any()

    @pytest.mark.parametrize("a", [0.5, 2.0, math.e])
    def test_hard_core_height_one(self, a):
        sft, phi = interactions.model_hard_core(a)
        strip = interactions.strip_interaction(phi, build_column_system(sft, 1, ZERO, ZERO))
        assert strip.as_dict() == pytest.approx({(0, 0): 0.0, (0, 1): 0.0, (1, 0): -math.log(a)})
        assert strip.weight(1, 0) == pytest.approx(-math.log(a))
        with pytest.raises(KeyError):
            strip.weight(1, 1)

    @pytest.mark.parametrize("beta, h", [(0.2, 0.0), (0.5, 0.3)])
    def test_ising_height_one(self, beta, h):
        sft, phi = interactions.model_ising(beta, h)
        strip = interactions.strip_interaction(phi, build_column_system(sft, 1, ZERO, ZERO))
        # Column +1 next to column -1 between rows of +1.
        assert strip.weight(0, 1) == pytest.approx(-beta * h + 2 * beta - beta)

    def test_linear_in_interaction(self):
        rng = np.random.default_rng(11)
        sft = interactions.full_shift_sft(3)
        cs = build_column_system(sft, 3, ZERO, PeriodicRow.constant(2))
        first, second = random_interaction(rng, 3), random_interaction(rng, 3)
        total = interactions.strip_interaction(first + second, cs).weights
        parts = (
            interactions.strip_interaction(first, cs).weights
            + interactions.strip_interaction(second, cs).weights
        )
        np.testing.assert_allclose(total, parts, rtol=0, atol=1e-12)

    def test_weights_match_direct_sum(self):
        rng = np.random.default_rng(5)
        sft = interactions.full_shift_sft(2)
        t, b = PeriodicRow.constant(1), ZERO
        cs = build_column_system(sft, 3, t, b)
        phi = random_interaction(rng, 2)
        strip = interactions.strip_interaction(phi, cs)
        columns = cs.column_tuples()
        for (c, d), weight in strip.as_dict().items():
            left, right = columns[c], columns[d]
            expected = sum(phi.vertex[s] for s in left)
            expected += phi.vedge[0, left[0]] + phi.vedge[left[-1], 1]
            expected += sum(phi.vedge[left[i], left[i + 1]] for i in range(2))
            expected += sum(phi.hedge[left[i], right[i]] for i in range(3))
            assert weight == pytest.approx(expected, abs=1e-12)

    def test_shifted(self):
        sft, phi = interactions.model_hard_core(2.0)
        strip = interactions.strip_interaction(phi, build_column_system(sft, 2, ZERO, ZERO))
        np.testing.assert_allclose(strip.shifted(0.75).weights, strip.weights + 0.75)


class TestPowerInteraction:
    def test_power_one_is_identity(self):
        rng = np.random.default_rng(3)
        sft = interactions.full_shift_sft(2)
        phi = random_interaction(rng, 2)
        power = interactions.power_interaction(phi, sft, 1)
        np.testing.assert_allclose(power.vertex, phi.vertex)
        np.testing.assert_allclose(power.hedge, phi.hedge)
        np.testing.assert_allclose(power.vedge, phi.vedge)

    def test_zero_stays_zero(self):
        sft = interactions.hard_square_sft()
        power = interactions.power_interaction(interactions.NnInteraction.zero(2), sft, 3)
        assert power.is_zero
        assert power.size == len(power_blocks(sft, 3))

    def test_hard_core_block_vertex(self):
        sft, phi = interactions.model_hard_core(3.0)
        power = interactions.power_interaction(phi, sft, 2)
        block = power_blocks(sft, 2).index((0, 1))
        assert power.vertex[block] == pytest.approx(-math.log(3.0))

    def test_block_terms(self):
        rng = np.random.default_rng(17)
        sft = interactions.full_shift_sft(2)
        phi = random_interaction(rng, 2)
        power = interactions.power_interaction(phi, sft, 2)
        blocks = power_blocks(sft, 2)
        left, right = blocks.index((0, 1)), blocks.index((1, 1))
        assert power.hedge[left, right] == pytest.approx(phi.hedge[0, 1] + phi.hedge[1, 1])
        assert power.vedge[left, right] == pytest.approx(phi.vedge[0, 1] + phi.vedge[1, 1])
        assert higher_power_sft(sft, 2).size == power.size

    def test_bad_power(self):
        with pytest.raises(ValueError):
            interactions.power_interaction(
                interactions.NnInteraction.zero(2), interactions.hard_square_sft(), 0
            )


class TestModels:
    @pytest.mark.parametrize(
        "a, raw, expected",
        [
            (1.0, False, 0.0),
            (math.e, False, -1.0),
            (2.0, True, 2.0),
            (0.0, False, ValueError("Hard-core activity must be positive, got 0.0.")),
            (-1.0, False, ValueError("Hard-core activity must be positive, got -1.0.")),
        ],
    )
    def test_model_hard_core(self, a, raw, expected):
        if isinstance(expected, ValueError):
            with pytest.raises(ValueError) as e:
                interactions.model_hard_core(a, raw_activity=raw)
            assert str(e.value) == expected.args[0]
        else:
            _, phi = interactions.model_hard_core(a, raw_activity=raw)
            assert phi.vertex[0] == 0.0
            assert phi.vertex[1] == pytest.approx(expected)
            assert not phi.hedge.any() and not phi.vedge.any()

    def test_model_ising(self):
        sft, phi = interactions.model_ising(1.0, 0.0)
        assert sft.alphabet.names == ("+1", "-1")
        assert phi.hedge[0, 0] == 1.0
        assert phi.vedge[0, 1] == -1.0
        _, zero = interactions.model_ising(0.0, 0.3)
        assert zero.is_zero
        with pytest.raises(ValueError) as e:
            interactions.model_ising(-0.1, 0.0)
        assert str(e.value) == "Ising beta must be nonnegative, got -0.1."

    @pytest.mark.parametrize(
        "k, expected",
        [
            (2, 2),
            (3, 6),
            (12, 132),
            (1, ValueError("A checkerboard needs k >= 2, got 1.")),
        ],
    )
    def test_model_checkerboard(self, k, expected):
        if isinstance(expected, ValueError):
            with pytest.raises(ValueError) as e:
                interactions.model_checkerboard(k)
            assert str(e.value) == expected.args[0]
        else:
            sft, phi = interactions.model_checkerboard(k)
            assert len(sft.e1) == expected
            assert sft.e1 == sft.e2
            assert phi.is_zero

    @pytest.mark.parametrize(
        "name, params, t_word, size",
        [
            ("hard_core", {"a": "2.0"}, (0,), 2),
            ("hard_square", {}, (0,), 2),
            ("ising", {"beta": "0.02", "h": "0"}, (0,), 2),
            ("checkerboard", {"k": "12"}, (0, 1), 12),
            ("full_shift", {"k": "3"}, (0,), 3),
        ],
    )
    def test_builtin_model(self, name, params, t_word, size):
        model = interactions.builtin_model(name, params)
        assert model.name == name
        assert model.t.word == t_word
        assert model.b.word == t_word
        assert model.sft.size == size

    def test_builtin_unknown(self):
        with pytest.raises(ValueError) as e:
            interactions.builtin_model("potts", {})
        assert str(e.value) == (
            "Unknown built-in model: potts. Only support "
            + "['hard_core', 'hard_square', 'ising', 'checkerboard', 'full_shift']."
        )

    def test_model_with_rows_and_interaction(self):
        model = interactions.builtin_model("hard_core", {"a": 2.0})
        rows = model.with_rows(PeriodicRow(word=(0, 1)), ZERO)
        assert rows.t.period == 2
        assert rows.params == {"a": 2.0, "raw_activity": False}
        zero = model.with_interaction(interactions.NnInteraction.zero(2))
        assert zero.interaction.is_zero
        with pytest.raises(ValueError):
            model.with_interaction(interactions.NnInteraction.zero(3))
