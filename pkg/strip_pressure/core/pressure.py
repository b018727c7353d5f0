"""The strip-difference pressure pipeline: gate, sweep over heights, differences,
rate fit, checkpoints and CSV output.
"""
import csv
import dataclasses
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

import strip_pressure.core.utils as utils
from strip_pressure.core.errors import GateFailedError
from strip_pressure.core.gibbs import ApplicabilityReport, applicability
from strip_pressure.core.interactions import Model, NnInteraction, power_interaction
from strip_pressure.core.lattice import (
    NnSft,
    PeriodicRow,
    build_column_system,
    higher_power_sft,
    power_blocks,
)
from strip_pressure.core.transfer import strip_report

CSV_COLUMNS = (
    "n",
    "columns",
    "log_lambda",
    "lambda_lo",
    "lambda_hi",
    "diff",
    "identity_residual",
    "wall_ms",
)
ZERO_GAP_NOTE = "converged below floating-point resolution"
GAP_RESOLUTION_ULPS = 64
NOISE_FLOOR_WIDTHS = 4.0
HEURISTIC_NOTE = "error bar is heuristic (2 x last difference gap), not certified"
NOT_CERTIFIED_NOTE = "hypotheses not certified: applicability gate failed, run forced"


@dataclass(frozen=True, eq=False)
class RunConfig:
    model: Model
    n_min: int
    n_max: int
    rel_tol: float = utils.DEFAULT_REL_TOL
    p_c_bound: float = utils.DEFAULT_PC_BOUND
    force: bool = False
    power: Optional[int] = None
    max_columns: Optional[int] = None
    checkpoint_path: Optional[str] = None
    out_path: Optional[str] = None
    workers: int = 1
    label: str = "pressure"

    def __post_init__(self) -> None:
        if self.n_min < 1:
            raise ValueError(f"n_min must be at least 1, got {self.n_min}.")
        if self.n_max < self.n_min + 1:
            raise ValueError(
                f"n_max must exceed n_min to give a difference, got {self.n_min}..{self.n_max}."
            )
        if self.rel_tol <= 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}.")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}.")
        if self.power is not None and (
            self.power < 1 or self.power % self.period != 0
        ):
            raise ValueError(
                f"Power {self.power} must be a positive multiple of the row period {self.period}."
            )

    @property
    def period(self) -> int:
        """Common period of the boundary rows."""
        return utils.lcm_all([self.model.t.period, self.model.b.period])

    @property
    def p(self) -> int:
        return self.power if self.power is not None else self.period


@dataclass(frozen=True)
class PressureRow:
    n: int
    columns: int
    log_lambda: float
    lambda_lo: float
    lambda_hi: float
    diff: Optional[float]
    identity_residual: float
    wall_ms: float


@dataclass(frozen=True)
class RateFit:
    """|d_n - limit| ~ Q exp(-R n), fitted on successive gaps."""

    Q: float
    R: float
    r_squared: float
    heights: Tuple[int, ...]


@dataclass(frozen=True)
class PressureRun:
    rows: Tuple[PressureRow, ...]
    estimate: float
    error_bar: Optional[float]
    rate_fit: Optional[RateFit]
    gate: ApplicabilityReport
    p: int
    label: str = "pressure"
    forced: bool = False
    first_stable_height: Optional[int] = None
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def diffs(self) -> List[Tuple[int, float]]:
        return [(row.n, row.diff) for row in self.rows if row.diff is not None]


@dataclass(frozen=True)
class _HeightResult:
    n: int
    columns: int
    log_lambda: float
    lambda_lo: float
    lambda_hi: float
    identity_residual: float
    wall_ms: float
    removed: int


def power_boundary_rows(
    sft: NnSft, t: PeriodicRow, b: PeriodicRow, p: int
) -> Tuple[PeriodicRow, PeriodicRow]:
    """Recode rows whose periods divide p as constant rows of the p-block shift.

    Args:
        sft (NnSft): The original shift.
        t (PeriodicRow): The row above the strip.
        b (PeriodicRow): The row below the strip.
        p (int): The block length.

    Returns:
        Tuple[PeriodicRow, PeriodicRow]: t^[p] and b^[p] over higher_power_sft(sft, p).
    """
    blocks = {block: idx for idx, block in enumerate(power_blocks(sft, p))}
    recoded = []
    for label, row in (("t", t), ("b", b)):
        if p % row.period != 0:
            raise ValueError(f"Row {label} has period {row.period}, which does not divide {p}.")
        block = tuple(row.at(i) for i in range(p))
        if block not in blocks:
            raise ValueError(
                f"Row {label} block {row.describe(sft.alphabet)} is not a symbol of the "
                + f"{p}-block shift."
            )
        recoded.append(PeriodicRow.constant(blocks[block]))
    return recoded[0], recoded[1]


def recode(model: Model, p: int) -> Tuple[NnSft, NnInteraction, PeriodicRow, PeriodicRow]:
    """The model over p-blocks with constant boundary rows; p = 1 keeps it as is."""
    if p == 1:
        if not (model.t.is_constant and model.b.is_constant):
            raise ValueError("Rows with period above 1 need a power recoding.")
        return model.sft, model.interaction, model.t, model.b
    t_p, b_p = power_boundary_rows(model.sft, model.t, model.b, p)
    return (
        higher_power_sft(model.sft, p),
        power_interaction(model.interaction, model.sft, p),
        t_p,
        b_p,
    )


def _evaluate_height(task: Tuple[Any, ...]) -> _HeightResult:
    sft, phi, t, b, n, rel_tol, max_columns = task
    start = time.perf_counter()
    cs = build_column_system(sft, n, t, b, max_columns=max_columns)
    chain = strip_report(phi, cs, rel_tol=rel_tol)
    pd = chain.perron
    return _HeightResult(
        n=n,
        columns=cs.size,
        log_lambda=pd.log_lambda,
        lambda_lo=pd.lambda_lo,
        lambda_hi=pd.lambda_hi,
        identity_residual=chain.identity_residual,
        wall_ms=(time.perf_counter() - start) * 1000.0,
        removed=cs.size - chain.cs.size,
    )


def fit_rate(
    diffs: Sequence[Tuple[int, float]], noise_floor: float = 0.0
) -> Tuple[Optional[RateFit], Optional[str]]:
    """Least-squares fit of log|d_{n+1} - d_n| against n.

    R is minus the slope. Q is the tail constant exp(intercept) / (1 - exp(-R)),
    so that |d_n - limit| ~ Q exp(-R n). Only the leading run of gaps above the
    noise floor enters the fit; the first gap at or below it ends the run.

    Args:
        diffs (Sequence[Tuple[int, float]]): (n, d_n) for consecutive n.
        noise_floor (float): Gaps at or below this carry no rate information.

    Returns:
        Tuple[Optional[RateFit], Optional[str]]: The fit, or None, with a note.
    """
    if len(diffs) < 3:
        return None, f"rate fit needs at least 3 differences, got {len(diffs)}"
    ordered = sorted(diffs)
    heights = np.array([n for n, _ in ordered[:-1]], dtype=float)
    values = np.array([d for _, d in ordered], dtype=float)
    gaps = np.abs(np.diff(values))
    scale = max(1.0, float(np.abs(values).max()))
    resolution = GAP_RESOLUTION_ULPS * np.finfo(float).eps * scale
    floor = max(resolution, noise_floor)
    below = np.nonzero(gaps <= floor)[0]
    kept = int(below[0]) if below.shape[0] else gaps.shape[0]
    if kept < 2:
        return None, ZERO_GAP_NOTE
    note = None
    if kept < gaps.shape[0]:
        note = (
            f"gaps from height {int(heights[kept])} on are below the noise floor "
            + f"{floor:.1e} and were left out of the rate fit"
        )
    heights, gaps = heights[:kept], gaps[:kept]
    log_gaps = np.log(gaps)
    slope, intercept = np.polyfit(heights, log_gaps, 1)
    predicted = slope * heights + intercept
    ss_res = float(((log_gaps - predicted) ** 2).sum())
    ss_tot = float(((log_gaps - log_gaps.mean()) ** 2).sum())
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    rate = -float(slope)
    if rate <= 0:
        return None, f"differences do not decay (fitted rate {rate:.3e})"
    return (
        RateFit(
            Q=math.exp(float(intercept)) / (1.0 - math.exp(-rate)),
            R=rate,
            r_squared=r_squared,
            heights=tuple(int(n) for n in heights),
        ),
        note,
    )


def noise_floor(rows: Sequence[PressureRow], p: int) -> float:
    """Bound on the error of a difference gap from the eigenvalue enclosures.

    A gap combines three log lambdas, each known to its enclosure width, so
    NOISE_FLOOR_WIDTHS times the widest log-enclosure (divided by p) covers it.
    """
    widths = [math.log(row.lambda_hi / row.lambda_lo) for row in rows]
    return NOISE_FLOOR_WIDTHS * max(widths, default=0.0) / p


def first_stable_height(removed_by_height: Dict[int, int]) -> Optional[int]:
    """Smallest height whose strip lost no column to trimming."""
    stable = [n for n, removed in sorted(removed_by_height.items()) if removed == 0]
    return stable[0] if stable else None


def check_model(
    model: Model, p_c_bound: float = utils.DEFAULT_PC_BOUND
) -> ApplicabilityReport:
    ising_params = None
    if model.name == "ising" and "beta" in model.params:
        ising_params = (float(model.params["beta"]), float(model.params["h"]))
    return applicability(model.interaction, model.sft, p_c_bound, ising_params=ising_params)


def _run_fingerprint(cfg: RunConfig, p: int) -> str:
    model = cfg.model
    return utils.fingerprint(
        {
            "alphabet": list(model.alphabet.names),
            "e1": sorted(model.sft.e1),
            "e2": sorted(model.sft.e2),
            "vertex": model.interaction.vertex.tolist(),
            "hedge": model.interaction.hedge.tolist(),
            "vedge": model.interaction.vedge.tolist(),
            "t": list(model.t.word),
            "b": list(model.b.word),
            "rel_tol": cfg.rel_tol,
            "p": p,
        }
    )


def load_checkpoint(path: str, key: str) -> Dict[int, _HeightResult]:
    logger = utils.Logger("load_checkpoint")
    if not os.path.exists(path):
        return {}
    with open(path) as f:
        content = json.load(f)
    if content.get("fingerprint") != key:
        logger.warning(f"Checkpoint {path} belongs to another run; starting fresh.")
        return {}
    return {
        int(n): _HeightResult(**record) for n, record in content.get("heights", {}).items()
    }


def save_checkpoint(path: str, key: str, results: Dict[int, _HeightResult]) -> None:
    content = {
        "fingerprint": key,
        "heights": {str(n): dataclasses.asdict(results[n]) for n in sorted(results)},
    }
    utils.atomic_write_text(path, json.dumps(content, indent=2, sort_keys=True))


def run_pressure(cfg: RunConfig) -> PressureRun:
    """Sweep strip heights and form (log lambda_{n+1} - log lambda_n) / p.

    Args:
        cfg (RunConfig): The run configuration.

    Returns:
        PressureRun: Per-height rows, the estimate and the diagnostics.

    Raises:
        GateFailedError: If the applicability gate fails and force is not set.
    """
    logger = utils.Logger("run_pressure")
    gate = check_model(cfg.model, cfg.p_c_bound)
    notes: List[str] = list(gate.notes)
    if not gate.passes:
        if not cfg.force:
            raise GateFailedError(
                f"Applicability gate failed for {cfg.model.name}: q_hat={gate.q_hat!r} is not "
                + f"below p_c bound {cfg.p_c_bound!r}. Use force to run anyway."
            )
        logger.warning(NOT_CERTIFIED_NOTE)
        notes.append(NOT_CERTIFIED_NOTE)
    p = cfg.p
    sft, phi, t, b = recode(cfg.model, p)
    key = _run_fingerprint(cfg, p)
    results = load_checkpoint(cfg.checkpoint_path, key) if cfg.checkpoint_path else {}
    pending = [n for n in range(cfg.n_min, cfg.n_max + 1) if n not in results]
    if results:
        logger.info(f"Resuming from checkpoint with heights {sorted(results)}.")
    tasks = [(sft, phi, t, b, n, cfg.rel_tol, cfg.max_columns) for n in pending]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as executor:
            for result in executor.map(_evaluate_height, tasks):
                _record(cfg, key, results, result, logger)
    else:
        for task in tasks:
            _record(cfg, key, results, _evaluate_height(task), logger)

    heights = list(range(cfg.n_min, cfg.n_max + 1))
    rows = []
    for n in heights:
        result = results[n]
        diff = (
            (results[n + 1].log_lambda - result.log_lambda) / p if n < cfg.n_max else None
        )
        rows.append(
            PressureRow(
                n=n,
                columns=result.columns,
                log_lambda=result.log_lambda,
                lambda_lo=result.lambda_lo,
                lambda_hi=result.lambda_hi,
                diff=diff,
                identity_residual=result.identity_residual,
                wall_ms=result.wall_ms,
            )
        )
    diffs = [(row.n, row.diff) for row in rows if row.diff is not None]
    estimate = diffs[-1][1]
    floor = noise_floor(rows, p)
    error_bar = None
    if len(diffs) >= 2:
        error_bar = max(2.0 * abs(diffs[-1][1] - diffs[-2][1]), floor)
        notes.append(HEURISTIC_NOTE)
    rate_fit, fit_note = fit_rate(diffs, noise_floor=floor)
    if fit_note:
        notes.append(fit_note)
    run = PressureRun(
        rows=tuple(rows),
        estimate=estimate,
        error_bar=error_bar,
        rate_fit=rate_fit,
        gate=gate,
        p=p,
        label=cfg.label,
        forced=not gate.passes,
        first_stable_height=first_stable_height(
            {n: results[n].removed for n in heights}
        ),
        notes=tuple(notes),
    )
    if cfg.out_path:
        write_csv(run, cfg.out_path)
        logger.info(f"Wrote {cfg.out_path}.")
    return run


def _record(
    cfg: RunConfig,
    key: str,
    results: Dict[int, _HeightResult],
    result: _HeightResult,
    logger: utils.Logger,
) -> None:
    results[result.n] = result
    logger.info(
        f"n={result.n}: {result.columns} columns, log lambda {result.log_lambda!r}, "
        + f"{result.wall_ms:.1f} ms."
    )
    if cfg.checkpoint_path:
        save_checkpoint(cfg.checkpoint_path, key, results)


def run_entropy(cfg: RunConfig) -> PressureRun:
    """run_pressure with the zero interaction; the estimate is the topological entropy."""
    model = dataclasses.replace(
        cfg.model, interaction=NnInteraction.zero(cfg.model.sft.size), params={}
    )
    return run_pressure(
        dataclasses.replace(cfg, model=model, label="topological entropy")
    )


def _header_lines(run: PressureRun) -> List[str]:
    gate = dataclasses.asdict(run.gate)
    gate["notes"] = list(run.gate.notes)
    fit = dataclasses.asdict(run.rate_fit) if run.rate_fit else None
    fields: List[Tuple[str, Any]] = [
        ("label", run.label),
        ("p", run.p),
        ("estimate", run.estimate),
        ("error_bar", run.error_bar),
        ("rate_fit", fit),
        ("forced", run.forced),
        ("first_stable_height", run.first_stable_height),
        ("notes", list(run.notes)),
    ]
    fields.extend((f"gate.{name}", value) for name, value in gate.items())
    return [f"# {name}={json.dumps(value)}" for name, value in fields]


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    return repr(value)


def write_csv(run: PressureRun, path: str) -> None:
    """Write the run as `#` header lines followed by one CSV row per height."""
    buffer = io.StringIO()
    for line in _header_lines(run):
        buffer.write(line + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in run.rows:
        writer.writerow([_format_cell(getattr(row, name)) for name in CSV_COLUMNS])
    utils.atomic_write_text(path, buffer.getvalue())


def read_csv(path: str) -> PressureRun:
    header: Dict[str, Any] = {}
    body: List[str] = []
    with open(path) as f:
        for line in f:
            if line.startswith("# "):
                name, value = line[2:].rstrip("\n").split("=", 1)
                header[name] = json.loads(value)
            else:
                body.append(line)
    rows = []
    for record in csv.DictReader(body):
        rows.append(
            PressureRow(
                n=int(record["n"]),
                columns=int(record["columns"]),
                log_lambda=float(record["log_lambda"]),
                lambda_lo=float(record["lambda_lo"]),
                lambda_hi=float(record["lambda_hi"]),
                diff=float(record["diff"]) if record["diff"] else None,
                identity_residual=float(record["identity_residual"]),
                wall_ms=float(record["wall_ms"]),
            )
        )
    gate_fields = {
        name[len("gate.") :]: value for name, value in header.items() if name.startswith("gate.")
    }
    gate_fields["notes"] = tuple(gate_fields.get("notes", ()))
    fit = header.get("rate_fit")
    return PressureRun(
        rows=tuple(rows),
        estimate=header["estimate"],
        error_bar=header["error_bar"],
        rate_fit=RateFit(
            Q=fit["Q"], R=fit["R"], r_squared=fit["r_squared"], heights=tuple(fit["heights"])
        )
        if fit
        else None,
        gate=ApplicabilityReport(**gate_fields),
        p=header["p"],
        label=header["label"],
        forced=header["forced"],
        first_stable_height=header["first_stable_height"],
        notes=tuple(header["notes"]),
    )


def render_run(run: PressureRun) -> str:
    lines = [
        f"{run.label} estimate = {utils.format_number(run.estimate)}"
        + (
            f" +/- {utils.format_number(run.error_bar)} (heuristic)"
            if run.error_bar is not None
            else ""
        ),
        f"p = {run.p}",
    ]
    if run.rate_fit:
        lines.append(
            f"rate fit: Q = {utils.format_number(run.rate_fit.Q)}, "
            + f"R = {utils.format_number(run.rate_fit.R)}, "
            + f"r^2 = {utils.format_number(run.rate_fit.r_squared)}"
        )
    if run.first_stable_height is not None:
        lines.append(
            f"first height with nothing trimmed: {run.first_stable_height} "
            + "(weak proxy for the filling distance)"
        )
    lines.append(",".join(CSV_COLUMNS))
    for row in run.rows:
        lines.append(
            ",".join(
                "" if getattr(row, name) is None else utils.format_number(getattr(row, name))
                for name in CSV_COLUMNS
            )
        )
    lines.extend(f"note: {note}" for note in run.notes)
    return "\n".join(lines)
