"""Single-site Gibbs laws, the influence coefficient q_hat and the applicability gates.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

import strip_pressure.core.utils as utils
from strip_pressure.core.errors import UnfillableBoundaryError
from strip_pressure.core.interactions import NnInteraction
from strip_pressure.core.lattice import NnSft, find_safe_symbols

# Gate values this close to their threshold get a warning note.
GATE_WARNING_BAND = 1e-9


@dataclass(frozen=True)
class SiteBoundary:
    up: int
    down: int
    left: int
    right: int

    def check(self, sft: NnSft) -> None:
        for symbol in (self.up, self.down, self.left, self.right):
            sft.alphabet.check(symbol)


@dataclass(frozen=True, eq=False)
class SiteDistribution:
    probs: np.ndarray

    def __post_init__(self) -> None:
        if self.probs.ndim != 1 or self.probs.shape[0] == 0:
            raise ValueError("A site distribution needs a nonempty probability vector.")
        if np.any(self.probs < 0) or abs(float(self.probs.sum()) - 1.0) > 1e-12:
            raise ValueError(f"Not a probability vector: {self.probs.tolist()}.")
        self.probs.setflags(write=False)

    def __getitem__(self, symbol: int) -> float:
        return float(self.probs[symbol])

    @property
    def support(self) -> List[int]:
        return [int(s) for s in np.nonzero(self.probs > 0)[0]]


@dataclass(frozen=True)
class ApplicabilityReport:
    q_hat: float
    p_c_bound: float
    passes_qhat: bool
    safe_fraction: float
    passes_manysafe: bool
    min_neighbor_fraction: float
    passes_manyadj: bool
    zero_interaction: bool
    constant_boundary_q: Optional[float] = None
    ising_condition: Optional[bool] = None
    non_rigorous: bool = False
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def passes(self) -> bool:
        """True when some gate certifies q < p_c for this model.

        The safe-symbol and neighbor-fraction gates only speak about the zero
        interaction.
        """
        if self.passes_qhat or bool(self.ising_condition):
            return True
        return self.zero_interaction and (self.passes_manysafe or self.passes_manyadj)

    def to_key_values(self) -> Dict[str, str]:
        def text(value: object) -> str:
            if value is None:
                return "n/a"
            if isinstance(value, bool):
                return str(value).lower()
            if isinstance(value, float):
                return utils.format_number(value)
            return str(value)

        return {
            "q_hat": text(self.q_hat),
            "p_c_bound": text(self.p_c_bound),
            "passes_qhat": text(self.passes_qhat),
            "safe_fraction": text(self.safe_fraction),
            "passes_manysafe": text(self.passes_manysafe),
            "min_neighbor_fraction": text(self.min_neighbor_fraction),
            "passes_manyadj": text(self.passes_manyadj),
            "zero_interaction": text(self.zero_interaction),
            "constant_boundary_q": text(self.constant_boundary_q),
            "ising_condition": text(self.ising_condition),
            "non_rigorous": text(self.non_rigorous),
            "passes": text(self.passes),
        }

    def render(self) -> str:
        lines = []
        if self.non_rigorous:
            lines.append(
                "*** NON-RIGOROUS: p_c bound above the proven lower bound "
                + f"{utils.DEFAULT_PC_BOUND} ***"
            )
        lines.append(
            f"q_hat (fillable boundaries) = {utils.format_number(self.q_hat)} "
            + f"{'<' if self.passes_qhat else '>='} p_c bound {utils.format_number(self.p_c_bound)}"
        )
        lines.append(
            f"safe-symbol fraction = {utils.format_number(self.safe_fraction)} "
            + f"(gate > {utils.format_number(manysafe_threshold(self.p_c_bound))}: "
            + f"{'pass' if self.passes_manysafe else 'fail'})"
        )
        lines.append(
            f"min neighbor fraction = {utils.format_number(self.min_neighbor_fraction)} "
            + f"(gate > {utils.format_number(manyadj_threshold(self.p_c_bound))}: "
            + f"{'pass' if self.passes_manyadj else 'fail'})"
        )
        if self.constant_boundary_q is not None:
            lines.append(
                "constant-boundary q = "
                + utils.format_number(self.constant_boundary_q)
            )
        if self.ising_condition is not None:
            lines.append(
                f"Ising sufficient condition: {'pass' if self.ising_condition else 'fail'}"
            )
        lines.append(f"applicability: {'certified' if self.passes else 'NOT certified'}")
        lines.extend(f"note: {note}" for note in self.notes)
        lines.append("")
        lines.extend(f"{key}={value}" for key, value in self.to_key_values().items())
        return "\n".join(lines)


def _fillable_mask(sft: NnSft) -> np.ndarray:
    """mask[x, up, down, left, right]: center x fits the boundary."""
    e1 = sft.e1_matrix
    e2 = sft.e2_matrix
    # x -> up uses e2[x, up]; down -> x uses e2[down, x];
    # left -> x uses e1[left, x]; x -> right uses e1[x, right].
    return (
        e2[:, :, None, None, None]
        & e2.T[:, None, :, None, None]
        & e1.T[:, None, None, :, None]
        & e1[:, None, None, None, :]
    )


def fillable_boundaries(sft: NnSft) -> List[SiteBoundary]:
    """All neighbor configurations that some center symbol fills, in lexicographic
    (up, down, left, right) order."""
    fillable = _fillable_mask(sft).any(axis=0)
    return [
        SiteBoundary(up=int(u), down=int(d), left=int(l), right=int(r))
        for u, d, l, r in zip(*np.nonzero(fillable))
    ]


def _site_energies(phi: NnInteraction, delta: SiteBoundary) -> np.ndarray:
    return (
        phi.vertex
        + phi.hedge[delta.left, :]
        + phi.hedge[:, delta.right]
        + phi.vedge[delta.down, :]
        + phi.vedge[:, delta.up]
    )


def site_distribution(
    phi: NnInteraction, sft: NnSft, delta: SiteBoundary
) -> SiteDistribution:
    """Gibbs law of the center site given its four neighbors.

    Args:
        phi (NnInteraction): The interaction.
        sft (NnSft): The shift; only locally admissible fillings get weight.
        delta (SiteBoundary): The neighbor symbols.

    Returns:
        SiteDistribution: Weights exp(-energy) normalized over admissible centers.
    """
    phi.check_against(sft)
    delta.check(sft)
    allowed = (
        sft.e1_matrix[delta.left, :]
        & sft.e1_matrix[:, delta.right]
        & sft.e2_matrix[delta.down, :]
        & sft.e2_matrix[:, delta.up]
    )
    if not allowed.any():
        raise UnfillableBoundaryError(f"Unfillable boundary: {delta}.")
    energies = _site_energies(phi, delta)
    shifted = energies[allowed] - energies[allowed].min()
    weights = np.zeros(sft.size)
    weights[allowed] = np.exp(-shifted)
    return SiteDistribution(probs=weights / weights.sum())


def variational_distance(mu: SiteDistribution, nu: SiteDistribution) -> float:
    if mu.probs.shape != nu.probs.shape:
        raise ValueError(
            f"Distributions live on different alphabets: {mu.probs.shape[0]} vs {nu.probs.shape[0]}."
        )
    return float(0.5 * np.abs(mu.probs - nu.probs).sum())


def _distribution_table(phi: NnInteraction, sft: NnSft) -> np.ndarray:
    boundaries = fillable_boundaries(sft)
    if not boundaries:
        raise UnfillableBoundaryError("No fillable boundary: q_hat is undefined.")
    table = np.array(
        [site_distribution(phi, sft, delta).probs for delta in boundaries]
    )
    # Laws depend on the boundary only through its four symbols; equal laws add nothing.
    return np.unique(table, axis=0)


def _max_pairwise_distance(table: np.ndarray) -> float:
    best = 0.0
    for i in range(table.shape[0] - 1):
        distances = 0.5 * np.abs(table[i + 1 :] - table[i]).sum(axis=1)
        best = max(best, float(distances.max()))
    return best


def q_hat(phi: NnInteraction, sft: NnSft) -> float:
    """Max variational distance between site laws over fillable boundaries."""
    return _max_pairwise_distance(_distribution_table(phi, sft))


def constant_boundary_q(phi: NnInteraction, sft: NnSft) -> Optional[float]:
    """The same max restricted to boundaries with four equal neighbors."""
    laws = []
    for s in sft.alphabet.symbols:
        delta = SiteBoundary(up=s, down=s, left=s, right=s)
        try:
            laws.append(site_distribution(phi, sft, delta).probs)
        except UnfillableBoundaryError:
            continue
    if len(laws) < 2:
        return None
    return _max_pairwise_distance(np.array(laws))


def ising_sufficient_condition(beta: float, h: float, p_c_bound: float) -> bool:
    return 2 * beta * (4 - abs(h)) < math.log(p_c_bound / (1 - p_c_bound))


def manysafe_threshold(p_c_bound: float) -> float:
    return 1 - p_c_bound


def manyadj_threshold(p_c_bound: float) -> float:
    return 1 - p_c_bound / (4 * (1 + p_c_bound))


def min_neighbor_fraction(sft: NnSft) -> float:
    """Smallest fraction of legal neighbors over symbols and the four directions."""
    e1 = sft.e1_matrix
    e2 = sft.e2_matrix
    counts = np.concatenate(
        [e1.sum(axis=1), e1.sum(axis=0), e2.sum(axis=1), e2.sum(axis=0)]
    )
    return float(counts.min()) / sft.size


def applicability(
    phi: NnInteraction,
    sft: NnSft,
    p_c_bound: float = utils.DEFAULT_PC_BOUND,
    ising_params: Optional[Tuple[float, float]] = None,
) -> ApplicabilityReport:
    """Evaluate the sufficient conditions for the strip approximation.

    Args:
        phi (NnInteraction): The interaction.
        sft (NnSft): The shift.
        p_c_bound (float): The percolation threshold bound, in (0, 1).
        ising_params (Optional[Tuple[float, float]]): (beta, h) for the Ising model.

    Returns:
        ApplicabilityReport: The gate values and decisions.
    """
    if not 0 < p_c_bound < 1:
        raise ValueError(f"p_c bound must lie in (0, 1), got {p_c_bound}.")
    logger = utils.Logger("applicability")
    notes: List[str] = []
    q_value = q_hat(phi, sft)
    safe_fraction = len(find_safe_symbols(sft)) / sft.size
    neighbor_fraction = min_neighbor_fraction(sft)
    gates = [
        ("q_hat", q_value, p_c_bound),
        ("safe fraction", manysafe_threshold(p_c_bound), safe_fraction),
        ("neighbor fraction", manyadj_threshold(p_c_bound), neighbor_fraction),
    ]
    for label, smaller, larger in gates:
        if abs(larger - smaller) < GATE_WARNING_BAND:
            notes.append(f"{label} is within {GATE_WARNING_BAND} of its threshold")
    ising_condition = None
    if ising_params is not None:
        beta, h = ising_params
        ising_condition = ising_sufficient_condition(beta, h, p_c_bound)
        margin = 2 * beta * (4 - abs(h)) - math.log(p_c_bound / (1 - p_c_bound))
        if abs(margin) < GATE_WARNING_BAND:
            notes.append(f"Ising condition is within {GATE_WARNING_BAND} of its threshold")
    non_rigorous = p_c_bound > utils.DEFAULT_PC_BOUND
    if non_rigorous:
        notes.append(
            f"p_c bound {p_c_bound} exceeds the proven bound {utils.DEFAULT_PC_BOUND}; "
            + "results are non-rigorous"
        )
    report = ApplicabilityReport(
        q_hat=q_value,
        p_c_bound=p_c_bound,
        passes_qhat=q_value < p_c_bound,
        safe_fraction=safe_fraction,
        passes_manysafe=safe_fraction > manysafe_threshold(p_c_bound),
        min_neighbor_fraction=neighbor_fraction,
        passes_manyadj=neighbor_fraction > manyadj_threshold(p_c_bound),
        zero_interaction=phi.is_zero,
        constant_boundary_q=constant_boundary_q(phi, sft),
        ising_condition=ising_condition,
        non_rigorous=non_rigorous,
        notes=tuple(notes),
    )
    for note in notes:
        logger.warning(note)
    return report
