"""Strip transfer matrices, Perron enclosures and the induced Markov chain.

Stored matrices hold exp(-(weight - min weight)) so every entry lies in (0, 1];
the true matrix is stored * exp(log_scale) with log_scale = -min weight.
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy import special, stats

import strip_pressure.core.utils as utils
from strip_pressure.core.errors import (
    ConvergenceError,
    IdentityViolationError,
    NotMixingError,
)
from strip_pressure.core.interactions import (
    NnInteraction,
    StripInteraction,
    strip_interaction,
)
from strip_pressure.core.lattice import ColumnSystem, TrimDiagnostics, trim_to_essential

# Dense boolean powers are only attempted up to this many columns.
PRIMITIVITY_MAX_COLUMNS = 400
# Cap on the number of paths enumerated by block_conditional_entropy.
MAX_BLOCKS = 5_000_000
# Iterates use M + s I with s this fraction of the running lower bound on lambda.
SHIFT_FRACTION = 0.5
# Matvecs run row by row over CSR storage; results do not depend on thread count.
SUMMATION_MODE = "csr-sequential"


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    cs: ColumnSystem
    stored: sp.csr_matrix
    log_scale: float
    weights: np.ndarray
    diagnostics: TrimDiagnostics

    @property
    def size(self) -> int:
        return self.cs.size

    def true_dense(self) -> np.ndarray:
        """Dense true-scale matrix, for small strips and tests."""
        return self.stored.toarray() * math.exp(self.log_scale)


@dataclass(frozen=True, eq=False)
class Enclosure:
    """Collatz-Wielandt bounds on the Perron root of a nonnegative matrix."""

    lo: float
    hi: float
    vector: np.ndarray
    iterations: int
    history: np.ndarray

    @property
    def relative_gap(self) -> float:
        return (self.hi - self.lo) / self.lo


@dataclass(frozen=True, eq=False)
class PerronData:
    stored_lo: float
    stored_hi: float
    log_scale: float
    v: np.ndarray
    u: np.ndarray
    iterations: int
    residual: float
    history: np.ndarray

    @property
    def lambda_lo(self) -> float:
        return self.stored_lo * math.exp(self.log_scale)

    @property
    def lambda_hi(self) -> float:
        return self.stored_hi * math.exp(self.log_scale)

    @property
    def stored_mid(self) -> float:
        return 0.5 * (self.stored_lo + self.stored_hi)

    @property
    def log_lambda(self) -> float:
        return math.log(self.stored_mid) + self.log_scale

    @property
    def log_lambda_lo(self) -> float:
        return math.log(self.stored_lo) + self.log_scale

    @property
    def log_lambda_hi(self) -> float:
        return math.log(self.stored_hi) + self.log_scale

    @property
    def relative_gap(self) -> float:
        return (self.stored_hi - self.stored_lo) / self.stored_lo


@dataclass(frozen=True, eq=False)
class StripChain:
    """The strip Gibbs state as a stationary first-order Markov chain.

    pi_matrix shares the sparsity pattern of the transfer matrix.
    """

    cs: ColumnSystem
    pi_matrix: sp.csr_matrix
    stationary: np.ndarray
    entropy: float
    expected_phi: float
    log_lambda: float
    identity_residual: float
    row_defect: float
    error_bar: float
    perron: PerronData

    @property
    def expected_f(self) -> float:
        return -self.expected_phi


def _csr_from_edges(size: int, edges: np.ndarray, data: np.ndarray) -> sp.csr_matrix:
    # Edges are sorted by (row, col), which is already CSR order.
    indptr = np.zeros(size + 1, dtype=np.int64)
    np.cumsum(np.bincount(edges[:, 0], minlength=size), out=indptr[1:])
    return sp.csr_matrix((data, edges[:, 1].copy(), indptr), shape=(size, size))


def _trim_primitive(cs: ColumnSystem) -> Tuple[ColumnSystem, TrimDiagnostics]:
    trimmed, diagnostics = trim_to_essential(cs)
    if not diagnostics.is_primitive:
        raise NotMixingError(
            n=cs.n, scc_count=diagnostics.component_count, period=diagnostics.period
        )
    return trimmed, diagnostics


def _assemble(strip: StripInteraction, diagnostics: TrimDiagnostics) -> TransferMatrix:
    weights = np.asarray(strip.weights, dtype=float).copy()
    log_scale = -float(weights.min())
    stored = _csr_from_edges(strip.cs.size, strip.cs.edges, np.exp(-(weights + log_scale)))
    weights.setflags(write=False)
    return TransferMatrix(
        cs=strip.cs,
        stored=stored,
        log_scale=log_scale,
        weights=weights,
        diagnostics=diagnostics,
    )


def build_transfer_from_weights(strip: StripInteraction) -> TransferMatrix:
    """Transfer matrix of a strip interaction given on an essential strip.

    Raises:
        ValueError: If the strip still has inessential columns.
        NotMixingError: If the strip graph is reducible or periodic.
    """
    _, diagnostics = _trim_primitive(strip.cs)
    if diagnostics.removed:
        raise ValueError(
            f"Strip weights must be given on a trimmed strip; {diagnostics.removed} "
            + "columns are inessential."
        )
    return _assemble(strip, diagnostics)


def build_transfer(phi: NnInteraction, cs: ColumnSystem) -> TransferMatrix:
    """Build A with entries exp(-weight(c, d)) on the edges of the trimmed strip.

    Args:
        phi (NnInteraction): The interaction.
        cs (ColumnSystem): The strip; inessential columns are trimmed here.

    Returns:
        TransferMatrix: Stored entries in (0, 1] with the global log_scale.
    """
    trimmed, diagnostics = _trim_primitive(cs)
    return _assemble(strip_interaction(phi, trimmed), diagnostics)


def collatz_wielandt(
    matrix: sp.csr_matrix, rel_tol: float, max_iterations: Optional[int] = None
) -> Enclosure:
    """Shifted power iteration from the all-ones vector with Collatz-Wielandt bounds.

    After each step w = M v the interval [min w/v, max w/v] contains the Perron
    root; the running max of the lower ends and min of the upper ends are kept.
    The next iterate is (M + s I) v with s = SHIFT_FRACTION * lo, which damps
    eigenvalues near -lambda. The bounds always come from M v, so the shift
    leaves them rigorous.

    Args:
        matrix (sp.csr_matrix): A primitive nonnegative matrix.
        rel_tol (float): Stop once (hi - lo) / lo <= rel_tol.
        max_iterations (Optional[int]): Defaults to STRIP_PRESSURE_MAX_ITERATIONS.

    Returns:
        Enclosure: The bounds, a positive max-normalized eigenvector estimate and
            the bound history.
    """
    if rel_tol <= 0:
        raise ValueError(f"rel_tol must be positive, got {rel_tol}.")
    cap = (
        max_iterations
        if max_iterations is not None
        else utils.env_int("STRIP_PRESSURE_MAX_ITERATIONS", utils.DEFAULT_MAX_ITERATIONS)
    )
    logger = utils.Logger("collatz_wielandt")
    v = np.ones(matrix.shape[0])
    lo, hi = 0.0, math.inf
    history: List[Tuple[float, float]] = []
    gap = math.inf
    for iteration in range(1, cap + 1):
        w = matrix @ v
        if not np.all(w > 0):
            raise ValueError("Matrix has a zero row; it is not primitive.")
        ratios = w / v
        step_lo, step_hi = float(ratios.min()), float(ratios.max())
        lo = max(lo, step_lo)
        hi = min(hi, step_hi)
        history.append((lo, hi))
        shifted = w + SHIFT_FRACTION * lo * v
        v = shifted / shifted.max()
        gap = (hi - lo) / lo
        if iteration % 1000 == 0:
            logger.debug(f"Iteration {iteration}: bounds [{lo!r}, {hi!r}], gap {gap:.3e}.")
        if gap <= rel_tol:
            if lo > hi:
                # Bounds from different steps crossed by rounding.
                lo, hi = step_lo, step_hi
            return Enclosure(
                lo=lo, hi=hi, vector=v, iterations=iteration, history=np.array(history)
            )
    raise ConvergenceError(iterations=cap, gap=gap)


def perron(
    A: TransferMatrix, rel_tol: float, max_iterations: Optional[int] = None
) -> PerronData:
    """Perron root enclosure with right and left eigenvectors.

    The reported bounds intersect the enclosures of A and its transpose.
    v is normalized to max entry 1 and u to u . v = 1.
    """
    right = collatz_wielandt(A.stored, rel_tol, max_iterations)
    left = collatz_wielandt(A.stored.T.tocsr(), rel_tol, max_iterations)
    lo = max(right.lo, left.lo)
    hi = min(right.hi, left.hi)
    if lo > hi:
        lo, hi = right.lo, right.hi
    v = right.vector
    u = left.vector / float(left.vector @ v)
    mid = 0.5 * (lo + hi)
    residual = float(np.abs(A.stored @ v - mid * v).max()) / mid
    return PerronData(
        stored_lo=lo,
        stored_hi=hi,
        log_scale=A.log_scale,
        v=v,
        u=u,
        iterations=max(right.iterations, left.iterations),
        residual=residual,
        history=right.history,
    )


def markov_chain(A: TransferMatrix, pd: PerronData) -> StripChain:
    """The chain Pi(c, d) = A(c, d) v(d) / (lambda v(c)) with lambda the enclosure
    midpoint, rows renormalized, and its stationary law u * v.
    """
    logger = utils.Logger("markov_chain")
    edges = A.cs.edges
    rows, cols = edges[:, 0], edges[:, 1]
    values = A.stored.data * pd.v[cols] / (pd.stored_mid * pd.v[rows])
    row_sums = np.bincount(rows, weights=values, minlength=A.size)
    row_defect = float(np.abs(row_sums - 1.0).max())
    values = values / row_sums[rows]
    pi_matrix = _csr_from_edges(A.size, edges, values)
    stationary = pd.u * pd.v
    stationary = stationary / stationary.sum()
    edge_mass = stationary[rows] * values
    entropy = float(special.entr(values) @ stationary[rows])
    expected_phi = float(edge_mass @ A.weights)
    error_bar = (pd.stored_hi - pd.stored_lo) / pd.stored_lo
    if pd.relative_gap > 1e-8:
        logger.warning(
            f"Wide eigenvalue enclosure (relative gap {pd.relative_gap:.3e}); "
            + "chain quantities carry error bars of the same size."
        )
    return StripChain(
        cs=A.cs,
        pi_matrix=pi_matrix,
        stationary=stationary,
        entropy=entropy,
        expected_phi=expected_phi,
        log_lambda=pd.log_lambda,
        identity_residual=abs(pd.log_lambda - (entropy - expected_phi)),
        row_defect=row_defect,
        error_bar=error_bar,
        perron=pd,
    )


def identity_threshold(rel_tol: float) -> float:
    return 10 * rel_tol + 1e-9


def check_identity(chain: StripChain, rel_tol: float) -> None:
    threshold = identity_threshold(rel_tol)
    if chain.identity_residual > threshold:
        raise IdentityViolationError(
            residual=chain.identity_residual, threshold=threshold, n=chain.cs.n
        )


def strip_report(
    phi: NnInteraction,
    cs: ColumnSystem,
    rel_tol: Optional[float] = None,
    max_iterations: Optional[int] = None,
) -> StripChain:
    """Transfer matrix, Perron data and chain for one strip, with the pressure
    identity log lambda = entropy - expected_phi checked.

    Raises:
        IdentityViolationError: If the residual exceeds 10 * rel_tol + 1e-9.
    """
    tol = (
        rel_tol
        if rel_tol is not None
        else utils.env_float("STRIP_PRESSURE_REL_TOL", utils.DEFAULT_REL_TOL)
    )
    A = build_transfer(phi, cs)
    chain = markov_chain(A, perron(A, tol, max_iterations))
    check_identity(chain, tol)
    return chain


def block_conditional_entropy(chain: StripChain, k: int) -> float:
    """H(X_0 | X_-1, ..., X_-k) of the stationary chain from explicit block laws.

    Args:
        chain (StripChain): The chain.
        k (int): Length of the conditioning past; 0 gives H(X_0).

    Returns:
        float: H of (k+1)-blocks minus H of k-blocks, in nats.
    """
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}.")
    pi_matrix = chain.pi_matrix
    probs = chain.stationary.copy()
    last = np.arange(chain.stationary.shape[0])
    block_entropies = [float(stats.entropy(probs))]
    for _ in range(k):
        counts = np.diff(pi_matrix.indptr)[last]
        if counts.sum() > MAX_BLOCKS:
            raise ValueError(
                f"Too many blocks to enumerate: {int(counts.sum())} > {MAX_BLOCKS}."
            )
        starts = np.repeat(pi_matrix.indptr[last], counts)
        offsets = np.arange(int(counts.sum())) - np.repeat(np.cumsum(counts) - counts, counts)
        positions = starts + offsets
        probs = np.repeat(probs, counts) * pi_matrix.data[positions]
        last = pi_matrix.indices[positions]
        block_entropies.append(float(stats.entropy(probs)))
    if k == 0:
        return block_entropies[0]
    return block_entropies[k] - block_entropies[k - 1]


def index_of_primitivity(A: TransferMatrix) -> int:
    """Smallest N with A^N entrywise positive.

    Raises:
        ValueError: If the strip is too large for dense powers or no N up to
            Wielandt's bound (|C| - 1)^2 + 1 works.
    """
    size = A.size
    if size > PRIMITIVITY_MAX_COLUMNS:
        raise ValueError(
            f"Index of primitivity is only computed for at most {PRIMITIVITY_MAX_COLUMNS} "
            + f"columns, got {size}."
        )
    pattern = (A.stored.toarray() > 0).astype(np.int64)
    power = pattern.copy()
    bound = (size - 1) ** 2 + 1
    for exponent in range(1, bound + 1):
        if power.all():
            return exponent
        power = ((power @ pattern) > 0).astype(np.int64)
    raise ValueError(f"Matrix is not primitive: no power up to {bound} is positive.")


def power_sum_bounds(
    A: TransferMatrix, M: int, N: Optional[int] = None
) -> Tuple[float, float]:
    """Matrix-power bounds on log lambda.

    With S_M the entry sum of A^M and eps the smallest entry of A^N,
    (log eps + log S_M) / (M + N) < log lambda <= log S_M / M.

    Args:
        A (TransferMatrix): The transfer matrix.
        M (int): The power whose entry sum is taken.
        N (Optional[int]): A power with all entries positive. Defaults to the
            index of primitivity.

    Returns:
        Tuple[float, float]: (lower, upper) bounds on the true-scale log lambda.
    """
    if M < 1:
        raise ValueError(f"M must be positive, got {M}.")
    exponent = N if N is not None else index_of_primitivity(A)
    vector = np.ones(A.size)
    log_sum = 0.0
    for _ in range(M):
        vector = A.stored @ vector
        scale = float(vector.max())
        vector = vector / scale
        log_sum += math.log(scale)
    log_sum += math.log(float(vector.sum())) + M * A.log_scale
    dense = A.stored.toarray()
    power = np.eye(A.size)
    log_eps = 0.0
    for _ in range(exponent):
        power = power @ dense
        scale = float(power.max())
        power = power / scale
        log_eps += math.log(scale)
    smallest = float(power.min())
    if smallest <= 0:
        raise ValueError(f"A^{exponent} has a zero entry; pass a larger N.")
    log_eps += math.log(smallest) + exponent * A.log_scale
    return (log_eps + log_sum) / (M + exponent), log_sum / M


def dump_transfer(A: TransferMatrix, path: str) -> None:
    """Write `row col log_weight` lines in canonical edge order, true scale."""
    lines = [
        f"# transfer n={A.cs.n} columns={A.size} edges={A.cs.edge_count} "
        + f"log_scale={A.log_scale!r}",
        "# row col log_weight",
    ]
    # 0.0 - w keeps zero weights from printing as -0.0.
    for (c, d), log_weight in zip(A.cs.edges.tolist(), (0.0 - A.weights).tolist()):
        lines.append(f"{c} {d} {log_weight!r}")
    utils.atomic_write_text(path, "\n".join(lines) + "\n")
