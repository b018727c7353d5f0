"""Translation-invariant nearest-neighbor interactions and the built-in models.

Energies enter weights as exp(-energy). Vertical pairs are (lower, upper) and
horizontal pairs are (left, right), matching core.lattice.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from strip_pressure.core.lattice import (
    Alphabet,
    ColumnSystem,
    Configuration,
    NnSft,
    PeriodicRow,
    power_blocks,
)

Pair = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class NnInteraction:
    """Values on symbols (vertex), horizontal pairs (hedge) and vertical pairs (vedge)."""

    vertex: np.ndarray
    hedge: np.ndarray
    vedge: np.ndarray

    def __post_init__(self) -> None:
        size = self.vertex.shape[0]
        if self.hedge.shape != (size, size) or self.vedge.shape != (size, size):
            raise ValueError(
                f"Interaction tables disagree on the alphabet size: vertex {self.vertex.shape}, "
                + f"hedge {self.hedge.shape}, vedge {self.vedge.shape}."
            )
        for label, table in (
            ("vertex", self.vertex),
            ("hedge", self.hedge),
            ("vedge", self.vedge),
        ):
            if not np.all(np.isfinite(table)):
                raise ValueError(f"Interaction values must be finite ({label}).")
            table.setflags(write=False)

    @classmethod
    def zero(cls, size: int) -> "NnInteraction":
        return cls(
            vertex=np.zeros(size), hedge=np.zeros((size, size)), vedge=np.zeros((size, size))
        )

    @classmethod
    def from_maps(
        cls,
        size: int,
        vertex: Optional[Mapping[int, float]] = None,
        hedge: Optional[Mapping[Pair, float]] = None,
        vedge: Optional[Mapping[Pair, float]] = None,
    ) -> "NnInteraction":
        """Build an interaction from sparse maps; missing entries are 0."""
        vertex_table = np.zeros(size)
        hedge_table = np.zeros((size, size))
        vedge_table = np.zeros((size, size))
        for symbol, value in (vertex or {}).items():
            vertex_table[symbol] = value
        for (left, right), value in (hedge or {}).items():
            hedge_table[left, right] = value
        for (lower, upper), value in (vedge or {}).items():
            vedge_table[lower, upper] = value
        return cls(vertex=vertex_table, hedge=hedge_table, vedge=vedge_table)

    @property
    def size(self) -> int:
        return int(self.vertex.shape[0])

    @property
    def is_zero(self) -> bool:
        return not (self.vertex.any() or self.hedge.any() or self.vedge.any())

    def __add__(self, other: "NnInteraction") -> "NnInteraction":
        return NnInteraction(
            vertex=self.vertex + other.vertex,
            hedge=self.hedge + other.hedge,
            vedge=self.vedge + other.vedge,
        )

    def check_against(self, sft: NnSft) -> None:
        if self.size != sft.size:
            raise ValueError(
                f"Interaction is defined on {self.size} symbols but the shift has {sft.size}."
            )


@dataclass(frozen=True, eq=False)
class StripInteraction:
    """Edge weights of the strip interaction, aligned with cs.edges."""

    cs: ColumnSystem
    weights: np.ndarray

    def __post_init__(self) -> None:
        self.weights.setflags(write=False)

    def weight(self, c: int, d: int) -> float:
        edges = self.cs.edges
        # Edges are sorted by (row, col).
        lo = int(np.searchsorted(edges[:, 0], c, side="left"))
        hi = int(np.searchsorted(edges[:, 0], c, side="right"))
        idx = lo + int(np.searchsorted(edges[lo:hi, 1], d))
        if idx >= hi or edges[idx, 1] != d:
            raise KeyError(f"({c}, {d}) is not an edge of the strip.")
        return float(self.weights[idx])

    def as_dict(self) -> Dict[Pair, float]:
        return {
            (int(c), int(d)): float(w) for (c, d), w in zip(self.cs.edges, self.weights)
        }

    def shifted(self, constant: float) -> "StripInteraction":
        return StripInteraction(cs=self.cs, weights=self.weights + constant)


def phi_hat(phi: NnInteraction, x: Configuration) -> float:
    """The single-shape interaction on Delta = {(0,0), (0,1), (1,0)}.

    Args:
        phi (NnInteraction): The nearest-neighbor interaction.
        x (Configuration): Values on the three sites of Delta.

    Returns:
        float: Phi(x(0,0)) + vedge(x(0,0), x(0,1)) + hedge(x(0,0), x(1,0)).
    """
    values = x.values
    for site in ((0, 0), (0, 1), (1, 0)):
        if site not in values:
            raise ValueError(f"Configuration is missing site {site} of Delta.")
        if not 0 <= values[site] < phi.size:
            raise ValueError(f"Symbol index {values[site]} out of range at site {site}.")
    center, upper, right = values[(0, 0)], values[(0, 1)], values[(1, 0)]
    return float(phi.vertex[center] + phi.vedge[center, upper] + phi.hedge[center, right])


def column_energies(phi: NnInteraction, cs: ColumnSystem) -> np.ndarray:
    """Vertex and vertical terms of each column, boundary rows included."""
    columns = cs.columns
    top, bottom = cs.t.word[0], cs.b.word[0]
    energy = phi.vertex[columns].sum(axis=1)
    energy = energy + phi.vedge[bottom, columns[:, 0]]
    if cs.n > 1:
        energy = energy + phi.vedge[columns[:, :-1], columns[:, 1:]].sum(axis=1)
    energy = energy + phi.vedge[columns[:, -1], top]
    return energy


def strip_interaction(phi: NnInteraction, cs: ColumnSystem) -> StripInteraction:
    """Weights of the strip interaction on every edge (c, d) of the column system.

    weight(c, d) = sum_i vertex(c_i) + vedge(b, c_1) + sum_i vedge(c_i, c_{i+1})
                   + vedge(c_n, t) + sum_i hedge(c_i, d_i)
    """
    phi.check_against(cs.sft)
    columns = cs.columns
    left = cs.edges[:, 0]
    right = cs.edges[:, 1]
    horizontal = phi.hedge[columns[left], columns[right]].sum(axis=1)
    weights = column_energies(phi, cs)[left] + horizontal
    return StripInteraction(cs=cs, weights=np.asarray(weights, dtype=float))


def power_interaction(phi: NnInteraction, sft: NnSft, p: int) -> NnInteraction:
    """The interaction induced on higher_power_sft(sft, p).

    Block vertex values add the member vertex values; a horizontal block pair
    carries the internal horizontal terms of the left block plus the seam term;
    a vertical block pair adds the p column-wise vertical terms.
    """
    phi.check_against(sft)
    blocks = np.array(power_blocks(sft, p), dtype=np.int64)
    vertex = phi.vertex[blocks].sum(axis=1)
    internal = np.zeros(blocks.shape[0])
    for i in range(p - 1):
        internal = internal + phi.hedge[blocks[:, i], blocks[:, i + 1]]
    seam = phi.hedge[blocks[:, -1][:, None], blocks[None, :, 0]]
    hedge = internal[:, None] + seam
    vedge = np.zeros((blocks.shape[0], blocks.shape[0]))
    for i in range(p):
        vedge = vedge + phi.vedge[blocks[:, i][:, None], blocks[None, :, i]]
    return NnInteraction(vertex=vertex, hedge=hedge, vedge=vedge)


def hard_square_sft() -> NnSft:
    return NnSft.from_names(
        ["0", "1"],
        e1=[("0", "0"), ("0", "1"), ("1", "0")],
        e2=[("0", "0"), ("0", "1"), ("1", "0")],
    )


def full_shift_sft(k: int) -> NnSft:
    if k < 2:
        raise ValueError(f"A full shift needs k >= 2, got {k}.")
    names = [str(s) for s in range(k)]
    pairs = [(a, b) for a in names for b in names]
    return NnSft.from_names(names, e1=pairs, e2=pairs)


def model_zero(sft: NnSft) -> Tuple[NnSft, NnInteraction]:
    return sft, NnInteraction.zero(sft.size)


def model_hard_core(
    a: float, raw_activity: bool = False
) -> Tuple[NnSft, NnInteraction]:
    """Hard-core model with activity a.

    vertex(1) = -log a, so the symbol 1 carries Gibbs weight a. With
    raw_activity=True the value is vertex(1) = a instead.
    """
    if not a > 0:
        raise ValueError(f"Hard-core activity must be positive, got {a}.")
    sft = hard_square_sft()
    value = a if raw_activity else -math.log(a)
    return sft, NnInteraction.from_maps(sft.size, vertex={1: value})


ISING_SPINS = np.array([1.0, -1.0])


def model_ising(beta: float, h: float) -> Tuple[NnSft, NnInteraction]:
    """Ising antiferromagnet on the full shift over (+1, -1), in that symbol order."""
    if not (math.isfinite(beta) and math.isfinite(h)):
        raise ValueError(f"Ising parameters must be finite, got beta={beta}, h={h}.")
    if beta < 0:
        raise ValueError(f"Ising beta must be nonnegative, got {beta}.")
    names = ["+1", "-1"]
    pairs = [(a, b) for a in names for b in names]
    sft = NnSft.from_names(names, e1=pairs, e2=pairs)
    spins = ISING_SPINS
    coupling = beta * np.outer(spins, spins)
    return sft, NnInteraction(
        vertex=-beta * h * spins, hedge=coupling.copy(), vedge=coupling.copy()
    )


def checkerboard_sft(k: int) -> NnSft:
    if k < 2:
        raise ValueError(f"A checkerboard needs k >= 2, got {k}.")
    names = [str(s) for s in range(1, k + 1)]
    pairs = [(a, b) for a in names for b in names if a != b]
    return NnSft.from_names(names, e1=pairs, e2=pairs)


def model_checkerboard(k: int) -> Tuple[NnSft, NnInteraction]:
    sft = checkerboard_sft(k)
    return sft, NnInteraction.zero(sft.size)


@dataclass(frozen=True, eq=False)
class Model:
    """A shift, an interaction on it, and default boundary rows."""

    name: str
    sft: NnSft
    interaction: NnInteraction
    t: PeriodicRow
    b: PeriodicRow
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def alphabet(self) -> Alphabet:
        return self.sft.alphabet

    def with_interaction(self, interaction: NnInteraction) -> "Model":
        interaction.check_against(self.sft)
        return Model(
            name=self.name,
            sft=self.sft,
            interaction=interaction,
            t=self.t,
            b=self.b,
            params=dict(self.params),
        )

    def with_rows(self, t: PeriodicRow, b: PeriodicRow) -> "Model":
        return Model(
            name=self.name,
            sft=self.sft,
            interaction=self.interaction,
            t=t,
            b=b,
            params=dict(self.params),
        )


BUILTIN_MODELS = ("hard_core", "hard_square", "ising", "checkerboard", "full_shift")


def builtin_model(name: str, params: Mapping[str, Any]) -> Model:
    """Build a named model with its default boundary rows.

    Args:
        name (str): One of BUILTIN_MODELS.
        params (Mapping[str, Any]): Model parameters (a, raw_activity, beta, h, k).

    Returns:
        Model: The model.
    """
    if name == "hard_core":
        a = float(params.get("a", 1.0))
        raw = str(params.get("raw_activity", "false")).lower() in ("1", "true", "yes")
        sft, phi = model_hard_core(a, raw_activity=raw)
        zero = PeriodicRow.constant(0)
        return Model(name, sft, phi, zero, zero, {"a": a, "raw_activity": raw})
    if name == "hard_square":
        sft, phi = model_zero(hard_square_sft())
        zero = PeriodicRow.constant(0)
        return Model(name, sft, phi, zero, zero, {})
    if name == "ising":
        beta = float(params.get("beta", 0.0))
        h = float(params.get("h", 0.0))
        sft, phi = model_ising(beta, h)
        plus = PeriodicRow.constant(0)
        return Model(name, sft, phi, plus, plus, {"beta": beta, "h": h})
    if name == "checkerboard":
        k = int(params.get("k", 2))
        sft, phi = model_checkerboard(k)
        row = PeriodicRow(word=(0, 1))
        return Model(name, sft, phi, row, row, {"k": k})
    if name == "full_shift":
        k = int(params.get("k", 2))
        sft, phi = model_zero(full_shift_sft(k))
        zero = PeriodicRow.constant(0)
        return Model(name, sft, phi, zero, zero, {"k": k})
    raise ValueError(
        f"Unknown built-in model: {name}. Only support {list(BUILTIN_MODELS)}."
    )
