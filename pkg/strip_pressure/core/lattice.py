"""Nearest-neighbor Z^2 shifts of finite type and their strip column systems.

Conventions used everywhere in this package:
    * a site is (x, y) with x horizontal (to the right) and y vertical (upwards);
    * e1 holds horizontal pairs (left, right);
    * e2 holds vertical pairs (lower, upper);
    * a column is the tuple (x_1, ..., x_n) read from the bottom row upwards, and
      columns are ordered lexicographically with the bottom row most significant.
"""
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

import strip_pressure.core.utils as utils
from strip_pressure.core.errors import (
    ColumnBudgetError,
    DegenerateStripError,
    StripEmptyError,
)

Site = Tuple[int, int]
Pair = Tuple[int, int]

# Upper bound on |A|^p rows examined by the boundary row search.
MAX_CANDIDATE_WORDS = 4096
# Upper bound on the elements of one dense compatibility block when building edges.
EDGE_BLOCK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class Alphabet:
    names: Tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.names) < 2:
            raise ValueError(
                f"An alphabet needs at least 2 symbols, got {len(self.names)}."
            )
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"Alphabet symbols must be distinct: {list(self.names)}.")

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def symbols(self) -> range:
        return range(len(self.names))

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"Unknown symbol [{name}].")

    def name(self, symbol: int) -> str:
        self.check(symbol)
        return self.names[symbol]

    def check(self, symbol: int) -> None:
        if not 0 <= symbol < len(self.names):
            raise ValueError(
                f"Symbol index {symbol} out of range for an alphabet of size {len(self.names)}."
            )


@dataclass(frozen=True)
class NnSft:
    """A nearest-neighbor Z^2 SFT equipped with its allowed pair sets."""

    alphabet: Alphabet
    e1: FrozenSet[Pair]
    e2: FrozenSet[Pair]

    def __post_init__(self) -> None:
        for label, pairs in (("e1", self.e1), ("e2", self.e2)):
            for left, right in pairs:
                if not (0 <= left < self.alphabet.size and 0 <= right < self.alphabet.size):
                    raise ValueError(
                        f"Pair ({left}, {right}) in {label} is outside the alphabet."
                    )

    @classmethod
    def from_names(
        cls,
        names: Iterable[str],
        e1: Iterable[Tuple[str, str]],
        e2: Iterable[Tuple[str, str]],
    ) -> "NnSft":
        alphabet = Alphabet(tuple(names))
        return cls(
            alphabet=alphabet,
            e1=frozenset((alphabet.index(a), alphabet.index(b)) for a, b in e1),
            e2=frozenset((alphabet.index(a), alphabet.index(b)) for a, b in e2),
        )

    @property
    def size(self) -> int:
        return self.alphabet.size

    @cached_property
    def e1_matrix(self) -> np.ndarray:
        return _pair_matrix(self.e1, self.size)

    @cached_property
    def e2_matrix(self) -> np.ndarray:
        return _pair_matrix(self.e2, self.size)


def _pair_matrix(pairs: FrozenSet[Pair], size: int) -> np.ndarray:
    matrix = np.zeros((size, size), dtype=bool)
    for left, right in pairs:
        matrix[left, right] = True
    matrix.setflags(write=False)
    return matrix


@dataclass(frozen=True)
class Configuration:
    values: Mapping[Site, int]

    @property
    def shape(self) -> FrozenSet[Site]:
        return frozenset(self.values)

    @classmethod
    def from_rows(cls, rows: List[List[int]]) -> "Configuration":
        """Build a rectangle from rows listed top to bottom."""
        height = len(rows)
        values: Dict[Site, int] = {}
        for r, row in enumerate(rows):
            for x, value in enumerate(row):
                values[(x, height - 1 - r)] = value
        return cls(values=values)


@dataclass(frozen=True)
class PeriodicRow:
    """The bi-infinite row word^infinity."""

    word: Tuple[int, ...]
    verified_depth: Optional[int] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if len(self.word) == 0:
            raise ValueError("A periodic row needs a nonempty word.")

    @classmethod
    def constant(cls, symbol: int) -> "PeriodicRow":
        return cls(word=(symbol,))

    @property
    def period(self) -> int:
        return len(self.word)

    @property
    def is_constant(self) -> bool:
        return len(self.word) == 1

    def at(self, i: int) -> int:
        return self.word[i % len(self.word)]

    def describe(self, alphabet: Alphabet) -> str:
        body = ",".join(alphabet.name(s) for s in self.word)
        label = f"({body})^inf"
        if self.verified_depth is not None:
            label += f" [locally verified to depth {self.verified_depth}]"
        return label


@dataclass(frozen=True, eq=False)
class ColumnSystem:
    """The strip alphabet C_{1,n,t,b} with its edge set E_{1,n,t,b}.

    columns has shape (|C|, n); column c is columns[c] read bottom to top.
    edges has shape (|E|, 2) and is sorted by (row, col).
    """

    sft: NnSft
    n: int
    t: PeriodicRow
    b: PeriodicRow
    columns: np.ndarray
    edges: np.ndarray

    def __post_init__(self) -> None:
        self.columns.setflags(write=False)
        self.edges.setflags(write=False)

    @property
    def size(self) -> int:
        return int(self.columns.shape[0])

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    def column_tuples(self) -> List[Tuple[int, ...]]:
        return [tuple(int(s) for s in column) for column in self.columns]

    def edge_tuples(self) -> List[Pair]:
        return [(int(c), int(d)) for c, d in self.edges]

    def adjacency(self) -> sp.csr_matrix:
        """0/1 adjacency matrix in CSR form."""
        data = np.ones(self.edge_count, dtype=np.int8)
        return sp.csr_matrix(
            (data, (self.edges[:, 0], self.edges[:, 1])), shape=(self.size, self.size)
        )


@dataclass(frozen=True)
class TrimDiagnostics:
    removed: int
    component_count: int
    is_single_scc: bool
    period: int
    is_primitive: bool

    @property
    def notes(self) -> List[str]:
        if self.is_primitive:
            return []
        return [
            f"not mixing: {self.component_count} strongly connected components, period {self.period}"
        ]


def is_locally_admissible(sft: NnSft, config: Configuration) -> bool:
    """Check every adjacent pair inside the configuration's shape.

    Args:
        sft (NnSft): The shift whose pair sets are checked.
        config (Configuration): The configuration to check.

    Returns:
        bool: True iff no horizontal or vertical pair inside the shape is forbidden.
    """
    values = config.values
    for symbol in values.values():
        sft.alphabet.check(symbol)
    for (x, y), symbol in values.items():
        right = values.get((x + 1, y))
        if right is not None and (symbol, right) not in sft.e1:
            return False
        upper = values.get((x, y + 1))
        if upper is not None and (symbol, upper) not in sft.e2:
            return False
    return True


def _check_strip_rows(sft: NnSft, n: int, t: PeriodicRow, b: PeriodicRow) -> None:
    if n < 1:
        raise ValueError(f"Strip height must be positive, got {n}.")
    if not (t.is_constant and b.is_constant):
        raise ValueError(
            "Column systems need constant boundary rows; recode periodic rows with "
            + "higher_power_sft first."
        )
    sft.alphabet.check(t.word[0])
    sft.alphabet.check(b.word[0])


def count_columns(sft: NnSft, n: int, t: PeriodicRow, b: PeriodicRow) -> int:
    """Exact |C_{1,n,t,b}| by counting vertical paths, without enumerating columns."""
    _check_strip_rows(sft, n, t, b)
    e2 = sft.e2_matrix
    counts = [int(e2[b.word[0], s]) for s in sft.alphabet.symbols]
    for _ in range(n - 1):
        counts = [
            sum(counts[s] for s in sft.alphabet.symbols if e2[s, u])
            for u in sft.alphabet.symbols
        ]
    return sum(counts[s] for s in sft.alphabet.symbols if e2[s, t.word[0]])


def _enumerate_columns(sft: NnSft, n: int, top: int, bottom: int) -> np.ndarray:
    e2 = sft.e2_matrix
    # feasible[r][s]: symbol s can be followed by r more symbols and then the top row.
    feasible = [e2[:, top].copy()]
    for _ in range(n - 1):
        feasible.append((e2 & feasible[-1][None, :]).any(axis=1))
    first = np.nonzero(e2[bottom] & feasible[n - 1])[0]
    prefixes = first[:, None].astype(np.int64)
    for i in range(1, n):
        allowed = e2[prefixes[:, -1]] & feasible[n - 1 - i][None, :]
        rows, symbols = np.nonzero(allowed)
        prefixes = np.hstack([prefixes[rows], symbols[:, None].astype(np.int64)])
    return prefixes


def _horizontal_edges(e1: np.ndarray, columns: np.ndarray) -> np.ndarray:
    size, height = columns.shape
    if size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    block = max(1, EDGE_BLOCK_ELEMENTS // size)
    pieces = []
    for chunk in utils.chunk_list(range(size), block):
        start, stop = chunk[0], chunk[-1] + 1
        mask = np.ones((stop - start, size), dtype=bool)
        for i in range(height):
            mask &= e1[columns[start:stop, i][:, None], columns[None, :, i]]
        rows, cols = np.nonzero(mask)
        pieces.append(np.stack([rows + start, cols], axis=1))
    return np.concatenate(pieces).astype(np.int64)


def build_column_system(
    sft: NnSft,
    n: int,
    t: PeriodicRow,
    b: PeriodicRow,
    max_columns: Optional[int] = None,
) -> ColumnSystem:
    """Enumerate the columns compatible with t above and b below, and their edges.

    Args:
        sft (NnSft): The shift.
        n (int): The strip height.
        t (PeriodicRow): The constant row above the strip.
        b (PeriodicRow): The constant row below the strip.
        max_columns (Optional[int]): Column budget. Defaults to STRIP_PRESSURE_MAX_COLUMNS.

    Returns:
        ColumnSystem: Untrimmed columns in canonical order with all horizontal edges.
    """
    _check_strip_rows(sft, n, t, b)
    budget = (
        max_columns
        if max_columns is not None
        else utils.env_int("STRIP_PRESSURE_MAX_COLUMNS", utils.DEFAULT_MAX_COLUMNS)
    )
    projected = count_columns(sft, n, t, b)
    if projected == 0:
        raise StripEmptyError(n)
    if projected > budget:
        raise ColumnBudgetError(n=n, projected=projected, budget=budget)
    columns = _enumerate_columns(sft, n, top=t.word[0], bottom=b.word[0])
    edges = _horizontal_edges(sft.e1_matrix, columns)
    utils.Logger("build_column_system").info(
        f"Strip n={n}: {columns.shape[0]} columns, {edges.shape[0]} edges."
    )
    return ColumnSystem(sft=sft, n=n, t=t, b=b, columns=columns, edges=edges)


def _strong_period(size: int, edges: np.ndarray, labels: np.ndarray) -> int:
    """gcd of cycle lengths over the strongly connected components."""
    period = 0
    for component in np.unique(labels):
        nodes = np.nonzero(labels == component)[0]
        inside = (labels[edges[:, 0]] == component) & (labels[edges[:, 1]] == component)
        local_edges = edges[inside]
        if local_edges.shape[0] == 0:
            continue
        position = np.full(size, -1, dtype=np.int64)
        position[nodes] = np.arange(nodes.shape[0])
        graph = sp.csr_matrix(
            (
                np.ones(local_edges.shape[0]),
                (position[local_edges[:, 0]], position[local_edges[:, 1]]),
            ),
            shape=(nodes.shape[0], nodes.shape[0]),
        )
        levels = csgraph.shortest_path(graph, unweighted=True, indices=0)
        levels = levels.astype(np.int64)
        offsets = (
            levels[position[local_edges[:, 0]]] + 1 - levels[position[local_edges[:, 1]]]
        )
        period = int(np.gcd.reduce(np.append(np.abs(offsets), period)))
    return period


def trim_to_essential(cs: ColumnSystem) -> Tuple[ColumnSystem, TrimDiagnostics]:
    """Drop columns that do not lie on bi-infinite paths and classify the rest.

    Args:
        cs (ColumnSystem): A column system, possibly containing inessential columns.

    Returns:
        Tuple[ColumnSystem, TrimDiagnostics]: The essential system and its
            irreducibility and period flags.
    """
    logger = utils.Logger("trim_to_essential")
    alive = np.ones(cs.size, dtype=bool)
    edges = cs.edges
    while True:
        live_edges = edges[alive[edges[:, 0]] & alive[edges[:, 1]]]
        out_degree = np.bincount(live_edges[:, 0], minlength=cs.size)
        in_degree = np.bincount(live_edges[:, 1], minlength=cs.size)
        keep = alive & (out_degree > 0) & (in_degree > 0)
        if np.array_equal(keep, alive):
            break
        alive = keep
    kept = np.nonzero(alive)[0]
    if kept.shape[0] == 0:
        raise DegenerateStripError(cs.n)
    position = np.full(cs.size, -1, dtype=np.int64)
    position[kept] = np.arange(kept.shape[0])
    new_edges = np.stack(
        [position[live_edges[:, 0]], position[live_edges[:, 1]]], axis=1
    ).astype(np.int64)
    trimmed = ColumnSystem(
        sft=cs.sft,
        n=cs.n,
        t=cs.t,
        b=cs.b,
        columns=cs.columns[kept].copy(),
        edges=new_edges,
    )
    component_count, labels = csgraph.connected_components(
        trimmed.adjacency(), directed=True, connection="strong"
    )
    period = _strong_period(trimmed.size, new_edges, labels)
    is_single_scc = component_count == 1
    diagnostics = TrimDiagnostics(
        removed=cs.size - trimmed.size,
        component_count=int(component_count),
        is_single_scc=is_single_scc,
        period=period,
        is_primitive=is_single_scc and period == 1,
    )
    if diagnostics.removed:
        logger.info(
            f"Strip n={cs.n}: trimmed {diagnostics.removed} inessential columns, "
            + f"{trimmed.size} remain."
        )
    for note in diagnostics.notes:
        logger.warning(f"Strip n={cs.n}: {note}.")
    return trimmed, diagnostics


def power_blocks(sft: NnSft, p: int) -> List[Tuple[int, ...]]:
    """Horizontally locally admissible p-blocks in lexicographic order."""
    if p < 1:
        raise ValueError(f"Power must be positive, got {p}.")
    blocks: List[Tuple[int, ...]] = [(s,) for s in sft.alphabet.symbols]
    for _ in range(p - 1):
        blocks = [
            block + (s,)
            for block in blocks
            for s in sft.alphabet.symbols
            if (block[-1], s) in sft.e1
        ]
    return blocks


def _block_name(alphabet: Alphabet, block: Tuple[int, ...]) -> str:
    names = [alphabet.name(s) for s in block]
    separator = "" if all(len(name) == 1 for name in names) else "."
    return separator.join(names)


def higher_power_sft(sft: NnSft, p: int) -> NnSft:
    """Recode the shift by horizontal p-blocks.

    Symbol i of the result is power_blocks(sft, p)[i].
    """
    blocks = power_blocks(sft, p)
    if len(blocks) < 2:
        raise ValueError(
            f"The {p}-block recoding has {len(blocks)} symbol(s); an alphabet needs at least 2."
        )
    array = np.array(blocks, dtype=np.int64)
    e1_mask = sft.e1_matrix[array[:, -1][:, None], array[None, :, 0]]
    e2_mask = np.ones((len(blocks), len(blocks)), dtype=bool)
    for i in range(p):
        e2_mask &= sft.e2_matrix[array[:, i][:, None], array[None, :, i]]
    alphabet = Alphabet(tuple(_block_name(sft.alphabet, block) for block in blocks))
    return NnSft(
        alphabet=alphabet,
        e1=_mask_pairs(e1_mask),
        e2=_mask_pairs(e2_mask),
    )


def _mask_pairs(mask: np.ndarray) -> FrozenSet[Pair]:
    rows, cols = np.nonzero(mask)
    return frozenset(zip(rows.tolist(), cols.tolist()))


def find_safe_symbols(sft: NnSft) -> FrozenSet[int]:
    """Symbols allowed next to every symbol in every direction."""
    e1, e2 = sft.e1_matrix, sft.e2_matrix
    safe = e1.all(axis=1) & e1.all(axis=0) & e2.all(axis=1) & e2.all(axis=0)
    return frozenset(int(s) for s in np.nonzero(safe)[0])


def _is_primitive_word(word: Tuple[int, ...]) -> bool:
    p = len(word)
    return all(word != word[d:] + word[:d] for d in range(1, p) if p % d == 0)


def _min_rotation(word: Tuple[int, ...]) -> Tuple[int, ...]:
    return min(word[d:] + word[:d] for d in range(len(word)))


def candidate_boundary_rows(
    sft: NnSft, max_period: int, depth: int
) -> List[PeriodicRow]:
    """Bounded search for periodic rows that look globally admissible.

    A row qualifies when it is horizontally admissible (cyclically) and it can be
    extended by `depth` rows of the same period both above and below. This is a
    semi-decision: the returned rows carry verified_depth=depth, not a proof.

    Args:
        sft (NnSft): The shift.
        max_period (int): Largest period tried.
        depth (int): Number of rows the extension must reach in each direction.

    Returns:
        List[PeriodicRow]: Candidate rows by period, one per rotation class.
    """
    if max_period < 1 or depth < 1:
        raise ValueError(
            f"max_period and depth must be positive, got {max_period} and {depth}."
        )
    logger = utils.Logger("candidate_boundary_rows")
    found: List[PeriodicRow] = []
    for p in range(1, max_period + 1):
        if sft.size**p > MAX_CANDIDATE_WORDS:
            logger.warning(f"Skip period {p}: {sft.size ** p} words exceed the search cap.")
            break
        words = [
            word
            for word in itertools.product(sft.alphabet.symbols, repeat=p)
            if all((word[i], word[(i + 1) % p]) in sft.e1 for i in range(p))
        ]
        if not words:
            continue
        array = np.array(words, dtype=np.int64)
        stacked = np.ones((len(words), len(words)), dtype=bool)
        for i in range(p):
            stacked &= sft.e2_matrix[array[:, i][:, None], array[None, :, i]]
        for idx, word in enumerate(words):
            if not _is_primitive_word(word) or _min_rotation(word) != word:
                continue
            if _extends(stacked, idx, depth) and _extends(stacked.T, idx, depth):
                found.append(PeriodicRow(word=word, verified_depth=depth))
    return found


def _extends(stacked: np.ndarray, start: int, depth: int) -> bool:
    layer = np.zeros(stacked.shape[0], dtype=bool)
    layer[start] = True
    for _ in range(depth):
        layer = stacked[layer].any(axis=0)
        if not layer.any():
            return False
    return True


def rectangle_count(sft: NnSft, n: int, p: int, t: PeriodicRow, b: PeriodicRow) -> int:
    """Brute-force count of locally admissible n x p rectangles between constant rows."""
    _check_strip_rows(sft, n, t, b)
    top, bottom = t.word[0], b.word[0]
    total = 0
    for cells in itertools.product(sft.alphabet.symbols, repeat=n * p):
        # cells[y * p + x], y = 0 is the bottom row.
        grid = [cells[y * p : (y + 1) * p] for y in range(n)]
        if any((bottom, grid[0][x]) not in sft.e2 for x in range(p)):
            continue
        if any((grid[n - 1][x], top) not in sft.e2 for x in range(p)):
            continue
        values = {(x, y): grid[y][x] for y in range(n) for x in range(p)}
        if is_locally_admissible(sft, Configuration(values=values)):
            total += 1
    return total


def serialize_column_system(cs: ColumnSystem) -> str:
    """Canonical text form: header, one column per line, one edge per line."""
    alphabet = cs.sft.alphabet
    lines = [
        f"# column-system n={cs.n} t={alphabet.name(cs.t.word[0])} "
        + f"b={alphabet.name(cs.b.word[0])} columns={cs.size} edges={cs.edge_count}",
        "# columns are read bottom to top",
    ]
    for idx, column in enumerate(cs.column_tuples()):
        lines.append(f"column {idx}: " + " ".join(alphabet.name(s) for s in column))
    for c, d in cs.edge_tuples():
        lines.append(f"edge {c} {d}")
    return "\n".join(lines) + "\n"
