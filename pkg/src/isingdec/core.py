"""Chimera graph topology, Ising Hamiltonians, gauge and cell symmetries.

The Chimera graph is an L x L grid of K_{4,4} unit cells. Spins are indexed
(cell_x, cell_y, side u in {0,1}, offset k in {0..3}) flattened row-major:

    index = 8 * (cell_y * L + cell_x) + 4 * u + k

Side-0 spins couple to the like-indexed side-0 spin of the row-adjacent cell,
side-1 spins to the like-indexed side-1 spin of the column-adjacent cell.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CapacityError",
    "FormatError",
    "ChimeraGraph",
    "Hamiltonian",
    "SpinConfig",
    "build_chimera",
    "truncated_cell",
    "energy",
    "gauge_transform",
    "unit_cell_automorphisms",
    "canonicalize_cell",
    "CanonicalCell",
    "enumerate_cell_classes",
    "parse_hamiltonian",
    "format_hamiltonian",
    "CELL_EDGES",
]


class CapacityError(Exception):
    """An instance exceeds the size limits of the requested engine."""


class FormatError(ValueError):
    """A Hamiltonian text file violates the line format or the graph."""


@dataclass(frozen=True)
class ChimeraGraph:
    """Immutable Chimera topology with optional excluded spins.

    `spins` holds the active spin indices in ascending order and `edges` the
    canonical (ascending lexicographic) edge list with i < j in every pair.
    """

    L: int
    K: int
    excluded: frozenset[int]
    spins: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]

    @property
    def n_spins(self) -> int:
        return len(self.spins)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def spin_index(self, cell_x: int, cell_y: int, side: int, offset: int) -> int:
        return 8 * (cell_y * self.L + cell_x) + 4 * side + offset

    def neighbors(self) -> dict[int, tuple[int, ...]]:
        adj: dict[int, list[int]] = {s: [] for s in self.spins}
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return {s: tuple(v) for s, v in adj.items()}


@dataclass(frozen=True)
class Hamiltonian:
    """Ising instance on a Chimera graph: fields h, couplers J, scale alpha.

    E(s) = alpha * (-sum_i h_i s_i - sum_(i,j) J_ij s_i s_j)

    Nominal (channel-transmitted) instances have h, J in {-1, +1}; control
    error perturbed instances hold arbitrary reals.
    """

    graph: ChimeraGraph
    h: dict[int, float]
    J: dict[tuple[int, int], float]
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if set(self.h) != set(self.graph.spins):
            raise ValueError("h must be defined on exactly the active spins")
        if set(self.J) != set(self.graph.edges):
            raise ValueError("J must be defined on exactly the graph edges")

    def is_nominal(self) -> bool:
        return all(v in (-1.0, 1.0) for v in self.h.values()) and all(
            v in (-1.0, 1.0) for v in self.J.values()
        )

    def h_vector(self) -> np.ndarray:
        return np.array([self.h[s] for s in self.graph.spins], dtype=float)

    def j_vector(self) -> np.ndarray:
        return np.array([self.J[e] for e in self.graph.edges], dtype=float)

    @staticmethod
    def from_vectors(graph: ChimeraGraph, h: np.ndarray, j: np.ndarray,
                     alpha: float = 1.0) -> "Hamiltonian":
        return Hamiltonian(
            graph,
            {s: float(h[t]) for t, s in enumerate(graph.spins)},
            {e: float(j[t]) for t, e in enumerate(graph.edges)},
            alpha,
        )

    @staticmethod
    def uniform(graph: ChimeraGraph, h: float = 1.0, j: float = 1.0,
                alpha: float = 1.0) -> "Hamiltonian":
        return Hamiltonian(
            graph,
            {s: float(h) for s in graph.spins},
            {e: float(j) for e in graph.edges},
            alpha,
        )


@dataclass(frozen=True)
class SpinConfig:
    """One +-1 assignment to every active spin of a graph."""

    spins: dict[int, int]

    def vector(self, graph: ChimeraGraph) -> np.ndarray:
        return np.array([self.spins[s] for s in graph.spins], dtype=float)

    @staticmethod
    def from_vector(graph: ChimeraGraph, v: np.ndarray) -> "SpinConfig":
        return SpinConfig({s: int(v[t]) for t, s in enumerate(graph.spins)})


def build_chimera(L: int, excluded: set[int] | frozenset[int] = frozenset(),
                  K: int = 4) -> ChimeraGraph:
    """Build an L x L Chimera graph, dropping excluded spins entirely.

    Excluded spins lose their fields and all incident edges. Edge count with
    no exclusions is 16 L^2 + 8 L (L - 1) for K = 4.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if K != 4:
        raise ValueError("only K = 4 cells are supported")
    n_total = 2 * K * L * L
    excluded = frozenset(int(i) for i in excluded)
    for i in excluded:
        if not 0 <= i < n_total:
            raise ValueError(f"excluded spin {i} out of range [0, {n_total})")

    def idx(x: int, y: int, u: int, k: int) -> int:
        return 2 * K * (y * L + x) + K * u + k

    edges: list[tuple[int, int]] = []
    for y in range(L):
        for x in range(L):
            for a in range(K):
                for b in range(K):
                    edges.append((idx(x, y, 0, a), idx(x, y, 1, b)))
            if y + 1 < L:
                for k in range(K):
                    edges.append((idx(x, y, 0, k), idx(x, y + 1, 0, k)))
            if x + 1 < L:
                for k in range(K):
                    edges.append((idx(x, y, 1, k), idx(x + 1, y, 1, k)))
    spins = tuple(s for s in range(n_total) if s not in excluded)
    kept = tuple(
        sorted((min(a, b), max(a, b)) for a, b in edges
               if a not in excluded and b not in excluded)
    )
    return ChimeraGraph(L=L, K=K, excluded=excluded, spins=spins, edges=kept)


def truncated_cell() -> ChimeraGraph:
    """Single unit cell with one spin removed from each side (a K_{3,3})."""
    return build_chimera(1, excluded={3, 7})


# Canonical edge order of the full single cell, used by cell canonicalization.
CELL_EDGES: tuple[tuple[int, int], ...] = build_chimera(1).edges


def energy(H: Hamiltonian, s: SpinConfig) -> float:
    """Ising energy alpha * (-sum h_i s_i - sum J_ij s_i s_j)."""
    if set(s.spins) != set(H.graph.spins):
        raise ValueError("configuration does not match the graph's spins")
    e = -sum(H.h[i] * s.spins[i] for i in H.graph.spins)
    e -= sum(H.J[i, j] * s.spins[i] * s.spins[j] for i, j in H.graph.edges)
    return H.alpha * e


def gauge_transform(H: Hamiltonian, flip: set[int] | frozenset[int]) -> Hamiltonian:
    """Negate h on `flip` and J on edges with exactly one endpoint in `flip`.

    The energy spectrum is preserved: E'(s') = E(s) for s'_i = -s_i on flip.
    """
    flip = frozenset(flip)
    if not flip <= set(H.graph.spins):
        raise ValueError("flip set contains non-active spin indices")
    h = {i: -v if i in flip else v for i, v in H.h.items()}
    J = {
        (i, j): -v if ((i in flip) != (j in flip)) else v
        for (i, j), v in H.J.items()
    }
    return Hamiltonian(H.graph, h, J, H.alpha)


def unit_cell_automorphisms() -> list[tuple[int, ...]]:
    """All 1152 automorphisms of the K_{4,4} unit cell, as spin permutations.

    Elements are permutations of {0..7}: any permutation within the side-0
    set {0..3}, any within the side-1 set {4..7}, optionally composed with
    the side swap. Group order |S4 x S4 x Z2| = 24 * 24 * 2 = 1152.
    """
    perms: list[tuple[int, ...]] = []
    for p_left in itertools.permutations(range(4)):
        for p_right in itertools.permutations(range(4)):
            perms.append(tuple(p_left) + tuple(4 + r for r in p_right))
            perms.append(tuple(4 + r for r in p_right) + tuple(p_left))
    return perms


def _edge_permutations(perms: list[tuple[int, ...]]) -> np.ndarray:
    """Gather table G with G[g, new_edge_index] = old_edge_index under perm g."""
    edge_index = {e: t for t, e in enumerate(CELL_EDGES)}
    G = np.empty((len(perms), len(CELL_EDGES)), dtype=np.int64)
    for g, p in enumerate(perms):
        for t, (i, j) in enumerate(CELL_EDGES):
            a, b = p[i], p[j]
            G[g, edge_index[(min(a, b), max(a, b))]] = t
    return G


_WORD_WEIGHTS = (1 << np.arange(15, -1, -1)).astype(np.int64)


def _pack_word(signs: np.ndarray) -> np.ndarray:
    """Pack +-1 sign rows into 16-bit ints; +1 -> bit 0, edge 0 is the MSB."""
    bits = (signs < 0).astype(np.int64)
    return bits @ _WORD_WEIGHTS


def _unpack_word(word: int) -> tuple[int, ...]:
    bits = (word >> np.arange(15, -1, -1)) & 1
    return tuple(1 - 2 * int(b) for b in bits)


@dataclass(frozen=True)
class CanonicalCell:
    """Result of single-cell canonicalization.

    `word` packs the coupler signs of the canonical representative over the
    canonical edge order (+1 -> 0 bit, edge 0 most significant). `flip` is the
    gauge applied to make all fields +1, `perm` the cell automorphism that
    attains the lexicographic minimum.
    """

    word: int
    signs: tuple[int, ...]
    flip: frozenset[int]
    perm: tuple[int, ...]


def canonicalize_cell(H: Hamiltonian) -> CanonicalCell:
    """Canonical form of a nominal single-cell instance under gauge + symmetry.

    Gauge-fixes all fields to +1 (flipping spins with h = -1), then minimizes
    the packed coupler-sign word over the 1152 cell automorphisms. Two
    instances canonicalize equal iff related by a gauge and an automorphism.
    """
    if H.graph.L != 1 or H.graph.excluded:
        raise ValueError("canonicalize_cell requires a full single unit cell")
    if not H.is_nominal():
        raise ValueError("canonicalize_cell requires h, J in {-1, +1}")
    flip = frozenset(i for i in H.graph.spins if H.h[i] == -1)
    fixed = gauge_transform(H, flip)
    signs = np.array([fixed.J[e] for e in CELL_EDGES], dtype=np.int64)
    perms = unit_cell_automorphisms()
    G = _edge_permutations(perms)
    words = _pack_word(signs[G])  # word of every automorphism image
    g_best = int(np.argmin(words))
    word = int(words[g_best])
    return CanonicalCell(
        word=word,
        signs=_unpack_word(word),
        flip=flip,
        perm=perms[g_best],
    )


def enumerate_cell_classes() -> tuple[int, dict[int, int], np.ndarray]:
    """Orbit enumeration of all 2^16 gauge-fixed cell coupler words.

    Returns (class count, orbit-size histogram {orbit size: number of
    orbits}, canonical word of every input word). The group is the full
    order-1152 cell automorphism group acting on the 16 coupler signs.
    """
    perms = unit_cell_automorphisms()
    G = _edge_permutations(perms)
    n = 1 << 16
    words = np.arange(n, dtype=np.int64)
    bits = ((words[:, None] >> np.arange(15, -1, -1)[None, :]) & 1).astype(np.int8)
    canonical = words.copy()
    for g in range(len(perms)):
        permuted = bits[:, G[g]].astype(np.int64) @ _WORD_WEIGHTS
        np.minimum(canonical, permuted, out=canonical)
    uniq, counts = np.unique(canonical, return_counts=True)
    hist: dict[int, int] = {}
    for c in counts:
        hist[int(c)] = hist.get(int(c), 0) + 1
    return len(uniq), hist, canonical


def cell_from_word(word: int, alpha: float = 1.0) -> Hamiltonian:
    """Gauge-fixed single-cell instance (all h = +1) with the given word."""
    graph = build_chimera(1)
    signs = _unpack_word(word)
    return Hamiltonian(
        graph,
        {s: 1.0 for s in graph.spins},
        {e: float(signs[t]) for t, e in enumerate(CELL_EDGES)},
        alpha,
    )


def format_hamiltonian(H: Hamiltonian) -> str:
    """Serialize to the line-oriented text format."""
    lines = [f"chimera L={H.graph.L} K={H.graph.K}"]
    if H.graph.excluded:
        lines.append("exclude " + " ".join(str(i) for i in sorted(H.graph.excluded)))
    lines.append(f"alpha {H.alpha!r}")
    for s in H.graph.spins:
        lines.append(f"h {s} {H.h[s]!r}")
    for i, j in H.graph.edges:
        lines.append(f"J {i} {j} {H.J[i, j]!r}")
    return "\n".join(lines) + "\n"


def parse_hamiltonian(text: str) -> Hamiltonian:
    """Parse the line-oriented Hamiltonian format.

    Rejects duplicate or missing h/J entries, edges not in the graph, and
    malformed lines. Line numbers are reported in error messages.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    body = [(no + 1, ln) for no, ln in enumerate(lines) if ln and not ln.startswith("#")]
    if not body:
        raise FormatError("empty Hamiltonian file")
    no, head = body[0]
    parts = head.split()
    if len(parts) != 3 or parts[0] != "chimera":
        raise FormatError(f"line {no}: expected 'chimera L=<int> K=4'")
    try:
        L = int(parts[1].removeprefix("L="))
        K = int(parts[2].removeprefix("K="))
    except ValueError as exc:
        raise FormatError(f"line {no}: bad chimera header") from exc

    excluded: set[int] = set()
    alpha: float | None = None
    h: dict[int, float] = {}
    J: dict[tuple[int, int], float] = {}
    for no, ln in body[1:]:
        tok = ln.split()
        try:
            if tok[0] == "exclude":
                if excluded:
                    raise FormatError(f"line {no}: duplicate exclude line")
                excluded = {int(t) for t in tok[1:]}
            elif tok[0] == "alpha":
                if alpha is not None:
                    raise FormatError(f"line {no}: duplicate alpha line")
                alpha = float(tok[1])
            elif tok[0] == "h":
                i = int(tok[1])
                if i in h:
                    raise FormatError(f"line {no}: duplicate h entry for spin {i}")
                h[i] = float(tok[2])
            elif tok[0] == "J":
                i, j = int(tok[1]), int(tok[2])
                if i >= j:
                    raise FormatError(f"line {no}: J requires i < j")
                if (i, j) in J:
                    raise FormatError(f"line {no}: duplicate J entry for edge {(i, j)}")
                J[i, j] = float(tok[3])
            else:
                raise FormatError(f"line {no}: unknown directive {tok[0]!r}")
        except (IndexError, ValueError) as exc:
            raise FormatError(f"line {no}: malformed entry {ln!r}") from exc

    graph = build_chimera(L, excluded, K)
    if alpha is None:
        raise FormatError("missing alpha line")
    missing_h = set(graph.spins) - set(h)
    extra_h = set(h) - set(graph.spins)
    if missing_h or extra_h:
        raise FormatError(f"h entries missing {sorted(missing_h)}, extra {sorted(extra_h)}")
    missing_j = set(graph.edges) - set(J)
    extra_j = set(J) - set(graph.edges)
    if missing_j or extra_j:
        raise FormatError(f"J entries missing {sorted(missing_j)}, extra {sorted(extra_j)}")
    return Hamiltonian(graph, h, J, alpha)
