"""Iterated-function-system combinatorics for the supported fractals.

Builds the level-m graph approximations Gamma_m = (V_m, E_m) of the unit
interval and the Sierpinski gasket: vertex addressing by words of map
indices, exact gluing of shared cell corners, edge and cell lists,
boundary sets, and a planar embedding.

Both supported fractals have the "complete-graph junction" structure:
every pair of distinct contractions shares exactly one point,
F_i(q_j) = F_j(q_i), and each map fixes its own corner, F_i(q_i) = q_i.
The canonicalization below relies on exactly these two identities, so it
is shared by both fractals and stays exact (pure word arithmetic, no
floating-point coordinate matching).
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import ResourceCapError

LEVEL_CAP = 10

Word = tuple[int, ...]


class FractalKind(str, Enum):
    INTERVAL = "interval"
    SIERPINSKI_GASKET = "sierpinski_gasket"


class BoundaryCondition(str, Enum):
    NEUMANN = "neumann"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class FractalSpec:
    """Self-similar structure data: maps, energy renormalizers, measure weights.

    r[i] is the energy renormalizer of map i (regular harmonic structure,
    0 < r_i < 1); mu[i] is the measure weight, sum(mu) == 1 exactly.
    Both are stored as exact fractions.
    """

    kind: FractalKind
    num_maps: int
    r: tuple[Fraction, ...]
    mu: tuple[Fraction, ...]
    v0_size: int
    corner_coords: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.r) != self.num_maps or len(self.mu) != self.num_maps:
            raise ValueError("r and mu must have one entry per map")
        if sum(self.mu) != 1:
            raise ValueError("measure weights must sum to 1 exactly")
        if not all(0 < ri < 1 for ri in self.r):
            raise ValueError("energy renormalizers must lie in (0, 1)")


def interval_spec() -> FractalSpec:
    """Unit interval: F_0(x) = x/2, F_1(x) = x/2 + 1/2, V_0 = {0, 1}."""
    return FractalSpec(
        kind=FractalKind.INTERVAL,
        num_maps=2,
        r=(Fraction(1, 2), Fraction(1, 2)),
        mu=(Fraction(1, 2), Fraction(1, 2)),
        v0_size=2,
        corner_coords=((0.0, 0.0), (1.0, 0.0)),
    )


def gasket_spec() -> FractalSpec:
    """Sierpinski gasket: three midpoint maps, r_i = 3/5, mu_i = 1/3."""
    return FractalSpec(
        kind=FractalKind.SIERPINSKI_GASKET,
        num_maps=3,
        r=(Fraction(3, 5),) * 3,
        mu=(Fraction(1, 3),) * 3,
        v0_size=3,
        corner_coords=((0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3.0) / 2.0)),
    )


def spec_for(kind: FractalKind | str) -> FractalSpec:
    kind = FractalKind(kind)
    return interval_spec() if kind is FractalKind.INTERVAL else gasket_spec()


@dataclass(frozen=True, order=True)
class VertexId:
    """Canonical address of a point of V_m: word of map indices plus corner.

    The word always has length m, padded with repeats of the corner index
    (F_i fixes q_i, so padding does not move the point). `canonical` marks
    addresses already in canonical form; `canonicalize` is idempotent.
    """

    word: Word
    corner: int
    canonical: bool = field(default=True, compare=False)

    @property
    def level(self) -> int:
        return len(self.word)


def canonicalize(word: Word, corner: int) -> VertexId:
    """Reduce an address to the canonical representative of its point.

    Two rules generate all identifications at a fixed level:
      * trailing repeats of the corner collapse (F_i q_i = q_i), and
      * a junction has two reduced addresses, (nu+(i,), j) and
        (nu+(j,), i); the lexicographically smaller one wins.
    The reduced word is then padded back to the full level.
    """
    m = len(word)
    reduced = list(word)
    while reduced and reduced[-1] == corner:
        reduced.pop()
    if reduced:
        last = reduced[-1]
        alt = (tuple(reduced[:-1]) + (corner,), last)
        cand = (tuple(reduced), corner)
        rword, rcorner = min(cand, alt)
    else:
        rword, rcorner = (), corner
    full = rword + (rcorner,) * (m - len(rword))
    return VertexId(full, rcorner)


@dataclass(frozen=True)
class ApproxGraph:
    """The level-m graph Gamma_m with cells, boundary set and embedding."""

    spec: FractalSpec
    level: int
    vertices: tuple[VertexId, ...]
    index: dict[VertexId, int]
    edges: np.ndarray          # (|E|, 2) int, each row sorted
    edge_cell: np.ndarray      # (|E|,) index of the unique cell containing the edge
    boundary: frozenset[int]
    boundary_condition: BoundaryCondition
    cells: tuple[tuple[Word, tuple[int, ...]], ...]
    vertex_cells: tuple[tuple[int, ...], ...]   # cells containing each vertex
    coords: np.ndarray         # (|V|, 2) float
    adjacency: tuple[tuple[int, ...], ...]

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degree(self, x: int) -> int:
        return len(self.adjacency[x])

    def corner_index(self, corner: int) -> int:
        """Index of the V_0 corner q_corner inside V_m."""
        return self.index[canonicalize((corner,) * self.level, corner)]

    def embed_point(self, word: Word, corner: int) -> int:
        """Index at this level of the point F_word(q_corner), len(word) <= level."""
        pad = word + (corner,) * (self.level - len(word))
        return self.index[canonicalize(pad, corner)]


def _point_coords(spec: FractalSpec, word: Word, corner: int) -> tuple[float, float]:
    x, y = spec.corner_coords[corner]
    for i in reversed(word):
        qx, qy = spec.corner_coords[i]
        x, y = (x + qx) / 2.0, (y + qy) / 2.0
    return x, y


def build_graph(
    spec: FractalSpec,
    level: int,
    boundary: BoundaryCondition | str = BoundaryCondition.NEUMANN,
    level_cap: int = LEVEL_CAP,
) -> ApproxGraph:
    """Construct Gamma_m with deterministic vertex indexing.

    Vertices are sorted lexicographically by (canonical word, corner), so
    two builds at the same level index identically and every vertex of
    V_m keeps a canonical identity inside V_n for n > m.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if level > level_cap:
        raise ResourceCapError("approximation level too deep", level, level_cap)
    boundary = BoundaryCondition(boundary)

    corners = range(spec.v0_size)
    seen: set[VertexId] = set()
    for word in itertools.product(range(spec.num_maps), repeat=level):
        for c in corners:
            seen.add(canonicalize(word, c))
    vertices = tuple(sorted(seen))
    index = {v: i for i, v in enumerate(vertices)}

    cells = []
    vertex_cells: list[list[int]] = [[] for _ in vertices]
    edge_rows: list[tuple[int, int]] = []
    edge_cell: list[int] = []
    edge_seen: set[tuple[int, int]] = set()
    for ci, word in enumerate(itertools.product(range(spec.num_maps), repeat=level)):
        cell_corners = tuple(index[canonicalize(word, c)] for c in corners)
        cells.append((word, cell_corners))
        for v in cell_corners:
            vertex_cells[v].append(ci)
        for a, b in itertools.combinations(cell_corners, 2):
            e = (a, b) if a < b else (b, a)
            if e in edge_seen:
                raise AssertionError(f"edge {e} generated by two cells")
            edge_seen.add(e)
            edge_rows.append(e)
            edge_cell.append(ci)

    order = sorted(range(len(edge_rows)), key=lambda k: edge_rows[k])
    edges = np.array([edge_rows[k] for k in order], dtype=np.int64)
    edge_cell_arr = np.array([edge_cell[k] for k in order], dtype=np.int64)

    adjacency: list[list[int]] = [[] for _ in vertices]
    for a, b in edges:
        adjacency[a].append(int(b))
        adjacency[b].append(int(a))

    if boundary is BoundaryCondition.DIRICHLET:
        bset = frozenset(index[canonicalize((c,) * level, c)] for c in corners)
    else:
        bset = frozenset()

    coords = np.array(
        [_point_coords(spec, v.word, v.corner) for v in vertices], dtype=float
    )

    return ApproxGraph(
        spec=spec,
        level=level,
        vertices=vertices,
        index=index,
        edges=edges,
        edge_cell=edge_cell_arr,
        boundary=bset,
        boundary_condition=boundary,
        cells=tuple(cells),
        vertex_cells=tuple(tuple(cs) for cs in vertex_cells),
        coords=coords,
        adjacency=tuple(tuple(sorted(a)) for a in adjacency),
    )


def cell_star(g: ApproxGraph, x: int) -> set[int]:
    """Indices of the cells containing vertex x (the support of its tent)."""
    if not 0 <= x < g.num_vertices:
        raise IndexError(f"vertex index {x} out of range")
    return set(g.vertex_cells[x])


def graph_distance(g: ApproxGraph, x: int, y: int) -> int:
    """Minimum edge count between x and y (breadth-first search)."""
    if not (0 <= x < g.num_vertices and 0 <= y < g.num_vertices):
        raise IndexError("vertex index out of range")
    if x == y:
        return 0
    dist = {x: 0}
    q = deque([x])
    while q:
        v = q.popleft()
        for w in g.adjacency[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                if w == y:
                    return dist[w]
                q.append(w)
    raise RuntimeError("graph is not connected")


def graph_distances_from(g: ApproxGraph, x: int) -> np.ndarray:
    """Hop distances from x to every vertex."""
    dist = np.full(g.num_vertices, -1, dtype=np.int64)
    dist[x] = 0
    q = deque([x])
    while q:
        v = q.popleft()
        for w in g.adjacency[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                q.append(w)
    return dist


def metric_distance(g: ApproxGraph, x: int, y: int) -> float:
    """Distance used in kernel experiments.

    Hop distance rescaled by 2^-m on the interval; Euclidean distance of
    the standard planar embedding on the gasket.
    """
    if g.spec.kind is FractalKind.INTERVAL:
        return graph_distance(g, x, y) * 2.0 ** (-g.level)
    return float(np.hypot(*(g.coords[x] - g.coords[y])))


def embed_indices(coarse: ApproxGraph, fine: ApproxGraph) -> np.ndarray:
    """Index of each V_m vertex inside V_n (m <= n, same spec)."""
    if fine.level < coarse.level:
        raise ValueError("fine graph must have level >= coarse graph")
    if fine.spec.kind is not coarse.spec.kind:
        raise ValueError("graphs belong to different fractals")
    return np.array(
        [fine.embed_point(v.word, v.corner) for v in coarse.vertices],
        dtype=np.int64,
    )


def cell_pullback_indices(g_coarse: ApproxGraph, g_fine: ApproxGraph, i: int) -> np.ndarray:
    """For u on V_{m+1}, indices realizing u o F_i on V_m.

    Entry x is the fine index of F_i(p_x) where p_x is coarse vertex x,
    so (u o F_i)(x) = u[result[x]].
    """
    if g_fine.level != g_coarse.level + 1:
        raise ValueError("fine graph must be one level below coarse graph")
    return np.array(
        [g_fine.index[canonicalize((i,) + v.word, v.corner)] for v in g_coarse.vertices],
        dtype=np.int64,
    )


GRAPH_SCHEMA_VERSION = 1


def graph_to_json(g: ApproxGraph) -> str:
    """Serialize to the versioned JSON cache/export format."""
    doc = {
        "schema_version": GRAPH_SCHEMA_VERSION,
        "kind": g.spec.kind.value,
        "level": g.level,
        "boundary_condition": g.boundary_condition.value,
        "vertices": [{"word": list(v.word), "corner": v.corner} for v in g.vertices],
        "edges": [[int(a), int(b)] for a, b in g.edges],
        "boundary": sorted(g.boundary),
        "coords": [[float(x), float(y)] for x, y in g.coords],
    }
    return json.dumps(doc, indent=2)


def graph_from_json(text: str) -> ApproxGraph:
    """Rebuild a graph from its JSON document and verify it matches."""
    doc = json.loads(text)
    if doc.get("schema_version") != GRAPH_SCHEMA_VERSION:
        raise ValueError(f"unsupported graph schema version {doc.get('schema_version')}")
    spec = spec_for(doc["kind"])
    g = build_graph(spec, doc["level"], doc["boundary_condition"])
    stored = [(tuple(v["word"]), v["corner"]) for v in doc["vertices"]]
    built = [(v.word, v.corner) for v in g.vertices]
    if stored != built:
        raise ValueError("stored vertex list does not match a fresh build")
    if [[int(a), int(b)] for a, b in g.edges] != doc["edges"]:
        raise ValueError("stored edge list does not match a fresh build")
    return g
