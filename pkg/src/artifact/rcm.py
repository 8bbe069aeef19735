"""Critical random-cluster model on rectangular lattice polygons.

A polygon is the grid {0..W} x {0..H} with 2N marked boundary vertices.  The
boundary cycle runs counterclockwise from the top-left corner (down the left
side first), so offsets along it agree with the arc-length convention of
:mod:`artifact.conformal`.  Boundary arcs alternate: the arc from x_{2r-1} to
x_{2r} is wired, the next one is free.

Boundary conditions are realized by contraction.  For the connectivity
pattern every wired arc becomes one vertex; for the measure with boundary
condition beta the arcs are further merged according to the non-crossing
partition of beta.  Boundary edges lying along a wired arc are open by
definition and are not variables; every other lattice edge is a variable.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numba
import numpy as np

from .conformal import RectangleSpec
from .errors import CapacityError, DimensionError, InvariantError, PreconditionError, ValidationError
from .linkpat import (
    LinkPattern,
    NonCrossingPartition,
    enumerate_patterns,
    partition_to_pattern,
    pattern_to_partition,
)
from .predict import CrossingDistribution, normalized_distribution

MAX_ENUMERATION_EDGES = 24
MAX_ARCS = 6
MIN_BURN_IN = 1000
BATCH_SWEEPS = 256


# ----------------------------------------------------------------------------
# polygons


def boundary_cycle(width: int, height: int) -> list[tuple[int, int]]:
    """Boundary vertices counterclockwise from the top-left corner."""
    cycle = [(0, height - j) for j in range(height)]
    cycle += [(i, 0) for i in range(width)]
    cycle += [(width, j) for j in range(height)]
    cycle += [(width - i, height) for i in range(width)]
    return cycle


def corner_offsets(width: int, height: int) -> tuple[int, int, int, int]:
    """Boundary offsets of the corners, starting at the top-left one."""
    return (0, height, height + width, 2 * height + width)


@dataclass(frozen=True)
class LatticePolygon:
    """Rectangular lattice polygon with alternating wired and free boundary arcs.

    ``marked`` holds boundary offsets (indices into :attr:`boundary`) of the
    2N marked vertices in counterclockwise order; ``mesh`` is the lattice
    spacing used when reporting continuum coordinates.
    """

    width: int
    height: int
    marked: tuple[int, ...]
    mesh: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError("polygon needs positive width and height")
        n_marked = len(self.marked)
        if n_marked == 0 or n_marked % 2:
            raise ValidationError("need an even, non-zero number of marked points")
        if n_marked // 2 > MAX_ARCS:
            raise CapacityError(f"at most {MAX_ARCS} wired arcs are supported")
        length = len(self.boundary)
        if any(not 0 <= m < length for m in self.marked):
            raise ValidationError(f"marked offsets must lie in 0..{length - 1}")
        if len(set(self.marked)) != n_marked:
            raise ValidationError("marked points must be distinct")
        cyclic = list(self.marked[1:]) + [self.marked[0]]
        descents = sum(1 for a, b in zip(self.marked, cyclic) if b <= a)
        if n_marked > 1 and descents != 1:
            raise ValidationError("marked points are not in counterclockwise order")

    @property
    def n_links(self) -> int:
        return len(self.marked) // 2

    @cached_property
    def boundary(self) -> tuple[tuple[int, int], ...]:
        return tuple(boundary_cycle(self.width, self.height))

    def vertex_id(self, i: int, j: int) -> int:
        return j * (self.width + 1) + i

    @property
    def n_vertices(self) -> int:
        return (self.width + 1) * (self.height + 1)

    @cached_property
    def arcs(self) -> tuple[tuple[int, ...], ...]:
        """Boundary offsets of each wired arc, endpoints included."""
        length = len(self.boundary)
        out = []
        for r in range(self.n_links):
            start, end = self.marked[2 * r], self.marked[2 * r + 1]
            span = (end - start) % length
            out.append(tuple((start + t) % length for t in range(span + 1)))
        return tuple(out)

    @cached_property
    def free_arcs(self) -> tuple[tuple[int, ...], ...]:
        """Boundary offsets strictly between x_{2r} and x_{2r+1}."""
        length = len(self.boundary)
        out = []
        for r in range(self.n_links):
            start = self.marked[2 * r + 1]
            end = self.marked[(2 * r + 2) % len(self.marked)]
            span = (end - start) % length
            out.append(tuple((start + t) % length for t in range(1, span)))
        return tuple(out)

    @cached_property
    def arc_of_vertex(self) -> np.ndarray:
        """Wired arc index (0-based) of every vertex, -1 if not on a wired arc."""
        labels = np.full(self.n_vertices, -1, dtype=np.int64)
        for r, arc in enumerate(self.arcs):
            for offset in arc:
                labels[self.vertex_id(*self.boundary[offset])] = r
        return labels

    @cached_property
    def forced_edges(self) -> frozenset[tuple[int, int]]:
        """Boundary edges along wired arcs, as sorted vertex-id pairs."""
        out = set()
        for arc in self.arcs:
            for a, b in zip(arc, arc[1:]):
                u = self.vertex_id(*self.boundary[a])
                v = self.vertex_id(*self.boundary[b])
                out.add((min(u, v), max(u, v)))
        return frozenset(out)

    @cached_property
    def all_edges(self) -> np.ndarray:
        """Every lattice edge as a pair of vertex ids: horizontal edges first, then vertical."""
        edges = []
        for j in range(self.height + 1):
            for i in range(self.width):
                edges.append((self.vertex_id(i, j), self.vertex_id(i + 1, j)))
        for j in range(self.height):
            for i in range(self.width + 1):
                edges.append((self.vertex_id(i, j), self.vertex_id(i, j + 1)))
        return np.array(edges, dtype=np.int64)

    @cached_property
    def edges(self) -> np.ndarray:
        """Variable edges: all lattice edges except the forced ones."""
        keep = [tuple(e) not in self.forced_edges for e in self.all_edges.tolist()]
        return self.all_edges[np.array(keep, dtype=bool)]

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def coords(self, vertex: int) -> tuple[int, int]:
        return vertex % (self.width + 1), vertex // (self.width + 1)

    def marked_vertices(self) -> list[tuple[int, int]]:
        return [self.boundary[m] for m in self.marked]

    def rectangle_positions(self) -> tuple[float, ...]:
        """Marked points as arc lengths in lattice units, for the conformal module."""
        return tuple(float(m) for m in self.marked)


def continuum_rectangle(poly: LatticePolygon, dual_margin: bool = True) -> RectangleSpec:
    """Continuum rectangle (in lattice units) matched to the polygon.

    The dual boundary of a free arc runs half a lattice step outside the
    polygon, so with ``dual_margin`` the rectangle is [0, W] x [-1/2, H + 1/2]:
    corners go to corners and other marked vertices keep their coordinate
    along their side.  This matches corner-marked polygons whose horizontal
    sides are free; without the margin the rectangle is the lattice one.
    """
    w, h = poly.width, poly.height
    if not dual_margin:
        return RectangleSpec(w, h, poly.rectangle_positions())
    tall = h + 1.0
    positions = []
    for i, j in poly.marked_vertices():
        if (i, j) == (0, h):
            s = 0.0
        elif (i, j) == (0, 0):
            s = tall
        elif (i, j) == (w, 0):
            s = tall + w
        elif (i, j) == (w, h):
            s = 2.0 * tall + w
        elif i == 0:
            s = h + 0.5 - j
        elif j == 0:
            s = tall + i
        elif i == w:
            s = tall + w + j + 0.5
        else:
            s = 2.0 * tall + w + (w - i)
        positions.append(s)
    return RectangleSpec(w, tall, positions)


def build_polygon(width: int, height: int, marked_positions: Sequence[int], mesh: float = 1.0) -> LatticePolygon:
    return LatticePolygon(int(width), int(height), tuple(int(m) for m in marked_positions), float(mesh))


# ----------------------------------------------------------------------------
# contracted graphs


@dataclass(frozen=True)
class QuotientGraph:
    """Graph after contracting the wired arcs.

    Nodes 0..n_groups-1 are the contracted arc groups; node n_groups + v stands
    for the non-wired vertex v.  ``edges`` lists node pairs in the order of the
    polygon's variable edges.
    """

    n_nodes: int
    n_groups: int
    edges: np.ndarray
    group_of_arc: tuple[int, ...]


def _contract(poly: LatticePolygon, group_of_arc: Sequence[int]) -> QuotientGraph:
    n_groups = max(group_of_arc) + 1
    node = np.empty(poly.n_vertices, dtype=np.int64)
    arcs = poly.arc_of_vertex
    for v in range(poly.n_vertices):
        node[v] = group_of_arc[arcs[v]] if arcs[v] >= 0 else n_groups + v
    # compress node ids so that unused vertex ids do not count as clusters
    used = np.unique(np.concatenate([node, np.arange(n_groups)]))
    remap = -np.ones(n_groups + poly.n_vertices, dtype=np.int64)
    remap[used] = np.arange(used.size)
    edges = remap[node[poly.edges]]
    return QuotientGraph(int(used.size), n_groups, edges, tuple(group_of_arc))


def arc_graph(poly: LatticePolygon) -> QuotientGraph:
    """Each wired arc contracted on its own (no external wiring)."""
    return _contract(poly, list(range(poly.n_links)))


def quotient_graph(poly: LatticePolygon, beta: LinkPattern) -> QuotientGraph:
    """Wired arcs contracted and merged according to the partition of beta."""
    if beta.n_links != poly.n_links:
        raise DimensionError(f"{beta} does not fit a polygon with {poly.n_links} wired arcs")
    partition = pattern_to_partition(beta)
    group = [0] * poly.n_links
    for g, block in enumerate(partition.blocks):
        for r in block:
            group[r - 1] = g
    return _contract(poly, group)


def partition_lookup(n_arcs: int) -> np.ndarray:
    """Map from restricted-growth codes of arc partitions to canonical pattern indices.

    Crossing partitions map to -1.
    """
    table = -np.ones(n_arcs**n_arcs, dtype=np.int64)
    patterns = enumerate_patterns(n_arcs)
    for index, pattern in enumerate(patterns):
        partition = pattern_to_partition(pattern)
        labels = [0] * n_arcs
        for b, block in enumerate(partition.blocks):
            for r in block:
                labels[r - 1] = b
        table[_growth_code(labels, n_arcs)] = index
    return table


def _growth_code(labels: Sequence[int], n_arcs: int) -> int:
    relabel: dict[int, int] = {}
    code = 0
    for label in labels:
        relabel.setdefault(label, len(relabel))
        code = code * n_arcs + relabel[label]
    return code


# ----------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True, nogil=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@numba.njit(cache=True, nogil=True)
def _label_clusters(n_nodes, edges, state, parent):
    """Union-find (by size, with path compression) over open edges; returns the number of clusters.

    ``parent`` needs 2 * n_nodes entries; the upper half holds the tree sizes.
    """
    for i in range(n_nodes):
        parent[i] = i
        parent[n_nodes + i] = 1
    count = n_nodes
    for e in range(edges.shape[0]):
        if state[e]:
            a = _find(parent, edges[e, 0])
            b = _find(parent, edges[e, 1])
            if a != b:
                if parent[n_nodes + a] > parent[n_nodes + b]:
                    a, b = b, a
                parent[a] = b
                parent[n_nodes + b] += parent[n_nodes + a]
                count -= 1
    return count


@numba.njit(cache=True, nogil=True)
def _partition_code(n_arcs, parent, roots, labels):
    code = 0
    next_label = 0
    for r in range(n_arcs):
        root = _find(parent, r)
        label = -1
        for s in range(r):
            if roots[s] == root:
                label = labels[s]
                break
        if label < 0:
            label = next_label
            next_label += 1
        roots[r] = root
        labels[r] = label
        code = code * n_arcs + label
    return code


@numba.njit(cache=True, nogil=True)
def _enumerate_kernel(edges_arc, n_arc_nodes, edges_q, n_q, n_arcs, lookup, n_patterns):
    n_edges = edges_arc.shape[0]
    hist = np.zeros((n_patterns, n_edges + 1, n_q + 1), dtype=np.int64)
    state = np.zeros(n_edges, dtype=np.uint8)
    parent_a = np.empty(2 * n_arc_nodes, dtype=np.int64)
    parent_q = np.empty(2 * n_q, dtype=np.int64)
    roots = np.empty(n_arcs, dtype=np.int64)
    labels = np.empty(n_arcs, dtype=np.int64)
    for config in range(1 << n_edges):
        opened = 0
        for e in range(n_edges):
            bit = (config >> e) & 1
            state[e] = bit
            opened += bit
        _label_clusters(n_arc_nodes, edges_arc, state, parent_a)
        index = lookup[_partition_code(n_arcs, parent_a, roots, labels)]
        if index < 0:
            return hist, config
        clusters = _label_clusters(n_q, edges_q, state, parent_q)
        hist[index, opened, clusters] += 1
    return hist, -1


@numba.njit(cache=True, nogil=True)
def _sw_batch(edges_q, n_q, edges_arc, n_arc_nodes, n_arcs, lookup, state, p, u_edges, u_spins, out):
    """Swendsen-Wang sweeps; writes the connectivity index after each sweep into ``out``."""
    parent_q = np.empty(2 * n_q, dtype=np.int64)
    parent_a = np.empty(2 * n_arc_nodes, dtype=np.int64)
    spin = np.empty(n_q, dtype=np.uint8)
    roots = np.empty(n_arcs, dtype=np.int64)
    labels = np.empty(n_arcs, dtype=np.int64)
    for s in range(u_edges.shape[0]):
        _label_clusters(n_q, edges_q, state, parent_q)
        for v in range(n_q):
            spin[v] = 1 if u_spins[s, _find(parent_q, v)] < 0.5 else 0
        for e in range(edges_q.shape[0]):
            same = spin[edges_q[e, 0]] == spin[edges_q[e, 1]]
            state[e] = 1 if (same and u_edges[s, e] < p) else 0
        _label_clusters(n_arc_nodes, edges_arc, state, parent_a)
        out[s] = lookup[_partition_code(n_arcs, parent_a, roots, labels)]


@numba.njit(cache=True, nogil=True)
def _connected_without(n_q, adj_start, adj_edge, adj_node, state, skip, source, target, seen, stack):
    """Whether source and target are joined by open edges other than ``skip``."""
    if source == target:
        return True
    for i in range(n_q):
        seen[i] = 0
    top = 0
    stack[top] = source
    seen[source] = 1
    top += 1
    while top > 0:
        top -= 1
        v = stack[top]
        for k in range(adj_start[v], adj_start[v + 1]):
            e = adj_edge[k]
            if e == skip or not state[e]:
                continue
            w = adj_node[k]
            if w == target:
                return True
            if not seen[w]:
                seen[w] = 1
                stack[top] = w
                top += 1
    return False


@numba.njit(cache=True, nogil=True)
def _glauber_batch(
    edges_q, n_q, adj_start, adj_edge, adj_node, edges_arc, n_arc_nodes, n_arcs, lookup, state, p, q, u_edges, out
):
    """Heat-bath single-edge sweeps for the random-cluster measure at any q > 0."""
    seen = np.empty(n_q, dtype=np.uint8)
    stack = np.empty(n_q, dtype=np.int64)
    parent_a = np.empty(2 * n_arc_nodes, dtype=np.int64)
    roots = np.empty(n_arcs, dtype=np.int64)
    labels = np.empty(n_arcs, dtype=np.int64)
    bridge_open = p / (p + q * (1.0 - p))
    for s in range(u_edges.shape[0]):
        for e in range(edges_q.shape[0]):
            a, b = edges_q[e, 0], edges_q[e, 1]
            joined = _connected_without(n_q, adj_start, adj_edge, adj_node, state, e, a, b, seen, stack)
            threshold = p if joined else bridge_open
            state[e] = 1 if u_edges[s, e] < threshold else 0
        _label_clusters(n_arc_nodes, edges_arc, state, parent_a)
        out[s] = lookup[_partition_code(n_arcs, parent_a, roots, labels)]


# ----------------------------------------------------------------------------
# exact enumeration


def enumeration_histogram(poly: LatticePolygon, beta: LinkPattern) -> np.ndarray:
    """Counts of configurations by (connectivity index, open edges, clusters of the beta graph)."""
    if poly.n_edges > MAX_ENUMERATION_EDGES:
        raise CapacityError(
            f"{poly.n_edges} variable edges exceed the enumeration cap {MAX_ENUMERATION_EDGES}"
        )
    arcs = arc_graph(poly)
    quotient = quotient_graph(poly, beta)
    n = poly.n_links
    hist, bad = _enumerate_kernel(
        arcs.edges, arcs.n_nodes, quotient.edges, quotient.n_nodes, n, partition_lookup(n), len(enumerate_patterns(n))
    )
    if bad >= 0:
        raise InvariantError(f"configuration {bad} produced a crossing arc partition")
    return hist


def exact_distribution(poly: LatticePolygon, beta: LinkPattern, q: float, p: float) -> CrossingDistribution:
    """Exact law of the connectivity pattern by summing over all 2^|E| configurations."""
    if not q > 0:
        raise PreconditionError("q must be positive")
    if not 0.0 <= p <= 1.0:
        raise PreconditionError("p must lie in [0, 1]")
    hist = enumeration_histogram(poly, beta)
    n_edges = poly.n_edges
    opened = np.arange(n_edges + 1)
    bond_weight = np.power(p, opened) * np.power(1.0 - p, n_edges - opened)
    cluster_weight = np.power(float(q), np.arange(hist.shape[2]))
    weights = np.einsum("aok,o,k->a", hist.astype(float), bond_weight, cluster_weight)
    patterns = enumerate_patterns(poly.n_links)
    return normalized_distribution(beta, {pat: float(w) for pat, w in zip(patterns, weights)})


# ----------------------------------------------------------------------------
# configurations and connectivity


@dataclass(frozen=True)
class BondConfig:
    """Open flags of the variable edges and the sweep count that produced them."""

    open: np.ndarray
    generation: int = 0

    def __post_init__(self):
        object.__setattr__(self, "open", np.asarray(self.open, dtype=np.uint8))

    def check(self, poly: LatticePolygon) -> None:
        if self.open.shape != (poly.n_edges,):
            raise DimensionError(f"configuration has {self.open.size} entries, polygon has {poly.n_edges} edges")


def arc_partition(config: BondConfig, poly: LatticePolygon) -> NonCrossingPartition:
    """Partition of the wired arcs by connections inside the polygon."""
    config.check(poly)
    graph = arc_graph(poly)
    parent = np.empty(2 * graph.n_nodes, dtype=np.int64)
    _label_clusters(graph.n_nodes, graph.edges, config.open, parent)
    blocks: dict[int, list[int]] = {}
    for r in range(poly.n_links):
        blocks.setdefault(int(_find(parent, r)), []).append(r + 1)
    try:
        return NonCrossingPartition(poly.n_links, blocks.values())
    except ValidationError as exc:
        raise InvariantError(f"planar configuration gave a crossing partition: {exc}") from exc


def connectivity_pattern(config: BondConfig, poly: LatticePolygon, beta: LinkPattern | None = None) -> LinkPattern:
    """Connectivity pattern of the interfaces, from primal connections of the wired arcs."""
    if beta is not None and beta.n_links != poly.n_links:
        raise DimensionError("boundary pattern does not match the polygon")
    return partition_to_pattern(arc_partition(config, poly))


def cluster_count(config: BondConfig, poly: LatticePolygon, beta: LinkPattern) -> int:
    """Number of clusters of the beta-contracted graph."""
    config.check(poly)
    graph = quotient_graph(poly, beta)
    parent = np.empty(2 * graph.n_nodes, dtype=np.int64)
    return int(_label_clusters(graph.n_nodes, graph.edges, config.open, parent))


# ----------------------------------------------------------------------------
# interfaces on the medial lattice
#
# Doubled coordinates: vertex (i, j) sits at (2i, 2j), faces at odd-odd
# points, edge midpoints (the medial vertices) at mixed parity.  A walker at a
# midpoint remembers the quadrant (primal vertex, dual face) it arrived
# through.  Across an open edge it keeps the face and switches to the other
# endpoint; across a closed edge it keeps the vertex and switches face.
# Midpoints outside the polygon belong to fictitious outward edges of
# boundary vertices: open for wired vertices, closed for free ones.


@dataclass(frozen=True)
class MedialPath:
    """Interface between two marked points: medial midpoints in order of traversal."""

    start: int
    end: int
    midpoints: tuple[tuple[int, int], ...]

    def segments(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        pts = self.midpoints
        return [tuple(sorted((a, b))) for a, b in zip(pts, pts[1:])]


class MedialWalker:
    """Precomputed lookup tables for tracing interfaces in one polygon."""

    def __init__(self, poly: LatticePolygon):
        self.poly = poly
        w, h = poly.width, poly.height
        self.offset = 2
        shape = (2 * w + 5, 2 * h + 5)
        # edge state codes: -2 not a midpoint, -1 variable, 0 closed, 1 open
        self.base = np.full(shape, -2, dtype=np.int64)
        self.variable = np.full(shape, -1, dtype=np.int64)
        for e, (u, v) in enumerate(poly.edges.tolist()):
            self.variable[self._mid(u, v)] = e
            self.base[self._mid(u, v)] = -1
        for u, v in poly.forced_edges:
            self.base[self._mid(u, v)] = 1
        wired = poly.arc_of_vertex
        for offset, (i, j) in enumerate(poly.boundary):
            for di, dj in self._outward(i, j):
                point = (2 * i + di + self.offset, 2 * j + dj + self.offset)
                self.base[point] = 1 if wired[poly.vertex_id(i, j)] >= 0 else 0
        self.starts = [self._start(k) for k in range(2 * poly.n_links)]
        self.terminal = {start[0]: k for k, start in enumerate(self.starts)}

    def _mid(self, u: int, v: int) -> tuple[int, int]:
        (i1, j1), (i2, j2) = self.poly.coords(u), self.poly.coords(v)
        return (i1 + i2 + self.offset, j1 + j2 + self.offset)

    def _outward(self, i: int, j: int) -> list[tuple[int, int]]:
        out = []
        if i == 0:
            out.append((-1, 0))
        if i == self.poly.width:
            out.append((1, 0))
        if j == 0:
            out.append((0, -1))
        if j == self.poly.height:
            out.append((0, 1))
        return out

    def _start(self, k: int) -> tuple[tuple[int, int], tuple[int, int], tuple[int, int]]:
        """Outward midpoint of marked point k (0-based) on its free side, with the entry quadrant."""
        poly = self.poly
        cycle = poly.boundary
        offset = poly.marked[k]
        i, j = cycle[offset]
        if k % 2 == 0:  # start of a wired arc: the free arc precedes it
            pi, pj = cycle[(offset - 1) % len(cycle)]
            ti, tj = i - pi, j - pj
            side = (-ti, -tj)
        else:  # end of a wired arc: the free arc follows it
            ni, nj = cycle[(offset + 1) % len(cycle)]
            ti, tj = ni - i, nj - j
            side = (ti, tj)
        normal = (tj, -ti)
        mid = (2 * i + normal[0] + self.offset, 2 * j + normal[1] + self.offset)
        vertex = (2 * i + self.offset, 2 * j + self.offset)
        face = (mid[0] + side[0], mid[1] + side[1])
        return mid, vertex, face

    def trace(self, config: BondConfig) -> list[MedialPath]:
        config.check(self.poly)
        state = self.base.copy()
        mask = self.variable >= 0
        state[mask] = config.open[self.variable[mask]]
        paths = []
        done: set[int] = set()
        used_segments: set = set()
        limit = 4 * state.size
        for k in range(2 * self.poly.n_links):
            if k in done:
                continue
            mid, vertex, face = self.starts[k]
            points = [mid]
            steps = 0
            while True:
                nxt = (mid[0] + vertex[0] + face[0] - 2 * mid[0], mid[1] + vertex[1] + face[1] - 2 * mid[1])
                segment = (mid, nxt) if mid < nxt else (nxt, mid)
                if segment in used_segments:
                    raise InvariantError("medial segment traversed twice")
                used_segments.add(segment)
                mid = nxt
                points.append(mid)
                if mid in self.terminal and len(points) > 1:
                    end = self.terminal[mid]
                    break
                code = state[mid]
                if code < 0:
                    raise InvariantError(f"walker left the medial lattice at {mid}")
                if code == 1:
                    vertex = (2 * mid[0] - vertex[0], 2 * mid[1] - vertex[1])
                else:
                    face = (2 * mid[0] - face[0], 2 * mid[1] - face[1])
                steps += 1
                if steps > limit:
                    raise InvariantError("interface does not terminate")
            if end == k or end in done:
                raise InvariantError("interface closed on an already used marked point")
            done.update((k, end))
            shifted = tuple((a - self.offset, b - self.offset) for a, b in points)
            paths.append(MedialPath(k + 1, end + 1, shifted))
        return paths


def trace_interfaces(config: BondConfig, poly: LatticePolygon, walker: MedialWalker | None = None) -> list[MedialPath]:
    """The N interfaces of a configuration as medial paths between marked points."""
    walker = walker or MedialWalker(poly)
    return walker.trace(config)


def interface_pairing(paths: Iterable[MedialPath]) -> LinkPattern:
    return LinkPattern([(p.start, p.end) for p in paths])


# ----------------------------------------------------------------------------
# exploration path


@dataclass(frozen=True)
class ExplorationTrace:
    """Alternation of interfaces and external contours started at x_1.

    ``steps`` lists (kind, from, to) with kind "interface" or "external";
    ``medial`` concatenates the interface midpoints in order of traversal.
    """

    steps: tuple[tuple[str, int, int], ...]
    corners: tuple[int, ...]
    terminal: int
    medial: tuple[tuple[int, int], ...] = ()

    @property
    def visited(self) -> frozenset[int]:
        return frozenset(self.corners)


def exploration_corners(theta: LinkPattern, beta: LinkPattern) -> ExplorationTrace:
    """Corner sequence of the exploration path, from the two pairings alone."""
    if theta.n_links != beta.n_links:
        raise DimensionError("patterns have different numbers of links")
    target = beta.partner[1]
    k = 1
    corners = [1]
    steps = []
    for _ in range(2 * beta.n_links):
        nxt = theta.partner[k]
        steps.append(("interface", k, nxt))
        corners.append(nxt)
        if nxt == target:
            return ExplorationTrace(tuple(steps), tuple(corners), nxt)
        k = beta.partner[nxt]
        steps.append(("external", nxt, k))
        corners.append(k)
    raise InvariantError("exploration path did not terminate")


def exploration_path(
    config: BondConfig, poly: LatticePolygon, beta: LinkPattern, walker: MedialWalker | None = None
) -> ExplorationTrace:
    """Exploration path with the medial interfaces traced on the lattice."""
    paths = trace_interfaces(config, poly, walker)
    theta = interface_pairing(paths)
    by_start = {}
    for path in paths:
        by_start[path.start] = path.midpoints
        by_start[path.end] = path.midpoints[::-1]
    combinatorial = exploration_corners(theta, beta)
    medial: list[tuple[int, int]] = []
    for kind, a, _ in combinatorial.steps:
        if kind == "interface":
            medial.extend(by_start[a])
    return ExplorationTrace(combinatorial.steps, combinatorial.corners, combinatorial.terminal, tuple(medial))


def corner_visit_table(beta: LinkPattern) -> np.ndarray:
    """visits[a, k] = 1 if the exploration path passes marked point k+1 when the connectivity is pattern a."""
    patterns = enumerate_patterns(beta.n_links)
    table = np.zeros((len(patterns), 2 * beta.n_links), dtype=np.uint8)
    for a, theta in enumerate(patterns):
        for k in exploration_corners(theta, beta).visited:
            table[a, k - 1] = 1
    return table


# ----------------------------------------------------------------------------
# sampling


def critical_p(q: float) -> float:
    root = math.sqrt(q)
    return root / (1.0 + root)


@dataclass
class ChainState:
    """One Markov chain: its configuration, its random stream and its sweep count."""

    poly: LatticePolygon
    beta: LinkPattern
    p: float
    rng: np.random.Generator
    state: np.ndarray
    generation: int = 0
    dynamics: str = "sw"
    q: float = 2.0
    _tables: tuple = field(default=(), repr=False)

    def __post_init__(self):
        arcs = arc_graph(self.poly)
        quotient = quotient_graph(self.poly, self.beta)
        n = self.poly.n_links
        adjacency = _adjacency(quotient)
        self._tables = (quotient, arcs, n, partition_lookup(n), adjacency)

    def run(self, sweeps: int) -> np.ndarray:
        """Advance by ``sweeps`` sweeps and return the connectivity index after each one."""
        quotient, arcs, n, lookup, adjacency = self._tables
        out = np.empty(sweeps, dtype=np.int64)
        done = 0
        while done < sweeps:
            batch = min(BATCH_SWEEPS, sweeps - done)
            u_edges = self.rng.random((batch, self.poly.n_edges))
            if self.dynamics == "sw":
                u_spins = self.rng.random((batch, quotient.n_nodes))
                _sw_batch(
                    quotient.edges, quotient.n_nodes, arcs.edges, arcs.n_nodes, n, lookup,
                    self.state, self.p, u_edges, u_spins, out[done : done + batch],
                )
            else:
                start, adj_edge, adj_node = adjacency
                _glauber_batch(
                    quotient.edges, quotient.n_nodes, start, adj_edge, adj_node, arcs.edges, arcs.n_nodes,
                    n, lookup, self.state, self.p, self.q, u_edges, out[done : done + batch],
                )
            done += batch
        self.generation += sweeps
        if np.any(out < 0):
            raise InvariantError("sampled configuration produced a crossing arc partition")
        return out

    def config(self) -> BondConfig:
        return BondConfig(self.state.copy(), self.generation)


def _adjacency(graph: QuotientGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    degree = np.zeros(graph.n_nodes + 1, dtype=np.int64)
    for a, b in graph.edges.tolist():
        degree[a + 1] += 1
        degree[b + 1] += 1
    start = np.cumsum(degree)
    fill = start[:-1].copy()
    adj_edge = np.empty(start[-1], dtype=np.int64)
    adj_node = np.empty(start[-1], dtype=np.int64)
    for e, (a, b) in enumerate(graph.edges.tolist()):
        adj_edge[fill[a]], adj_node[fill[a]] = e, b
        fill[a] += 1
        adj_edge[fill[b]], adj_node[fill[b]] = e, a
        fill[b] += 1
    return start, adj_edge, adj_node


def make_chain(
    poly: LatticePolygon,
    beta: LinkPattern,
    seed: int | np.random.SeedSequence,
    p: float | None = None,
    dynamics: str = "sw",
    q: float = 2.0,
) -> ChainState:
    """Chain started from the all-open configuration with a Philox random stream."""
    if dynamics not in ("sw", "glauber"):
        raise PreconditionError(f"unknown dynamics {dynamics!r}")
    if dynamics == "sw" and q != 2.0:
        raise PreconditionError("Swendsen-Wang dynamics is implemented for q = 2 only")
    if beta.n_links != poly.n_links:
        raise DimensionError("boundary pattern does not match the polygon")
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    rng = np.random.Generator(np.random.Philox(seq))
    p = critical_p(q) if p is None else float(p)
    if not 0.0 <= p <= 1.0:
        raise PreconditionError("p must lie in [0, 1]")
    state = np.ones(poly.n_edges, dtype=np.uint8)
    return ChainState(poly, beta, p, rng, state, dynamics=dynamics, q=q)


def sw_sample(
    poly: LatticePolygon,
    beta: LinkPattern,
    sweeps: int,
    burn_in: int | None = None,
    seed: int = 0,
    p: float | None = None,
    dynamics: str = "sw",
    q: float = 2.0,
) -> Iterator[tuple[BondConfig, LinkPattern]]:
    """Stream of (configuration, connectivity pattern) after each post-burn-in sweep."""
    chain = make_chain(poly, beta, seed, p, dynamics, q)
    chain.run(default_burn_in(chain) if burn_in is None else burn_in)
    patterns = enumerate_patterns(poly.n_links)
    for _ in range(sweeps):
        index = chain.run(1)[0]
        yield chain.config(), patterns[index]


def default_burn_in(chain: ChainState, pilot: int = MIN_BURN_IN) -> int:
    """Run a pilot and return the burn-in it implies: max(10 tau, 1000) sweeps in total.

    The pilot sweeps themselves count towards the returned burn-in, so the
    value returned is what is still to be run.
    """
    series = chain.run(pilot)
    tau = max(integrated_autocorrelation((series == k).astype(float)) for k in np.unique(series))
    return max(0, math.ceil(10 * tau) - pilot)


def chain_seeds(seed: int, chains: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(int(seed)).spawn(chains)


@dataclass(frozen=True)
class ChainRun:
    """Connectivity indices of every post-burn-in sweep, one row per chain."""

    poly: LatticePolygon
    beta: LinkPattern
    indices: list[np.ndarray]
    burn_in: int


def run_chains(
    poly: LatticePolygon,
    beta: LinkPattern,
    sweeps: int,
    chains: int = 1,
    seed: int = 0,
    burn_in: int | None = None,
    p: float | None = None,
    dynamics: str = "sw",
    q: float = 2.0,
    threads: int = 1,
) -> ChainRun:
    """Independent chains with seeds split from one root seed; ``sweeps`` per chain."""
    seeds = chain_seeds(seed, chains)

    def one(seq):
        chain = make_chain(poly, beta, seq, p, dynamics, q)
        extra = default_burn_in(chain) if burn_in is None else burn_in
        chain.run(extra)
        return chain.run(sweeps), chain.generation - sweeps

    if threads > 1 and chains > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    return ChainRun(poly, beta, [r[0] for r in results], min(r[1] for r in results))


# ----------------------------------------------------------------------------
# estimation


def integrated_autocorrelation(series: np.ndarray, window_factor: float = 5.0) -> float:
    """Integrated autocorrelation time with the automatic windowing rule W >= c tau(W).

    Returns 0.5 (independent samples) for a constant series.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 2:
        return 0.5
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var == 0.0:
        return 0.5
    size = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(x, size)
    acf = np.fft.irfft(spectrum * np.conj(spectrum), size)[:n] / (n * var)
    tau = 0.5
    for window in range(1, n):
        tau += acf[window]
        if window >= window_factor * tau:
            break
    return max(tau, 0.5)


@dataclass(frozen=True)
class IndicatorEstimate:
    mean: float
    stderr: float
    tau: float


def estimate_indicator(chains: Sequence[np.ndarray]) -> IndicatorEstimate:
    """Mean of a 0/1 (or bounded) series pooled over chains, with autocorrelation-aware SE."""
    rows = [np.asarray(c, dtype=float) for c in chains if len(c)]
    if not rows:
        raise PreconditionError("no samples")
    total = sum(r.size for r in rows)
    mean = float(sum(r.sum() for r in rows) / total)
    variance = float(sum(((r - mean) ** 2).sum() for r in rows) / total)
    tau = float(np.average([integrated_autocorrelation(r) for r in rows], weights=[r.size for r in rows]))
    stderr = math.sqrt(variance * 2.0 * tau / total) if variance > 0 else 0.0
    return IndicatorEstimate(mean, stderr, tau)


def estimate_probs(
    stream: Iterable, beta: LinkPattern | None = None, max_samples: int | None = None
) -> CrossingDistribution:
    """Empirical law of the connectivity pattern with autocorrelation-adjusted standard errors.

    ``stream`` yields (config, pattern) pairs as produced by :func:`sw_sample`,
    bare patterns, or integer arrays of pattern indices (one per chain).
    """
    chains: list[np.ndarray] = []
    n_links = None
    current: list[int] = []
    for item in stream:
        if isinstance(item, np.ndarray):
            chains.append(item.astype(np.int64))
            continue
        pattern = item[1] if isinstance(item, tuple) else item
        if n_links is None:
            n_links = pattern.n_links
        current.append(enumerate_patterns(n_links).index(pattern))
        if max_samples is not None and len(current) >= max_samples:
            break
    if current:
        chains.append(np.array(current, dtype=np.int64))
    if not chains or sum(c.size for c in chains) == 0:
        raise PreconditionError("empty sample stream")
    if n_links is None:
        if beta is None:
            raise PreconditionError("index streams need the boundary pattern")
        n_links = beta.n_links
    beta = beta or _unnested_like(n_links)
    patterns = enumerate_patterns(n_links)
    probs, errors = {}, {}
    total = sum(c.size for c in chains)
    for index, pattern in enumerate(patterns):
        est = estimate_indicator([(c == index).astype(float) for c in chains])
        probs[pattern] = est.mean
        errors[pattern] = est.stderr
    return CrossingDistribution(n_links, beta, probs, stderr=errors, samples=total)


def _unnested_like(n: int) -> LinkPattern:
    return LinkPattern([(2 * r - 1, 2 * r) for r in range(1, n + 1)])
