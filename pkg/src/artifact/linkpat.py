"""Planar link patterns, non-crossing partitions and meander matrices.

A link pattern with N links is a planar perfect pairing of the boundary
indices 1..2N.  The same object describes a boundary condition (which wired
arcs are joined outside the domain) and the connectivity formed by the
interfaces inside the domain.  Indices are 1-based throughout, matching the
usual labelling of marked boundary points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, DimensionError, PreconditionError, ValidationError

MAX_LINKS = 10


@dataclass(frozen=True)
class LinkPattern:
    """Planar pairing of {1, ..., 2N}, stored with links sorted by left endpoint.

    ``partner[i]`` gives the index paired with ``i`` (``partner[0]`` is unused).
    """

    links: tuple[tuple[int, int], ...]
    partner: tuple[int, ...] = field(repr=False, compare=False, hash=False)

    def __init__(self, links: Iterable[Sequence[int]]):
        pairs = []
        for link in links:
            a, b = (int(v) for v in link)
            pairs.append((min(a, b), max(a, b)))
        pairs.sort()
        n = len(pairs)
        partner = [0] * (2 * n + 1)
        for a, b in pairs:
            if a == b:
                raise ValidationError(f"link {{{a},{b}}} joins an index to itself")
            for i in (a, b):
                if not 1 <= i <= 2 * n:
                    raise ValidationError(f"index {i} outside 1..{2 * n}")
                if partner[i]:
                    raise ValidationError(f"index {i} appears in two links")
            partner[a], partner[b] = b, a
        for a, b in pairs:
            for c, d in pairs:
                if a < c < b < d:
                    raise ValidationError(f"links {{{a},{b}}} and {{{c},{d}}} cross")
        object.__setattr__(self, "links", tuple(pairs))
        object.__setattr__(self, "partner", tuple(partner))

    @property
    def n_links(self) -> int:
        return len(self.links)

    def __len__(self) -> int:
        return len(self.links)

    def __contains__(self, link) -> bool:
        a, b = link
        return 1 <= a <= 2 * self.n_links and self.partner[a] == b

    def sort_key(self) -> tuple[int, ...]:
        """Canonical order key: the right endpoints b_1, ..., b_N."""
        return tuple(b for _, b in self.links)

    def index_form(self) -> str:
        """Canonical string such as ``"1-4,2-3"``."""
        return ",".join(f"{a}-{b}" for a, b in self.links)

    def paren_form(self) -> str:
        """Textual form such as ``"((14)(23))"``; spaces separate indices above 9."""
        sep = "" if 2 * self.n_links <= 9 else " "
        return "(" + "".join(f"({a}{sep}{b})" for a, b in self.links) + ")"

    def __str__(self) -> str:
        return self.index_form()


def parse_pattern(text: str) -> LinkPattern:
    """Parse the comma-separated ``"a-b"`` grammar (1-based, whitespace ignored)."""
    cleaned = "".join(text.split())
    if cleaned in ("", "-"):
        return LinkPattern([])
    links = []
    for chunk in cleaned.split(","):
        parts = chunk.split("-")
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise ValidationError(f"malformed link {chunk!r} in pattern {text!r}")
        links.append((int(parts[0]), int(parts[1])))
    return LinkPattern(links)


def unnested(n: int) -> LinkPattern:
    """The pattern {{1,2},{3,4},...,{2N-1,2N}}."""
    return LinkPattern([(2 * r - 1, 2 * r) for r in range(1, n + 1)])


def rainbow(n: int) -> LinkPattern:
    """The fully nested pattern {{1,2N},{2,2N-1},...}."""
    return LinkPattern([(r, 2 * n + 1 - r) for r in range(1, n + 1)])


def catalan(n: int) -> int:
    return math.comb(2 * n, n) // (n + 1)


def _pairings(lo: int, hi: int):
    """All planar pairings of the consecutive indices lo..hi as lists of links."""
    if lo > hi:
        yield []
        return
    for mate in range(lo + 1, hi + 1, 2):
        for inner in _pairings(lo + 1, mate - 1):
            for outer in _pairings(mate + 1, hi):
                yield [(lo, mate)] + inner + outer


@lru_cache(maxsize=None)
def _enumerate_cached(n: int) -> tuple[LinkPattern, ...]:
    patterns = [LinkPattern(p) for p in _pairings(1, 2 * n)]
    patterns.sort(key=LinkPattern.sort_key)
    return tuple(patterns)


def enumerate_patterns(n: int) -> list[LinkPattern]:
    """All planar link patterns with ``n`` links, in canonical order.

    The canonical order is lexicographic in (b_1, ..., b_N).
    """
    if n < 0:
        raise PreconditionError("number of links must be non-negative")
    if n > MAX_LINKS:
        raise CapacityError(f"N={n} exceeds the cap N <= {MAX_LINKS}")
    return list(_enumerate_cached(n))


def loop_count(alpha: LinkPattern, beta: LinkPattern) -> int:
    """Number of loops when ``alpha`` is drawn above the line and ``beta`` below.

    Walks the 2N endpoints alternating between the two involutions; every
    closed walk is one loop of the meander.
    """
    n = alpha.n_links
    if beta.n_links != n:
        raise DimensionError(f"patterns have {n} and {beta.n_links} links")
    seen = [False] * (2 * n + 1)
    loops = 0
    for start in range(1, 2 * n + 1):
        if seen[start]:
            continue
        loops += 1
        i = start
        while True:
            seen[i] = True
            j = alpha.partner[i]
            seen[j] = True
            i = beta.partner[j]
            if i == start:
                break
    return loops


@dataclass(frozen=True)
class MeanderMatrix:
    """Matrix M[a, b] = sqrt(q)^L(alpha_a, beta_b) indexed by canonical order."""

    n_links: int
    q: float
    patterns: tuple[LinkPattern, ...]
    loops: np.ndarray
    entries: np.ndarray

    def index(self, pattern: LinkPattern) -> int:
        return self.patterns.index(pattern)

    def entry(self, alpha: LinkPattern, beta: LinkPattern) -> float:
        return float(self.entries[self.index(alpha), self.index(beta)])


@lru_cache(maxsize=None)
def loop_matrix(n: int) -> np.ndarray:
    patterns = _enumerate_cached(n)
    size = len(patterns)
    loops = np.empty((size, size), dtype=np.int64)
    for i, a in enumerate(patterns):
        for j in range(i, size):
            loops[i, j] = loops[j, i] = loop_count(a, patterns[j])
    loops.setflags(write=False)
    return loops


def meander_matrix(n: int, q: float) -> MeanderMatrix:
    """Meander matrix of size Catalan(n) at loop weight sqrt(q)."""
    if not q > 0:
        raise PreconditionError("q must be positive")
    patterns = tuple(enumerate_patterns(n))
    loops = loop_matrix(n)
    entries = np.sqrt(q) ** loops
    return MeanderMatrix(n, float(q), patterns, loops, entries)


def meander_entry(alpha: LinkPattern, beta: LinkPattern, q: float) -> float:
    return math.sqrt(q) ** loop_count(alpha, beta)


def remove_link(beta: LinkPattern, j: int) -> LinkPattern:
    """Drop the link {j, j+1} and relabel the remaining indices 1..2N-2."""
    if (j, j + 1) not in beta:
        raise PreconditionError(f"{{{j},{j + 1}}} is not a link of {beta}")

    def relabel(i: int) -> int:
        return i if i < j else i - 2

    return LinkPattern([(relabel(a), relabel(b)) for a, b in beta.links if a != j])


def tie(beta: LinkPattern, j: int) -> LinkPattern:
    """Tying operation: replace {j,k1},{j+1,k2} by {j,j+1},{k1,k2}."""
    n = beta.n_links
    if not 1 <= j <= 2 * n - 1:
        raise PreconditionError(f"tie index {j} outside 1..{2 * n - 1}")
    if (j, j + 1) in beta:
        return beta
    k1, k2 = beta.partner[j], beta.partner[j + 1]
    links = [link for link in beta.links if j not in link and j + 1 not in link]
    links += [(j, j + 1), (k1, k2)]
    return LinkPattern(links)


@dataclass(frozen=True)
class NonCrossingPartition:
    """Non-crossing partition of the wired arcs {1, ..., N}."""

    n_arcs: int
    blocks: tuple[tuple[int, ...], ...]

    def __init__(self, n_arcs: int, blocks: Iterable[Iterable[int]]):
        normalized = sorted(tuple(sorted(int(v) for v in block)) for block in blocks)
        normalized = [b for b in normalized if b]
        flat = sorted(v for block in normalized for v in block)
        if flat != list(range(1, n_arcs + 1)):
            raise ValidationError(f"blocks {normalized} do not partition 1..{n_arcs}")
        for p in normalized:
            for s in normalized:
                if p is s:
                    continue
                # crossing: a < b < c < d with a, c in one block and b, d in another
                for a in p:
                    for c in p:
                        if a >= c:
                            continue
                        inside = [v for v in s if a < v < c]
                        outside = [v for v in s if v < a or v > c]
                        if inside and outside:
                            raise ValidationError(f"blocks {p} and {s} cross")
        object.__setattr__(self, "n_arcs", int(n_arcs))
        object.__setattr__(self, "blocks", tuple(normalized))

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)


def partition_to_pattern(partition: NonCrossingPartition) -> LinkPattern:
    """Link pattern traced by the contours around the wired arcs.

    Arc r spans the marked points 2r-1 and 2r.  Inside a block r_1 < ... < r_k
    the contour joins the right end of each arc to the left end of the next
    arc in the block, and the outermost contour joins 2r_1 - 1 to 2r_k.
    """
    links = []
    for block in partition.blocks:
        for left, right in zip(block, block[1:]):
            links.append((2 * left, 2 * right - 1))
        links.append((2 * block[0] - 1, 2 * block[-1]))
    return LinkPattern(links)


def pattern_to_partition(beta: LinkPattern) -> NonCrossingPartition:
    """Inverse of :func:`partition_to_pattern`.

    The right end 2r of arc r is linked either to the left end of the next arc
    of its block or, for the last arc of a block, back to the first arc.
    """
    n = beta.n_links
    parent = list(range(n + 1))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for r in range(1, n + 1):
        mate = beta.partner[2 * r]
        other = (mate + 1) // 2
        parent[find(r)] = find(other)
    groups: dict[int, list[int]] = {}
    for r in range(1, n + 1):
        groups.setdefault(find(r), []).append(r)
    partition = NonCrossingPartition(n, groups.values())
    if partition_to_pattern(partition) != beta:
        raise ValidationError(f"{beta} does not arise from a wired-arc partition")
    return partition


def all_noncrossing_partitions(n: int) -> list[NonCrossingPartition]:
    """Every non-crossing partition of {1..n}, via the pattern bijection."""
    return [pattern_to_partition(p) for p in enumerate_patterns(n)]
