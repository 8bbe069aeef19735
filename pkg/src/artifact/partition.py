"""Closed-form FK-Ising partition functions and numerical checks of their PDEs.

The explicit formula for F_beta holds at kappa = 16/3 (q = 2).  The helpers
for the second-order PDE system and for the collapse asymptotics accept any
evaluator, so the same code checks both F_beta and the Coulomb-gas integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import DimensionError, PreconditionError, ValidationError
from .linkpat import LinkPattern, remove_link, tie, unnested

KAPPA_FK_ISING = 16.0 / 3.0
MIN_GAP = 1e-12

Evaluator = Callable[[np.ndarray], float]


def point_config(x: Sequence[float], *, even: bool = True) -> np.ndarray:
    """Validate a strictly increasing list of boundary points and return it as an array."""
    arr = np.asarray(x, dtype=float).reshape(-1)
    if even and (arr.size == 0 or arr.size % 2):
        raise ValidationError(f"expected an even, non-zero number of points, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("points must be finite")
    gaps = np.diff(arr)
    if np.any(gaps <= 0):
        raise ValidationError(f"points must be strictly increasing: {arr.tolist()}")
    if np.any(gaps < MIN_GAP):
        raise ValidationError("two points are closer than 1e-12")
    return arr


@dataclass(frozen=True)
class CouplingParams:
    """kappa together with the loop weight q, the boundary exponent h and the Coulomb constant."""

    kappa: float

    def __post_init__(self):
        if not 4.0 < self.kappa < 8.0:
            raise PreconditionError(f"kappa={self.kappa} outside (4, 8)")

    @property
    def q(self) -> float:
        if self.kappa == KAPPA_FK_ISING:
            return 2.0
        return 4.0 * math.cos(4.0 * math.pi / self.kappa) ** 2

    @property
    def h(self) -> float:
        if self.kappa == KAPPA_FK_ISING:
            return 1.0 / 16.0
        return (6.0 - self.kappa) / (2.0 * self.kappa)

    @property
    def norm_const(self) -> float:
        k = self.kappa
        log_ratio = gammaln(2.0 - 8.0 / k) - 2.0 * gammaln(1.0 - 4.0 / k)
        return math.sqrt(self.q) * math.exp(log_ratio)

    @property
    def p_critical(self) -> float:
        root = math.sqrt(self.q)
        return root / (1.0 + root)


FK_ISING = CouplingParams(KAPPA_FK_ISING)


def cross_ratio(y1: float, y2: float, y3: float, y4: float) -> float:
    """Cross-ratio |y2-y1||y4-y3| / (|y3-y1||y4-y2|) of four ordered real points."""
    if not y1 < y2 < y3 < y4:
        raise PreconditionError("cross_ratio expects y1 < y2 < y3 < y4")
    return _chi(y1, y2, y3, y4)


def _chi(y1, y2, y3, y4):
    return abs(y2 - y1) * abs(y4 - y3) / (abs(y3 - y1) * abs(y4 - y2))


def _check_compatible(beta: LinkPattern, x: np.ndarray) -> None:
    if x.size != 2 * beta.n_links:
        raise DimensionError(f"{beta} needs {2 * beta.n_links} points, got {x.size}")


def _sigma_table(n: int) -> np.ndarray:
    """All sign vectors in {+1,-1}^n with the first entry fixed to +1."""
    if n == 0:
        return np.ones((1, 0))
    codes = np.arange(2 ** (n - 1))
    bits = (codes[:, None] >> np.arange(n - 1)[None, :]) & 1
    return np.hstack([np.ones((codes.size, 1)), 1.0 - 2.0 * bits])


def _log_sigma_sum(log_chi: np.ndarray) -> float:
    """log of sum over sigma of prod_{s<t} chi_st^(sigma_s sigma_t / 4).

    ``log_chi`` is symmetric with zero diagonal.  Flipping every sign leaves a
    term unchanged, so half of the sign vectors are summed and doubled.
    """
    n = log_chi.shape[0]
    sigmas = _sigma_table(n)
    exponents = np.einsum("ks,st,kt->k", sigmas, log_chi, sigmas) / 8.0
    top = exponents.max()
    return math.log(2.0) + top + math.log(np.exp(exponents - top).sum())


def _log_chi_matrix(beta: LinkPattern, x: np.ndarray) -> np.ndarray:
    n = beta.n_links
    out = np.zeros((n, n))
    for s in range(n):
        a_s, b_s = beta.links[s]
        for t in range(s + 1, n):
            a_t, b_t = beta.links[t]
            value = _chi(x[a_s - 1], x[a_t - 1], x[b_t - 1], x[b_s - 1])
            out[s, t] = out[t, s] = math.log(value)
    return out


def log_f_beta(beta: LinkPattern, x: Sequence[float]) -> float:
    """Natural log of :func:`f_beta`."""
    pts = point_config(x)
    _check_compatible(beta, pts)
    log_gaps = sum(math.log(pts[b - 1] - pts[a - 1]) for a, b in beta.links)
    return -log_gaps / 8.0 + 0.5 * _log_sigma_sum(_log_chi_matrix(beta, pts))


def f_beta(beta: LinkPattern, x: Sequence[float]) -> float:
    """Explicit FK-Ising partition function F_beta at kappa = 16/3.

    F_beta = prod_s |x_{b_s} - x_{a_s}|^(-1/8)
             * (sum_sigma prod_{s<t} chi(x_{a_s}, x_{a_t}, x_{b_t}, x_{b_s})^(sigma_s sigma_t / 4))^(1/2)
    """
    return math.exp(log_f_beta(beta, x))


@dataclass(frozen=True)
class MobiusMap:
    """Real Mobius map z -> (a z + b) / (c z + d) with a d - b c > 0."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not self.determinant > 0:
            raise ValidationError("Mobius map must have a d - b c > 0")

    @property
    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c

    def __call__(self, z):
        return (self.a * z + self.b) / (self.c * z + self.d)

    def derivative(self, z):
        return self.determinant / (self.c * z + self.d) ** 2

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(1.0, 0.0, 0.0, 1.0)


def apply_mobius(phi: MobiusMap, x: Sequence[float]) -> np.ndarray:
    """Image of a point configuration; the map must keep the points in order."""
    pts = np.asarray(x, dtype=float)
    poles = phi.c * pts + phi.d
    if np.any(poles == 0) or (np.any(poles > 0) and np.any(poles < 0)):
        raise PreconditionError("Mobius map sends a point between the marked points to infinity")
    image = phi(pts)
    if np.any(np.diff(image) <= 0):
        raise PreconditionError("Mobius map does not preserve the order of the points")
    return image


def covariant_transform(
    evaluator: Evaluator, x: Sequence[float], phi: MobiusMap, h: float
) -> float:
    """prod phi'(x_j)^h * evaluator(phi(x)), which equals evaluator(x) for covariant functions."""
    pts = point_config(x)
    image = apply_mobius(phi, pts)
    log_jac = h * float(np.sum(np.log(phi.derivative(pts))))
    return math.exp(log_jac) * evaluator(image)


def f_beta_polygon(beta: LinkPattern, x: Sequence[float], phi: MobiusMap) -> float:
    """F_beta evaluated through a Mobius change of coordinates."""
    return covariant_transform(lambda y: f_beta(beta, y), x, phi, FK_ISING.h)


def bound_b(alpha: LinkPattern, x: Sequence[float]) -> float:
    """Power-law bound function prod_{(a,b) in alpha} |x_b - x_a|^(-1/8)."""
    pts = point_config(x)
    _check_compatible(alpha, pts)
    return math.exp(-sum(math.log(pts[b - 1] - pts[a - 1]) for a, b in alpha.links) / 8.0)


def y_unnested(n: int, x: Sequence[float]) -> float:
    """Ratio F / B for the unnested pattern {{1,2},{3,4},...}; always at least 1."""
    pts = point_config(x)
    pattern = unnested(n)
    _check_compatible(pattern, pts)
    return math.exp(0.5 * _log_sigma_sum(_log_chi_matrix(pattern, pts)))


def _shifted(x: np.ndarray, shifts: dict[int, float]) -> np.ndarray:
    y = x.copy()
    for i, delta in shifts.items():
        y[i] += delta
    if np.any(np.diff(y) <= 0):
        raise PreconditionError("finite-difference step breaks the ordering of the points")
    return y


def bpz_residual(
    evaluator: Evaluator,
    x: Sequence[float],
    j: int,
    params: CouplingParams,
    step: float | None = None,
) -> float:
    """Central-difference value of the second-order operator at the 1-based index j.

    Operator: kappa/2 d_j^2 + sum_{i != j} (2/(x_i - x_j) d_i - 2h/(x_i - x_j)^2).
    The default step is 1e-3 times the smallest gap.
    """
    pts = point_config(x, even=False)
    jj = j - 1
    if not 0 <= jj < pts.size:
        raise PreconditionError(f"index {j} outside 1..{pts.size}")
    if step is None:
        step = 1e-3 * float(np.min(np.diff(pts)))
    center = evaluator(pts)
    second = (
        evaluator(_shifted(pts, {jj: step})) - 2.0 * center + evaluator(_shifted(pts, {jj: -step}))
    ) / step**2
    total = 0.5 * params.kappa * second
    for i in range(pts.size):
        if i == jj:
            continue
        gap = pts[i] - pts[jj]
        first = (evaluator(_shifted(pts, {i: step})) - evaluator(_shifted(pts, {i: -step}))) / (
            2.0 * step
        )
        total += 2.0 / gap * first - 2.0 * params.h / gap**2 * center
    return total


def collapse_points(x: Sequence[float], j: int, d: float, xi: float | None = None) -> np.ndarray:
    """Replace x_j, x_{j+1} (1-based) by xi -/+ d/2; xi defaults to their midpoint."""
    pts = np.asarray(x, dtype=float).copy()
    if xi is None:
        xi = 0.5 * (pts[j - 1] + pts[j])
    pts[j - 1] = xi - 0.5 * d
    pts[j] = xi + 0.5 * d
    return point_config(pts, even=False)


def asy_ratio(
    evaluator: Evaluator,
    x: Sequence[float],
    j: int,
    d: float,
    params: CouplingParams,
    xi: float | None = None,
) -> float:
    """evaluator(x with x_j, x_{j+1} = xi -/+ d/2) divided by d^(-2h)."""
    collapsed = collapse_points(x, j, d, xi)
    return evaluator(collapsed) * d ** (2.0 * params.h)


def asy_target(
    beta: LinkPattern,
    x: Sequence[float],
    j: int,
    params: CouplingParams,
    reduced: Callable[[LinkPattern, np.ndarray], float],
) -> float:
    """Limit of :func:`asy_ratio` as d -> 0.

    sqrt(q) * Z_{beta/{j,j+1}} if {j,j+1} is a link of beta, otherwise
    Z_{tie_j(beta)/{j,j+1}}, with Z given by ``reduced`` on the remaining points.
    """
    pts = np.asarray(x, dtype=float)
    rest = np.delete(pts, [j - 1, j])
    if (j, j + 1) in beta:
        return math.sqrt(params.q) * reduced(remove_link(beta, j), rest)
    return reduced(remove_link(tie(beta, j), j), rest)


def reduced_f_beta(beta: LinkPattern, x: np.ndarray) -> float:
    """F_beta with the convention F of the empty pattern equal to 1."""
    if beta.n_links == 0:
        return 1.0
    return f_beta(beta, x)
