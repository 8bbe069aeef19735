"""Coulomb-gas integrals G_beta by contour quadrature with explicit branch tracking.

The integrand

    f(x; u) = prod_{i<j} (x_j - x_i)^(2/k) prod_{r<s} (u_s - u_r)^(8/k) prod_{i,r} (u_r - x_i)^(-4/k)

is multivalued.  Its branch is the analytic continuation of the real positive
function on the slice x_{a_r} < u_r < x_{a_r + 1}.  Each link {a_r, b_r}
carries a parabolic arc in the upper half-plane; the phases of all
factors are continued node by node along those contours from the first node
of each contour, and every phase increment is checked against pi/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .errors import BudgetError, CapacityError, DimensionError, PreconditionError, QuadratureError, SingularityError
from .linkpat import LinkPattern
from .partition import CouplingParams, point_config

MAX_STEP_PHASE = 0.5 * math.pi
MAX_LINKS_QUADRATURE = 3


# ----------------------------------------------------------------------------
# contours


@dataclass(frozen=True)
class ContourPolicy:
    """Discretization controls for the link contours.

    ``height_factor`` scales the arc height relative to the link span;
    the height is further multiplied by (1 + number of links nested inside).
    Each half of a contour is mapped to s in [0, 1] with t = s^m / 2.  The
    panel edges sit at t = ratio^k / 2 down to ``smallest``, so every panel
    covers the same factor in distance to the endpoint; each panel carries
    ``order`` Gauss nodes.
    """

    height_factor: float = 0.15
    ratio: float = 0.25
    smallest: float = 1e-13
    order: int = 8


@dataclass(frozen=True)
class Contour:
    """Arc from ``start`` to ``end`` with its quadrature nodes and weights.

    Nodes are listed in the order of traversal; ``weights`` already contain du/ds.
    ``from_start`` and ``from_end`` hold u - start and u - end computed without
    cancellation, for the factors that vanish at the contour's own endpoints.
    """

    start: float
    end: float
    height: float
    nodes: np.ndarray
    weights: np.ndarray
    from_start: np.ndarray
    from_end: np.ndarray

    @property
    def discretization(self) -> np.ndarray:
        return self.nodes


def nesting_depths(beta: LinkPattern) -> list[int]:
    """Number of links strictly inside each link."""
    return [sum(1 for c, d in beta.links if a < c and d < b) for a, b in beta.links]


def _panel_rule(policy: ContourPolicy, m: float) -> tuple[np.ndarray, np.ndarray]:
    panels = math.ceil(math.log(2.0 * policy.smallest) / math.log(policy.ratio))
    edges = [0.0] + [policy.ratio ** (k / m) for k in range(panels, -1, -1)]
    base_nodes, base_weights = np.polynomial.legendre.leggauss(policy.order)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(lo + half * (base_nodes + 1.0))
        weights.append(half * base_weights)
    return np.concatenate(nodes), np.concatenate(weights)


def endpoint_exponent(kappa: float) -> float:
    """Power m in t = s^m that cancels the |u - x|^(-4/kappa) endpoint singularity."""
    return kappa / (kappa - 4.0)


def make_contour(start: float, end: float, height: float, kappa: float, policy: ContourPolicy) -> Contour:
    """Parabolic arc u(t) = start + span t + 4 i height t (1 - t), t in [0, 1].

    The arc leaves the real axis at a positive angle, so two arcs attached to
    nearby points separate linearly with the distance from the axis.  Near each
    end t (or 1 - t) equals s^m / 2.
    """
    span = end - start
    m = endpoint_exponent(kappa)
    s, ws = _panel_rule(policy, m)
    tau = 0.5 * s**m
    dtau = 0.5 * m * s ** (m - 1.0) * ws
    # tau is the parameter distance to the nearer endpoint; both halves are
    # written in terms of tau to keep full precision next to either endpoint
    near = tau * (span + 4j * height * (1.0 - tau))
    far = (1.0 - tau) * (span + 4j * height * tau)
    du_leaving = (span + 4j * height * (1.0 - 2.0 * tau)) * dtau
    du_arriving = (span - 4j * height * (1.0 - 2.0 * tau)) * dtau
    from_start = np.concatenate([near, far[::-1]])
    from_end = np.concatenate([-far.conjugate(), -near.conjugate()[::-1]])
    nodes = start + from_start
    weights = np.concatenate([du_leaving, du_arriving[::-1]])
    return Contour(float(start), float(end), float(height), nodes, weights, from_start, from_end)


def build_contours(
    beta: LinkPattern,
    x: Sequence[float],
    policy: ContourPolicy | None = None,
    kappa: float = 16.0 / 3.0,
) -> list[Contour]:
    """One arc per link; outer links are drawn higher, so arcs never meet."""
    policy = policy or ContourPolicy()
    pts = point_config(x)
    if pts.size != 2 * beta.n_links:
        raise DimensionError(f"{beta} needs {2 * beta.n_links} points, got {pts.size}")
    contours = []
    for (a, b), depth in zip(beta.links, nesting_depths(beta)):
        span = pts[b - 1] - pts[a - 1]
        height = policy.height_factor * span * (1 + depth)
        contours.append(make_contour(pts[a - 1], pts[b - 1], height, kappa, policy))
    return contours


# ----------------------------------------------------------------------------
# branch bookkeeping


def _point_phase_base(u: np.ndarray, xi: float, right_of_base: bool) -> np.ndarray:
    """Continuous arg(u - xi) for u in the upper half-plane, shifted so the base slice has phase 0.

    For points xi to the right of the base interval the real slice has u - xi < 0,
    whose factor is taken as |u - xi|, so pi is subtracted.
    """
    angle = np.angle(u - xi)
    if right_of_base:
        angle = np.where(angle < -0.5 * math.pi, angle + 2.0 * math.pi, angle) - math.pi
    return angle


def _check_steps(phases: np.ndarray, axis: int, what: str) -> None:
    if phases.shape[axis] < 2:
        return
    steps = np.abs(np.diff(phases, axis=axis))
    worst = float(steps.max())
    if worst >= MAX_STEP_PHASE:
        raise QuadratureError(f"phase of {what} jumps by {worst:.3f} between nodes (limit pi/2)")


def pair_phase_grid(u_left: np.ndarray, u_right: np.ndarray) -> np.ndarray:
    """Continuous arg(u_s - u_r) on the node grid (rows: u_r nodes, columns: u_s nodes).

    The phase is fixed to its principal value at the first node of both contours
    (where Re u_s > Re u_r) and continued along rows and columns.
    """
    raw = np.angle(u_right[None, :] - u_left[:, None])
    grid = raw.copy()
    grid[:, 0] = np.unwrap(raw[:, 0])
    grid = np.unwrap(grid, axis=1)
    _check_steps(grid, 0, "a pair factor")
    _check_steps(grid, 1, "a pair factor")
    if abs(grid[0, 0]) >= 0.5 * math.pi:
        raise QuadratureError("base nodes are not ordered as the base region requires")
    return grid


@dataclass(frozen=True)
class BranchState:
    """Accumulated phases of every factor of the integrand at a point u.

    ``point_phases[r, i]`` continues arg(u_r - x_i) (shifted by -pi for x_i to
    the right of the base interval) and ``pair_phases[r, s]`` continues
    arg(u_s - u_r) for r < s.  ``base`` records the point where the integrand
    was declared real and positive.
    """

    beta: LinkPattern
    x: np.ndarray
    u: np.ndarray
    point_phases: np.ndarray
    pair_phases: np.ndarray
    base: np.ndarray

    @classmethod
    def start(cls, beta: LinkPattern, x: Sequence[float], u: Sequence[complex]) -> "BranchState":
        """Branch at a point of the base region x_{a_r} < Re u_r < x_{a_r + 1}."""
        pts = point_config(x)
        u = np.asarray(u, dtype=complex)
        n = beta.n_links
        if u.size != n:
            raise DimensionError(f"expected {n} integration variables")
        for r, (a, _) in enumerate(beta.links):
            if not pts[a - 1] < u[r].real < pts[a]:
                raise PreconditionError(f"u_{r + 1}={u[r]} is not in the base region")
        point = np.empty((n, pts.size))
        for r, (a, _) in enumerate(beta.links):
            diff = u[r] - pts
            principal = np.angle(diff)
            wrapped = np.where(principal < -0.5 * math.pi, principal + 2 * math.pi, principal)
            point[r] = np.where(np.arange(1, pts.size + 1) > a, wrapped - math.pi, principal)
        pair = np.zeros((n, n))
        for r in range(n):
            for s in range(r + 1, n):
                pair[r, s] = np.angle(u[s] - u[r])
        return cls(beta, pts, u, point, pair, u.copy())

    def step(self, u_new: Sequence[complex]) -> "BranchState":
        """Continue every phase to ``u_new``; each increment must stay below pi/2."""
        u_new = np.asarray(u_new, dtype=complex)
        n = self.beta.n_links
        point = self.point_phases.copy()
        pair = self.pair_phases.copy()
        for r in range(n):
            for i, xi in enumerate(self.x):
                if abs(u_new[r] - xi) == 0:
                    raise SingularityError(f"u_{r + 1} hits x_{i + 1}")
                delta = np.angle((u_new[r] - xi) / (self.u[r] - xi))
                if abs(delta) >= MAX_STEP_PHASE:
                    raise QuadratureError("branch step too large for a point factor")
                point[r, i] += delta
            for s in range(r + 1, n):
                if abs(u_new[s] - u_new[r]) == 0:
                    raise SingularityError(f"u_{r + 1} and u_{s + 1} collide")
                delta = np.angle((u_new[s] - u_new[r]) / (self.u[s] - self.u[r]))
                if abs(delta) >= MAX_STEP_PHASE:
                    raise QuadratureError("branch step too large for a pair factor")
                pair[r, s] += delta
        return replace(self, u=u_new, point_phases=point, pair_phases=pair)

    def walk(self, path: Sequence[Sequence[complex]]) -> "BranchState":
        state = self
        for u in path:
            state = state.step(u)
        return state


def integrand_f(x: Sequence[float], u: Sequence[complex], params: CouplingParams, branch: BranchState) -> complex:
    """Value of the integrand at ``u`` on the branch carried by ``branch``."""
    pts = point_config(x)
    u = np.asarray(u, dtype=complex)
    if not np.allclose(u, branch.u, rtol=0, atol=1e-14):
        raise PreconditionError("branch state was continued to a different point")
    k = params.kappa
    diffs = u[:, None] - pts[None, :]
    if np.any(np.abs(diffs) < 1e-14):
        raise SingularityError("an integration variable coincides with a marked point")
    log_mod = 2.0 / k * _log_vandermonde(pts) - 4.0 / k * np.log(np.abs(diffs)).sum()
    phase = -4.0 / k * branch.point_phases.sum()
    n = u.size
    for r in range(n):
        for s in range(r + 1, n):
            gap = abs(u[s] - u[r])
            if gap < 1e-14:
                raise SingularityError("two integration variables coincide")
            log_mod += 8.0 / k * math.log(gap)
            phase += 8.0 / k * branch.pair_phases[r, s]
    return complex(math.exp(log_mod) * np.exp(1j * phase))


def _log_vandermonde(pts: np.ndarray) -> float:
    diffs = pts[None, :] - pts[:, None]
    return float(np.log(diffs[np.triu_indices(pts.size, 1)]).sum())


# ----------------------------------------------------------------------------
# the integral


def _contour_factor(contour: Contour, pts: np.ndarray, link: tuple[int, int], kappa: float) -> np.ndarray:
    """Weights times prod_i (u - x_i)^(-4/kappa) on the nodes of one contour."""
    a, b = link
    u = contour.nodes
    log_mod = np.zeros(u.size)
    phase = np.zeros(u.size)
    for i, xi in enumerate(pts, start=1):
        if i == a:
            diff = contour.from_start
        elif i == b:
            diff = contour.from_end
        else:
            diff = u - xi
        log_mod += np.log(np.abs(diff))
        ph = _point_phase_base(diff, 0.0, i > a)
        _check_steps(ph, 0, "a point factor")
        phase += ph
    return contour.weights * np.exp(-4.0 / kappa * (log_mod + 1j * phase))


def contour_sum(beta: LinkPattern, x: np.ndarray, kappa: float, policy: ContourPolicy) -> complex:
    """Iterated tensor quadrature of the N-fold contour integral (without the constant)."""
    n = beta.n_links
    contours = build_contours(beta, x, policy, kappa)
    factors = [
        _contour_factor(c, x, link, kappa) for c, link in zip(contours, beta.links)
    ]
    pairs = {}
    for r in range(n):
        for s in range(r + 1, n):
            ur, us = contours[r].nodes, contours[s].nodes
            phase = pair_phase_grid(ur, us)
            modulus = np.abs(us[None, :] - ur[:, None])
            pairs[r, s] = modulus ** (8.0 / kappa) * np.exp(1j * 8.0 / kappa * phase)
    prefactor = math.exp(2.0 / kappa * _log_vandermonde(x))
    if n == 1:
        total = factors[0].sum()
    elif n == 2:
        total = factors[0] @ pairs[0, 1] @ factors[1]
    elif n == 3:
        inner = (pairs[0, 2] * factors[2][None, :]) @ pairs[1, 2].T
        total = np.sum(factors[0][:, None] * factors[1][None, :] * pairs[0, 1] * inner)
    else:
        raise CapacityError(f"tensor quadrature supports N <= {MAX_LINKS_QUADRATURE}")
    return complex(prefactor * total)


DEFAULT_ORDERS = (6, 10, 14, 20, 28)


def g_beta_complex(
    beta: LinkPattern,
    x: Sequence[float],
    params: CouplingParams,
    tol: float = 1e-10,
    policy: ContourPolicy | None = None,
    orders: Sequence[int] = DEFAULT_ORDERS,
) -> tuple[complex, float]:
    """Refine the node count until two successive values agree to ``tol``.

    Returns the converged complex value (constant included) and the relative
    change at the last refinement.
    """
    pts = point_config(x)
    if beta.n_links > MAX_LINKS_QUADRATURE:
        raise CapacityError(f"N={beta.n_links} exceeds the quadrature budget N <= 3")
    if pts.size != 2 * beta.n_links:
        raise DimensionError(f"{beta} needs {2 * beta.n_links} points, got {pts.size}")
    policy = policy or ContourPolicy()
    const = params.norm_const ** beta.n_links
    previous = None
    change = math.inf
    for level, order in enumerate(orders):
        try:
            value = const * contour_sum(beta, pts, params.kappa, replace(policy, order=order))
        except QuadratureError:
            # a coarse grid may violate the branch-step contract; refine instead
            if level == len(orders) - 1:
                raise
            previous = None
            continue
        if previous is not None:
            change = abs(value - previous) / abs(value)
            if change < tol:
                return value, change
        previous = value
    raise BudgetError(f"no convergence: last relative change {change:.2e} > tol {tol:.1e}")


def g_beta_numeric(
    beta: LinkPattern,
    x: Sequence[float],
    params: CouplingParams,
    tol: float = 1e-10,
    policy: ContourPolicy | None = None,
) -> float:
    """Coulomb-gas integral G_beta(x); real and positive, else a QuadratureError."""
    value, _ = g_beta_complex(beta, x, params, tol, policy)
    if abs(value.imag) > max(tol, 1e-13) * abs(value):
        raise QuadratureError(
            f"imaginary residue {abs(value.imag) / abs(value):.2e} exceeds the tolerance"
        )
    if not value.real > 0:
        raise QuadratureError("Coulomb-gas integral is not positive")
    return float(value.real)


# ----------------------------------------------------------------------------
# closed-form N=1 value and the Pochhammer reduction


def g_single_link(x1: float, x2: float, params: CouplingParams) -> float:
    """sqrt(q) (x2 - x1)^(-2h), the value of G for one link."""
    return math.sqrt(params.q) * (x2 - x1) ** (-2.0 * params.h)


def pochhammer_constant(params: CouplingParams | float) -> float:
    """4 sin^2(4 pi / kappa): ratio between a Pochhammer loop and the interval integral.

    Accepts a bare kappa in (4, 8] as well, so that the endpoint kappa = 8 can be queried.
    """
    kappa = params.kappa if isinstance(params, CouplingParams) else float(params)
    if not 4.0 < kappa <= 8.0:
        raise PreconditionError(f"kappa={kappa} outside (4, 8]")
    return 4.0 * math.sin(4.0 * math.pi / kappa) ** 2


def _gauss_segment(z0: complex, z1: complex, order: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (z0 + z1) + 0.5 * (z1 - z0) * t
    return nodes, 0.5 * (z1 - z0) * w


def _gauss_arc(center: float, radius: float, angle0: float, angle1: float, order: int):
    t, w = np.polynomial.legendre.leggauss(order)
    angles = 0.5 * (angle0 + angle1) + 0.5 * (angle1 - angle0) * t
    nodes = center + radius * np.exp(1j * angles)
    weights = 1j * (nodes - center) * 0.5 * (angle1 - angle0) * w
    return nodes, weights


def pochhammer_loop_integral(x1: float, x2: float, params: CouplingParams, order: int = 200) -> complex:
    """One-link integrand integrated around a Pochhammer contour enclosing x1 and x2.

    The path starts just right of x1 on the real axis, runs to x2, turns
    clockwise around x2, returns, turns counterclockwise around x1, repeats
    with the opposite orientations, and closes.  Phases are continued node by
    node from the real positive value at the start.
    """
    k = params.kappa
    r = 0.25 * (x2 - x1)
    left, right = x1 + r, x2 - r
    pieces = [
        _gauss_segment(left, right, order),
        _gauss_arc(x2, r, math.pi, -math.pi, order),
        _gauss_segment(right, left, order),
        _gauss_arc(x1, r, 0.0, 2.0 * math.pi, order),
        _gauss_segment(left, right, order),
        _gauss_arc(x2, r, math.pi, 3.0 * math.pi, order),
        _gauss_segment(right, left, order),
        _gauss_arc(x1, r, 0.0, -2.0 * math.pi, order),
    ]
    nodes = np.concatenate([p[0] for p in pieces])
    weights = np.concatenate([p[1] for p in pieces])
    path = np.concatenate([[left], nodes])
    total_phase = np.zeros(path.size)
    log_mod = np.zeros(path.size)
    for xi in (x1, x2):
        raw = np.angle(path - xi)
        tracked = np.unwrap(raw)
        _check_steps(tracked, 0, "a point factor")
        total_phase += tracked
        log_mod += np.log(np.abs(path - xi))
    total_phase -= total_phase[0]
    values = np.exp(-4.0 / k * (log_mod + 1j * total_phase))[1:]
    prefactor = (x2 - x1) ** (2.0 / k)
    return complex(prefactor * np.sum(values * weights))


def interval_integral(x1: float, x2: float, params: CouplingParams) -> float:
    """Real interval integral of |f| for one link: a Beta function."""
    k = params.kappa
    e = 1.0 - 4.0 / k
    log_beta = 2.0 * special.gammaln(e) - special.gammaln(2.0 * e)
    return (x2 - x1) ** (2.0 / k + 1.0 - 8.0 / k) * math.exp(log_beta)


def h_vs_hcirc_check(x: Sequence[float], kappa: float) -> float:
    """Relative deviation between the Pochhammer loop integral and 4 sin^2(4 pi/kappa) times the interval one."""
    pts = point_config(x)
    if pts.size != 2:
        raise DimensionError("the loop-versus-interval check is for one link")
    params = CouplingParams(kappa)
    loop = pochhammer_loop_integral(pts[0], pts[1], params)
    target = pochhammer_constant(params) * interval_integral(pts[0], pts[1], params)
    return abs(loop - target) / abs(target)


# ----------------------------------------------------------------------------
# hypergeometric function (Euler integral) and its use for the endpoint integral


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric 2F1(a, b, c; z) for z <= 0 from the Euler integral."""
    if not c > b > 0:
        raise PreconditionError("Euler integral needs c > b > 0")
    if z > 0:
        raise PreconditionError("only z <= 0 is supported")
    if z == 0:
        return 1.0
    log_norm = special.gammaln(c) - special.gammaln(b) - special.gammaln(c - b)
    value, _ = integrate.quad(
        lambda t: (1.0 - z * t) ** (-a),
        0.0,
        1.0,
        weight="alg",
        wvar=(b - 1.0, c - b - 1.0),
        epsabs=0.0,
        epsrel=1e-13,
        limit=200,
    )
    return math.exp(log_norm) * value


def hyp2f1_asymptotic(a: float, b: float, c: float, z: float) -> float:
    """Two-term large -z expansion of 2F1 (requires a - b not an integer)."""
    g = special.gamma
    w = -z
    return (
        g(c) * g(b - a) / (g(b) * g(c - a)) * w ** (-a)
        + g(c) * g(a - b) / (g(a) * g(c - b)) * w ** (-b)
    )


def endpoint_integral_direct(kappa: float, lam: float, nu: float, mu: float) -> float:
    """int_{mu lam}^{nu} du / (u^(4/k) (u + lam)^(4/k)) by adaptive quadrature."""
    e = 4.0 / kappa
    lower = mu * lam
    if lower < 0:
        raise PreconditionError("lower limit must be non-negative")
    if lower > 0:
        value, _ = integrate.quad(
            lambda u: u ** (-e) * (u + lam) ** (-e), lower, nu, epsabs=0.0, epsrel=1e-13, limit=200
        )
        return value
    value, _ = integrate.quad(
        lambda u: (u + lam) ** (-e), 0.0, nu, weight="alg", wvar=(-e, 0.0), epsabs=0.0, epsrel=1e-13
    )
    return value


def endpoint_integral_hypergeometric(kappa: float, lam: float, nu: float, mu: float) -> float:
    """The same integral written with 2F1(4/k, 1-4/k, 2-4/k; .)."""
    if not (kappa > 4 and lam > 0 and nu < 1 and mu < 1.0 / lam):
        raise PreconditionError("needs kappa > 4, lambda > 0, nu < 1, mu < 1/lambda")
    e = 4.0 / kappa
    a, b, c = e, 1.0 - e, 2.0 - e
    upper = nu ** (1.0 - e) * hyp2f1(a, b, c, -nu / lam)
    lower = (mu * lam) ** (1.0 - e) * hyp2f1(a, b, c, -mu) if mu != 0 else 0.0
    return kappa * lam ** (-e) / (kappa - 4.0) * (upper - lower)
