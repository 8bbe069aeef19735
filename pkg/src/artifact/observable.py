"""Continuum spinor observable for N interfaces with boundary condition beta.

The observable is phi_beta(z) = i P_beta(z) / prod_j sqrt(z - x_j), where
P_beta is a real polynomial of degree at most N-1.  Writing
P_beta(z) = p_0 + p_1 (z - x_1) + ... + p_{N-1} (z - x_1)^{N-1}, the leading
coefficient p_0 is fixed by the unit residue at x_1 and the ratios p_n / p_0
solve an (N-1) x (N-1) linear system with one row per link other than the
one starting at x_1.

Square roots of real negative numbers are taken on the principal branch,
sqrt(-t) = i sqrt(t).  This is the value reached from the right along the
upper side of the real axis.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConditioningError, DimensionError, SingularityError
from .linkpat import LinkPattern
from .partition import point_config

MAX_CONDITION = 1e12
SQRT_PI = math.sqrt(math.pi)


def _sqrt(w) -> complex:
    return np.sqrt(np.complex128(w))


def link_spinor(x: np.ndarray, skip: tuple[int, int], y: float) -> complex:
    """prod over j not in ``skip`` (1-based) of (y - x_j)^(-1/2)."""
    value = 1.0 + 0.0j
    for j, xj in enumerate(x, start=1):
        if j in skip:
            continue
        value /= _sqrt(y - xj)
    return value


def corner_rows(beta: LinkPattern, x: np.ndarray, r: int, sign: int) -> np.ndarray:
    """Row U^(+)(r, s) or U^(-)(r, s) for s = 0..N-1 (r is the 1-based link number).

    sign=+1 evaluates at the left endpoint x_{a_r}, sign=-1 at the right endpoint x_{b_r}.
    """
    a, b = beta.links[r - 1]
    y = x[a - 1] if sign > 0 else x[b - 1]
    spinor = link_spinor(x, (a, b), y)
    powers = (y - x[0]) ** np.arange(beta.n_links)
    return powers * spinor


@dataclass(frozen=True)
class LinearSystem:
    """Matrix R (rows: links 2..N, columns: powers 1..N-1) and right-hand column V."""

    matrix: np.ndarray
    rhs: np.ndarray
    condition: float


def build_system(beta: LinkPattern, x: Sequence[float]) -> LinearSystem:
    """Assemble R(r, n) = U+(r+1, n) + U-(r+1, n) and V(r) = R(r, 0)."""
    pts = point_config(x)
    n = beta.n_links
    if pts.size != 2 * n:
        raise DimensionError(f"{beta} needs {2 * n} points, got {pts.size}")
    if n == 1:
        empty = np.zeros((0, 0), dtype=complex)
        return LinearSystem(empty, np.zeros(0, dtype=complex), 1.0)
    full = np.array(
        [corner_rows(beta, pts, r, +1) + corner_rows(beta, pts, r, -1) for r in range(2, n + 1)]
    )
    matrix = full[:, 1:]
    rhs = full[:, 0]
    condition = float(np.linalg.cond(matrix))
    if not condition < MAX_CONDITION:
        raise ConditioningError(f"condition number {condition:.3g} exceeds {MAX_CONDITION:g}")
    return LinearSystem(matrix, rhs, condition)


@dataclass(frozen=True)
class ObservablePoly:
    """P_beta expanded in powers of (z - x_1)."""

    base: np.ndarray
    coeffs: np.ndarray
    condition: float = 1.0

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(np.asarray(z) - self.base[0], self.coeffs)

    def derivative(self, z):
        deriv = np.polynomial.polynomial.polyder(self.coeffs)
        return np.polynomial.polynomial.polyval(np.asarray(z) - self.base[0], deriv)


def leading_coefficient(x: np.ndarray) -> float:
    """p_0 from sqrt(pi) i p_0 prod_{j>=2} (x_1 - x_j)^(-1/2) = 1."""
    spinor = link_spinor(x, (1,), x[0])
    p0 = 1.0 / (SQRT_PI * 1j * spinor)
    return float(p0.real)


def solve_poly(beta: LinkPattern, x: Sequence[float]) -> ObservablePoly:
    """Real coefficients p_0, ..., p_{N-1} of P_beta."""
    pts = point_config(x)
    system = build_system(beta, pts)
    p0 = leading_coefficient(pts)
    if beta.n_links == 1:
        return ObservablePoly(pts, np.array([p0]), system.condition)
    lu_solution = np.linalg.solve(system.matrix, -system.rhs)
    scale = np.max(np.abs(lu_solution))
    if np.max(np.abs(lu_solution.imag)) > 1e-8 * max(scale, 1.0):
        raise ConditioningError("linear system produced non-real coefficients")
    coeffs = np.concatenate([[1.0], lu_solution.real]) * p0
    return ObservablePoly(pts, coeffs, system.condition)


@dataclass(frozen=True)
class SpinorValue:
    """Value of phi on one sheet of the double cover; value**2 does not depend on the sheet."""

    value: complex
    sheet: int = 1

    @property
    def modulus_squared(self) -> float:
        return abs(self.value) ** 2


def phi(beta: LinkPattern, x: Sequence[float], z: complex, sheet: int = 1) -> SpinorValue:
    """phi_beta(z) = i P_beta(z) prod_j (z - x_j)^(-1/2), principal square roots."""
    pts = point_config(x)
    z = complex(z)
    if np.min(np.abs(z - pts)) == 0.0:
        raise SingularityError(f"z={z} is a marked point")
    poly = solve_poly(beta, pts)
    value = 1j * complex(poly(z)) * link_spinor(pts, (), z)
    return SpinorValue(sheet * value, sheet)


def expansion_k(beta: LinkPattern, x: Sequence[float]) -> float:
    """K_beta = (P'(x_1)/P(x_1) + 1/2 sum_{k>=2} 1/(x_k - x_1)) / sqrt(pi)."""
    pts = point_config(x)
    poly = solve_poly(beta, pts)
    ratio = poly.coeffs[1] / poly.coeffs[0] if poly.coeffs.size > 1 else 0.0
    return (ratio + 0.5 * float(np.sum(1.0 / (pts[1:] - pts[0])))) / SQRT_PI


def predicted_jumps(beta: LinkPattern, x: Sequence[float]) -> np.ndarray:
    """Residues pi |z - x_k| |phi(z)|^2 at each marked point, from the polynomial coefficients."""
    pts = point_config(x)
    poly = solve_poly(beta, pts)
    values = poly(pts)
    jumps = np.empty(pts.size)
    for k in range(pts.size):
        others = np.delete(pts, k)
        jumps[k] = math.pi * values[k] ** 2 / float(np.prod(np.abs(pts[k] - others)))
    return jumps


def boundary_heights(jumps: Sequence[float]) -> np.ndarray:
    """Heights C_1..C_2N with C_1 = 0, rising at even indices and falling at odd ones.

    C_k - C_{k-1} = +jump_k for even k and -jump_k for odd k; the value
    returned last closes the cycle and equals C_{2N} - jump_1 (zero when the
    jumps are consistent).
    """
    jumps = np.asarray(jumps, dtype=float)
    heights = np.zeros(jumps.size + 1)
    for k in range(2, jumps.size + 1):
        sign = 1.0 if k % 2 == 0 else -1.0
        heights[k - 1] = heights[k - 2] + sign * jumps[k - 1]
    heights[-1] = heights[-2] - jumps[0]
    return heights


def sign_patterns(n: int):
    return itertools.product((1, -1), repeat=n - 1)


def q_determinant(beta: LinkPattern, x: Sequence[float], signs: Sequence[int]) -> complex:
    """det of the rows U^(sign_r)(r+1, s), s = 1..N-1."""
    pts = point_config(x)
    rows = [corner_rows(beta, pts, r + 2, sign)[1:] for r, sign in enumerate(signs)]
    if not rows:
        return 1.0 + 0.0j
    return complex(np.linalg.det(np.array(rows)))


def q_vandermonde(beta: LinkPattern, x: Sequence[float], signs: Sequence[int]) -> complex:
    """Product form prod(y_r - x_1) prod_{s<t}(y_t - y_s) prod S(y_r) of the same determinant."""
    pts = point_config(x)
    ys, spinors = [], []
    for r, sign in enumerate(signs, start=2):
        a, b = beta.links[r - 1]
        y = pts[a - 1] if sign > 0 else pts[b - 1]
        ys.append(y)
        spinors.append(link_spinor(pts, (a, b), y))
    value = complex(np.prod(spinors)) if spinors else 1.0 + 0.0j
    for s, ys_s in enumerate(ys):
        value *= ys_s - pts[0]
        for yt in ys[s + 1 :]:
            value *= yt - ys_s
    return value


def phase_factor(values: Sequence[complex], tol: float = 1e-9) -> complex:
    """Common phase theta in {1, -1, i, -i} of a family of complex numbers.

    Returns the unit closest to the phase of the largest value and raises if
    any value deviates from that phase by more than ``tol`` (relative).
    """
    values = np.asarray(values, dtype=complex)
    largest = values[np.argmax(np.abs(values))]
    units = np.array([1, 1j, -1, -1j])
    theta = complex(units[np.argmax((largest * np.conj(units)).real)])
    rotated = values / theta
    if np.any(np.abs(rotated.imag) > tol * np.abs(values).max()):
        raise ArithmeticError("values do not share a phase in {1, -1, i, -i}")
    return theta


@dataclass(frozen=True)
class CramerSplit:
    """det(R with its first column replaced by V) / det(R), directly and as a weighted average."""

    direct: complex
    weighted: float
    theta: complex


def cramer_decomposition(beta: LinkPattern, x: Sequence[float]) -> CramerSplit:
    pts = point_config(x)
    system = build_system(beta, pts)
    bullet = system.matrix.copy()
    bullet[:, 0] = system.rhs
    direct = complex(np.linalg.det(bullet) / np.linalg.det(system.matrix))
    weights, averages = [], []
    for signs in sign_patterns(beta.n_links):
        weights.append(q_determinant(beta, pts, signs))
        ys = [
            pts[(beta.links[r - 1][0] if sign > 0 else beta.links[r - 1][1]) - 1]
            for r, sign in enumerate(signs, start=2)
        ]
        averages.append(sum(1.0 / (y - pts[0]) for y in ys))
    theta = phase_factor(weights)
    g = (np.asarray(weights) / theta).real
    weighted = float(np.dot(g, averages) / g.sum())
    return CramerSplit(direct, weighted, theta)


def closed_form_phi_n2(beta: LinkPattern, x: Sequence[float], z: complex) -> complex:
    """Explicit N=2 observables for the unnested and the nested boundary conditions."""
    x1, x2, x3, x4 = point_config(x)
    z = complex(z)
    if beta.links == ((1, 2), (3, 4)):
        slope = math.sqrt((x3 - x1) * (x4 - x1) / (x2 - x1)) - math.sqrt(
            (x3 - x2) * (x4 - x2) / (x2 - x1)
        )
    elif beta.links == ((1, 4), (2, 3)):
        slope = math.sqrt((x4 - x2) * (x4 - x3) / (x4 - x1)) + math.sqrt(
            (x2 - x1) * (x3 - x1) / (x4 - x1)
        )
    else:
        raise DimensionError("closed forms exist for the two N=2 patterns only")
    numerator = slope * (z - x1) - math.sqrt((x2 - x1) * (x3 - x1) * (x4 - x1))
    denominator = _sqrt(z - x1) * _sqrt(z - x2) * _sqrt(z - x3) * _sqrt(z - x4)
    return 1j / SQRT_PI * numerator / denominator
