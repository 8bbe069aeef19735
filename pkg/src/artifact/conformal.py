"""Conformal transport from a rectangle to the upper half-plane.

The Jacobi function sn(., k) maps the rectangle [-K, K] x [0, K'] onto the
upper half-plane, sending the corners -K + iK', -K, K, K + iK' to
-1/k, -1, 1, 1/k.  Boundary positions on a rectangle are measured by arc
length counterclockwise from the top-left corner, so the corners sit at
0, M, M + L and 2M + L for a rectangle of width L and height M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConditioningError, PreconditionError, ValidationError
from .partition import MobiusMap

AGM_TOL = 1e-16
BISECTION_TOL = 1e-15


def agm(a: float, b: float) -> float:
    """Arithmetic-geometric mean of two non-negative numbers."""
    if a < 0 or b < 0:
        raise PreconditionError("AGM needs non-negative arguments")
    for _ in range(64):
        if abs(a - b) <= AGM_TOL * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def elliptic_k(k: float) -> float:
    """Complete elliptic integral of the first kind, K(k) = pi / (2 AGM(1, sqrt(1 - k^2)))."""
    if not 0.0 <= k < 1.0:
        raise PreconditionError(f"modulus k={k} outside [0, 1)")
    return 0.5 * math.pi / agm(1.0, math.sqrt((1.0 - k) * (1.0 + k)))


def elliptic_k_pair(k: float, k_complement: float) -> tuple[float, float]:
    """(K(k), K(k')) from both moduli, accurate even when one of them is tiny."""
    return 0.5 * math.pi / agm(1.0, k_complement), 0.5 * math.pi / agm(1.0, k)


def sn_cn_dn(u, k: float):
    """Jacobi sn, cn, dn of real argument by the descending Landen (AGM) scheme."""
    if not 0.0 <= k < 1.0:
        raise PreconditionError(f"modulus k={k} outside [0, 1)")
    u = np.asarray(u, dtype=float)
    if k == 0.0:
        return np.sin(u), np.cos(u), np.ones_like(u)
    a, b, c = [1.0], [math.sqrt((1.0 - k) * (1.0 + k))], [k]
    while abs(c[-1]) > AGM_TOL and len(a) < 64:
        a_next = 0.5 * (a[-1] + b[-1])
        c.append(0.5 * (a[-1] - b[-1]))
        b.append(math.sqrt(a[-1] * b[-1]))
        a.append(a_next)
    steps = len(a) - 1
    phi = (2.0**steps) * a[-1] * u
    for n in range(steps, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c[n] / a[n] * np.sin(phi)))
    sn = np.sin(phi)
    cn = np.cos(phi)
    # dn > 0 on the real line; this form avoids the 0/0 of the ratio formula at cn = 0
    dn = np.sqrt(b[0] ** 2 + (k * cn) ** 2)
    return sn, cn, dn


def jacobi_sn(u, k: float):
    return sn_cn_dn(u, k)[0]


def sn_by_landen_step(u, k: float):
    """sn(u, k) recomputed through one descending Landen transformation.

    With k' = sqrt(1 - k^2) and k1 = (1 - k') / (1 + k'),
    sn(u, k) = (1 + k1) sn(v, k1) / (1 + k1 sn(v, k1)^2) where v = u / (1 + k1).
    """
    kp = math.sqrt((1.0 - k) * (1.0 + k))
    k1 = (1.0 - kp) / (1.0 + kp)
    s = jacobi_sn(np.asarray(u, dtype=float) / (1.0 + k1), k1)
    return (1.0 + k1) * s / (1.0 + k1 * s * s)


def rectangle_ratio(k: float) -> float:
    """K(k') / (2 K(k)): height over width of the rectangle mapped by sn(., k)."""
    kp = math.sqrt((1.0 - k) * (1.0 + k))
    big_k, big_kp = elliptic_k_pair(k, kp)
    return big_kp / (2.0 * big_k)


def rect_modulus(width: float, height: float) -> float:
    """Modulus k with K(k') / (2 K(k)) = height / width, by bisection.

    The unknown is the angle theta with k = sin(theta), bisected to a relative
    tolerance so that tall rectangles (tiny k) keep full accuracy.  Very wide
    rectangles push k so close to 1 that it is no longer representable; those
    raise ConditioningError.
    """
    if not (width > 0 and height > 0):
        raise PreconditionError("rectangle sides must be positive")
    target = height / width
    lo, hi = 0.0, 0.5 * math.pi
    for _ in range(1100):
        mid = 0.5 * (lo + hi)
        big_k, big_kp = elliptic_k_pair(math.sin(mid), math.cos(mid))
        if big_kp / (2.0 * big_k) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < BISECTION_TOL * mid:
            break
    k = math.sin(0.5 * (lo + hi))
    if k >= 1.0:
        raise ConditioningError(f"aspect ratio {target:g} gives a modulus that rounds to 1")
    return k


@dataclass(frozen=True)
class RectangleSpec:
    """Rectangle [0, width] x [0, height] with marked boundary points.

    ``positions`` are arc lengths measured counterclockwise from the top-left
    corner, in [0, 2 (width + height)), listed in counterclockwise order
    (increasing up to one wrap-around).
    """

    width: float
    height: float
    positions: tuple[float, ...]

    def __init__(self, width: float, height: float, positions: Sequence[float]):
        object.__setattr__(self, "width", float(width))
        object.__setattr__(self, "height", float(height))
        object.__setattr__(self, "positions", tuple(float(p) for p in positions))
        if not (self.width > 0 and self.height > 0):
            raise ValidationError("rectangle sides must be positive")
        perimeter = self.perimeter
        if any(not 0.0 <= p < perimeter for p in self.positions):
            raise ValidationError(f"positions must lie in [0, {perimeter})")
        if len(set(self.positions)) != len(self.positions):
            raise ValidationError("marked points must be distinct")
        descents = sum(
            1 for a, b in zip(self.positions, self.positions[1:] + self.positions[:1]) if b <= a
        )
        if len(self.positions) > 1 and descents != 1:
            raise ValidationError("positions are not in counterclockwise order")

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.width + self.height)

    @classmethod
    def corners(cls, width: float, height: float) -> "RectangleSpec":
        """The four corners, starting at the top-left one."""
        return cls(width, height, (0.0, height, height + width, 2.0 * height + width))

    def boundary_point(self, position: float) -> complex:
        """Point of the rectangle at the given counterclockwise arc length."""
        w, h = self.width, self.height
        s = position % self.perimeter
        if s <= h:
            return complex(0.0, h - s)
        s -= h
        if s <= w:
            return complex(s, 0.0)
        s -= w
        if s <= h:
            return complex(w, s)
        s -= h
        return complex(w - s, h)


def _boundary_image(rect: RectangleSpec, position: float, k: float, big_k: float) -> float:
    """sn-image of a boundary position; math.inf for the midpoint of the top side."""
    w, h = rect.width, rect.height
    scale = 2.0 * big_k / w
    kp = math.sqrt((1.0 - k) * (1.0 + k))
    s = position % rect.perimeter
    if s <= h:  # left side, going down
        return -1.0 / float(sn_cn_dn(scale * (h - s), kp)[2])
    s -= h
    if s <= w:  # bottom side, left to right
        return float(jacobi_sn(scale * (s - 0.5 * w), k))
    s -= w
    if s <= h:  # right side, going up
        return 1.0 / float(sn_cn_dn(scale * s, kp)[2])
    s -= h  # top side, right to left
    value = float(jacobi_sn(scale * (0.5 * w - s), k))
    return math.inf if value == 0.0 else 1.0 / (k * value)


def marked_points_halfplane(rect: RectangleSpec) -> np.ndarray:
    """Increasing half-plane images of the marked points.

    If the point at infinity does not lie on the boundary arc from the last
    marked point back to the first, the images are moved by the Mobius map
    z -> -1 / (z - t), with t the image of the midpoint of that arc.
    """
    k = rect_modulus(rect.width, rect.height)
    big_k = elliptic_k(k)
    images = [_boundary_image(rect, p, k, big_k) for p in rect.positions]
    finite = [v for v in images if math.isfinite(v)]
    if len(finite) == len(images) and all(b > a for a, b in zip(images, images[1:])):
        return np.array(images)
    last, first = rect.positions[-1], rect.positions[0]
    gap = (first - last) % rect.perimeter
    t = _boundary_image(rect, last + 0.5 * gap, k, big_k)
    if not math.isfinite(t):
        raise ValidationError("marked points are not in counterclockwise order")
    move = MobiusMap(0.0, -1.0, 1.0, -t)
    moved = np.array([0.0 if not math.isfinite(v) else move(v) for v in images])
    if np.any(np.diff(moved) <= 0):
        raise ValidationError("images of the marked points are not increasing")
    return moved
