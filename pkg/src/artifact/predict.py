"""Pure partition functions, crossing probabilities and the boundary-condition comparison identity.

Pure partition functions Z_alpha solve the linear system
sum_alpha M_{alpha,beta}(q) Z_alpha = G_beta over all link patterns.  At
exceptional kappa the meander matrix is singular (for example kappa = 16/3
with N = 3); there Z is taken as the limit of the solutions at kappa +/- eps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .coulomb import g_beta_numeric
from .errors import (
    CapacityError,
    DegenerateInputError,
    DimensionError,
    ExceptionalKappaError,
    PreconditionError,
    ValidationError,
)
from .linkpat import LinkPattern, enumerate_patterns, meander_matrix, parse_pattern, unnested
from .partition import FK_ISING, KAPPA_FK_ISING, CouplingParams, cross_ratio, f_beta, point_config

MAX_LINKS_PREDICT = 3
SINGULAR_CONDITION = 1e10
PERTURBATION_STEPS = (1e-2, 5e-3, 2.5e-3)
SUM_TOLERANCE = 1e-10


# ----------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class CrossingDistribution:
    """Law of the connectivity pattern for a fixed boundary condition.

    ``probs`` sums to one.  ``raw`` keeps the values before normalization and
    ``stderr`` the Monte Carlo standard errors when the distribution is empirical.
    """

    n_links: int
    boundary: LinkPattern
    probs: Mapping[LinkPattern, float]
    raw: Mapping[LinkPattern, float] = field(default_factory=dict)
    stderr: Mapping[LinkPattern, float] = field(default_factory=dict)
    samples: int = 0

    def __post_init__(self):
        if self.boundary.n_links != self.n_links:
            raise DimensionError("boundary pattern has the wrong number of links")
        for pattern, value in self.probs.items():
            if pattern.n_links != self.n_links:
                raise DimensionError(f"{pattern} has the wrong number of links")
            if not -1e-12 <= value <= 1.0 + 1e-12:
                raise ValidationError(f"probability {value} of {pattern} outside [0, 1]")
        total = sum(self.probs.values())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ValidationError(f"probabilities sum to {total!r}")

    def __getitem__(self, pattern: LinkPattern) -> float:
        return self.probs.get(pattern, 0.0)

    def as_vector(self) -> np.ndarray:
        return np.array([self[p] for p in enumerate_patterns(self.n_links)])

    @property
    def normalization_defect(self) -> float:
        """|sum of raw values - 1|; zero for distributions that were not renormalized."""
        if not self.raw:
            return 0.0
        return abs(sum(self.raw.values()) - 1.0)

    def to_dict(self, digits: int = 12) -> dict:
        def fmt(values: Mapping[LinkPattern, float]) -> dict:
            return {p.index_form(): float(f"{values[p]:.{digits}g}") for p in _ordered(values)}

        out = {
            "N": self.n_links,
            "boundary": self.boundary.index_form(),
            "probs": fmt(self.probs),
        }
        if self.stderr:
            out["stderr"] = fmt(self.stderr)
            out["samples"] = self.samples
        return out

    def to_json(self, digits: int = 12) -> str:
        return json.dumps(self.to_dict(digits), indent=2)

    @classmethod
    def from_dict(cls, data: Mapping) -> "CrossingDistribution":
        probs = {parse_pattern(k): float(v) for k, v in data["probs"].items()}
        stderr = {parse_pattern(k): float(v) for k, v in data.get("stderr", {}).items()}
        return cls(
            int(data["N"]),
            parse_pattern(data["boundary"]),
            probs,
            stderr=stderr,
            samples=int(data.get("samples", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "CrossingDistribution":
        return cls.from_dict(json.loads(text))


def _ordered(values: Mapping[LinkPattern, float]) -> list[LinkPattern]:
    return sorted(values, key=LinkPattern.sort_key)


def normalized_distribution(
    boundary: LinkPattern, weights: Mapping[LinkPattern, float], **extra
) -> CrossingDistribution:
    total = float(sum(weights.values()))
    if not total > 0 or not math.isfinite(total):
        raise DegenerateInputError(f"cannot normalize weights with total {total}")
    probs = {p: float(w) / total for p, w in weights.items()}
    return CrossingDistribution(boundary.n_links, boundary, probs, **extra)


# ----------------------------------------------------------------------------
# pure partition functions


def _g_vector(n: int, x: np.ndarray, params: CouplingParams, tol: float) -> np.ndarray:
    """G_beta for every beta; at kappa = 16/3 the explicit F_beta is used (they coincide)."""
    patterns = enumerate_patterns(n)
    if params.kappa == KAPPA_FK_ISING:
        return np.array([f_beta(b, x) for b in patterns])
    return np.array([g_beta_numeric(b, x, params, tol) for b in patterns])


def _solve_at(n: int, x: np.ndarray, params: CouplingParams, tol: float) -> tuple[np.ndarray, float]:
    matrix = meander_matrix(n, params.q).entries
    condition = float(np.linalg.cond(matrix))
    return np.linalg.solve(matrix, _g_vector(n, x, params, tol)), condition


def richardson_even(steps: Sequence[float], values: Sequence[np.ndarray]) -> np.ndarray:
    """Extrapolate values known to be even functions of eps to eps = 0.

    Fits a polynomial in eps^2 through the given points and evaluates it at zero.
    """
    squares = np.asarray(steps, dtype=float) ** 2
    values = np.asarray(values, dtype=float)
    result = np.zeros(values.shape[1:])
    for i, si in enumerate(squares):
        weight = 1.0
        for j, sj in enumerate(squares):
            if j != i:
                weight *= sj / (sj - si)
        result = result + weight * values[i]
    return result


def z_vector(
    n: int,
    x: Sequence[float],
    params: CouplingParams = FK_ISING,
    tol: float = 1e-10,
    perturb: bool = True,
) -> np.ndarray:
    """All pure partition functions Z_alpha for patterns with n links, in canonical order."""
    pts = point_config(x)
    return _z_vector_cached(n, tuple(pts.tolist()), params, tol, perturb).copy()


@lru_cache(maxsize=256)
def _z_vector_cached(
    n: int, x: tuple[float, ...], params: CouplingParams, tol: float, perturb: bool
) -> np.ndarray:
    pts = np.asarray(x)
    if pts.size != 2 * n:
        raise DimensionError(f"{n} links need {2 * n} points, got {pts.size}")
    if n > MAX_LINKS_PREDICT:
        raise CapacityError(f"N={n} exceeds the cap N <= {MAX_LINKS_PREDICT}")
    if not 4.0 < params.kappa <= 6.0:
        raise PreconditionError(f"pure partition functions need kappa in (4, 6], got {params.kappa}")
    if n == 1:
        return np.array([(pts[1] - pts[0]) ** (-2.0 * params.h)])
    matrix = meander_matrix(n, params.q).entries
    if np.linalg.cond(matrix) < SINGULAR_CONDITION:
        return _solve_at(n, pts, params, tol)[0]
    if not perturb:
        raise ExceptionalKappaError(f"meander matrix is singular at kappa={params.kappa}")
    averages = []
    for eps in PERTURBATION_STEPS:
        above = _solve_at(n, pts, CouplingParams(params.kappa + eps), tol)[0]
        below = _solve_at(n, pts, CouplingParams(params.kappa - eps), tol)[0]
        averages.append(0.5 * (above + below))
    return richardson_even(PERTURBATION_STEPS, averages)


def z_pure(
    alpha: LinkPattern,
    x: Sequence[float],
    params: CouplingParams = FK_ISING,
    tol: float = 1e-10,
    perturb: bool = True,
) -> float:
    """Pure partition function Z_alpha(x)."""
    values = z_vector(alpha.n_links, x, params, tol, perturb)
    return float(values[enumerate_patterns(alpha.n_links).index(alpha)])


def z_nested_closed_form(x: Sequence[float]) -> float:
    """Z for {{1,4},{2,3}} at kappa = 16/3:
    (x4-x1)^(-1/8) (x3-x2)^(-1/8) chi^(3/8) (1 + sqrt(1-chi))^(-1/2)."""
    x1, x2, x3, x4 = point_config(x)
    chi = cross_ratio(x1, x2, x3, x4)
    return ((x4 - x1) * (x3 - x2)) ** (-0.125) * chi**0.375 / math.sqrt(1.0 + math.sqrt(1.0 - chi))


def power_law_bound(alpha: LinkPattern, x: Sequence[float], params: CouplingParams = FK_ISING) -> float:
    """prod_{(a,b) in alpha} |x_b - x_a|^(-2h), an upper bound for Z_alpha."""
    pts = point_config(x)
    return math.prod((pts[b - 1] - pts[a - 1]) ** (-2.0 * params.h) for a, b in alpha.links)


# ----------------------------------------------------------------------------
# crossing probabilities at kappa = 16/3


def crossing_distribution(beta: LinkPattern, x: Sequence[float], tol: float = 1e-10) -> CrossingDistribution:
    """Scaling-limit law of the connectivity pattern: M_{alpha,beta}(2) Z_alpha / F_beta."""
    pts = point_config(x)
    n = beta.n_links
    patterns = enumerate_patterns(n)
    zs = z_vector(n, pts, FK_ISING, tol)
    denominator = f_beta(beta, pts)
    meander = meander_matrix(n, FK_ISING.q)
    column = meander.index(beta)
    raw = {p: float(meander.entries[i, column] * zs[i] / denominator) for i, p in enumerate(patterns)}
    return normalized_distribution(beta, {p: min(max(v, 0.0), 1.0) for p, v in raw.items()}, raw=raw)


def crossing_prob(alpha: LinkPattern, beta: LinkPattern, x: Sequence[float], tol: float = 1e-10) -> float:
    """P[connectivity = alpha] in the scaling limit with boundary condition beta."""
    if alpha.n_links != beta.n_links:
        raise DimensionError("patterns have different numbers of links")
    dist = crossing_distribution(beta, x, tol)
    return dist.raw[alpha]


def nested_crossing_closed_form(chi: float) -> float:
    """(1 - sqrt(1 - chi)) / sqrt(chi): N=2 probability of the nested connectivity under the unnested boundary."""
    if not 0.0 < chi < 1.0:
        raise PreconditionError("cross-ratio must lie in (0, 1)")
    return (1.0 - math.sqrt(1.0 - chi)) / math.sqrt(chi)


# ----------------------------------------------------------------------------
# comparison between boundary conditions


def reweight_distribution(dist: CrossingDistribution, target: LinkPattern, q: float) -> CrossingDistribution:
    """P_target[alpha] proportional to M_{alpha,target}(q) / M_{alpha,source}(q) * P_source[alpha]."""
    if target.n_links != dist.n_links:
        raise DimensionError("target boundary has the wrong number of links")
    meander = meander_matrix(dist.n_links, q)
    weights = {
        alpha: meander.entry(alpha, target) / meander.entry(alpha, dist.boundary) * value
        for alpha, value in dist.probs.items()
    }
    return normalized_distribution(target, weights)


def compare_identity(dist_unnested: CrossingDistribution, beta: LinkPattern, q: float) -> CrossingDistribution:
    """Boundary-beta law obtained from the law under the unnested boundary condition."""
    if dist_unnested.boundary != unnested(dist_unnested.n_links):
        raise PreconditionError("the source distribution must have the unnested boundary condition")
    return reweight_distribution(dist_unnested, beta, q)


# ----------------------------------------------------------------------------
# kernel of the meander matrix


@dataclass(frozen=True)
class KernelResult:
    """Orthonormal kernel basis (columns), singular values and the residual norm of M @ basis."""

    basis: np.ndarray
    singular_values: np.ndarray
    residual: float


def meander_kernel(n: int, q: float, rel_tol: float = 1e-10) -> KernelResult:
    """Null space of the meander matrix from its singular value decomposition."""
    entries = meander_matrix(n, q).entries
    _, sing, vh = np.linalg.svd(entries)
    null_mask = sing <= rel_tol * sing[0]
    basis = vh[null_mask].T
    residual = float(np.linalg.norm(entries @ basis)) if basis.size else 0.0
    return KernelResult(basis, sing, residual)


def scaled_to_unit_entry(vector: np.ndarray) -> np.ndarray:
    """Rescale a vector so that its entry of smallest magnitude equals +1."""
    vector = np.asarray(vector, dtype=float)
    return vector / vector[np.argmin(np.abs(vector))]
