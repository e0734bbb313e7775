"""Priors over target abundance.

A :class:`Prior` is a weighted mixture of point masses and continuous
densities on ``a >= 0``.  Two continuous kinds exist: the unit uniform on
``[0, 1]`` and the exponential ``(1/eps) exp(-a/eps)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ContractError

UNIFORM01 = "uniform01"
EXPONENTIAL = "exponential"
CONTINUOUS_KINDS = (UNIFORM01, EXPONENTIAL)

_WEIGHT_TOL = 1e-12
MAX_MOMENT_ORDER = 20


@dataclass(frozen=True)
class ContinuousPart:
    kind: str
    weight: float
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind not in CONTINUOUS_KINDS:
            raise ContractError(f"unknown density kind {self.kind!r}")
        if not (math.isfinite(self.weight) and self.weight >= 0):
            raise ContractError(f"weight must be finite and >= 0, got {self.weight}")
        if self.kind == EXPONENTIAL:
            if self.epsilon is None or not (math.isfinite(self.epsilon) and self.epsilon > 0):
                raise ContractError(f"exponential density needs epsilon > 0, got {self.epsilon}")
        elif self.epsilon is not None:
            raise ContractError("uniform density takes no epsilon")

    def density(self, a):
        """Unweighted density at ``a`` (array or scalar)."""
        a = np.asarray(a, dtype=float)
        if self.kind == UNIFORM01:
            return np.where((a >= 0) & (a <= 1), 1.0, 0.0)
        eps = self.epsilon
        return np.where(a >= 0, np.exp(-a / eps) / eps, 0.0)

    def support_end(self, a_max: float) -> float:
        return min(1.0, a_max) if self.kind == UNIFORM01 else a_max


@dataclass(frozen=True)
class Prior:
    """Mixture of point masses ``(location, weight)`` and continuous parts.

    Total weight must be 1 to within 1e-12.  Point masses are matched by exact
    location, so callers should reuse the same float they constructed with.
    """

    point_masses: tuple[tuple[float, float], ...] = ()
    continuous_parts: tuple[ContinuousPart, ...] = ()

    def __post_init__(self):
        masses = tuple((float(a), float(w)) for a, w in self.point_masses)
        parts = tuple(self.continuous_parts)
        for a, w in masses:
            if not (math.isfinite(a) and a >= 0):
                raise ContractError(f"point-mass location must be finite and >= 0, got {a}")
            if not (math.isfinite(w) and w >= 0):
                raise ContractError(f"point-mass weight must be finite and >= 0, got {w}")
        total = math.fsum([w for _, w in masses] + [p.weight for p in parts])
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ContractError(f"prior weights sum to {total!r}, expected 1")
        object.__setattr__(self, "point_masses", masses)
        object.__setattr__(self, "continuous_parts", parts)

    @classmethod
    def delta(cls, a0: float) -> "Prior":
        return cls(point_masses=((a0, 1.0),))

    @classmethod
    def uniform(cls) -> "Prior":
        return cls(continuous_parts=(ContinuousPart(UNIFORM01, 1.0),))

    @classmethod
    def exponential(cls, epsilon: float) -> "Prior":
        return cls(continuous_parts=(ContinuousPart(EXPONENTIAL, 1.0, epsilon),))

    @classmethod
    def delta_sum(cls, locations, weights) -> "Prior":
        return cls(point_masses=tuple(zip(locations, weights)))

    def max_location(self) -> float:
        return max((a for a, _ in self.point_masses), default=0.0)

    def to_dict(self) -> dict:
        return {
            "point_masses": [[a, w] for a, w in self.point_masses],
            "continuous": [
                {"kind": p.kind, "weight": p.weight, **({"epsilon": p.epsilon} if p.epsilon is not None else {})}
                for p in self.continuous_parts
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Prior":
        try:
            masses = tuple((float(a), float(w)) for a, w in data.get("point_masses", []))
            parts = tuple(
                ContinuousPart(p["kind"], float(p["weight"]),
                               float(p["epsilon"]) if "epsilon" in p else None)
                for p in data.get("continuous", [])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ContractError(f"malformed prior: {exc}") from exc
        return cls(masses, parts)


def prior_density(p: Prior, a):
    """Continuous-part density of ``p`` at ``a``; point masses are excluded."""
    a_arr = np.asarray(a, dtype=float)
    if np.any(a_arr < 0):
        raise ContractError("prior density is defined for a >= 0")
    total = np.zeros_like(a_arr)
    for part in p.continuous_parts:
        total = total + part.weight * part.density(a_arr)
    return float(total) if total.ndim == 0 else total


def log_prior_density(p: Prior, a):
    with np.errstate(divide="ignore"):
        return np.log(prior_density(p, a))


def mass_at(p: Prior, a: float) -> float:
    """Total weight of point masses located exactly at ``a``."""
    if a < 0:
        raise ContractError("mass_at is defined for a >= 0")
    return math.fsum(w for loc, w in p.point_masses if loc == a)


def exponential_moment(k: int, epsilon: float) -> float:
    """``integral_0^inf a^k exp(-a/eps) da = k! eps^(k+1)``."""
    _check_moment_args(k, epsilon)
    return math.factorial(k) * epsilon ** (k + 1)


def truncated_exponential_moment(k: int, epsilon: float, upper: float = 1.0) -> float:
    """The same moment restricted to ``[0, upper]``.

    Equals :func:`exponential_moment` minus the tail beyond ``upper``, which is
    of order ``exp(-upper/eps)``.  The tail is computed by quadrature.
    """
    _check_moment_args(k, epsilon)
    tail, _ = integrate.quad(lambda a: a**k * math.exp(-a / epsilon), upper, np.inf,
                             epsabs=0.0, epsrel=1e-13, limit=200)
    return exponential_moment(k, epsilon) - tail


def _check_moment_args(k, epsilon):
    if not isinstance(k, (int, np.integer)) or k < 0 or k > MAX_MOMENT_ORDER:
        raise ContractError(f"moment order must be an integer in [0, {MAX_MOMENT_ORDER}], got {k!r}")
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise ContractError(f"epsilon must be > 0, got {epsilon}")


@dataclass(frozen=True)
class MixedPriorSchedule:
    """Bookkeeping for the mixed prior at finite ``eps``.

    ``beta`` is held fixed while ``eps`` shrinks; the exponential weight is
    ``alpha = 1 + eps - eps/beta`` so that ``beta = eps / (1 - alpha + eps)``.
    """

    beta: float
    epsilon: float
    base: Prior = Prior.uniform()

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise ContractError(f"beta must lie in (0, 1], got {self.beta}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ContractError(f"epsilon must be > 0, got {self.epsilon}")
        alpha = self.alpha
        if not (0.0 <= alpha <= 1.0):
            raise ContractError(f"(beta={self.beta}, epsilon={self.epsilon}) gives alpha={alpha} outside [0, 1]")

    @property
    def alpha(self) -> float:
        return 1.0 + self.epsilon - self.epsilon / self.beta


def mixed_prior(schedule: MixedPriorSchedule) -> Prior:
    """``alpha * Exponential(eps) + (1 - alpha) * base`` as an ordinary :class:`Prior`."""
    alpha = schedule.alpha
    rest = 1.0 - alpha
    base = schedule.base
    masses = tuple((a, rest * w) for a, w in base.point_masses)
    parts = (ContinuousPart(EXPONENTIAL, alpha, schedule.epsilon),) + tuple(
        ContinuousPart(p.kind, rest * p.weight, p.epsilon) for p in base.continuous_parts
    )
    return Prior(masses, parts)
