"""Detector statistics for a target of known signature and unknown strength.

Every detector here is a score over pixels where larger means more
target-like.  Scores are reported on their natural scale (likelihood ratios,
derivative scale for the LMP, affine mixes for the mixed and sculpted
detectors); only the ordering within one detector is meaningful.

Functions take a :class:`DetectionProblem` (background plus interaction
model) and either one pixel ``(d,)`` or a stack ``(n, d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import numerics
from ._rows import by_rows
from .errors import ContractError, NumericError
from .models import (
    GaussianBackground,
    TargetInteractionModel,
    _as_pixels,
    _check_abundance,
    _check_positive,
    _lmp,
    _log_likelihood,
    _unwrap,
)
from .priors import EXPONENTIAL, MixedPriorSchedule, Prior, log_prior_density, mixed_prior

_SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class DetectionProblem:
    """A known background together with the target-interaction model."""

    background: GaussianBackground
    model: TargetInteractionModel

    def __post_init__(self):
        if self.background.dim != self.model.dim:
            raise ContractError(
                f"background dimension {self.background.dim} != signature dimension {self.model.dim}")

    @property
    def dim(self) -> int:
        return self.background.dim

    @property
    def a_max(self) -> float:
        return self.model.a_max

    def pixels(self, x) -> tuple[np.ndarray, bool]:
        X, single = _as_pixels(x, self.dim)
        _check_positive(self.model, X)
        return X, single

    def log_lik(self, a, X: np.ndarray) -> np.ndarray:
        return _log_likelihood(self.background, self.model, a, X)


def _finite(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NumericError(f"{what} produced a non-finite score")
    return values


def _exp(v):
    # Overflow is reported by _finite as a NumericError, not as a warning.
    with np.errstate(over="ignore"):
        return np.exp(v)


def _log_ratio(problem: DetectionProblem, a, X, l0) -> np.ndarray:
    return problem.log_lik(a, X) - l0


def matched_filter(problem: DetectionProblem, x):
    """``t' Sigma^{-1} (x - mu)``, computed directly from the background."""
    X, single = problem.pixels(x)
    bg = problem.background
    w = bg.solve(problem.model.signature)
    return _unwrap(by_rows(lambda B: (B - bg.mean) @ w, X), single)


def clairvoyant(problem: DetectionProblem, a0: float, x):
    """Likelihood ratio ``p(a0, x) / p(0, x)`` for a known strength ``a0``."""
    _check_abundance(problem.model, a0)
    X, single = problem.pixels(x)
    l0 = problem.log_lik(0.0, X)
    return _unwrap(_finite(_exp(_log_ratio(problem, a0, X, l0)), "clairvoyant"), single)


def lmp(problem: DetectionProblem, x):
    """Locally most powerful detector ``p'(0, x) / p(0, x)``."""
    X, single = problem.pixels(x)
    return _unwrap(_lmp(problem.background, problem.model, X), single)


def _maximize(problem, X, log_weight=None):
    l0 = problem.log_lik(0.0, X)

    def objective(a):
        value = _log_ratio(problem, a, X, l0)
        if log_weight is not None:
            value = value + log_weight(a)
        return value

    return numerics.maximize_bounded(objective, problem.a_max, X.shape[0]), l0


def ml_abundance(problem: DetectionProblem, x):
    """Maximum-likelihood abundance on ``[0, a_max]``."""
    X, single = problem.pixels(x)
    (a_hat, _), _ = _maximize(problem, X)
    return _unwrap(a_hat, single)


def glrt(problem: DetectionProblem, x):
    """Generalized likelihood ratio ``max_a p(a, x) / p(0, x)`` over ``[0, a_max]``.

    Never below 1 because ``a = 0`` is feasible.
    """
    X, single = problem.pixels(x)
    (_, log_ratio), _ = _maximize(problem, X)
    return _unwrap(_finite(_exp(log_ratio), "glrt"), single)


def _penalty_log(penalty):
    if isinstance(penalty, Prior):
        return lambda a: log_prior_density(penalty, a)
    return penalty


def penalized_abundance(problem: DetectionProblem, penalty, x):
    """``argmax_a q(a) p(a, x)`` over ``[0, a_max]``.

    ``penalty`` is a :class:`Prior` (its continuous density is used) or a
    callable returning ``log q(a)``.
    """
    X, single = problem.pixels(x)
    a_hat, _, _ = _penalized(problem, penalty, X)
    return _unwrap(a_hat, single)


def _penalized(problem, penalty, X):
    log_q = _penalty_log(penalty)
    grid = numerics.abundance_grid(problem.a_max)
    if not np.any(np.isfinite(log_q(grid))):
        raise ContractError("penalty is zero on the entire abundance domain")
    (a_hat, objective), l0 = _maximize(problem, X, log_q)
    return a_hat, objective, l0


def penalized_glrt(problem: DetectionProblem, penalty, x, objective_value: bool = False):
    """Clairvoyant detector evaluated at the penalized-likelihood abundance.

    With ``objective_value=True`` the penalized ratio ``q(a) p(a, x) / p(0, x)``
    at the maximizer is returned instead.
    """
    X, single = problem.pixels(x)
    a_hat, objective, l0 = _penalized(problem, penalty, X)
    log_score = objective if objective_value else _log_ratio(problem, a_hat, X, l0)
    return _unwrap(_finite(_exp(log_score), "penalized glrt"), single)


def _bayes(problem: DetectionProblem, prior: Prior, X, n_nodes, renormalize):
    l0 = problem.log_lik(0.0, X)
    total = np.zeros(X.shape[0])
    for a_i, w_i in prior.point_masses:
        _check_abundance(problem.model, a_i)
        total = total + w_i * _exp(_log_ratio(problem, a_i, X, l0))
    for part in prior.continuous_parts:
        if part.weight == 0.0:
            continue
        nodes, weights = numerics.density_rule(part, problem.a_max, n_nodes)
        L = np.empty((X.shape[0], nodes.size))
        for j, a in enumerate(nodes):
            L[:, j] = _log_ratio(problem, a, X, l0)
        peak = L.max(axis=1)
        integral = _exp(peak) * by_rows(lambda E: E @ weights, np.exp(L - peak[:, None]))
        if renormalize and part.kind == EXPONENTIAL:
            integral = integral / -math.expm1(-problem.a_max / part.epsilon)
        total = total + integral
    return _finite(total, "bayes")


def bayes(problem: DetectionProblem, prior: Prior, x, n_nodes: int = numerics.DEFAULT_NODES,
          renormalize: bool = False):
    """Prior-averaged likelihood ratio ``integral q(a) p(a, x) da / p(0, x)``.

    Point masses contribute exact clairvoyant terms; continuous parts are
    integrated by Gauss-Legendre quadrature on ``[0, a_max]`` with the
    exponent shifted by its per-pixel maximum before exponentiating.  The
    exponential tail beyond ``a_max`` is dropped unless ``renormalize``.
    """
    X, single = problem.pixels(x)
    return _unwrap(_bayes(problem, prior, X, n_nodes, renormalize), single)


def mixed_star(problem: DetectionProblem, beta: float, base_prior: Prior, x):
    """``beta * LMP + (1 - beta) * Bayes(base_prior)``."""
    if not (0.0 <= beta <= 1.0):
        raise ContractError(f"beta must lie in [0, 1], got {beta}")
    X, single = problem.pixels(x)
    out = beta * _lmp(problem.background, problem.model, X)
    if beta < 1.0:
        out = out + (1.0 - beta) * _bayes(problem, base_prior, X, numerics.DEFAULT_NODES, False)
    return _unwrap(out, single)


def finite_eps_mixed(problem: DetectionProblem, schedule: MixedPriorSchedule, x):
    """``beta (D_mixed - alpha) / eps`` for the mixed prior at finite ``eps``.

    A monotone rescaling of the Bayes detector with the mixed prior; it tends
    to :func:`mixed_star` as ``eps -> 0`` with an ``O(eps)`` gap.
    """
    X, single = problem.pixels(x)
    d_mixed = _bayes(problem, mixed_prior(schedule), X, numerics.DEFAULT_NODES, False)
    return _unwrap(schedule.beta * (d_mixed - schedule.alpha) / schedule.epsilon, single)


def _check_simplex(problem, beta0, components):
    weights = [beta0] + [b for _, b in components]
    if any(not math.isfinite(w) or w < 0 for w in weights):
        raise ContractError(f"sculpting weights must be finite and >= 0, got {weights}")
    if abs(math.fsum(weights) - 1.0) > _SIMPLEX_TOL:
        raise ContractError(f"sculpting weights sum to {math.fsum(weights)!r}, expected 1")
    for a_i, _ in components:
        _check_abundance(problem.model, a_i)


def sculpted(problem: DetectionProblem, beta0: float, components, x):
    """``beta0 * LMP + sum_i beta_i * clairvoyant(a_i)`` with weights on the simplex."""
    components = [(float(a), float(b)) for a, b in components]
    _check_simplex(problem, beta0, components)
    X, single = problem.pixels(x)
    out = beta0 * _lmp(problem.background, problem.model, X)
    l0 = problem.log_lik(0.0, X)
    for a_i, b_i in components:
        out = out + b_i * _exp(_log_ratio(problem, a_i, X, l0))
    return _unwrap(_finite(out, "sculpted"), single)


def alpha_from_beta(beta0: float, betas, epsilon: float) -> tuple[float, list[float]]:
    """First-order delta-sum prior weights that reproduce sculpting weights ``beta``.

    ``alpha_0 = 1 - eps (1 - beta_0) / beta_0`` and ``alpha_i = eps beta_i / beta_0``.
    """
    betas = [float(b) for b in betas]
    if beta0 <= 0:
        raise ContractError("beta0 must be > 0; the mapping is singular at beta0 = 0")
    if epsilon <= 0:
        raise ContractError(f"epsilon must be > 0, got {epsilon}")
    weights = [beta0] + betas
    if any(w < 0 for w in weights) or abs(math.fsum(weights) - 1.0) > _SIMPLEX_TOL:
        raise ContractError(f"beta weights {weights} do not lie on the simplex")
    alpha0 = 1.0 - epsilon * (1.0 - beta0) / beta0
    return alpha0, [epsilon * b / beta0 for b in betas]


def beta_from_alpha(alpha0: float, alphas, epsilon: float) -> tuple[float, list[float]]:
    """Inverse of :func:`alpha_from_beta`: ``beta_0 = eps / (1 - alpha_0 + eps)``."""
    if epsilon <= 0:
        raise ContractError(f"epsilon must be > 0, got {epsilon}")
    beta0 = epsilon / (1.0 - alpha0 + epsilon)
    return beta0, [float(a) * beta0 / epsilon for a in alphas]


DETECTOR_KINDS = (
    "clairvoyant", "lmp", "glrt", "penalized_glrt", "bayes",
    "mixed_star", "sculpted", "finite_eps_mixed", "matched_filter",
)


@dataclass(frozen=True)
class DetectorSpec:
    """Declarative description of one detector bound to a problem.

    ``params`` holds the variant's parameters:

    ============== ==================================================
    clairvoyant    ``a0``
    penalized_glrt ``penalty`` (Prior), optional ``objective_value``
    bayes          ``prior`` (Prior)
    mixed_star     ``beta``, ``base_prior``
    sculpted       ``beta0``, ``components`` [(a_i, beta_i), ...]
    finite_eps_mixed ``schedule`` (MixedPriorSchedule)
    ============== ==================================================
    """

    problem: DetectionProblem
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DETECTOR_KINDS:
            raise ContractError(f"unknown detector kind {self.kind!r}")
        try:
            self._validate()
        except KeyError as exc:
            raise ContractError(f"detector {self.kind!r} is missing parameter {exc}") from exc

    def _validate(self):
        p = self.params
        model = self.problem.model
        if self.kind == "clairvoyant":
            _check_abundance(model, p["a0"])
        elif self.kind == "mixed_star":
            if not (0.0 <= p["beta"] <= 1.0):
                raise ContractError(f"beta must lie in [0, 1], got {p['beta']}")
            if not isinstance(p["base_prior"], Prior):
                raise ContractError("mixed_star detector needs a base Prior")
        elif self.kind == "penalized_glrt":
            if not (isinstance(p["penalty"], Prior) or callable(p["penalty"])):
                raise ContractError("penalized_glrt needs a Prior or a log-penalty callable")
        elif self.kind == "sculpted":
            comps = tuple((float(a), float(b)) for a, b in p.get("components", ()))
            object.__setattr__(self, "params", {**p, "components": comps})
            _check_simplex(self.problem, p["beta0"], comps)
        elif self.kind == "bayes":
            if not isinstance(p.get("prior"), Prior):
                raise ContractError("bayes detector needs a Prior")
        elif self.kind == "finite_eps_mixed":
            if not isinstance(p.get("schedule"), MixedPriorSchedule):
                raise ContractError("finite_eps_mixed detector needs a MixedPriorSchedule")

    @property
    def label(self) -> str:
        p = self.params
        if self.kind == "clairvoyant":
            return f"clairvoyant(a0={p['a0']:g})"
        if self.kind == "mixed_star":
            return f"mixed_star(beta={p['beta']:g})"
        if self.kind == "sculpted":
            comps = ",".join(f"{a:g}:{b:g}" for a, b in p["components"])
            return f"sculpted(beta0={p['beta0']:g};{comps})"
        if self.kind == "finite_eps_mixed":
            s = p["schedule"]
            return f"finite_eps_mixed(beta={s.beta:g},eps={s.epsilon:g})"
        return self.kind

    def score(self, x):
        p = self.params
        pr = self.problem
        if self.kind == "clairvoyant":
            return clairvoyant(pr, p["a0"], x)
        if self.kind == "lmp":
            return lmp(pr, x)
        if self.kind == "glrt":
            return glrt(pr, x)
        if self.kind == "penalized_glrt":
            return penalized_glrt(pr, p["penalty"], x, p.get("objective_value", False))
        if self.kind == "bayes":
            return bayes(pr, p["prior"], x)
        if self.kind == "mixed_star":
            return mixed_star(pr, p["beta"], p["base_prior"], x)
        if self.kind == "sculpted":
            return sculpted(pr, p["beta0"], p["components"], x)
        if self.kind == "finite_eps_mixed":
            return finite_eps_mixed(pr, p["schedule"], x)
        return matched_filter(pr, x)

    def to_dict(self) -> dict:
        p = self.params
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == "clairvoyant":
            out["a0"] = p["a0"]
        elif self.kind == "penalized_glrt":
            if not isinstance(p["penalty"], Prior):
                raise ContractError("a callable penalty cannot be serialized; use a Prior")
            out["penalty"] = p["penalty"].to_dict()
            if p.get("objective_value"):
                out["objective_value"] = True
        elif self.kind == "bayes":
            out["prior"] = p["prior"].to_dict()
        elif self.kind == "mixed_star":
            out.update(beta=p["beta"], base_prior=p["base_prior"].to_dict())
        elif self.kind == "sculpted":
            out.update(beta0=p["beta0"], components=[[a, b] for a, b in p["components"]])
        elif self.kind == "finite_eps_mixed":
            s = p["schedule"]
            out.update(beta=s.beta, epsilon=s.epsilon, base_prior=s.base.to_dict())
        return out

    @classmethod
    def from_dict(cls, problem: DetectionProblem, data: dict) -> "DetectorSpec":
        kind = data.get("kind")
        try:
            if kind == "clairvoyant":
                params = {"a0": float(data["a0"])}
            elif kind == "penalized_glrt":
                params = {"penalty": Prior.from_dict(data["penalty"]),
                          "objective_value": bool(data.get("objective_value", False))}
            elif kind == "bayes":
                params = {"prior": Prior.from_dict(data["prior"])}
            elif kind == "mixed_star":
                params = {"beta": float(data["beta"]),
                          "base_prior": Prior.from_dict(data.get("base_prior", Prior.uniform().to_dict()))}
            elif kind == "sculpted":
                params = {"beta0": float(data["beta0"]),
                          "components": [(float(a), float(b)) for a, b in data.get("components", [])]}
            elif kind == "finite_eps_mixed":
                base = Prior.from_dict(data.get("base_prior", Prior.uniform().to_dict()))
                params = {"schedule": MixedPriorSchedule(float(data["beta"]), float(data["epsilon"]), base)}
            else:
                params = {}
        except KeyError as exc:
            raise ContractError(f"detector {kind!r} is missing parameter {exc}") from exc
        return cls(problem, kind, params)


def batch_scores(spec: DetectorSpec, pixels) -> np.ndarray:
    """Score every row of an ``(n, d)`` pixel matrix; order is preserved."""
    X = np.asarray(pixels, dtype=float)
    if X.ndim != 2 or X.shape[1] != spec.problem.dim:
        raise ContractError(f"expected an (n, {spec.problem.dim}) matrix, got shape {X.shape}")
    if X.shape[0] == 0:
        return np.empty(0)
    return np.asarray(spec.score(X), dtype=float)
