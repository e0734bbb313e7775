"""Background distribution and target-interaction likelihoods.

A target of strength ``a`` acting on a background pixel ``z`` produces the
observation ``x = xi(a, z)``.  Three interaction models are supported:

* additive:     ``xi(a, z) = z + a t``
* replacement:  ``xi(a, z) = (1 - a) z + a t``
* Beer's law:   ``xi(a, z) = z * exp(-a t)`` (elementwise)

The likelihood of ``x`` under abundance ``a`` is the background density at
``xi^{-1}(a, x)`` corrected by the Jacobian of the map.  Everything here is
computed in the log domain.

All functions accept a single pixel of shape ``(d,)`` (returning a float) or a
stack of pixels of shape ``(n, d)`` (returning an array of length ``n``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from scipy import linalg

from ._rows import by_rows
from .errors import ContractError, DomainError

ADDITIVE = "additive"
REPLACEMENT = "replacement"
BEERS_LAW = "beers_law"
MODEL_KINDS = (ADDITIVE, REPLACEMENT, BEERS_LAW)

# Abundances are restricted to a >= 0 (one-sided alternative).
MIN_ABUNDANCE = 0.0
REPLACEMENT_A_MAX = 1.0 - 1e-9

_LOG_2PI = math.log(2.0 * math.pi)


class Background(Protocol):
    """Extension seam for background distributions.

    Anything with a dimension, a log-density and its gradient can stand in for
    the Gaussian; only :class:`GaussianBackground` ships.
    """

    dim: int

    def log_density(self, X: np.ndarray) -> np.ndarray: ...

    def grad_log_density(self, X: np.ndarray) -> np.ndarray: ...


class GaussianBackground:
    """Multivariate normal background with a cached Cholesky factor.

    Parameters
    ----------
    mean : array_like, shape (d,)
    covariance : array_like, shape (d, d)
        Must be symmetric positive definite.  A non-SPD matrix raises
        :class:`ContractError` here rather than at evaluation time.
    """

    def __init__(self, mean, covariance):
        mean = np.array(mean, dtype=float).reshape(-1)
        cov = np.array(covariance, dtype=float)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1)
        d = mean.shape[0]
        if d < 1:
            raise ContractError("background dimension must be >= 1")
        if cov.shape != (d, d):
            raise ContractError(f"covariance shape {cov.shape} does not match mean length {d}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ContractError("mean and covariance must be finite")
        scale = np.max(np.abs(cov))
        if np.max(np.abs(cov - cov.T)) > 1e-12 * scale:
            raise ContractError("covariance is not symmetric")
        try:
            chol = linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError as exc:
            raise ContractError("covariance is not positive definite") from exc
        pivots = np.diag(chol)
        if not np.all(pivots > 0):
            raise ContractError("covariance is not positive definite")

        self.dim = d
        self.mean = mean
        self.covariance = cov
        self.chol = chol
        self.logdet = 2.0 * float(np.sum(np.log(pivots)))
        for arr in (self.mean, self.covariance, self.chol):
            arr.setflags(write=False)

    @classmethod
    def isotropic(cls, dim: int, variance: float = 1.0, mean: float = 0.0) -> "GaussianBackground":
        return cls(np.full(dim, float(mean)), float(variance) * np.eye(dim))

    def __repr__(self):
        return f"GaussianBackground(dim={self.dim})"

    def whiten(self, X: np.ndarray) -> np.ndarray:
        """Rows of ``L^{-1}(x - mu)`` for each row ``x`` of ``X``."""
        R = linalg.solve_triangular(self.chol, (X - self.mean).T, lower=True, check_finite=False)
        return R.T

    def solve(self, V: np.ndarray) -> np.ndarray:
        """``Sigma^{-1} v`` for each row ``v`` of ``V`` (or a single vector)."""
        return linalg.cho_solve((self.chol, True), np.asarray(V, dtype=float).T, check_finite=False).T

    def log_density(self, X: np.ndarray) -> np.ndarray:
        return by_rows(self._log_density, X)

    def _log_density(self, X):
        W = self.whiten(X)
        quad = np.einsum("ij,ij->i", W, W)
        return -0.5 * (self.dim * _LOG_2PI + self.logdet + quad)

    def grad_log_density(self, X: np.ndarray) -> np.ndarray:
        return by_rows(lambda B: -self.solve(B - self.mean), X)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` pixels as ``mu + L z`` with standard normal ``z``."""
        Z = rng.standard_normal((n, self.dim))
        return self.mean + Z @ self.chol.T


@dataclass(frozen=True)
class TargetInteractionModel:
    """How a target of known signature combines with a background pixel.

    ``a_max`` bounds the abundance domain ``[0, a_max]``.  It defaults to 1;
    for the replacement model it must stay strictly below 1 because the
    Jacobian ``(1 - a)^{-d}`` diverges there.
    """

    kind: str
    signature: np.ndarray
    a_max: float | None = None
    tau: float = field(init=False)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ContractError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        t = np.array(self.signature, dtype=float).reshape(-1)
        if t.size < 1 or not np.all(np.isfinite(t)):
            raise ContractError("signature must be a nonempty finite vector")
        t.setflags(write=False)
        a_max = self.a_max
        if a_max is None:
            a_max = REPLACEMENT_A_MAX if self.kind == REPLACEMENT else 1.0
        a_max = float(a_max)
        if not (math.isfinite(a_max) and a_max > MIN_ABUNDANCE):
            raise ContractError(f"a_max must be finite and positive, got {a_max}")
        if self.kind == REPLACEMENT and a_max >= 1.0:
            raise ContractError("replacement model requires a_max < 1")
        object.__setattr__(self, "signature", t)
        object.__setattr__(self, "a_max", a_max)
        object.__setattr__(self, "tau", math.fsum(t.tolist()))

    @property
    def dim(self) -> int:
        return self.signature.shape[0]

    def __eq__(self, other):
        if not isinstance(other, TargetInteractionModel):
            return NotImplemented
        return (self.kind == other.kind and self.a_max == other.a_max
                and np.array_equal(self.signature, other.signature))

    def __hash__(self):
        return hash((self.kind, self.a_max, self.signature.tobytes()))


def _as_pixels(x, d: int) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != d:
        raise ContractError(f"expected pixels of dimension {d}, got shape {np.shape(x)}")
    return X, single


def _unwrap(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


def _check_abundance(model: TargetInteractionModel, a) -> None:
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < MIN_ABUNDANCE) or np.any(arr > model.a_max):
        raise DomainError(f"abundance {a!r} outside [0, {model.a_max}] for {model.kind} model")


def _column(a) -> np.ndarray | float:
    arr = np.asarray(a, dtype=float)
    return arr[:, None] if arr.ndim == 1 else float(arr)


def _check_positive(model: TargetInteractionModel, X: np.ndarray) -> None:
    if model.kind == BEERS_LAW and not np.all(X > 0):
        raise DomainError("Beer's law model requires strictly positive radiance in every channel")


def _forward(model, a, Z):
    t = model.signature
    a = _column(a)
    if model.kind == ADDITIVE:
        return Z + a * t
    if model.kind == REPLACEMENT:
        return (1.0 - a) * Z + a * t
    return Z * np.exp(-a * t)


def _inverse(model, a, X):
    t = model.signature
    a = _column(a)
    if model.kind == ADDITIVE:
        return X - a * t
    if model.kind == REPLACEMENT:
        return (X - a * t) / (1.0 - a)
    return X * np.exp(a * t)


def _log_jacobian(model, a, d):
    a = np.asarray(a, dtype=float)
    if model.kind == ADDITIVE:
        return 0.0
    if model.kind == REPLACEMENT:
        return -d * np.log1p(-a)
    return a * model.tau


def embed(model: TargetInteractionModel, a, z):
    """Apply a target of strength ``a`` to background pixel(s) ``z``."""
    Z, single = _as_pixels(z, model.dim)
    _check_abundance(model, a)
    if not np.all(np.isfinite(Z)):
        raise ContractError("background pixel must be finite")
    _check_positive(model, Z)
    out = _forward(model, a, Z)
    return out[0] if single else out


def inverse_embed(model: TargetInteractionModel, a, x):
    """The background pixel ``z`` with ``embed(model, a, z) == x``."""
    X, single = _as_pixels(x, model.dim)
    _check_abundance(model, a)
    _check_positive(model, X)
    out = _inverse(model, a, X)
    return out[0] if single else out


def log_bkg_density(bg: Background, x):
    """Log of the background density at ``x``."""
    X, single = _as_pixels(x, bg.dim)
    return _unwrap(bg.log_density(X), single)


def _log_likelihood(bg: Background, model: TargetInteractionModel, a, X: np.ndarray) -> np.ndarray:
    # No domain checks: finite-difference oracles evaluate slightly negative a.
    return bg.log_density(_inverse(model, a, X)) + _log_jacobian(model, a, X.shape[1])


def log_likelihood(bg: Background, model: TargetInteractionModel, a, x):
    """Log-likelihood ``log p(a, x)`` including the Jacobian correction.

    ``a`` may be a scalar or, for a stack of pixels, one abundance per pixel.
    At ``a = 0`` the result is exactly :func:`log_bkg_density`.
    """
    _check_dims(bg, model)
    X, single = _as_pixels(x, bg.dim)
    _check_abundance(model, a)
    _check_positive(model, X)
    return _unwrap(_log_likelihood(bg, model, a, X), single)


def _check_dims(bg, model):
    if bg.dim != model.dim:
        raise ContractError(f"background dimension {bg.dim} != signature dimension {model.dim}")


def _lmp(bg: Background, model: TargetInteractionModel, X: np.ndarray) -> np.ndarray:
    return by_rows(lambda B: _lmp_block(bg, model, B), X)


def _lmp_block(bg, model, X):
    G = bg.grad_log_density(X)
    t = model.signature
    if model.kind == ADDITIVE:
        return -(G @ t)
    if model.kind == REPLACEMENT:
        return X.shape[1] + np.einsum("ij,ij->i", G, X - t)
    return model.tau + np.einsum("ij,ij->i", G, X * t)


def lmp_statistic(bg: Background, model: TargetInteractionModel, x):
    """Derivative of ``log p(a, x)`` in ``a`` at ``a = 0``.

    For the additive model on a Gaussian background this is the matched
    filter ``t' Sigma^{-1} (x - mu)``.
    """
    _check_dims(bg, model)
    X, single = _as_pixels(x, bg.dim)
    _check_positive(model, X)
    return _unwrap(_lmp(bg, model, X), single)


def _fd_step(model: TargetInteractionModel) -> float:
    return 1e-3 * model.a_max


def _second_log_derivative_fd(bg, model, X, h):
    """Central second difference of ``log p`` at ``a = 0``, Richardson-extrapolated."""
    l0 = _log_likelihood(bg, model, 0.0, X)

    def second(step):
        return (_log_likelihood(bg, model, step, X) - 2.0 * l0 + _log_likelihood(bg, model, -step, X)) / step**2

    coarse, fine = second(h), second(h / 2.0)
    return (4.0 * fine - coarse) / 3.0


def _second_derivative_ratio(bg, model, X):
    s = _lmp(bg, model, X)
    if isinstance(bg, GaussianBackground) and model.kind == ADDITIVE:
        t = model.signature
        kappa = float(t @ bg.solve(t))
        return s * s - kappa
    return _second_log_derivative_fd(bg, model, X, _fd_step(model)) + s * s


def second_derivative_ratio(bg: Background, model: TargetInteractionModel, x):
    """``p''(0, x) / p(0, x)``, the second Taylor coefficient of the likelihood ratio."""
    _check_dims(bg, model)
    X, single = _as_pixels(x, bg.dim)
    _check_positive(model, X)
    return _unwrap(_second_derivative_ratio(bg, model, X), single)
