"""Gaussian bivariate moments of activations ("dual activations").

For a centred bivariate Gaussian ``(u, v)`` with covariance
``[[a, c], [c, b]]`` and an activation ``s``, the *value moment* is
``E[s(u) s(v)]`` and the *derivative moment* is ``E[s'(u) s'(v)]``.
Applied entrywise to an n-by-n PSD matrix (variances from the diagonal)
these moments are the single building block of every closed-form kernel in
this package.

Closed forms implemented here:

``identity``   E[uv] = c,                      E[1] = 1
``relu``       arc-cosine kernel of degree 1; derivative uses the positive
               orthant probability  (pi - arccos rho) / (2 pi)
``leaky_relu`` s(x) = a x + (1-a) relu(x), expanded bilinearly in the relu
               moments
``erf``        (2/pi) arcsin(2c / sqrt((1+2a)(1+2b)));  derivative
               (4/pi) / sqrt((1+2a)(1+2b) - 4c^2)

``sigmoid`` and ``exp`` have no closed form here and are served only by the
Monte-Carlo oracle.

Degenerate coordinates (zero variance) follow the convention that the relu
family's derivative indicator ``1{u > 0}`` is almost surely 0, so derivative
moments involving a zero-variance coordinate drop the indicator term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf as _erf
from scipy.special import expit as _expit

from .errors import NumericalError, ValidationError

_CLOSED_FORM = ("relu", "leaky_relu", "erf", "identity")
_ORACLE_ONLY = ("sigmoid", "exp")
KINDS = _CLOSED_FORM + _ORACLE_ONLY

_RHO_TOL = 1e-9
_DIAG_TOL = 1e-8


@dataclass(frozen=True)
class Activation:
    """An elementwise activation usable in kernels and finite networks."""

    kind: str
    alpha: float = 0.0  # negative-side slope, leaky_relu only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown activation {self.kind!r}")
        if self.kind == "leaky_relu" and not 0.0 <= self.alpha <= 1.0:
            raise ValidationError("leaky_relu slope must lie in [0, 1]")

    # -- constructors -------------------------------------------------
    @classmethod
    def relu(cls) -> "Activation":
        return cls("relu")

    @classmethod
    def leaky_relu(cls, alpha: float = 0.2) -> "Activation":
        return cls("leaky_relu", alpha=alpha)

    @classmethod
    def erf(cls) -> "Activation":
        return cls("erf")

    @classmethod
    def identity(cls) -> "Activation":
        return cls("identity")

    @classmethod
    def sigmoid(cls) -> "Activation":
        return cls("sigmoid")

    @classmethod
    def exp(cls) -> "Activation":
        return cls("exp")

    # -- pointwise evaluation -----------------------------------------
    @property
    def has_closed_form(self) -> bool:
        return self.kind in _CLOSED_FORM

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity" or (
            self.kind == "leaky_relu" and self.alpha == 1.0
        )

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        if self.kind == "leaky_relu":
            return np.where(x > 0, x, self.alpha * x)
        if self.kind == "erf":
            return _erf(x)
        if self.kind == "identity":
            return x
        if self.kind == "sigmoid":
            return _expit(x)
        return np.exp(x)

    def deriv(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "relu":
            return (x > 0).astype(np.float64)
        if self.kind == "leaky_relu":
            return np.where(x > 0, 1.0, self.alpha)
        if self.kind == "erf":
            return (2.0 / np.sqrt(np.pi)) * np.exp(-np.square(x))
        if self.kind == "identity":
            return np.ones_like(x)
        if self.kind == "sigmoid":
            s = _expit(x)
            return s * (1.0 - s)
        return np.exp(x)

    def label(self) -> str:
        if self.kind == "leaky_relu":
            return f"leaky_relu({self.alpha:g})"
        return self.kind


# ---------------------------------------------------------------------------
# closed-form pair moments on broadcastable (var_i, var_j, cov) arrays
# ---------------------------------------------------------------------------


def _safe_rho(vi, vj, cov):
    """Correlation with clamping; raises if inputs exceed |rho| = 1 + tol."""
    denom = np.sqrt(vi * vj)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(denom > 0, cov / np.where(denom > 0, denom, 1.0), 0.0)
    if np.any(np.abs(rho) > 1.0 + _RHO_TOL):
        worst = float(np.max(np.abs(rho)))
        raise NumericalError(f"correlation {worst:.3e} exceeds 1 beyond tolerance")
    return np.clip(rho, -1.0, 1.0), denom


def _relu_value(vi, vj, cov):
    rho, denom = _safe_rho(vi, vj, cov)
    theta = np.arccos(rho)
    return denom * (np.sqrt(1.0 - rho**2) + (np.pi - theta) * rho) / (2.0 * np.pi)


def _orthant(vi, vj, cov):
    """P(u > 0, v > 0); zero when either coordinate is degenerate."""
    rho, _ = _safe_rho(vi, vj, cov)
    q = (np.pi - np.arccos(rho)) / (2.0 * np.pi)
    return np.where((vi > 0) & (vj > 0), q, 0.0)


def _pair_value(act: Activation, vi, vj, cov):
    if act.kind == "identity":
        return np.asarray(cov, dtype=np.float64).copy()
    if act.kind == "relu":
        return _relu_value(vi, vj, cov)
    if act.kind == "leaky_relu":
        a = act.alpha
        return a * cov + (1.0 - a) ** 2 * _relu_value(vi, vj, cov)
    if act.kind == "erf":
        return (2.0 / np.pi) * np.arcsin(
            2.0 * cov / np.sqrt((1.0 + 2.0 * vi) * (1.0 + 2.0 * vj))
        )
    raise ValidationError(
        f"activation {act.kind!r} has no closed-form moments; use mc_dual_oracle"
    )


def _pair_deriv(act: Activation, vi, vj, cov):
    if act.kind == "identity":
        return np.ones(np.broadcast(vi, vj, cov).shape, dtype=np.float64)
    if act.kind == "relu":
        return _orthant(vi, vj, cov)
    if act.kind == "leaky_relu":
        a = act.alpha
        pi_ = np.where(np.asarray(vi) > 0, 0.5, 0.0)
        pj_ = np.where(np.asarray(vj) > 0, 0.5, 0.0)
        return a * a + a * (1.0 - a) * (pi_ + pj_) + (1.0 - a) ** 2 * _orthant(
            vi, vj, cov
        )
    if act.kind == "erf":
        det = (1.0 + 2.0 * vi) * (1.0 + 2.0 * vj) - 4.0 * cov**2
        return (4.0 / np.pi) / np.sqrt(det)
    raise ValidationError(
        f"activation {act.kind!r} has no closed-form moments; use mc_dual_oracle"
    )


def _checked_square(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValidationError("covariance must be a square matrix")
    if not np.allclose(sigma, sigma.T, atol=1e-10, rtol=0.0):
        raise ValidationError("covariance must be symmetric")
    diag = np.diag(sigma).copy()
    if np.any(diag < -_DIAG_TOL):
        raise NumericalError(f"negative variance {diag.min():.3e} on the diagonal")
    return sigma, np.maximum(diag, 0.0)


def dual_activation(act: Activation, sigma: np.ndarray) -> np.ndarray:
    """Entrywise value moments ``E[s(u_i) s(u_j)]`` for ``u ~ N(0, sigma)``.

    Parameters
    ----------
    act : Activation
        Must have a closed form (relu, leaky_relu, erf, identity).
    sigma : (n, n) ndarray
        Symmetric PSD matrix; tiny negative diagonal entries (>= -1e-8) are
        clamped to zero, correlations may exceed 1 by at most 1e-9.
    """
    sigma, diag = _checked_square(sigma)
    vi = diag[:, None]
    vj = diag[None, :]
    out = _pair_value(act, vi, vj, sigma)
    return 0.5 * (out + out.T)


def dual_activation_derivative(act: Activation, sigma: np.ndarray) -> np.ndarray:
    """Entrywise derivative moments ``E[s'(u_i) s'(u_j)]``; see dual_activation."""
    sigma, diag = _checked_square(sigma)
    vi = diag[:, None]
    vj = diag[None, :]
    out = _pair_deriv(act, vi, vj, sigma)
    return 0.5 * (out + out.T)


def dual_cross(
    act: Activation,
    var_i: np.ndarray,
    var_j: np.ndarray,
    cov: np.ndarray,
    derivative: bool = False,
) -> np.ndarray:
    """Moments on a rectangular cross-covariance block.

    ``var_i`` (p,) and ``var_j`` (q,) are the marginal variances of the two
    node sets, ``cov`` is their (p, q) cross-covariance.
    """
    vi = np.maximum(np.asarray(var_i, dtype=np.float64), 0.0)[:, None]
    vj = np.maximum(np.asarray(var_j, dtype=np.float64), 0.0)[None, :]
    cov = np.asarray(cov, dtype=np.float64)
    fn = _pair_deriv if derivative else _pair_value
    return fn(act, vi, vj, cov)


# ---------------------------------------------------------------------------
# Monte-Carlo oracle
# ---------------------------------------------------------------------------

_JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
_CHUNK = 1 << 17  # samples per block; fixed so results are seed-deterministic


def _chol_with_jitter(sigma: np.ndarray) -> np.ndarray:
    scale = max(float(np.max(np.diag(sigma))), 1.0)
    for jit in _JITTERS:
        try:
            return np.linalg.cholesky(sigma + jit * scale * np.eye(len(sigma)))
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"Cholesky failed up to jitter {_JITTERS[-1]:g}; matrix is not PSD"
    )


def mc_dual_oracle(
    act: Activation,
    sigma: np.ndarray,
    samples: int = 1_000_000,
    seed: int = 0,
    derivative: bool = False,
) -> np.ndarray:
    """Estimate dual-activation moments by plain Monte Carlo.

    Draws ``samples`` iid vectors ``u ~ N(0, sigma)`` through a jittered
    Cholesky factor and averages ``s(u) s(u)^T`` (or ``s'(u) s'(u)^T``).
    Deterministic for fixed ``seed``: sampling is chunked at a fixed block
    size with one spawned RNG stream per chunk, so the result does not
    depend on how many threads BLAS happens to use.

    Works for every activation including the oracle-only ones
    (sigmoid, exp); this is the reference the closed forms are tested
    against.
    """
    sigma, _ = _checked_square(sigma)
    if samples < 1:
        raise ValidationError("samples must be positive")
    n = sigma.shape[0]
    chol = _chol_with_jitter(sigma)
    nchunks = (samples + _CHUNK - 1) // _CHUNK
    streams = np.random.SeedSequence(seed).spawn(nchunks)
    acc = np.zeros((n, n))
    left = samples
    for ss in streams:
        take = min(_CHUNK, left)
        left -= take
        z = np.random.default_rng(ss).standard_normal((n, take))
        u = chol @ z
        v = act.deriv(u) if derivative else act(u)
        acc += v @ v.T
    return acc / samples
