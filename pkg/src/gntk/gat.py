"""Closed-form kernels for wide graph attention networks.

The attention layer scores every ordered node pair, so its infinite-width
kernel lives on pairs: an n-by-n covariance ``Om`` is *lifted* to the
n^2-by-n^2 covariance of the masked score matrix,

    lift(Om)[(l,m),(s,t)] = A_lm A_st (Om_ls + Om_lt + Om_ms + Om_mt),

which is PSD whenever ``Om`` is (it equals ``J [[Om,Om],[Om,Om]] J^T`` for
the selector ``J = diag(vec(A)) [1 (x) I | I (x) 1]``).  Pair indices use
column-major ``vec``: position ``m*n + l`` holds entry ``(l, m)``.  All
attention kernels require a *symmetric* adjacency; under symmetry the lift
is invariant to transposing either pair, which is what makes the block
contraction below well defined.

``block_inner(X, Y)`` ("bm") contracts a z*n-square matrix of n-blocks
against an n-square matrix: ``bm(X, Y)_ij = <X, Y[IJ block]>_F``.

Layer recursion (depth D = one linear layer + D-1 attention layers), with
``s1`` the score nonlinearity and ``s2`` the feature nonlinearity:

    Lam0 = X^T X / d0
    C1   = sw2 * Lam0 (+ sb2)                      covariance of layer 1
    for l = 2..D:
        Lam  = E[s2(u) s2(u)^T],  u ~ N(0, C_{l-1})
        psi  = E[s1(v) s1(v)^T],  v ~ N(0, sc2 * lift(Lam))
        C_l  = bm(sw2 * Lam (+ sb2), psi)

The tangent kernel adds the score-parameter and chained contributions:

    Th1 = C1
    Th_l = bm(E, psi) + bm(E, sc2 * (lift(Lam) ⊙ psid))
         + bm(E, sc2 * (lift(Th_{l-1} ⊙ Lamd) ⊙ psid))
         + bm(sw2 * (Th_{l-1} ⊙ Lamd), psi)

with ``E = sw2*Lam (+ sb2)``, ``Lamd``/``psid`` the derivative moments of
``s2``/``s1``.  For ``s1 = identity`` the middle ``psid`` factors are 1 and
everything collapses to sparse contractions (:func:`contract_fast`), which
is the only path that scales past the dense-lift limit.

``placement="hadamard_first"`` applies ``s1`` before the adjacency mask;
its pair kernel is the lift of the plain bivariate moments,
``psi = lift(E[s1(v) s1(v)^T]), v ~ N(0, sc2*Lam)``, so the GP scales to
any n.  It requires ``s1(0) = 0`` (a masked zero score must stay zero).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .activations import (
    Activation,
    dual_activation,
    dual_activation_derivative,
)
from .errors import CapacityError, ValidationError
from .graphs import AdjacencyOperator, HyperParams
from .kernels import base_kernel

DENSE_LIFT_LIMIT = 64
PLACEMENTS = ("inside", "hadamard_first")


@dataclass(frozen=True)
class GatSpec:
    """Depth, score/feature nonlinearities and variances of an attention net."""

    depth: int
    sigma1: Activation = field(default_factory=Activation.identity)
    sigma2: Activation = field(default_factory=lambda: Activation.leaky_relu(0.2))
    hp: HyperParams = field(default_factory=HyperParams)
    placement: str = "inside"
    bias: bool = False  # experimental; flat sb2 offset after each aggregation

    def __post_init__(self):
        if not isinstance(self.depth, (int, np.integer)) or self.depth < 1:
            raise ValidationError("depth must be an integer >= 1")
        if self.placement not in PLACEMENTS:
            raise ValidationError(f"placement must be one of {PLACEMENTS}")
        if self.placement == "hadamard_first":
            if abs(float(self.sigma1(np.zeros(1))[0])) > 0.0:
                raise ValidationError(
                    "hadamard_first needs a score nonlinearity with s1(0) = 0"
                )


def _as_symmetric_dense(adj) -> np.ndarray:
    if isinstance(adj, AdjacencyOperator):
        a = adj.dense()
    elif sp.issparse(adj):
        a = np.asarray(adj.todense(), dtype=np.float64)
    else:
        a = np.asarray(adj, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("adjacency must be square")
    if not np.allclose(a, a.T, atol=1e-12, rtol=0.0):
        raise ValidationError("attention kernels require a symmetric adjacency")
    return a


def _as_sparse(adj) -> sp.csr_matrix:
    if isinstance(adj, AdjacencyOperator):
        return adj.matrix
    if sp.issparse(adj):
        return adj.tocsr()
    return sp.csr_matrix(np.asarray(adj, dtype=np.float64))


def _lift_dense(a: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Materialise lift(omega) as (n^2, n^2), column-major pair layout."""
    n = a.shape[0]
    four = (
        omega[:, None, :, None]  # Om_ls over (l,m,s,t)
        + omega[:, None, None, :]
        + omega[None, :, :, None]
        + omega[None, :, None, :]
    )
    block = a[:, :, None, None] * a[None, None, :, :] * four  # (l,m,s,t)
    # position of (l,m) is m*n + l  ->  axes (m,l,t,s), C-order reshape
    return np.ascontiguousarray(block.transpose(1, 0, 3, 2)).reshape(n * n, n * n)


def _lift_dense_via_selector(a: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Same lift built literally from the selector matrix J (cross-check)."""
    n = a.shape[0]
    ones = np.ones((n, 1))
    j = np.hstack([np.kron(ones, np.eye(n)), np.kron(np.eye(n), ones)])
    j = np.diag(a.flatten(order="F")) @ j
    core = np.block([[omega, omega], [omega, omega]])
    return j @ core @ j.T


@dataclass(frozen=True)
class LiftedKernel:
    """A pair-space covariance, either materialised or kept as a rule."""

    adj: np.ndarray
    omega: np.ndarray
    dense: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    def entry(self, l: int, m: int, s: int, t: int) -> float:
        o = self.omega
        return float(
            self.adj[l, m]
            * self.adj[s, t]
            * (o[l, s] + o[l, t] + o[m, s] + o[m, t])
        )

    def materialize(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        if self.n > DENSE_LIFT_LIMIT:
            raise CapacityError(
                f"dense lift needs n <= {DENSE_LIFT_LIMIT}, got n = {self.n}"
            )
        return _lift_dense(self.adj, self.omega)


def pair_lift(adj, omega: np.ndarray, realization: str = "implicit") -> LiftedKernel:
    """Lift an n-by-n covariance to score-pair space.

    ``realization="dense"`` materialises the (n^2, n^2) matrix immediately
    (refused above ``DENSE_LIFT_LIMIT`` nodes); ``"implicit"`` keeps only
    the entry rule, which is all the fast contraction path needs.
    """
    a = _as_symmetric_dense(adj)
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != a.shape:
        raise ValidationError("omega must match the adjacency shape")
    if realization == "dense":
        if a.shape[0] > DENSE_LIFT_LIMIT:
            raise CapacityError(
                f"dense lift needs n <= {DENSE_LIFT_LIMIT}, got n = {a.shape[0]}"
            )
        return LiftedKernel(adj=a, omega=omega, dense=_lift_dense(a, omega))
    if realization != "implicit":
        raise ValidationError("realization must be 'dense' or 'implicit'")
    return LiftedKernel(adj=a, omega=omega, dense=None)


def block_inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Blockwise Frobenius contraction ``out_ij = <X, Y[i-block, j-block]>``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValidationError("X must be square")
    if y.ndim != 2 or y.shape[0] != y.shape[1]:
        raise ValidationError("Y must be square")
    n = x.shape[0]
    if n == 0 or y.shape[0] % n:
        raise ValidationError(
            f"Y side {y.shape[0]} is not a multiple of X side {n}"
        )
    z = y.shape[0] // n
    return np.einsum("st,isjt->ij", x, y.reshape(z, n, z, n), optimize=True)


def contract_fast(adj, omega: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``block_inner(w, lift(omega))`` without forming the n^4 lift.

    Expanding the four lift terms turns the contraction into sparse-dense
    products:

        (A W A^T) ⊙ Om + ((A W) ⊙ Om) A^T + A ((W A^T) ⊙ Om) + A (W ⊙ Om) A^T
    """
    a = _as_sparse(adj)
    omega = np.asarray(omega, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n = a.shape[0]
    if omega.shape != (n, n) or w.shape != (n, n):
        raise ValidationError("omega and w must be n-by-n like the adjacency")

    def rmul(m, mat):  # M @ A^T via the sparse operator
        return np.asarray(a @ np.asarray(m).T).T

    aw = np.asarray(a @ w)
    wat = rmul(w, a)
    out = rmul(aw, a) * omega  # (A W A^T) ⊙ Om
    out += rmul(aw * omega, a)  # ((A W) ⊙ Om) A^T
    out += np.asarray(a @ (wat * omega))  # A ((W A^T) ⊙ Om)
    out += np.asarray(a @ rmul(w * omega, a))  # A (W ⊙ Om) A^T
    return out


def _score_moments(
    spec: GatSpec, a_dense: np.ndarray, a_sparse: sp.csr_matrix, lam: np.ndarray,
    want_deriv: bool,
):
    """Return a closure pack describing psi (and psid) for one layer.

    The pack is a dict with a ``mode`` key:
      * ``fast``:  psi = sc2 * lift(payload); contraction stays sparse.
      * ``dense``: psi (and psid) are materialised pair-space matrices.
    """
    hp = spec.hp
    sc2 = hp.sigma_c2
    n = a_dense.shape[0]
    if spec.sigma1.is_identity:
        return {"mode": "fast", "psi_payload": sc2 * lam, "psid_lift_free": True}
    if spec.placement == "hadamard_first":
        d = dual_activation(spec.sigma1, sc2 * lam)
        pack = {"mode": "fast", "psi_payload": d, "psid_lift_free": False}
        if want_deriv:
            pack["psid_payload"] = dual_activation_derivative(spec.sigma1, sc2 * lam)
        return pack
    if n > DENSE_LIFT_LIMIT:
        raise CapacityError(
            "inside placement with a non-identity score nonlinearity needs the "
            f"dense lift (n <= {DENSE_LIFT_LIMIT}, got n = {n}); use "
            "sigma1=identity or placement='hadamard_first' at this size"
        )
    gamma = _lift_dense(a_dense, lam)
    psi = dual_activation(spec.sigma1, sc2 * gamma)
    pack = {"mode": "dense", "psi": psi, "gamma": gamma}
    if want_deriv:
        pack["psid"] = dual_activation_derivative(spec.sigma1, sc2 * gamma)
    return pack


def _gp_step(a_sparse, e, pack):
    """C_l = bm(E, psi) for one layer."""
    if pack["mode"] == "fast":
        return contract_fast(a_sparse, pack["psi_payload"], e)
    return block_inner(e, pack["psi"])


def gat_gp(spec: GatSpec, adj, x: np.ndarray) -> np.ndarray:
    """GP covariance of the depth-``spec.depth`` attention network."""
    a_dense = _as_symmetric_dense(adj)
    a_sparse = _as_sparse(adj)
    hp = spec.hp
    lam0 = base_kernel(x, HyperParams(1.0, 0.0, 1.0, hp.normalize_input_by_d0))
    bias = hp.sigma_b2 if spec.bias else 0.0
    c = hp.sigma_w2 * lam0 + bias
    for _ in range(2, spec.depth + 1):
        lam = dual_activation(spec.sigma2, c)
        e = hp.sigma_w2 * lam
        pack = _score_moments(spec, a_dense, a_sparse, lam, want_deriv=False)
        # the bias is added after the attention aggregation, so it enters
        # the covariance as a flat offset rather than through the lift
        c = _gp_step(a_sparse, e, pack) + bias
        c = 0.5 * (c + c.T)
    return c


def gat_ntk(spec: GatSpec, adj, x: np.ndarray) -> np.ndarray:
    """Tangent kernel of the depth-``spec.depth`` attention network."""
    a_dense = _as_symmetric_dense(adj)
    a_sparse = _as_sparse(adj)
    hp = spec.hp
    sc2 = hp.sigma_c2
    lam0 = base_kernel(x, HyperParams(1.0, 0.0, 1.0, hp.normalize_input_by_d0))
    bias = hp.sigma_b2 if spec.bias else 0.0
    c = hp.sigma_w2 * lam0 + bias
    theta = c.copy()
    for _ in range(2, spec.depth + 1):
        lam = dual_activation(spec.sigma2, c)
        lam_dot = dual_activation_derivative(spec.sigma2, c)
        e = hp.sigma_w2 * lam
        t = theta * lam_dot
        pack = _score_moments(spec, a_dense, a_sparse, lam, want_deriv=True)
        if pack["mode"] == "fast" and pack.get("psid_lift_free"):
            # identity score nonlinearity: psid == 1, psi == sc2*lift(lam)
            inner = sc2 * contract_fast(a_sparse, lam, e)
            c = inner + bias
            theta = (
                2.0 * inner
                + sc2 * contract_fast(a_sparse, t, e)
                + sc2 * contract_fast(a_sparse, lam, hp.sigma_w2 * t)
                + bias
            )
        elif pack["mode"] == "fast":
            # hadamard_first: psi = lift(D), psid = lift(Dd); the middle two
            # terms mix two lifts and need the dense product
            n = a_dense.shape[0]
            if n > DENSE_LIFT_LIMIT:
                raise CapacityError(
                    "tangent kernel with a non-identity score nonlinearity "
                    f"needs the dense lift for its score terms (n <= "
                    f"{DENSE_LIFT_LIMIT}, got n = {n})"
                )
            d = pack["psi_payload"]
            dd = pack["psid_payload"]
            psi = _lift_dense(a_dense, d)
            psid = _lift_dense(a_dense, dd)
            gamma = _lift_dense(a_dense, lam)
            gamma_t = _lift_dense(a_dense, t)
            inner = block_inner(e, psi)
            c = inner + bias
            theta = (
                inner
                + block_inner(e, sc2 * (gamma * psid))
                + block_inner(e, sc2 * (gamma_t * psid))
                + block_inner(hp.sigma_w2 * t, psi)
                + bias
            )
        else:
            psi = pack["psi"]
            psid = pack["psid"]
            gamma = pack["gamma"]
            gamma_t = _lift_dense(a_dense, t)
            inner = block_inner(e, psi)
            c = inner + bias
            theta = (
                inner
                + block_inner(e, sc2 * (gamma * psid))
                + block_inner(e, sc2 * (gamma_t * psid))
                + block_inner(hp.sigma_w2 * t, psi)
                + bias
            )
        c = 0.5 * (c + c.T)
        theta = 0.5 * (theta + theta.T)
    return theta


def gat_ntk_dense_reference(spec: GatSpec, adj, x: np.ndarray) -> np.ndarray:
    """Four-term tangent-kernel recursion with every lift materialised.

    Slow reference used to cross-check the sparse/collapsed paths (small n
    only); runs the general recursion even when ``sigma1`` is the identity,
    where the production path switches to the three-term collapse.
    """
    a_dense = _as_symmetric_dense(adj)
    n = a_dense.shape[0]
    if n > DENSE_LIFT_LIMIT:
        raise CapacityError(f"dense reference needs n <= {DENSE_LIFT_LIMIT}")
    hp = spec.hp
    sc2 = hp.sigma_c2
    lam0 = base_kernel(x, HyperParams(1.0, 0.0, 1.0, hp.normalize_input_by_d0))
    bias = hp.sigma_b2 if spec.bias else 0.0
    c = hp.sigma_w2 * lam0 + bias
    theta = c.copy()
    for _ in range(2, spec.depth + 1):
        lam = dual_activation(spec.sigma2, c)
        lam_dot = dual_activation_derivative(spec.sigma2, c)
        e = hp.sigma_w2 * lam
        t = theta * lam_dot
        if spec.placement == "inside" or spec.sigma1.is_identity:
            # identity scores make the placements coincide, as in production
            gamma = _lift_dense(a_dense, lam)
            psi = dual_activation(spec.sigma1, sc2 * gamma)
            psid = dual_activation_derivative(spec.sigma1, sc2 * gamma)
        else:
            psi = _lift_dense(a_dense, dual_activation(spec.sigma1, sc2 * lam))
            psid = _lift_dense(
                a_dense, dual_activation_derivative(spec.sigma1, sc2 * lam)
            )
            gamma = _lift_dense(a_dense, lam)
        gamma_t = _lift_dense(a_dense, t)
        inner = block_inner(e, psi)
        c = inner + bias
        theta = (
            inner
            + block_inner(e, sc2 * (gamma * psid))
            + block_inner(e, sc2 * (gamma_t * psid))
            + block_inner(hp.sigma_w2 * t, psi)
            + bias
        )
        c = 0.5 * (c + c.T)
        theta = 0.5 * (theta + theta.T)
    return theta
