"""Closed-form GP and tangent kernels for wide (graph) networks.

Architectures
-------------
``fcn``
    plain fully-connected stack; the adjacency is ignored (layer update
    ``S^l = Lam^{l-1}``).
``gnn``
    every layer aggregates with a fixed operator A: pre-activation
    covariance ``S^l = A Lam^{l-1} A^T`` and the tangent kernel is
    conjugated by A at every level, including the base case
    ``Th^1 = A Lam^0 A^T``.
``skip_gnn``
    as ``gnn`` but every hidden state is the concatenation ``[s(F); F]``
    (consumed from the second layer on with a 1/sqrt(2) width
    correction), which averages the activation moments with the
    pre-activation covariance in every layer update:
    ``Lam^l = sw2 (E[s s^T] + S^l)/2 + sb2`` for all ``l >= 1``.

Recursions
----------
With ``Lam^0 = sw2 * X^T X / d0 + sb2`` (the division by ``d0`` is
controlled by ``HyperParams.normalize_input_by_d0``):

    S^l    = A Lam^{l-1} A^T
    Lam^l  = sw2 * E[s(u) s(u)^T] + sb2          u ~ N(0, S^l)
    Lamd^l = sw2 * E[s'(u) s'(u)^T]
    Th^1   = A Lam^0 A^T
    Th^{l+1} = A (Lam^l + Lamd^l ⊙ Th^l) A^T

The GP covariance of the depth-L network is ``A Lam^{L-1} A^T`` and its
tangent kernel is ``Th^L``.  Note that the derivative factor ``Lamd`` does
*not* receive the ``sb2`` offset: the bias contributions enter once per
layer through ``Lam`` and then propagate inside ``Th``; adding ``sb2`` to
``Lamd`` would double-count them and break agreement with the empirical
(finite-width Jacobian) tangent kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .activations import Activation, dual_activation, dual_activation_derivative
from .errors import ValidationError
from .graphs import AdjacencyOperator, HyperParams

ARCHITECTURES = ("fcn", "gnn", "skip_gnn")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture + depth + activation + variance hyperparameters."""

    architecture: str
    depth: int
    activation: Activation = field(default_factory=Activation.relu)
    hp: HyperParams = field(default_factory=HyperParams)

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValidationError(
                f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}"
            )
        if not isinstance(self.depth, (int, np.integer)) or self.depth < 1:
            raise ValidationError("depth must be an integer >= 1")
        if self.architecture == "skip_gnn" and self.depth < 2:
            raise ValidationError("skip_gnn needs depth >= 2")

    @property
    def uses_adjacency(self) -> bool:
        return self.architecture in ("gnn", "skip_gnn")


@dataclass
class KernelState:
    """Layerwise buffers of the kernel recursion (exposed for inspection)."""

    layer: int
    sigma: np.ndarray  # Lam^{layer}
    theta: np.ndarray | None = None  # Th^{layer+1} (node-level, conjugated)


def _sym(k: np.ndarray) -> np.ndarray:
    return 0.5 * (k + k.T)


def _resolve_adjacency(spec: ModelSpec, adj: AdjacencyOperator | None):
    if spec.uses_adjacency:
        if adj is None:
            raise ValidationError(f"{spec.architecture} requires an adjacency operator")
        return adj
    if adj is not None and adj.mode != "identity":
        raise ValidationError("fcn ignores the graph; pass mode='identity' or None")
    return None


def base_kernel(x: np.ndarray, hp: HyperParams) -> np.ndarray:
    """Input-layer covariance ``sw2 * X^T X (/ d0) + sb2``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("features must be (d0, n)")
    d0 = x.shape[0]
    if d0 == 0:
        raise ValidationError("features have zero rows (d0 = 0)")
    gram = x.T @ x
    if hp.normalize_input_by_d0:
        gram = gram / d0
    return _sym(hp.sigma_w2 * gram + hp.sigma_b2)


def _layer_updates(spec: ModelSpec, s: np.ndarray, want_deriv: bool):
    """(Lam^l, Lamd^l) from the pre-activation covariance S^l."""
    hp = spec.hp
    e = dual_activation(spec.activation, s)
    # every hidden state of a skip net is the [s(F); F] concatenation, so
    # every Lam^l (l >= 1) averages the activation moment with S^l
    halved = spec.architecture == "skip_gnn"
    if halved:
        lam = hp.sigma_w2 * 0.5 * (e + s) + hp.sigma_b2
    else:
        lam = hp.sigma_w2 * e + hp.sigma_b2
    lam_dot = None
    if want_deriv:
        ed = dual_activation_derivative(spec.activation, s)
        if halved:
            lam_dot = hp.sigma_w2 * 0.5 * (ed + 1.0)
        else:
            lam_dot = hp.sigma_w2 * ed
    return _sym(lam), lam_dot


def compute_gp(
    spec: ModelSpec, adj: AdjacencyOperator | None, x: np.ndarray
) -> np.ndarray:
    """Covariance of the depth-``spec.depth`` network output at infinite width."""
    adj = _resolve_adjacency(spec, adj)
    lam = base_kernel(x, spec.hp)
    conj = (lambda k: _sym(adj.conjugate(k))) if adj is not None else (lambda k: k)
    for _ in range(1, spec.depth):
        s = conj(lam)
        lam, _ = _layer_updates(spec, s, want_deriv=False)
    return conj(lam)


def compute_ntk(
    spec: ModelSpec, adj: AdjacencyOperator | None, x: np.ndarray
) -> np.ndarray:
    """Tangent kernel of the depth-``spec.depth`` network at infinite width."""
    adj = _resolve_adjacency(spec, adj)
    lam = base_kernel(x, spec.hp)
    conj = (lambda k: _sym(adj.conjugate(k))) if adj is not None else (lambda k: k)
    theta = conj(lam)
    for _ in range(1, spec.depth):
        s = conj(lam)
        lam, lam_dot = _layer_updates(spec, s, want_deriv=True)
        theta = conj(lam + lam_dot * theta)
    return theta


def kernel_trace(
    spec: ModelSpec, adj: AdjacencyOperator | None, x: np.ndarray
) -> list[KernelState]:
    """Per-layer (Lam, Th) pairs, mainly for debugging and tests."""
    adj = _resolve_adjacency(spec, adj)
    lam = base_kernel(x, spec.hp)
    conj = (lambda k: _sym(adj.conjugate(k))) if adj is not None else (lambda k: k)
    theta = conj(lam)
    states = [KernelState(layer=0, sigma=lam.copy(), theta=theta.copy())]
    for layer in range(1, spec.depth):
        s = conj(lam)
        lam, lam_dot = _layer_updates(spec, s, want_deriv=True)
        theta = conj(lam + lam_dot * theta)
        states.append(KernelState(layer=layer, sigma=lam.copy(), theta=theta.copy()))
    return states


def nonrecursive_ntk(spec: ModelSpec, x: np.ndarray) -> np.ndarray:
    """fcn tangent kernel assembled as an explicit sum of Hadamard products.

    Exists solely as an independent cross-check of :func:`compute_ntk`:
    the value ladder ``Lam^0 .. Lam^{L-1}`` and the derivative ladder
    ``Lamd^1 .. Lamd^{L-1}`` are combined as

        Th^L = sum_{h=1}^{L} Lam^{h-1} ⊙ Lamd^h ⊙ ... ⊙ Lamd^{L-1}

    with the empty product (h = L) taken as the all-ones matrix.
    """
    if spec.architecture != "fcn":
        raise ValidationError("nonrecursive_ntk is defined for fcn only")
    hp = spec.hp
    lams = [base_kernel(x, hp)]
    lam_dots = [None]  # index aligned with layer number
    for _ in range(1, spec.depth):
        s = lams[-1]
        lams.append(_sym(hp.sigma_w2 * dual_activation(spec.activation, s) + hp.sigma_b2))
        lam_dots.append(hp.sigma_w2 * dual_activation_derivative(spec.activation, s))
    total = np.zeros_like(lams[0])
    for h in range(1, spec.depth + 1):
        term = lams[h - 1].copy()
        for k in range(h, spec.depth):
            term *= lam_dots[k]
        total += term
    return total


def inductive_gram(
    samples: Sequence[tuple[AdjacencyOperator | sp.spmatrix | np.ndarray, np.ndarray]],
    spec: ModelSpec,
    kind: str = "ntk",
) -> np.ndarray:
    """Graph-level Gram matrix for a collection of (adjacency, features) pairs.

    Runs the node-level recursion once on the disjoint union of all graphs
    (block-diagonal adjacency, concatenated features) — the cross-graph
    covariance blocks fall out of the same dual-activation ladder because
    the entrywise moments only need the union's diagonal variances — and
    then sums each (i, j) block of the final node-level kernel.

    ``kind`` selects ``"gp"`` or ``"ntk"``.  Every sample must share the
    feature dimension ``d0``.
    """
    if kind not in ("gp", "ntk"):
        raise ValidationError("kind must be 'gp' or 'ntk'")
    if not samples:
        raise ValidationError("need at least one (adjacency, features) sample")
    mats = []
    feats = []
    sizes = []
    d0 = None
    for a, x in samples:
        if isinstance(a, AdjacencyOperator):
            m = a.matrix
        else:
            m = sp.csr_matrix(a)
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise ValidationError("features must be (d0, n_i)")
        if m.shape[0] != m.shape[1] or m.shape[0] != x.shape[1]:
            raise ValidationError("adjacency and features disagree on node count")
        if d0 is None:
            d0 = x.shape[0]
        elif x.shape[0] != d0:
            raise ValidationError("all samples must share the feature dimension")
        mats.append(m)
        feats.append(x)
        sizes.append(x.shape[1])
    union_adj = AdjacencyOperator(mode="raw01", matrix=sp.block_diag(mats, format="csr"))
    union_x = np.concatenate(feats, axis=1)
    if spec.uses_adjacency:
        k = (compute_ntk if kind == "ntk" else compute_gp)(spec, union_adj, union_x)
    else:
        k = (compute_ntk if kind == "ntk" else compute_gp)(spec, None, union_x)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    m = len(samples)
    gram = np.empty((m, m))
    for i in range(m):
        si = slice(offsets[i], offsets[i + 1])
        for j in range(i, m):
            sj = slice(offsets[j], offsets[j + 1])
            gram[i, j] = gram[j, i] = k[si, sj].sum()
    return gram
