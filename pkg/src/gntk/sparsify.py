"""Spectral sparsification by effective resistance.

The resistance of an edge is the quadratic form of the Laplacian
pseudoinverse on its incidence vector.  Edges are then sampled without
replacement with weight ``w_e * R_e``; heavy (spectrally important) edges
survive, and the survivors are either reweighted by their inverse
inclusion intensity (to keep quadratic forms close in expectation) or
binarized to plain 0/1 edges.

Two solver paths: a dense pseudoinverse up to ``_DENSE_LIMIT`` nodes, and
above that a Johnson-Lindenstrauss sketch — O(log n / eps^2) Laplacian
solves against random projections of the incidence matrix, each solved by
conjugate gradients with a Jacobi preconditioner.

Sampling uses exponential keys (key_e = Exp(1)/score_e, keep the k
smallest), which makes budgets nested: the edges kept at a small budget
are a subset of those kept at any larger budget under the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
import scipy.sparse.linalg as spl

from .errors import NumericalError, ValidationError
from .graphs import Graph

_DENSE_LIMIT = 5000
_SKETCH_EPS = 0.3


@dataclass(frozen=True)
class ResistanceTable:
    """Per-edge effective resistances, aligned with ``graph.edges`` order."""

    n: int
    edges: np.ndarray  # (m, 2)
    weights: np.ndarray  # (m,)
    resistances: np.ndarray  # (m,)
    components: int
    method: str  # "dense" | "sketch"

    def foster_total(self) -> float:
        """sum of w_e * R_e; equals n - #components for exact resistances."""
        return float(np.sum(self.weights * self.resistances))

    def write_tsv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("u\tv\tresistance\n")
            for (u, v), r in zip(self.edges, self.resistances):
                fh.write(f"{int(u)}\t{int(v)}\t{repr(float(r))}\n")


def _laplacian(graph: Graph) -> sp.csr_matrix:
    a = graph.adjacency_matrix()
    deg = np.asarray(a.sum(axis=1)).ravel()
    return (sp.diags(deg) - a).tocsr()


def _resistances_dense(graph: Graph) -> np.ndarray:
    lap = _laplacian(graph).toarray()
    lp = sl.pinvh(lap)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    r = lp[u, u] + lp[v, v] - 2.0 * lp[u, v]
    return np.maximum(r, 0.0)


def _resistances_sketch(graph: Graph, eps: float, seed: int) -> np.ndarray:
    n, m = graph.n, len(graph.edges)
    lap = _laplacian(graph)
    k = max(1, math.ceil(8.0 * math.log(max(n, 2)) / eps**2))
    rng = np.random.default_rng(seed)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    sqw = np.sqrt(graph.weights)
    # rows of W^{1/2} B combined through a +-1/sqrt(k) projection: each
    # right-hand side is y = B^T W^{1/2} q, automatically in range(L)
    diag = lap.diagonal()
    inv_diag = np.where(diag > 0, 1.0 / np.maximum(diag, 1e-300), 0.0)
    precond = spl.LinearOperator((n, n), matvec=lambda x: inv_diag * x)
    z = np.empty((k, n))
    for i in range(k):
        q = rng.choice([-1.0, 1.0], size=m) / math.sqrt(k)
        y = np.zeros(n)
        np.add.at(y, u, sqw * q)
        np.add.at(y, v, -sqw * q)
        sol, info = spl.cg(lap, y, rtol=1e-10, atol=0.0, maxiter=20 * n, M=precond)
        if info != 0:
            raise NumericalError(f"conjugate gradients failed to converge ({info})")
        z[i] = sol
    diffs = z[:, u] - z[:, v]
    return np.maximum(np.sum(diffs**2, axis=0), 0.0)


def effective_resistances(
    graph: Graph, method: str = "auto", eps: float = _SKETCH_EPS, seed: int = 0
) -> ResistanceTable:
    """Effective resistance of every edge.

    ``method``: "auto" picks dense for n <= 5000, otherwise the JL sketch;
    "dense"/"sketch" force a path.
    """
    if method not in ("auto", "dense", "sketch"):
        raise ValidationError("method must be auto, dense, or sketch")
    if method == "auto":
        method = "dense" if graph.n <= _DENSE_LIMIT else "sketch"
    if len(graph.edges) == 0:
        r = np.zeros(0)
    elif method == "dense":
        r = _resistances_dense(graph)
    else:
        r = _resistances_sketch(graph, eps, seed)
    ncomp = int(graph.connected_components().max()) + 1
    return ResistanceTable(
        n=graph.n,
        edges=graph.edges.copy(),
        weights=graph.weights.copy(),
        resistances=r,
        components=ncomp,
        method=method,
    )


def sparsify(
    graph: Graph,
    keep_fraction: float,
    seed: int = 0,
    binarize: bool = True,
    table: ResistanceTable | None = None,
) -> tuple[Graph, ResistanceTable]:
    """Keep ceil(keep_fraction * m) edges, sampled by w_e * R_e.

    Sampling is without replacement via exponential keys, so for a fixed
    seed the kept set grows monotonically with the budget.  With
    ``binarize=False`` the surviving edges are reweighted by the inverse
    of their inclusion intensity min(1, k * p_e); with ``binarize=True``
    they become unit edges.
    """
    m = len(graph.edges)
    if not (0.0 < keep_fraction <= 1.0):
        raise ValidationError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    if keep_fraction * m < 1.0:
        raise ValidationError(
            f"budget keep_fraction*m = {keep_fraction * m:.3g} selects no edges"
        )
    if table is None:
        table = effective_resistances(graph)
    elif len(table.edges) != m:
        raise ValidationError("resistance table does not match the graph")
    k = math.ceil(keep_fraction * m)
    scores = graph.weights * table.resistances
    total = float(scores.sum())
    if total <= 0:
        raise NumericalError("all sampling scores are zero")
    rng = np.random.default_rng(seed)
    exponentials = rng.exponential(size=m)
    with np.errstate(divide="ignore"):
        keys = np.where(scores > 0, exponentials / scores, np.inf)
    chosen = np.sort(np.argpartition(keys, k - 1)[:k])
    if binarize:
        new_w = np.ones(k)
    else:
        p = scores / total
        intensity = np.minimum(1.0, k * p[chosen])
        new_w = graph.weights[chosen] / intensity
    sub = Graph(n=graph.n, edges=graph.edges[chosen].copy(), weights=new_w)
    return sub, table
