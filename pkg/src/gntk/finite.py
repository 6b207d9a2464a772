"""Finite-width networks matching the kernel architectures, with manual
Jacobians.

Everything here is plain numpy; no autodiff.  The Jacobian of the output
with respect to every parameter block is written out by hand from the
layer equations, and the empirical tangent kernel is accumulated block by
block as ``sum_b J_b J_b^T`` without ever materialising the full Jacobian.

Parametrisation ("NTK parametrisation"): every weight/bias/score entry is
drawn from N(0, 1) and the scale sits in explicit prefactors —
``sigma_w / sqrt(fan_in)`` on weights, ``sigma_b`` on biases,
``sigma_c / sqrt(2 fan_in)`` on attention scores.

Layer equations (column i = node i):

fcn       F^l = (sw/sqrt(d)) W^l G^{l-1} + sb b^l 1^T
gnn       F^l = ((sw/sqrt(d)) W^l G^{l-1} + sb b^l 1^T) A^T
skip_gnn  as gnn but for l >= 2 the state is G = [s(F); F] (2d rows) and
          the prefactor is sw/sqrt(2d)
gat       F^1 = (sw/sqrt(d0)) W^1 X (+ sb b^1 1^T)
          F^l = (sw/sqrt(H d)) sum_h W^{l,h} (G M^{l,h}) (+ sb b^l 1^T)
          with scores S^h_ij = (sc/sqrt(2d)) (c1+c2)^T (G_i + G_j),
          M^h = s1(A o S^h)   (placement "inside")
          M^h = A o s1(S^h)   (placement "hadamard_first")

The attention score uses one vector c = [c1; c2] of length 2d per head and
enters through the symmetric combination c1 + c2; this is the finite
counterpart of the pair-lift kernels in gat.py.  All attention einsums are
factored so that no intermediate carries both a head axis and a width
axis, which keeps width-4096, heads-4096 tangent kernels inside a couple
hundred MB.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import Activation
from .errors import CapacityError, DivergedError, ValidationError
from .graphs import AdjacencyOperator, HyperParams

NET_KINDS = ("fcn", "gnn", "skip_gnn", "gat")
_NTK_SIDE_LIMIT = 4096  # refuse Grams beyond this side length


@dataclass
class FiniteNet:
    """A concrete random network; mutable (training updates it in place)."""

    kind: str
    widths: list[int]  # [d0, d1, ..., dL] including input and output dims
    activation: Activation  # s for fcn/gnn/skip, s2 for gat
    hp: HyperParams
    heads: int = 1
    sigma1: Activation = field(default_factory=Activation.identity)
    placement: str = "inside"
    bias: bool = True
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)
    scores: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    def param_blocks(self):
        """Yield (name, array) for every trainable block."""
        for l, w in enumerate(self.weights, start=1):
            yield f"W{l}", w
        if self.bias:
            for l, b in enumerate(self.biases, start=1):
                yield f"b{l}", b
        for l, c in enumerate(self.scores, start=1):
            if c is not None:
                yield f"c{l}", c

    def clone_params(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.param_blocks()}


def init_network(
    kind: str,
    widths,
    out_dim: int,
    d0: int,
    activation: Activation,
    hp: HyperParams,
    seed: int = 0,
    heads: int = 1,
    sigma1: Activation | None = None,
    placement: str = "inside",
    bias: bool = True,
) -> FiniteNet:
    """Draw a fresh network with N(0,1) parameters.

    ``widths`` lists the hidden widths (length depth-1); a bare int is
    promoted to a single hidden layer.
    """
    if kind not in NET_KINDS:
        raise ValidationError(f"kind must be one of {NET_KINDS}")
    if placement not in ("inside", "hadamard_first"):
        raise ValidationError("placement must be 'inside' or 'hadamard_first'")
    if isinstance(widths, (int, np.integer)):
        widths = [int(widths)]
    widths = [int(w) for w in widths]
    if any(w < 1 for w in widths) or out_dim < 1 or d0 < 1:
        raise ValidationError("all widths must be positive")
    dims = [d0] + widths + [out_dim]
    depth = len(dims) - 1
    if kind == "skip_gnn" and depth < 2:
        raise ValidationError("skip_gnn needs depth >= 2")
    if kind == "gat" and heads < 1:
        raise ValidationError("gat needs at least one head")
    rng = np.random.default_rng(seed)
    weights, biases, scores = [], [], []
    for l in range(1, depth + 1):
        din, dout = dims[l - 1], dims[l]
        if kind == "skip_gnn" and l >= 2:
            weights.append(rng.standard_normal((dout, 2 * din)))
        elif kind == "gat" and l >= 2:
            weights.append(rng.standard_normal((heads, dout, din)))
        else:
            weights.append(rng.standard_normal((dout, din)))
        biases.append(rng.standard_normal(dout))
        if kind == "gat" and l >= 2:
            scores.append(rng.standard_normal((heads, 2 * din)))
        else:
            scores.append(None)
    return FiniteNet(
        kind=kind,
        widths=dims,
        activation=activation,
        hp=hp,
        heads=heads,
        sigma1=sigma1 if sigma1 is not None else Activation.identity(),
        placement=placement,
        bias=bias,
        weights=weights,
        biases=biases,
        scores=scores,
    )


def _adj_dense(net: FiniteNet, adj) -> np.ndarray | None:
    if net.kind == "fcn":
        return None
    if adj is None:
        raise ValidationError(f"{net.kind} needs an adjacency operator")
    a = adj.dense() if isinstance(adj, AdjacencyOperator) else np.asarray(adj, float)
    if net.kind == "gat" and not np.allclose(a, a.T, atol=1e-12):
        raise ValidationError("gat needs a symmetric adjacency")
    return a


def _forward_cache(net: FiniteNet, adj, x: np.ndarray) -> dict:
    """Forward pass keeping every intermediate the backward pass needs."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != net.widths[0]:
        raise ValidationError(f"features must be ({net.widths[0]}, n), got {x.shape}")
    a = _adj_dense(net, adj)
    hp = net.hp
    sw, sb, sc = np.sqrt(hp.sigma_w2), np.sqrt(hp.sigma_b2), np.sqrt(hp.sigma_c2)
    cache = {"x": x, "a": a, "F": [None], "G": [x], "att": [None]}
    g = x
    for l in range(1, net.depth + 1):
        w = net.weights[l - 1]
        if net.kind == "gat" and l >= 2:
            d = g.shape[0]
            c = net.scores[l - 1]
            gamma = c[:, :d] + c[:, d:]  # (H, d)
            base = (sc / np.sqrt(2 * d)) * (gamma @ g)  # per-node score parts
            s = base[:, :, None] + base[:, None, :]  # S^h_ij = base_i + base_j
            if net.placement == "inside":
                lmat = a[None, :, :] * s
                m = net.sigma1(lmat)
                mdot = net.sigma1.deriv(lmat) * a[None, :, :]
            else:
                m = a[None, :, :] * net.sigma1(s)
                mdot = a[None, :, :] * net.sigma1.deriv(s)
            pref = sw / np.sqrt(net.heads * d)
            wg = np.einsum("hvd,dk->hvk", w, g, optimize=True)  # (W^h G)
            f = pref * np.einsum("hvk,hkn->vn", wg, m, optimize=True)
            if net.bias:
                f = f + sb * net.biases[l - 1][:, None]
            cache["att"].append(
                {"gamma": gamma, "s": s, "m": m, "mdot": mdot, "wg": wg, "d": d}
            )
        else:
            if net.kind == "skip_gnn" and l >= 2:
                d = g.shape[0] // 2
                pref = sw / np.sqrt(2 * d)
            else:
                d = g.shape[0]
                pref = sw / np.sqrt(d)
            inner = pref * (w @ g)
            if net.bias:
                inner = inner + sb * net.biases[l - 1][:, None]
            # gat's first layer is a plain dense map; only gnn/skip aggregate here
            f = inner @ a.T if net.kind in ("gnn", "skip_gnn") else inner
            cache["att"].append(None)
        cache["F"].append(f)
        if l < net.depth:
            if net.kind == "skip_gnn":
                g = np.concatenate([net.activation(f), f], axis=0)
            else:
                g = net.activation(f)
            cache["G"].append(g)
    cache["out"] = cache["F"][net.depth]
    return cache


def forward(net: FiniteNet, adj, x: np.ndarray) -> np.ndarray:
    """Network output, shape (out_dim, n)."""
    return _forward_cache(net, adj, x)["out"]


# ---------------------------------------------------------------------------
# backward pass (vector-Jacobian products) for training
# ---------------------------------------------------------------------------


def _backward(net: FiniteNet, cache: dict, delta: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of sum(delta * F^L) for every trainable block."""
    hp = net.hp
    sw, sb, sc = np.sqrt(hp.sigma_w2), np.sqrt(hp.sigma_b2), np.sqrt(hp.sigma_c2)
    a = cache["a"]
    grads: dict[str, np.ndarray] = {}
    d_f = delta  # dL/dF^l, starts at l = depth
    for l in range(net.depth, 0, -1):
        g = cache["G"][l - 1]
        w = net.weights[l - 1]
        if net.kind == "gat" and l >= 2:
            att = cache["att"][l]
            d = att["d"]
            pref = sw / np.sqrt(net.heads * d)
            spref = sc / np.sqrt(2 * d)
            # gW^h = pref * d_f (G M^h)^T, contracted head-by-head
            dfm = np.einsum("vn,hkn->hvk", d_f, att["m"], optimize=True)
            grads[f"W{l}"] = pref * np.einsum("hvk,dk->hvd", dfm, g, optimize=True)
            if net.bias:
                grads[f"b{l}"] = sb * d_f.sum(axis=1)
            # dL/dM^h = (W^h G)^T (pref * d_f);  dL/dS^h = that * mdot
            nmat = pref * np.einsum("hvk,vn->hkn", att["wg"], d_f, optimize=True)
            kmat = nmat * att["mdot"]
            rowcol = kmat.sum(axis=2) + kmat.sum(axis=1)  # (H, n)
            ggamma = spref * np.einsum("vk,hk->hv", g, rowcol, optimize=True)
            grads[f"c{l}"] = np.concatenate([ggamma, ggamma], axis=1)
            if l > 1:
                # dL/dG: product path + score path, then through s2
                dg = pref * np.einsum("hvd,hvk->dk", w, dfm, optimize=True)
                dg += spref * np.einsum(
                    "hv,hk->vk", att["gamma"], rowcol, optimize=True
                )
                d_f = net.activation.deriv(cache["F"][l - 1]) * dg
        else:
            if net.kind == "skip_gnn" and l >= 2:
                d = g.shape[0] // 2
                pref = sw / np.sqrt(2 * d)
            else:
                d = g.shape[0]
                pref = sw / np.sqrt(d)
            dm = d_f @ a if net.kind in ("gnn", "skip_gnn") else d_f
            grads[f"W{l}"] = pref * (dm @ g.T)
            if net.bias:
                grads[f"b{l}"] = sb * dm.sum(axis=1)
            if l > 1:
                dg = pref * (w.T @ dm)
                fprev = cache["F"][l - 1]
                if net.kind == "skip_gnn" and l >= 2:
                    d_f = net.activation.deriv(fprev) * dg[:d] + dg[d:]
                else:
                    d_f = net.activation.deriv(fprev) * dg
    return grads


# ---------------------------------------------------------------------------
# empirical tangent kernel
# ---------------------------------------------------------------------------


def _gram_from_chain(t: np.ndarray, r: np.ndarray) -> np.ndarray:
    """sum over width v of T_v R T_v^T given T (o,n,d,n) and node Gram R."""
    return np.einsum("ajvi,bkvl,il->ajbk", t, t, r, optimize=True)


def empirical_ntk(net: FiniteNet, adj, x: np.ndarray) -> np.ndarray:
    """Exact finite-width tangent kernel, shape (n*out_dim, n*out_dim).

    The index order is node-major: entry ``(i*out_dim + u, j*out_dim + v)``
    pairs output coordinate u at node i with coordinate v at node j, so a
    node-level closed form ``theta`` corresponds to
    ``np.kron(theta, np.eye(out_dim))``.
    """
    cache = _forward_cache(net, adj, x)
    a = cache["a"]
    hp = net.hp
    n = x.shape[1]
    out_dim = net.widths[-1]
    side = n * out_dim
    if side > _NTK_SIDE_LIMIT:
        raise CapacityError(
            f"empirical tangent kernel side {side} exceeds {_NTK_SIDE_LIMIT}"
        )
    sw, sb, sc = np.sqrt(hp.sigma_w2), np.sqrt(hp.sigma_b2), np.sqrt(hp.sigma_c2)
    # chain tensor T[u, j, v, i] = dF^L_{uj} / dF^l_{vi}, starts at l = L
    t = np.einsum("uv,ji->ujvi", np.eye(out_dim), np.eye(n))
    gram = np.zeros((out_dim, n, out_dim, n))
    for l in range(net.depth, 0, -1):
        g = cache["G"][l - 1]
        w = net.weights[l - 1]
        if net.kind == "gat" and l >= 2:
            att = cache["att"][l]
            d = att["d"]
            m, mdot = att["m"], att["mdot"]
            pref = sw / np.sqrt(net.heads * d)
            spref = sc / np.sqrt(2 * d)
            gg = g.T @ g  # (n, n) node Gram of the layer input
            # W^{l,h}: dF_{vi}/dW^h_{vw} = pref (G M^h)_{wi}
            r = pref**2 * np.einsum("hki,kl,hlj->ij", m, gg, m, optimize=True)
            gram += _gram_from_chain(t, r)
            if net.bias:
                gram += sb**2 * np.einsum("ajv,bkv->ajbk", t.sum(-1), t.sum(-1))
            # score vectors: dF_{vi}/dgamma^h_w =
            #   pref*spref*(sum_k q_{vki} G_{wk} + qs_{vi} G_{wi}),
            # q_{vki} = (W^h G)_{vk} mdot_{ki}; both halves of c^h repeat it.
            q = np.einsum("hvk,hki->hvki", att["wg"], mdot, optimize=True)
            qs = q.sum(axis=2)  # (H, v, i)
            jj = np.einsum("hvki,kl,hulj->viuj", q, gg, q, optimize=True)
            cross = np.einsum("hvki,kj,huj->viuj", q, gg, qs, optimize=True)
            jj += cross + cross.transpose(2, 3, 0, 1)
            jj += np.einsum("hvi,huj,ij->viuj", qs, qs, gg, optimize=True)
            jj *= 2.0 * (pref * spref) ** 2
            gram += np.einsum("ajvi,bkul,viul->ajbk", t, t, jj, optimize=True)
            if l > 1:
                # chain to F^{l-1}: product path + score path
                c1 = pref * np.einsum("hvw,hki->vwki", w, m, optimize=True)
                c1 += pref * spref * np.einsum(
                    "hw,hvki->vwki", att["gamma"], q, optimize=True
                )
                c1 += pref * spref * np.einsum(
                    "hw,hvi,ki->vwki", att["gamma"], qs, np.eye(n), optimize=True
                )
                t = np.einsum("ajvi,vwki->ajwk", t, c1, optimize=True)
                t = t * net.activation.deriv(cache["F"][l - 1])[None, None]
        else:
            if net.kind == "skip_gnn" and l >= 2:
                d = g.shape[0] // 2
                pref = sw / np.sqrt(2 * d)
            else:
                d = g.shape[0]
                pref = sw / np.sqrt(d)
            conv = net.kind in ("gnn", "skip_gnn")
            ga = g @ a.T if conv else g
            gram += _gram_from_chain(t, pref**2 * (ga.T @ ga))
            if net.bias:
                if conv:
                    ts = np.einsum("ajvi,i->ajv", t, a.sum(axis=1))
                else:
                    ts = t.sum(-1)
                gram += sb**2 * np.einsum("ajv,bkv->ajbk", ts, ts)
            if l > 1:
                sdot = net.activation.deriv(cache["F"][l - 1])
                u = np.einsum("ajvi,ik->ajvk", t, a) if conv else t
                if net.kind == "skip_gnn" and l >= 2:
                    t = pref * (
                        np.einsum("ajvk,vw->ajwk", u, w[:, :d]) * sdot[None, None]
                        + np.einsum("ajvk,vw->ajwk", u, w[:, d:])
                    )
                else:
                    t = pref * np.einsum("ajvk,vw->ajwk", u, w) * sdot[None, None]
    return np.ascontiguousarray(gram.transpose(1, 0, 3, 2)).reshape(side, side)


def fd_jacobian_gram(net: FiniteNet, adj, x: np.ndarray, step: float = 1e-5):
    """Brute-force tangent kernel via central differences (reference only)."""
    saved = net.clone_params()
    cols = []
    for _, arr in net.param_blocks():
        flat = arr.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            fp = forward(net, adj, x)
            flat[idx] = orig - step
            fm = forward(net, adj, x)
            flat[idx] = orig
            cols.append(((fp - fm) / (2 * step)).T.reshape(-1))  # node-major
    for name, arr in net.param_blocks():
        np.copyto(arr, saved[name])
    j = np.stack(cols, axis=1)
    return j @ j.T


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class TrainingTrace:
    """Per-epoch record; row 0 is the state at initialisation (drift 0)."""

    epochs: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)
    weight_drift: list[float] = field(default_factory=list)
    ntk_drift: list[float] = field(default_factory=list)

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "accuracy", "weight_drift", "ntk_drift"])
            for row in zip(
                self.epochs, self.loss, self.accuracy, self.weight_drift, self.ntk_drift
            ):
                writer.writerow(
                    [repr(float(v)) if isinstance(v, float) else v for v in row]
                )


def _loss_and_delta(f, targets, train_idx, kind):
    t = len(train_idx)
    ftr = f[:, train_idx]
    ytr = targets[:, train_idx]
    if kind == "mse":
        resid = ftr - ytr
        loss = 0.5 * float(np.sum(resid**2)) / t
        delta_tr = resid / t
    elif kind == "cross_entropy":
        z = ftr - ftr.max(axis=0, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=0, keepdims=True))
        loss = -float(np.sum(ytr * logp)) / t
        delta_tr = (np.exp(logp) - ytr) / t
    else:
        raise ValidationError("loss must be 'mse' or 'cross_entropy'")
    delta = np.zeros_like(f)
    delta[:, train_idx] = delta_tr
    return loss, delta


def train(
    net: FiniteNet,
    adj,
    x: np.ndarray,
    targets: np.ndarray,
    train_idx: np.ndarray,
    lr: float = 0.001,
    epochs: int = 100,
    optimizer: str = "gd",
    loss: str = "mse",
    labels: np.ndarray | None = None,
    track_ntk_every: int = 10,
    record_every: int = 1,
) -> TrainingTrace:
    """Full-batch training; mutates ``net`` and returns the recorded trace.

    ``targets`` is (out_dim, n) — one-hot columns for classification.
    ``weight_drift`` is the relative Frobenius distance of the stacked
    parameter vector from initialisation; ``ntk_drift`` (filled on epochs
    divisible by ``track_ntk_every``) compares the empirical tangent
    kernel on train nodes against its value at initialisation.
    """
    if optimizer not in ("gd", "adam"):
        raise ValidationError("optimizer must be 'gd' or 'adam'")
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise ValidationError("empty train index set")
    init = net.clone_params()
    init_norm = np.sqrt(sum(float(np.sum(v**2)) for v in init.values()))
    out_dim = net.widths[-1]

    def train_ntk():
        full = empirical_ntk(net, adj, x)
        take = (train_idx[:, None] * out_dim + np.arange(out_dim)[None, :]).ravel()
        return full[np.ix_(take, take)]

    ntk0 = train_ntk() if track_ntk_every else None
    ntk0_norm = np.linalg.norm(ntk0) if ntk0 is not None else 1.0
    state = {}
    if optimizer == "adam":
        for name, arr in net.param_blocks():
            state[name] = (np.zeros_like(arr), np.zeros_like(arr))
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    trace = TrainingTrace()
    blocks = dict(net.param_blocks())

    def record_accuracy(f):
        if labels is None:
            return float("nan")
        return float(np.mean(f.argmax(axis=0)[train_idx] == labels[train_idx]))

    cache = _forward_cache(net, adj, x)
    lval, delta = _loss_and_delta(cache["out"], targets, train_idx, loss)
    trace.epochs.append(0)
    trace.loss.append(lval)
    trace.accuracy.append(record_accuracy(cache["out"]))
    trace.weight_drift.append(0.0)
    trace.ntk_drift.append(0.0)
    for epoch in range(1, epochs + 1):
        grads = _backward(net, cache, delta)
        for name, arr in blocks.items():
            gradv = grads.get(name)
            if gradv is None:
                continue
            if optimizer == "gd":
                arr -= lr * gradv
            else:
                m, v = state[name]
                m *= beta1
                m += (1 - beta1) * gradv
                v *= beta2
                v += (1 - beta2) * gradv**2
                mhat = m / (1 - beta1**epoch)
                vhat = v / (1 - beta2**epoch)
                arr -= lr * mhat / (np.sqrt(vhat) + eps)
        cache = _forward_cache(net, adj, x)
        lval, delta = _loss_and_delta(cache["out"], targets, train_idx, loss)
        if not np.isfinite(lval):
            trace.epochs.append(epoch)
            trace.loss.append(lval)
            trace.accuracy.append(record_accuracy(cache["out"]))
            trace.weight_drift.append(float("nan"))
            trace.ntk_drift.append(float("nan"))
            err = DivergedError(f"loss became non-finite at epoch {epoch}")
            err.trace = trace
            raise err
        if epoch % record_every == 0 or epoch == epochs:
            drift = np.sqrt(
                sum(float(np.sum((blocks[k] - init[k]) ** 2)) for k in init)
            ) / max(init_norm, 1e-300)
            trace.epochs.append(epoch)
            trace.loss.append(lval)
            trace.accuracy.append(record_accuracy(cache["out"]))
            trace.weight_drift.append(float(drift))
            if track_ntk_every and (epoch % track_ntk_every == 0 or epoch == epochs):
                rel = np.linalg.norm(train_ntk() - ntk0) / max(ntk0_norm, 1e-300)
                trace.ntk_drift.append(float(rel))
            else:
                trace.ntk_drift.append(float("nan"))
    return trace


def kernel_vs_network_prediction(
    kind: str,
    adj,
    x: np.ndarray,
    y: np.ndarray,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    width: int = 4096,
    depth: int = 2,
    activation: Activation | None = None,
    hp: HyperParams | None = None,
    lr: float = 0.5,
    epochs: int = 2000,
    seed: int = 0,
) -> dict:
    """Train one wide network and compare against the closed-form predictor.

    The network's contribution is measured relative to its initial output
    (tangent-kernel dynamics describe ``F_t - F_0``), trained full-batch on
    the train nodes; the reference is kernel ridge regression with the
    matching closed-form tangent kernel at ridge 0 (jitter only).  Returns
    the elementwise max deviation on test nodes plus both prediction
    vectors.
    """
    from .kernels import ModelSpec, compute_ntk
    from .regression import krr_predict

    if kind not in ("fcn", "gnn", "skip_gnn"):
        raise ValidationError("kernel/network comparison covers fcn, gnn, skip_gnn")
    activation = activation or Activation.relu()
    hp = hp or HyperParams()
    spec = ModelSpec(architecture=kind, depth=depth, activation=activation, hp=hp)
    use_adj = adj if kind != "fcn" else None
    theta = compute_ntk(spec, use_adj, x)
    pred = krr_predict(theta, np.asarray(y, float), train_idx, lam=0.0, task="regression")
    net = init_network(
        kind,
        [width] * (depth - 1),
        1,
        x.shape[0],
        activation,
        hp,
        seed=seed,
        bias=hp.sigma_b2 > 0,
    )
    f0 = forward(net, use_adj, x).copy()
    targets = np.asarray(y, dtype=np.float64)[None, :] + f0
    train(
        net,
        use_adj,
        x,
        targets,
        train_idx,
        lr=lr,
        epochs=epochs,
        optimizer="gd",
        loss="mse",
        track_ntk_every=0,
        record_every=max(1, epochs),
    )
    net_pred = (forward(net, use_adj, x) - f0).ravel()
    dev = float(np.max(np.abs(net_pred[test_idx] - pred.values[test_idx])))
    return {
        "max_deviation": dev,
        "network": net_pred[test_idx],
        "kernel": pred.values[test_idx],
    }
