import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gntk.activations import Activation, dual_activation, dual_activation_derivative
from gntk.errors import ValidationError
from gntk.graphs import Graph, HyperParams, build_adjacency
from gntk.kernels import (
    ModelSpec,
    base_kernel,
    compute_gp,
    compute_ntk,
    inductive_gram,
    kernel_trace,
    nonrecursive_ntk,
)

from conftest import random_connected_graph


@pytest.fixture
def setup(rng, small_graph):
    x = rng.standard_normal((5, small_graph.n))
    return small_graph, x


def spec(arch, depth, act=None, hp=None):
    return ModelSpec(
        architecture=arch,
        depth=depth,
        activation=act or Activation.relu(),
        hp=hp or HyperParams(sigma_b2=0.1),
    )


def test_base_kernel_normalization(rng):
    x = rng.standard_normal((6, 4))
    hp = HyperParams(sigma_w2=2.0, sigma_b2=0.5)
    k = base_kernel(x, hp)
    assert np.allclose(k, 2.0 * (x.T @ x) / 6 + 0.5)
    hp_raw = HyperParams(sigma_w2=2.0, sigma_b2=0.5, normalize_input_by_d0=False)
    assert np.allclose(base_kernel(x, hp_raw), 2.0 * (x.T @ x) + 0.5)


@pytest.mark.parametrize("depth", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("act", [Activation.relu(), Activation.identity()])
def test_gnn_with_identity_adjacency_reduces_to_fcn(setup, depth, act):
    g, x = setup
    ident = build_adjacency(g, "identity")
    for fn in (compute_gp, compute_ntk):
        via_gnn = fn(spec("gnn", depth, act), ident, x)
        via_fcn = fn(spec("fcn", depth, act), None, x)
        scale = max(1.0, np.abs(via_fcn).max())
        assert np.abs(via_gnn - via_fcn).max() <= 1e-12 * scale


def test_depth_one_closed_forms(setup):
    g, x = setup
    hp = HyperParams(sigma_b2=0.1)
    adj = build_adjacency(g, "kipf")
    a = adj.dense()
    lam0 = base_kernel(x, hp)
    assert np.allclose(compute_gp(spec("gnn", 1), adj, x), a @ lam0 @ a.T, atol=1e-12)
    assert np.allclose(compute_ntk(spec("gnn", 1), adj, x), a @ lam0 @ a.T, atol=1e-12)
    assert np.allclose(compute_gp(spec("fcn", 1), None, x), lam0, atol=1e-12)


def test_fcn_recursion_matches_manual(setup):
    """Hand-rolled two-layer recursion, written out once as an oracle."""
    _, x = setup
    hp = HyperParams(sigma_w2=1.3, sigma_b2=0.2)
    act = Activation.relu()
    lam0 = base_kernel(x, hp)
    lam1 = hp.sigma_w2 * dual_activation(act, lam0) + hp.sigma_b2
    dot1 = hp.sigma_w2 * dual_activation_derivative(act, lam0)
    assert np.allclose(compute_gp(spec("fcn", 2, act, hp), None, x), lam1, atol=1e-12)
    assert np.allclose(
        compute_ntk(spec("fcn", 2, act, hp), None, x), lam1 + dot1 * lam0, atol=1e-12
    )


def test_gnn_recursion_matches_manual(setup):
    g, x = setup
    hp = HyperParams(sigma_b2=0.1)
    act = Activation.relu()
    adj = build_adjacency(g, "kipf")
    a = adj.dense()
    lam0 = base_kernel(x, hp)
    s1 = a @ lam0 @ a.T
    lam1 = hp.sigma_w2 * dual_activation(act, s1) + hp.sigma_b2
    dot1 = hp.sigma_w2 * dual_activation_derivative(act, s1)
    theta1 = s1
    theta2 = a @ (lam1 + dot1 * theta1) @ a.T
    assert np.allclose(compute_gp(spec("gnn", 2, act, hp), adj, x), a @ lam1 @ a.T,
                       atol=1e-12)
    assert np.allclose(compute_ntk(spec("gnn", 2, act, hp), adj, x), theta2, atol=1e-12)


def test_skip_gnn_halved_updates(setup):
    g, x = setup
    hp = HyperParams(sigma_b2=0.1)
    act = Activation.relu()
    adj = build_adjacency(g, "kipf")
    a = adj.dense()
    lam0 = base_kernel(x, hp)
    s1 = a @ lam0 @ a.T
    # every hidden state is [s(F); F], so the halving starts at Lam^1
    lam1 = hp.sigma_w2 * 0.5 * (dual_activation(act, s1) + s1) + hp.sigma_b2
    s2 = a @ lam1 @ a.T
    lam2 = hp.sigma_w2 * 0.5 * (dual_activation(act, s2) + s2) + hp.sigma_b2
    assert np.allclose(
        compute_gp(spec("skip_gnn", 3, act, hp), adj, x), a @ lam2 @ a.T, atol=1e-12
    )


def test_skip_gnn_ntk_derivative_term(setup):
    g, x = setup
    hp = HyperParams(sigma_b2=0.1)
    act = Activation.relu()
    adj = build_adjacency(g, "kipf")
    a = adj.dense()
    lam0 = base_kernel(x, hp)
    s1 = a @ lam0 @ a.T
    lam1 = hp.sigma_w2 * 0.5 * (dual_activation(act, s1) + s1) + hp.sigma_b2
    dot1 = hp.sigma_w2 * 0.5 * (dual_activation_derivative(act, s1) + 1.0)
    th1 = s1
    th2 = a @ (lam1 + dot1 * th1) @ a.T
    s2 = a @ lam1 @ a.T
    lam2 = hp.sigma_w2 * 0.5 * (dual_activation(act, s2) + s2) + hp.sigma_b2
    dot2 = hp.sigma_w2 * 0.5 * (dual_activation_derivative(act, s2) + 1.0)
    th3 = a @ (lam2 + dot2 * th2) @ a.T
    assert np.allclose(compute_ntk(spec("skip_gnn", 3, act, hp), adj, x), th3,
                       atol=1e-12)


def test_identity_activation_ntk_linear_network(setup):
    """With identity activation the NTK recursion telescopes analytically."""
    _, x = setup
    hp = HyperParams(sigma_w2=1.0, sigma_b2=0.0)
    lam0 = base_kernel(x, hp)
    # depth L linear fcn: Lam^l = Lam0, dot = 1, Theta_L = L * Lam0
    for depth in (2, 3, 4):
        theta = compute_ntk(spec("fcn", depth, Activation.identity(), hp), None, x)
        assert np.allclose(theta, depth * lam0, atol=1e-10)


def test_kernel_trace_endpoints(setup):
    g, x = setup
    adj = build_adjacency(g, "kipf")
    sp = spec("gnn", 3)
    states = kernel_trace(sp, adj, x)
    assert [s.layer for s in states] == [0, 1, 2]
    assert np.allclose(states[-1].theta, compute_ntk(sp, adj, x), atol=1e-14)


def test_nonrecursive_matches_recursive(setup):
    _, x = setup
    sp = spec("fcn", 3)
    assert np.allclose(nonrecursive_ntk(sp, x), compute_ntk(sp, None, x), atol=1e-10)


def test_inductive_gram_matches_manual_union(rng):
    """Graph-level Gram = block sums of the node kernel on the disjoint union."""
    import scipy.sparse as sparse

    from gntk.graphs import AdjacencyOperator

    g1 = random_connected_graph(np.random.default_rng(1), 6)
    g2 = random_connected_graph(np.random.default_rng(2), 5)
    x1 = rng.standard_normal((4, 6))
    x2 = rng.standard_normal((4, 5))
    a1 = build_adjacency(g1, "kipf")
    a2 = build_adjacency(g2, "kipf")
    sp = spec("gnn", 2)
    gram = inductive_gram([(a1, x1), (a2, x2)], sp, kind="ntk")
    assert gram.shape == (2, 2)
    union = AdjacencyOperator(
        mode="raw01",
        matrix=sparse.block_diag([a1.matrix, a2.matrix], format="csr"),
    )
    k = compute_ntk(sp, union, np.concatenate([x1, x2], axis=1))
    assert np.allclose(gram[0, 0], k[:6, :6].sum(), atol=1e-12)
    assert np.allclose(gram[1, 1], k[6:, 6:].sum(), atol=1e-12)
    assert np.allclose(gram[0, 1], k[:6, 6:].sum(), atol=1e-12)
    assert np.allclose(gram, gram.T, atol=1e-14)


def test_rejects_unknown_architecture(setup):
    _, x = setup
    with pytest.raises(ValidationError):
        compute_gp(spec("transformer", 2), None, x)


def test_gnn_requires_adjacency(setup):
    _, x = setup
    with pytest.raises(ValidationError):
        compute_gp(spec("gnn", 2), None, x)


@given(
    st.integers(min_value=0, max_value=2**31 - 1),
    st.sampled_from(["fcn", "gnn", "skip_gnn"]),
    st.integers(min_value=1, max_value=4),
)
@settings(max_examples=25)
def test_kernels_are_psd(seed, arch, depth):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 10))
    g = random_connected_graph(rng, n)
    x = rng.standard_normal((4, n))
    adj = None if arch == "fcn" else build_adjacency(g, "kipf")
    if arch == "skip_gnn" and depth < 2:
        depth = 2
    for fn in (compute_gp, compute_ntk):
        k = fn(spec(arch, depth), adj, x)
        assert np.allclose(k, k.T, atol=1e-10)
        evals = np.linalg.eigvalsh(k)
        assert evals.min() >= -1e-8 * max(evals.max(), 1e-12)
