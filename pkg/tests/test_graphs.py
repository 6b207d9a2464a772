import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gntk.errors import FormatError, IoError, ValidationError
from gntk.graphs import (
    Graph,
    HyperParams,
    NodeDataset,
    SplitMask,
    build_adjacency,
    load_bundle,
    save_bundle,
    validate_split,
)

from conftest import random_connected_graph, toy_dataset


def test_graph_rejects_self_loops():
    with pytest.raises(ValidationError):
        Graph(n=3, edges=np.array([[0, 0], [1, 2]]), weights=np.ones(2))


def test_graph_rejects_out_of_range():
    with pytest.raises(ValidationError):
        Graph(n=3, edges=np.array([[0, 3]]), weights=np.ones(1))


def test_graph_rejects_duplicate_edges():
    with pytest.raises(ValidationError):
        Graph(n=3, edges=np.array([[0, 1], [1, 0]]), weights=np.ones(2))


def test_adjacency_matrix_symmetric(triangle):
    a = triangle.adjacency_matrix().toarray()
    assert np.array_equal(a, a.T)
    assert a[0, 1] == 1 and a[0, 0] == 0


def test_degrees(path4):
    assert np.array_equal(path4.degrees(), [1, 2, 2, 1])


def test_connected_components_labels():
    g = Graph(n=5, edges=np.array([[0, 1], [3, 4]]), weights=np.ones(2))
    labels = g.connected_components()
    assert labels[0] == labels[1]
    assert labels[3] == labels[4]
    assert len({labels[0], labels[2], labels[3]}) == 3


@pytest.mark.parametrize("mode", ["identity", "raw01", "self_loops", "laplacian", "kipf"])
def test_adjacency_modes_shapes(triangle, mode):
    op = build_adjacency(triangle, mode)
    a = op.dense()
    assert a.shape == (3, 3)
    assert np.allclose(a, a.T)


def test_identity_mode(triangle):
    assert np.array_equal(build_adjacency(triangle, "identity").dense(), np.eye(3))


def test_self_loops_mode(triangle):
    a = build_adjacency(triangle, "self_loops").dense()
    assert np.array_equal(a, np.ones((3, 3)))


def test_kipf_triangle_row_sums():
    # every node of K3 has degree 2, so kipf = (A+I)/3 exactly
    g = Graph(n=3, edges=np.array([[0, 1], [1, 2], [0, 2]]), weights=np.ones(3))
    a = build_adjacency(g, "kipf").dense()
    assert np.allclose(a, np.ones((3, 3)) / 3.0)


def test_kipf_spectrum_in_unit_interval():
    # (D+I)^{-1/2}(A+I)(D+I)^{-1/2} is similar to a random-walk matrix with
    # self loops: eigenvalues lie in (-1, 1]. The 4-cycle attains -1/3 < 0.
    g = Graph(n=4, edges=np.array([[0, 1], [1, 2], [2, 3], [0, 3]]), weights=np.ones(4))
    evals = np.linalg.eigvalsh(build_adjacency(g, "kipf").dense())
    assert evals.min() < 0  # not PSD in general
    assert evals.min() > -1 - 1e-12
    assert abs(evals.max() - 1.0) < 1e-12


def test_laplacian_mode(path4):
    lap = build_adjacency(path4, "laplacian").dense()
    assert np.allclose(lap.sum(axis=1), 0.0)
    assert np.all(np.linalg.eigvalsh(lap) > -1e-12)


def test_conjugate_matches_dense(small_graph, rng):
    op = build_adjacency(small_graph, "kipf")
    k = rng.standard_normal((8, 8))
    k = k @ k.T
    a = op.dense()
    assert np.allclose(op.conjugate(k), a @ k @ a.T, atol=1e-12)


@given(st.integers(min_value=2, max_value=12), st.integers(min_value=0, max_value=2**31))
def test_kipf_eigenvalues_bounded(n, seed):
    g = random_connected_graph(np.random.default_rng(seed), n)
    evals = np.linalg.eigvalsh(build_adjacency(g, "kipf").dense())
    assert evals.max() <= 1 + 1e-10
    assert evals.min() >= -1 + 1e-10


def test_hyperparams_validation():
    with pytest.raises(ValidationError):
        HyperParams(sigma_w2=0.0)
    with pytest.raises(ValidationError):
        HyperParams(sigma_b2=-0.1)


def test_split_mask_round_trip():
    mask = SplitMask.from_names(["train", "val", "test", "train"])
    assert mask.names() == ["train", "val", "test", "train"]
    assert np.array_equal(mask.train, [0, 3])
    assert np.array_equal(mask.val, [1])
    assert np.array_equal(mask.test, [2])


def test_validate_split_requires_labelled_train():
    ds, mask = toy_dataset(seed=1)
    labels = ds.labels.copy()
    labels[mask.train] = -1
    bad = NodeDataset(name="x", graph=ds.graph, features=ds.features,
                      labels=labels, task="classification",
                      num_classes=ds.num_classes)
    with pytest.raises(ValidationError):
        validate_split(mask, bad)


def test_bundle_round_trip(tmp_path):
    ds, mask = toy_dataset(seed=5)
    save_bundle(tmp_path / "b", ds, mask)
    ds2, mask2 = load_bundle(tmp_path / "b")
    assert ds2.name == ds.name and ds2.task == ds.task
    assert np.array_equal(ds2.features, ds.features)
    assert np.array_equal(ds2.labels, ds.labels)
    assert np.array_equal(ds2.graph.edges, ds.graph.edges)
    assert mask2.names() == mask.names()


def test_bundle_round_trip_regression(tmp_path):
    ds, mask = toy_dataset(seed=6, task="regression")
    save_bundle(tmp_path / "r", ds, mask)
    ds2, _ = load_bundle(tmp_path / "r")
    assert np.array_equal(ds2.labels, ds.labels)  # repr round-trip is exact


def test_bundle_save_is_deterministic(tmp_path):
    ds, mask = toy_dataset(seed=7)
    save_bundle(tmp_path / "a", ds, mask)
    save_bundle(tmp_path / "b", ds, mask)
    for name in ("meta.json", "edges.tsv", "features.csv", "labels.csv", "split.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_load_bundle_missing_dir(tmp_path):
    with pytest.raises(IoError):
        load_bundle(tmp_path / "nope")


def test_load_bundle_bad_meta(tmp_path):
    ds, mask = toy_dataset(seed=8)
    save_bundle(tmp_path / "b", ds, mask)
    (tmp_path / "b" / "meta.json").write_text("{not json")
    with pytest.raises(FormatError):
        load_bundle(tmp_path / "b")


def test_load_bundle_bad_edge_row(tmp_path):
    ds, mask = toy_dataset(seed=9)
    save_bundle(tmp_path / "b", ds, mask)
    (tmp_path / "b" / "edges.tsv").write_text("0\tx\n")
    with pytest.raises(FormatError):
        load_bundle(tmp_path / "b")
