import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gntk.graphs import Graph, NodeDataset, SplitMask

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def triangle():
    return Graph(n=3, edges=np.array([[0, 1], [1, 2], [0, 2]]), weights=np.ones(3))


@pytest.fixture
def path4():
    return Graph(n=4, edges=np.array([[0, 1], [1, 2], [2, 3]]), weights=np.ones(3))


def random_connected_graph(rng, n, p=0.3):
    """Spanning path plus Bernoulli extras, so it is always connected."""
    edges = {(i, i + 1) for i in range(n - 1)}
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges.add((u, v))
    edges = np.array(sorted(edges), dtype=np.int64)
    return Graph(n=n, edges=edges, weights=np.ones(len(edges)))


@pytest.fixture
def small_graph(rng):
    return random_connected_graph(rng, 8, p=0.4)


def toy_dataset(seed=0, n=18, d0=5, classes=3, task="classification"):
    """A labelled random graph small enough for end-to-end runs."""
    rng = np.random.default_rng(seed)
    graph = random_connected_graph(rng, n, p=0.3)
    feats = rng.standard_normal((d0, n))
    if task == "classification":
        labels = rng.integers(0, classes, size=n)
        feats[labels % d0, np.arange(n)] += 1.5
        ds = NodeDataset(
            name="toy", graph=graph, features=feats, labels=labels,
            task=task, num_classes=classes,
        )
    else:
        labels = feats.mean(axis=0) + 0.1 * rng.standard_normal(n)
        ds = NodeDataset(name="toy", graph=graph, features=feats, labels=labels,
                         task=task)
    codes = np.zeros(n, dtype=np.int64)
    codes[n // 3 : 2 * n // 3] = 1
    codes[2 * n // 3 :] = 2
    rng.shuffle(codes)
    names = [("train", "val", "test")[c] for c in codes]
    return ds, SplitMask.from_names(names)


@pytest.fixture
def classification_bundle(tmp_path):
    from gntk.graphs import save_bundle

    ds, mask = toy_dataset(seed=3)
    save_bundle(tmp_path / "toy", ds, mask)
    return tmp_path / "toy"
