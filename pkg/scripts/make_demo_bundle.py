"""Generate small synthetic dataset bundles for demos and CLI smoke tests.

Creates a stochastic-block-model classification bundle (communities =
classes, features = noisy class indicators) and a regression bundle on
the same kind of graph whose targets are a smoothed linear function of
the features.  Both are sized to make every CLI command finish in
seconds.

Usage:
    python3 scripts/make_demo_bundle.py [--out data] [--n 60] [--seed 7]
"""

import argparse
from pathlib import Path

import numpy as np

from gntk.graphs import Graph, NodeDataset, SplitMask, save_bundle


def sbm_graph(rng, sizes, p_in=0.35, p_out=0.03):
    n = int(np.sum(sizes))
    block = np.repeat(np.arange(len(sizes)), sizes)
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            p = p_in if block[u] == block[v] else p_out
            if rng.random() < p:
                edges.append((u, v))
    if not edges:  # pathological draw; connect a path so nothing is isolated
        edges = [(i, i + 1) for i in range(n - 1)]
    edges = np.array(edges, dtype=np.int64)
    return Graph(n=n, edges=edges, weights=np.ones(len(edges))), block


def random_split(rng, n, frac_train=0.4, frac_val=0.2):
    order = rng.permutation(n)
    n_train = max(1, int(frac_train * n))
    n_val = max(1, int(frac_val * n))
    names = np.empty(n, dtype=object)
    names[order[:n_train]] = "train"
    names[order[n_train : n_train + n_val]] = "val"
    names[order[n_train + n_val :]] = "test"
    return SplitMask.from_names(list(names))


def make_classification(rng, n, classes=3, d0=8):
    sizes = np.full(classes, n // classes)
    sizes[: n % classes] += 1
    graph, block = sbm_graph(rng, sizes)
    feats = 0.5 * rng.standard_normal((d0, graph.n))
    feats[:classes, :] += np.eye(classes)[:, block] * 2.0
    ds = NodeDataset(
        name="demo_sbm",
        graph=graph,
        features=feats,
        labels=block.astype(np.int64),
        task="classification",
        num_classes=classes,
    )
    return ds, random_split(rng, graph.n)


def make_regression(rng, n, d0=6):
    graph, _ = sbm_graph(rng, [n // 2, n - n // 2], p_in=0.2, p_out=0.05)
    feats = rng.standard_normal((d0, graph.n))
    coef = rng.standard_normal(d0)
    y = coef @ feats
    a = graph.adjacency_matrix()
    deg = np.maximum(graph.degrees(), 1.0)
    y = 0.5 * y + 0.5 * (a @ y) / deg + 0.05 * rng.standard_normal(graph.n)
    ds = NodeDataset(
        name="demo_reg",
        graph=graph,
        features=feats,
        labels=y,
        task="regression",
    )
    return ds, random_split(rng, graph.n)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data", help="parent directory for bundles")
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    ds, mask = make_classification(rng, args.n)
    save_bundle(out / "demo_sbm", ds, mask)
    print(f"wrote {out / 'demo_sbm'}: n={ds.n}, m={ds.graph.num_edges}, "
          f"{ds.num_classes} classes")
    ds, mask = make_regression(rng, args.n)
    save_bundle(out / "demo_reg", ds, mask)
    print(f"wrote {out / 'demo_reg'}: n={ds.n}, m={ds.graph.num_edges}, regression")


if __name__ == "__main__":
    main()
