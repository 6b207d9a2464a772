"""Graph containers, adjacency operators and the on-disk bundle format.

A *bundle* is a directory holding one node-labelled graph:

``meta.json``
    ``{"name": str, "n": int, "num_features": int, "task":
    "classification"|"regression", "num_classes": int|null}``
``edges.tsv``
    one undirected edge per line: ``u<TAB>v<TAB>weight`` (weight optional,
    defaults to 1); no self loops, each edge listed once.
``features.csv``
    ``n`` rows of ``num_features`` comma-separated floats (row i = node i).
``labels.csv``
    one value per node; integer class id (``-1`` = unlabelled) for
    classification, float (``nan`` = unlabelled) for regression.
``split.csv``
    one of ``train|val|test|none`` per node.

Integer data round-trips exactly; floats round-trip through ``repr`` and are
reproduced to full double precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import FormatError, IoError, ValidationError

ADJACENCY_MODES = ("identity", "raw01", "self_loops", "laplacian", "kipf")
TASKS = ("classification", "regression")

# split codes (int8) used by SplitMask
TRAIN, VAL, TEST, NONE = 0, 1, 2, 3
_SPLIT_NAMES = {TRAIN: "train", VAL: "val", TEST: "test", NONE: "none"}
_SPLIT_CODES = {v: k for k, v in _SPLIT_NAMES.items()}


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph on nodes ``0..n-1``.

    ``edges`` is an ``(m, 2)`` int array with each undirected edge stored
    exactly once (order of endpoints irrelevant); ``weights`` is ``(m,)``
    positive floats.
    """

    n: int
    edges: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)
        if self.n < 1:
            raise ValidationError(f"graph needs at least one node, got n={self.n}")
        if len(edges) != len(weights):
            raise ValidationError("edges and weights length mismatch")
        if len(edges):
            if edges.min() < 0 or edges.max() >= self.n:
                raise ValidationError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValidationError("self loops are not allowed")
            key = np.sort(edges, axis=1)
            uniq = np.unique(key, axis=0)
            if len(uniq) != len(key):
                raise ValidationError("duplicate undirected edge")
            if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
                raise ValidationError("edge weights must be positive and finite")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def adjacency_matrix(self) -> sp.csr_matrix:
        """Symmetric weighted adjacency as sparse CSR."""
        if not len(self.edges):
            return sp.csr_matrix((self.n, self.n))
        u, v = self.edges[:, 0], self.edges[:, 1]
        w = self.weights
        a = sp.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
            shape=(self.n, self.n),
        )
        return a.tocsr()

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency_matrix().sum(axis=1)).ravel()

    def connected_components(self) -> np.ndarray:
        """Component label per node (0-based, contiguous)."""
        ncomp, labels = sp.csgraph.connected_components(
            self.adjacency_matrix(), directed=False
        )
        return labels


@dataclass(frozen=True)
class AdjacencyOperator:
    """A fixed n-by-n symmetric operator derived from a graph.

    The operator is stored sparse; ``dense()`` materialises it and
    ``conjugate(K)`` computes ``A @ K @ A.T`` without densifying ``A``.
    """

    mode: str
    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return np.asarray(self.matrix.todense(), dtype=np.float64)

    def conjugate(self, k: np.ndarray) -> np.ndarray:
        """Return ``A K A^T`` for a dense square ``K``."""
        ak = self.matrix @ k
        return np.asarray(self.matrix @ ak.T).T

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Return ``A @ x`` (dense result)."""
        return np.asarray(self.matrix @ x)


def build_adjacency(graph: Graph, mode: str) -> AdjacencyOperator:
    """Construct one of the supported adjacency operators.

    ``identity``    I (ignores edges; turns graph kernels into set kernels)
    ``raw01``       the plain weighted adjacency A
    ``self_loops``  A + I
    ``laplacian``   D - A with D the weighted degree diagonal
    ``kipf``        (D + I)^{-1/2} (A + I) (D + I)^{-1/2}

    Isolated nodes are fine in every mode; under ``kipf`` an isolated node
    maps to a diagonal entry of exactly 1.
    """
    if mode not in ADJACENCY_MODES:
        raise ValidationError(
            f"unknown adjacency mode {mode!r}; expected one of {ADJACENCY_MODES}"
        )
    n = graph.n
    eye = sp.identity(n, format="csr")
    if mode == "identity":
        mat = eye
    elif mode == "raw01":
        mat = graph.adjacency_matrix()
    elif mode == "self_loops":
        mat = (graph.adjacency_matrix() + eye).tocsr()
    elif mode == "laplacian":
        a = graph.adjacency_matrix()
        d = sp.diags(np.asarray(a.sum(axis=1)).ravel())
        mat = (d - a).tocsr()
    else:  # kipf
        a = (graph.adjacency_matrix() + eye).tocsr()
        deg = graph.degrees() + 1.0
        dinv = sp.diags(1.0 / np.sqrt(deg))
        mat = (dinv @ a @ dinv).tocsr()
    mat.sum_duplicates()
    return AdjacencyOperator(mode=mode, matrix=mat)


@dataclass(frozen=True)
class HyperParams:
    """Variance hyperparameters shared by all kernels.

    ``sigma_w2``/``sigma_b2`` scale weight and bias variance, ``sigma_c2``
    scales attention score variance (attention kernels only).
    ``normalize_input_by_d0`` divides the input Gram by the feature count,
    matching the 1/sqrt(d0) prefactor of the first weight layer.
    """

    sigma_w2: float = 1.0
    sigma_b2: float = 0.0
    sigma_c2: float = 1.0
    normalize_input_by_d0: bool = True

    def __post_init__(self):
        if self.sigma_w2 <= 0:
            raise ValidationError("sigma_w2 must be positive")
        if self.sigma_b2 < 0 or self.sigma_c2 < 0:
            raise ValidationError("variance parameters must be non-negative")


@dataclass(frozen=True)
class NodeDataset:
    """A graph with node features and (partially observed) node labels.

    ``features`` has shape ``(d0, n)`` — one column per node. ``labels`` is
    ``(n,)``: int class ids with ``-1`` for unlabelled under classification,
    floats with ``nan`` for unlabelled under regression.
    """

    name: str
    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    task: str
    num_classes: int | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValidationError("features must be a 2-d array (d0, n)")
        object.__setattr__(self, "features", feats)
        if self.task not in TASKS:
            raise ValidationError(f"task must be one of {TASKS}")
        if feats.shape[1] != self.graph.n:
            raise ValidationError(
                f"features have {feats.shape[1]} columns for {self.graph.n} nodes"
            )
        if self.task == "classification":
            labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if self.num_classes is None or self.num_classes < 2:
                raise ValidationError("classification needs num_classes >= 2")
            lab = labels[labels >= 0]
            if lab.size and lab.max() >= self.num_classes:
                raise ValidationError("class id out of range")
        else:
            labels = np.asarray(self.labels, dtype=np.float64).reshape(-1)
        if labels.shape[0] != self.graph.n:
            raise ValidationError("one label per node required")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def num_features(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class SplitMask:
    """Per-node assignment to train/val/test/none."""

    codes: np.ndarray

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int8).reshape(-1)
        if codes.size and (codes.min() < TRAIN or codes.max() > NONE):
            raise ValidationError("split codes must be in {train,val,test,none}")
        object.__setattr__(self, "codes", codes)

    @classmethod
    def from_names(cls, names) -> "SplitMask":
        try:
            codes = [_SPLIT_CODES[str(s).strip()] for s in names]
        except KeyError as exc:
            raise FormatError(f"unknown split label {exc.args[0]!r}") from None
        return cls(np.array(codes, dtype=np.int8))

    def names(self) -> list[str]:
        return [_SPLIT_NAMES[int(c)] for c in self.codes]

    def indices(self, which: int) -> np.ndarray:
        return np.flatnonzero(self.codes == which)

    @property
    def train(self) -> np.ndarray:
        return self.indices(TRAIN)

    @property
    def val(self) -> np.ndarray:
        return self.indices(VAL)

    @property
    def test(self) -> np.ndarray:
        return self.indices(TEST)


def validate_split(mask: SplitMask, dataset: NodeDataset) -> None:
    """Check a split against a dataset; raises ValidationError on problems."""
    if mask.codes.shape[0] != dataset.n:
        raise ValidationError(
            f"split covers {mask.codes.shape[0]} nodes, dataset has {dataset.n}"
        )
    if mask.train.size == 0:
        raise ValidationError("train split is empty")
    labelled = np.concatenate([mask.train, mask.val, mask.test])
    if dataset.task == "classification":
        missing = dataset.labels[labelled] < 0
    else:
        missing = ~np.isfinite(dataset.labels[labelled])
    if np.any(missing):
        bad = labelled[missing][:5]
        raise ValidationError(f"nodes {bad.tolist()} are in the split but unlabelled")


# ---------------------------------------------------------------------------
# bundle IO
# ---------------------------------------------------------------------------


def _require(path: Path) -> Path:
    if not path.exists():
        raise IoError(f"missing bundle file: {path}")
    return path


def load_bundle(path: str | Path) -> tuple[NodeDataset, SplitMask]:
    """Read a bundle directory into a dataset and its split."""
    root = Path(path)
    if not root.is_dir():
        raise IoError(f"bundle directory not found: {root}")
    try:
        meta = json.loads(_require(root / "meta.json").read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"meta.json is not valid JSON: {exc}") from None
    for key in ("name", "n", "num_features", "task"):
        if key not in meta:
            raise FormatError(f"meta.json missing key {key!r}")
    n = int(meta["n"])
    d0 = int(meta["num_features"])
    task = meta["task"]
    if task not in TASKS:
        raise FormatError(f"meta.json task {task!r} not in {TASKS}")

    edges_path = _require(root / "edges.tsv")
    rows = []
    for ln, line in enumerate(edges_path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise FormatError(f"{edges_path}:{ln}: expected 2 or 3 columns")
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise FormatError(f"{edges_path}:{ln}: malformed edge row") from None
        rows.append((u, v, w))
    if rows:
        arr = np.array(rows, dtype=np.float64)
        edges, weights = arr[:, :2].astype(np.int64), arr[:, 2]
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
        weights = np.zeros(0)
    if len(edges) and (edges.min() < 0 or edges.max() >= n):
        raise FormatError(f"{edges_path}: node index out of range for n={n}")
    try:
        graph = Graph(n=n, edges=edges, weights=weights)
    except ValidationError as exc:
        raise FormatError(f"{edges_path}: {exc}") from None

    feats_path = _require(root / "features.csv")
    try:
        feats = np.loadtxt(feats_path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{feats_path}: {exc}") from None
    if feats.shape != (n, d0):
        raise FormatError(
            f"{feats_path}: shape {feats.shape} does not match meta (n={n}, d0={d0})"
        )

    labels_path = _require(root / "labels.csv")
    raw_labels = [s.strip() for s in labels_path.read_text().splitlines() if s.strip()]
    if len(raw_labels) != n:
        raise FormatError(f"{labels_path}: {len(raw_labels)} labels for {n} nodes")
    if task == "classification":
        try:
            labels = np.array([int(s) for s in raw_labels], dtype=np.int64)
        except ValueError:
            raise FormatError(f"{labels_path}: non-integer class label") from None
        num_classes = meta.get("num_classes")
        if num_classes is None:
            raise FormatError("meta.json missing num_classes for classification")
        num_classes = int(num_classes)
    else:
        try:
            labels = np.array([float(s) for s in raw_labels], dtype=np.float64)
        except ValueError:
            raise FormatError(f"{labels_path}: non-numeric label") from None
        num_classes = None

    split_path = _require(root / "split.csv")
    names = [s.strip() for s in split_path.read_text().splitlines() if s.strip()]
    if len(names) != n:
        raise FormatError(f"{split_path}: {len(names)} split rows for {n} nodes")
    mask = SplitMask.from_names(names)

    dataset = NodeDataset(
        name=str(meta["name"]),
        graph=graph,
        features=feats.T,  # stored per-node rows, held as (d0, n)
        labels=labels,
        task=task,
        num_classes=num_classes,
    )
    validate_split(mask, dataset)
    return dataset, mask


def save_bundle(path: str | Path, dataset: NodeDataset, mask: SplitMask) -> None:
    """Write a dataset + split as a bundle directory (creates it if needed)."""
    validate_split(mask, dataset)
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "name": dataset.name,
        "n": dataset.n,
        "num_features": dataset.num_features,
        "task": dataset.task,
        "num_classes": dataset.num_classes,
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    with open(root / "edges.tsv", "w") as fh:
        for (u, v), w in zip(dataset.graph.edges, dataset.graph.weights):
            fh.write(f"{int(u)}\t{int(v)}\t{float(w)!r}\n")
    with open(root / "features.csv", "w") as fh:
        for row in dataset.features.T:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    with open(root / "labels.csv", "w") as fh:
        if dataset.task == "classification":
            fh.write("\n".join(str(int(c)) for c in dataset.labels) + "\n")
        else:
            fh.write("\n".join(repr(float(x)) for x in dataset.labels) + "\n")
    (root / "split.csv").write_text("\n".join(mask.names()) + "\n")
