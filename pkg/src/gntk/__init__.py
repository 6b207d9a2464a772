"""Infinite-width kernels for graph neural networks.

Closed-form GP and tangent kernels for fully-connected, graph-convolutional,
skip-concatenation and attention architectures, plus kernel ridge regression,
effective-resistance graph sparsification and a finite-width validation lab.
"""

from .activations import Activation, dual_activation, dual_activation_derivative
from .errors import (
    CapacityError,
    DegenerateError,
    DivergedError,
    FormatError,
    GntkError,
    IoError,
    NumericalError,
    ValidationError,
)
from .gat import GatSpec, gat_gp, gat_ntk
from .graphs import (
    Graph,
    HyperParams,
    NodeDataset,
    SplitMask,
    build_adjacency,
    load_bundle,
    save_bundle,
)
from .kernel_io import read_kernel_matrix, write_kernel_matrix
from .kernels import ModelSpec, compute_gp, compute_ntk, kernel_trace
from .regression import FitConfig, grid_search, krr_predict
from .sparsify import effective_resistances, sparsify

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "CapacityError",
    "DegenerateError",
    "DivergedError",
    "FitConfig",
    "FormatError",
    "GatSpec",
    "GntkError",
    "Graph",
    "HyperParams",
    "IoError",
    "ModelSpec",
    "NodeDataset",
    "NumericalError",
    "SplitMask",
    "ValidationError",
    "build_adjacency",
    "compute_gp",
    "compute_ntk",
    "dual_activation",
    "dual_activation_derivative",
    "effective_resistances",
    "gat_gp",
    "gat_ntk",
    "grid_search",
    "kernel_trace",
    "krr_predict",
    "load_bundle",
    "read_kernel_matrix",
    "save_bundle",
    "sparsify",
    "write_kernel_matrix",
]
