"""Exact bond-percolation thresholds of graphs with a tree-like structure."""

from .builders import FiniteGraph, amalgam, free_group_ball, free_product, grandparent, hnn, sl2z
from .partition import Color, child_color, enumerate_partitions, induced_partition
from .solver import (
    ConvergenceError,
    Engine,
    GuardError,
    critical_probability,
    growth_profile,
    moment_matrix,
    partition_distribution,
    partition_support,
    reachable_colors,
    spectral_radius,
)
from .structure import (
    ChildSlot,
    ModelPiece,
    RootPiece,
    TreeStructure,
    absorb_children,
    enlarge,
    parse,
    serialize,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "FiniteGraph",
    "amalgam",
    "free_group_ball",
    "free_product",
    "grandparent",
    "hnn",
    "sl2z",
    "Color",
    "child_color",
    "enumerate_partitions",
    "induced_partition",
    "ConvergenceError",
    "Engine",
    "GuardError",
    "critical_probability",
    "growth_profile",
    "moment_matrix",
    "partition_distribution",
    "partition_support",
    "reachable_colors",
    "spectral_radius",
    "ChildSlot",
    "ModelPiece",
    "RootPiece",
    "TreeStructure",
    "absorb_children",
    "enlarge",
    "parse",
    "serialize",
    "validate",
]
