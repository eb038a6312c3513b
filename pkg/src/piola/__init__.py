"""Numerical verification of the Euclidean and Riemannian Piola identities.

Layers, bottom-up: :mod:`piola.expr` (parsed expressions with exact
derivatives), :mod:`piola.dual` (first-order dual numbers),
:mod:`piola.exterior` (Hodge duals, intrinsic determinant and cofactor),
:mod:`piola.chart` (metrics on coordinate boxes), :mod:`piola.core`
(pointwise identities), :mod:`piola.variational` (the volume functional)
and :mod:`piola.scenario` / :mod:`piola.cli` (scenario files and reports).
"""

from piola.chart import Chart, ChartMap, VectorFieldOnChart, gauss_legendre
from piola.exterior import LinearMap, OrientedInnerProductSpace, intrinsic_cof, intrinsic_det
from piola.scenario import load_builtin, load_scenario, render, run

__version__ = "0.1.0"

__all__ = [
    "Chart", "ChartMap", "VectorFieldOnChart", "gauss_legendre",
    "LinearMap", "OrientedInnerProductSpace", "intrinsic_cof", "intrinsic_det",
    "load_builtin", "load_scenario", "render", "run",
]
