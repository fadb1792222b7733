"""Domains, grid quadrature and level-set extraction."""

from .domain import MAX_EXTRACTION_DIM, MAX_QUADRATURE_DIM, Domain
from .extract import (
    DegenerateCellError,
    MeshTopologyError,
    SurfaceMesh,
    cell_points,
    extract_level_set,
    surface_integral,
)
from .quadrature import (
    ConvergenceTable,
    NonRegularLevelError,
    SublevelNotContainedError,
    refine_convergence,
    regularity_margin,
    resolve_threads,
    richardson as richardson_estimate,
    volume_integral,
)

__all__ = [
    "ConvergenceTable",
    "DegenerateCellError",
    "Domain",
    "MAX_EXTRACTION_DIM",
    "MAX_QUADRATURE_DIM",
    "MeshTopologyError",
    "NonRegularLevelError",
    "SublevelNotContainedError",
    "SurfaceMesh",
    "cell_points",
    "extract_level_set",
    "refine_convergence",
    "regularity_margin",
    "resolve_threads",
    "richardson_estimate",
    "surface_integral",
    "volume_integral",
]
