"""Intrinsic volumes of sublevel sets of smooth fields on flat tori and boxes."""

from .engine import (
    ComputeRequest,
    VolumeReport,
    compute_intrinsic_volumes,
    continuity_probe,
    intrinsic_volume,
    level_sweep,
    nodal_volume,
    zero_set_intrinsic_volumes,
)
from .field import parse
from .geometry import Domain

__version__ = "0.1.0"

__all__ = [
    "ComputeRequest",
    "Domain",
    "VolumeReport",
    "compute_intrinsic_volumes",
    "continuity_probe",
    "intrinsic_volume",
    "level_sweep",
    "nodal_volume",
    "parse",
    "zero_set_intrinsic_volumes",
]
