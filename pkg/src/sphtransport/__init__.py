"""Mesh-free semi-Lagrangian transport on the unit sphere.

Scalar advection is solved by tracing Eulerian nodes backward through the
velocity field and interpolating with one of three RBF backends: a global
IMQ interpolant, local PHS stencils augmented with spherical harmonics, or a
partition-of-unity blend of patchwise augmented interpolants.
"""

from .geometry import (
    NodeSet,
    icosahedral_nodes,
    icosahedral_nodes_by_count,
    icosahedral_nodes_by_frequency,
    load_nodes,
    project_to_sphere,
)
from .transport import ScalarField, SLConfig, VelocityField, sl_advect, build_backend

__all__ = [
    "NodeSet",
    "ScalarField",
    "SLConfig",
    "VelocityField",
    "build_backend",
    "icosahedral_nodes",
    "icosahedral_nodes_by_count",
    "icosahedral_nodes_by_frequency",
    "load_nodes",
    "project_to_sphere",
    "sl_advect",
]

__version__ = "0.1.0"
