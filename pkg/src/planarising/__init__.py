"""Ground-state solvers for classical and quantum Ising spin glasses on planar graphs."""

from .model import (
    Guarantee,
    IsingInstance,
    PlanarEmbedding,
    PlanarIsingError,
    SolveResult,
    SpinAssignment,
    coupling_weight,
    energy,
    extract_faces,
    instance_from_json,
    instance_to_json,
    validate,
)
from .oracle import BoundCertificate, brute_force_min, check_classical_extensivity

__version__ = "0.1.0"

__all__ = [
    "BoundCertificate",
    "Guarantee",
    "IsingInstance",
    "PlanarEmbedding",
    "PlanarIsingError",
    "SolveResult",
    "SpinAssignment",
    "brute_force_min",
    "check_classical_extensivity",
    "coupling_weight",
    "energy",
    "extract_faces",
    "instance_from_json",
    "instance_to_json",
    "validate",
]
