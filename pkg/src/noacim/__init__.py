"""Certified constructions showing that a generic C¹ circle map has no absolutely continuous invariant measure.

Modules
-------
geometry   exact rational interval and box sets
maps       exact circle maps, C¹ patches and bumps
rokhlin    good sets, saturated covers and Rokhlin towers
linearize  Vitali packings and local linearisation
slicing    hyperplane slicing and compressors along matrix sequences
escape     escape certificates and the grid averaging oracle
pipeline   the end-to-end perturbation with its certificate
cli        the ``noacim`` command
"""

from .geometry import ONE, ZERO, BoxSet, IntervalSet, as_scalar, scalar_str
from .maps import NAMED_MAPS, CircleMap, PatchedMap, doubling, map_from_json, tripling
from .rokhlin import Tower, TowerConfig, build_tower
from .escape import EscapeCertificate, verify_certificate
from .pipeline import PipelineConfig, run

__version__ = "0.1.0"

__all__ = [
    "ONE",
    "ZERO",
    "BoxSet",
    "IntervalSet",
    "as_scalar",
    "scalar_str",
    "NAMED_MAPS",
    "CircleMap",
    "PatchedMap",
    "doubling",
    "tripling",
    "map_from_json",
    "Tower",
    "TowerConfig",
    "build_tower",
    "EscapeCertificate",
    "verify_certificate",
    "PipelineConfig",
    "run",
]
