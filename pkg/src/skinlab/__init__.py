"""Skin structures on discretized hypersurfaces with singularities.

Modules
-------
surface
    Meshes of cones, links, planes and catenoids as metric graphs.
skinfield
    Exact metric skin transforms, axioms, smoothing.
cover
    Skin adapted and QT covers.
uniformity
    Skin uniform curves, link spaces and domains.
spectral
    Hardy forms, their smallest eigenvalues and conformal metrics.
cli
    Batch front end (``skinlab`` console script).
"""
from .cover import BallCover, build_skin_cover, qt_perturb, verify_cover, verify_qt
from .skinfield import SkinField, metric_skin_transform, verify_axioms, whitney_smooth
from .spectral import assemble_forms, hardy_constant
from .surface import (DiscreteHypersurface, generate_catenoid, generate_hyperplane,
                      generate_lawson_cone, generate_link)
from .uniformity import skin_uniform_curve

__version__ = "0.1.0"

__all__ = [
    "BallCover",
    "DiscreteHypersurface",
    "SkinField",
    "assemble_forms",
    "build_skin_cover",
    "generate_catenoid",
    "generate_hyperplane",
    "generate_lawson_cone",
    "generate_link",
    "hardy_constant",
    "metric_skin_transform",
    "qt_perturb",
    "skin_uniform_curve",
    "verify_axioms",
    "verify_cover",
    "verify_qt",
    "whitney_smooth",
]
