"""Anisotropic torsional rigidity and principal frequency of convex planar domains."""

from .anisogeom import (
    Ellipse,
    Polygon,
    aniso_distance,
    aniso_inradius,
    canonicalize,
    contact_normals,
    covering_check,
    facet_decomposition,
    gale_polytope,
    shear_map,
)
from .certificates import (
    BarrierField,
    BoundCertificate,
    eigen_bounds,
    sandwich_constants,
    thin_rectangle_ratio,
    torsion_bounds,
    torsion_lower_ubar,
    torsion_upper_barrier,
    torsion_upper_refined,
)
from .convex_body import (
    ConvexBody,
    Ellipsoid,
    PBall,
    Polytope,
    Smoothed,
    diamond,
    disk,
    ellipsoid,
    gauge,
    linear_image,
    pball,
    polar,
    polytope,
    quadratic_gradient,
    smooth_approx,
    square,
    support,
    support_gradient,
)
from .errors import ConvergenceError, DomainError, NotCanonicalError
from .harness import SuiteSpec, VerificationRecord, convergence_study, emit_report, run_suite
from .mesh import Mesh, triangulate
from .solver import SolveOptions, SolveReport, rayleigh_quotient, solve_eigen, solve_torsion, torsion_quotient

__version__ = "0.1.0"
