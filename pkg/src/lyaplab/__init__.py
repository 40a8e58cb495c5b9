"""Laboratory for products of random invertible matrices: KAK geometry,
Lyapunov exponents and laws of large numbers for the spectral radius."""
from .linalg import (
    DomainError,
    EigenSolverError,
    ProjectiveHyperplane,
    ProjectivePoint,
    SvdTriple,
    attracting_point,
    dist_point_hyperplane,
    eigen_moduli,
    exterior_norm,
    fubini_study,
    repelling_hyperplane,
    size_N,
    spectral_radius,
    svd,
    transpose_pushforward,
)
from .walk import IncrementLaw, QrState, ScaledMatrix, extend_left, extend_right, qr_step
from .estimators import LyapunovEstimate, SubspaceSpec, dist_to_subspace, estimate_lambda1, estimate_spectrum
from .experiments import ScenarioConfig, TrajectoryRecord, TailReport

__version__ = "0.1.0"
