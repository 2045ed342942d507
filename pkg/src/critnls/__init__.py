"""Radial numerics for the inhomogeneous L2-critical nonlinear Schroedinger equation

    i phi_t + Lap phi + |x|^{-b} |phi|^{2 sigma} phi = 0,   sigma = (2 - b) / N.

Ground states by shooting, the critical mass and best interpolation
constant, split-step time evolution with blow-up detection, and the
pseudoconformal self-similar blow-up solutions.
"""
from .errors import (
    DomainError,
    GridMismatch,
    InsufficientData,
    NoBracket,
    NoConvergence,
    StepFailure,
)
from .fields import (
    ComplexField,
    ModelParams,
    RadialGrid,
    RealField,
    energy,
    grad_norm_sq,
    load_field,
    mass_sq,
    potential_I,
    save_field,
    sup_norm,
    weinstein_J,
)
from .groundstate import (
    GroundState,
    MinimizationReport,
    branch,
    find_ground_state,
    minimization_report,
    pohozaev_check,
    residual,
    shoot,
    verify_interpolation,
)
from .evolution import (
    EvolveControls,
    Trajectory,
    Verdict,
    detect_blowup,
    estimate_blowup_time,
    gradient_bound,
    propagate,
    step,
)
from .pseudoconformal import (
    PseudoParams,
    initial_distance,
    lifespan,
    rate_check,
    self_similar,
    transform,
)

__version__ = "0.1.0"
