"""Time-fractional subdiffusion with a nonlinear nonlocal initial condition."""

from .errors import AccuracyError, DomainError, GateRejected, NonConvergence
from .fracops import GridFunction, PropagatorKernel, assemble_propagator, caputo_l1, rl_integral
from .greenfn import GreenEvalConfig, estimate_envelope, green, green_spectral, p_kernel
from .oracle import ForwardProblem, fd_forward_solve, nonlocal_oracle_solve, spectral_forward_solve
from .solver import (
    ContractionReport,
    NumericsConfig,
    ProblemSpec,
    SolutionBundle,
    SpaceTimeField,
    compute_F,
    contraction_delta,
    fixed_point_solve,
    reconstruct_u,
    solve,
    verify_regularity,
)
from .specfun import MLIndices, WrightIndices, beta_fn, gamma_fn, mittag_leffler, wright_e

__version__ = "0.1.0"
