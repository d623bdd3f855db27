"""Prediction-error curves, certified bounds and design diagnostics for
convex penalized least squares ``min ||X b - y||^2 + 2 h(b)``."""

from .certificates import (
    Certificate, Premise, almost_fixed_point_lower, fixed_point_upper, limit_lower,
    norm_dual_lower, t0_gamma_lower,
)
from .curves import (
    CurveConfig, CurveEval, CurveEvaluator, critical_radius, eval_F, eval_G, eval_H, eval_M,
)
from .diagnostics import (
    compatibility_constant, construct_compatibility_adversary, lasso_constants, re_constant,
    rip_delta, vg_packing,
)
from .errors import (
    ArgumentError, CapabilityError, ConfigError, ConvergenceError, DegenerateDesignError,
    NumericError, ParseError, RiskscopeError, SchemaError,
)
from .model import (
    Ball, Box, FixedNoise, GaussianNoise, ProblemInstance, ScaledL1, ScaledLqNorm, Singleton,
    SquaredL2, Sum, Zero,
)
from .montecarlo import (
    McConfig, concentration_check, estimate_f_curve, sample_risks, tf_proximity_check,
    tf_upper_condition,
)
from .solver import SolveResult, SolverConfig, kkt_residual, solve

__version__ = "0.1.0"
