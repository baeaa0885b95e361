from .LinAlg import LinAlgError, PadeSingularError, NotPositiveSemidefiniteError, PencilSingularError, PadeConfig,\
    KrylovConfig, pade_expm, krylov_expmv, psd_sqrt, solve_pencil
from .Model import ModelError, SdeModel, InitialLaw, TestFunctional, TimeGrid, ModelViolation, sample_probe_points,\
    validate_model
from .LocalLinearization import SchemeConfigError, SingularJacobianError, KrylovDimensionWarning, SchemeConfig,\
    LocalIncrement, AugmentedMatrix, AffinePieces, SCHEME_CATALOG, SCHEME_VARIANTS, NOISE_KINDS, affine_pieces,\
    build_c_beta, build_a_beta, increment_pade_general, increment_pade_const_g, increment_krylov,\
    increment_ozaki_shoji, increment_midpoint, increment_euler, increment, draw_noise, euler_step, step
from .Jumps import JumpSpec, JumpSchedule, sample_jump_times, merged_grid, jump_step
from .Catalog import ReferenceUnavailableError, ReferenceStatistics, CatalogProblem, FUNCTIONALS, JUMP_COEFFICIENTS,\
    builtin_problem, builtin_functional, jump_coefficient, list_problems, kolmogorov_expectations
from .WeakError import NonFiniteStateError, InsufficientPointsError, McPlan, OrderFit, WeakErrorReport,\
    LocalOrderReport, simulate_terminal, simulate_path, run_ensemble, fit_order, fit_with_noise_floor,\
    fine_grid_reference, estimate_weak_error, estimate_local_order

__all__ = [
    "LinAlgError",
    "PadeSingularError",
    "NotPositiveSemidefiniteError",
    "PencilSingularError",
    "PadeConfig",
    "KrylovConfig",
    "pade_expm",
    "krylov_expmv",
    "psd_sqrt",
    "solve_pencil",
    "ModelError",
    "SdeModel",
    "InitialLaw",
    "TestFunctional",
    "TimeGrid",
    "ModelViolation",
    "sample_probe_points",
    "validate_model",
    "SchemeConfigError",
    "SingularJacobianError",
    "KrylovDimensionWarning",
    "SchemeConfig",
    "LocalIncrement",
    "AugmentedMatrix",
    "AffinePieces",
    "SCHEME_CATALOG",
    "SCHEME_VARIANTS",
    "NOISE_KINDS",
    "affine_pieces",
    "build_c_beta",
    "build_a_beta",
    "increment_pade_general",
    "increment_pade_const_g",
    "increment_krylov",
    "increment_ozaki_shoji",
    "increment_midpoint",
    "increment_euler",
    "increment",
    "draw_noise",
    "euler_step",
    "step",
    "JumpSpec",
    "JumpSchedule",
    "sample_jump_times",
    "merged_grid",
    "jump_step",
    "ReferenceUnavailableError",
    "ReferenceStatistics",
    "CatalogProblem",
    "FUNCTIONALS",
    "JUMP_COEFFICIENTS",
    "builtin_problem",
    "builtin_functional",
    "jump_coefficient",
    "list_problems",
    "kolmogorov_expectations",
    "NonFiniteStateError",
    "InsufficientPointsError",
    "McPlan",
    "OrderFit",
    "WeakErrorReport",
    "LocalOrderReport",
    "simulate_terminal",
    "simulate_path",
    "run_ensemble",
    "fit_order",
    "fit_with_noise_floor",
    "fine_grid_reference",
    "estimate_weak_error",
    "estimate_local_order",
]
