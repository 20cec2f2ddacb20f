"""Numerical laboratory for iterated function systems with compact parameter spaces."""

from .attractor import compute_attractor, fixed_point_density, hutchinson_step, partial_fixed_point
from .chaosgame import chaos_game_suite, chaos_game_trial, fairness_certificate
from .ergodic import birkhoff_average, ergodicity_test
from .errors import (
    BudgetError,
    DimensionError,
    IfsLabError,
    InvarianceError,
    NonConvergenceError,
    NotFairError,
)
from .hyperbolicity import diameter_profile, equivalence_check, hyperbolicity_verdict, weak_star_probe
from .ifs_core import (
    AffineList,
    Analytic1D,
    BoxSpace,
    ConstantStream,
    FiniteSpace,
    ParamMeasure,
    PolyAffineBox,
    WordStream,
    apply,
    builtin,
    compose_apply,
    gamma_limit,
    orbit,
)
from .measure import (
    DiscreteMeasure,
    compute_invariant_measure,
    kantorovich_distance,
    seed_independence_check,
    support_vs_attractor,
    transfer_step,
)
from .metric import BoxDomain, PointCloud, diameter, epsilon_net, hausdorff_distance

__version__ = "0.1.0"
