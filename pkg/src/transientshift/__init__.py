"""Transfer operators, Green's functions and Martin boundaries on countable-state Markov shifts."""

from .errors import (
    BudgetExhausted,
    Diverging,
    Inadmissible,
    MismatchedTestSet,
    ModelFileError,
    NoCycleReachable,
    NotCauchy,
    NotEscaping,
    NotExcessive,
    NotHarmonic,
    RangeTooLarge,
    SamplerDegenerate,
    ShiftError,
    UnknownState,
    ZeroMassConditioning,
)
from .model import Model
from .shift_core import (
    BACKWARD,
    FORWARD,
    Cylinder,
    GraphDistance,
    RulePoint,
    StateGraph,
    TailPoint,
    TwoSidedPoint,
    anchor_point,
    graph_distance,
    is_admissible,
    metric_d,
    point_in,
    preimages,
    shift,
)
from .potentials import (
    Potential,
    birkhoff_sum,
    classify,
    constant_potential,
    gurevich_pressure,
    log_stochastic,
    markov_potential,
    reverse_potential,
    table_potential,
    variation,
)
from .transfer import SimpleFunction, backward_partition_sum, eval_Ln, push_L
from .green_martin import (
    boundary_atlas,
    default_test_set,
    green,
    kernel_bounds,
    kernel_profile,
    martin_kernel,
    mu_omega,
    rho_distance,
)
from .measures_dlr import (
    CylinderMeasure,
    conformality_residual,
    dlr_check_conditional,
    dlr_check_ratio,
    excessiveness_check,
    riesz_decompose,
    thermo_limit,
)
from .duality import chi, eigen_residual, pi_map, poisson_ratio_limit, reverse_model, transience_duality_check
from .models import (
    biased_walk_z,
    example1,
    example2,
    first_passage,
    harmonic_residual,
    hitting_distribution,
    inward_drift_walk,
    measure_from_harmonic,
    regular_tree,
    self_loop,
)

__version__ = "0.1.0"
