"""Brownian decision trees: covariance algebra, exceedance asymptotics and rare-event simulation."""
from .analytics import (
    AsymptoticsResult,
    RandomTreeSpec,
    all_branch_asym,
    bm_crossing_asym,
    bm_crossing_exact,
    classical_bbm_asym,
    diameter_asym,
    endpoint_orthant_asym,
    korshunov_constant,
    random_offspring_asym,
    ruintime_limit,
    single_branch_asym,
)
from .classical import estimate_classical
from .errors import BDTreeError, NumericalError, ValidationError
from .forest import ForestSpec, Order, OrderKey, compare, forest_asym, maximal_set, simulate_forest_event
from .grid import TimeGrid, make_grid
from .mc import (
    Event,
    EventSpec,
    MCConfig,
    MCEstimate,
    TreePath,
    detect,
    estimate,
    estimate_branch,
    estimate_tilted,
    exact_bivariate_orthant,
    first_passage_times,
    ruintime_tail,
    sample_path,
)
from .pickands import (
    PickandsConfig,
    PickandsEstimate,
    estimate_H,
    estimate_H_drift,
    estimate_H_L,
    staircase_measure,
)
from .qp import QPSolution, solve, verify
from .tree import (
    Eigenstructure,
    TreeSpec,
    covariance,
    digit_swap,
    digits,
    eigenstructure,
    from_digits,
    separation_moment,
    sigma_matrix,
    sigma_matrix_recursive,
    validate,
)

__version__ = "0.1.0"
