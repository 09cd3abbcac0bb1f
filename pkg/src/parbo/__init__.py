"""Parallel Bayesian optimization on an exact Gaussian-process core.

Selection strategies (randomized kriging believer, kriging believer, batched
UCB, parallel Thompson sampling, uncertainty sampling, random search), worker
simulators, an objective suite, theory diagnostics, and a benchmark harness.
"""

from .acquisition import (
    BetaSchedule,
    argmax_over,
    beta_value,
    ei_from_moments,
    ei_threshold,
    pims,
    pims_from_moments,
    ucb,
)
from .design import lhs, nearest_grid
from .diagnostics import (
    ConditionConstants,
    RegretRecord,
    Trace,
    aggregate_traces,
    bcr_bound,
    condition_constants,
    greedy_mig,
    information_gain,
    normal_tail_check,
    variance_ratio,
)
from .gp import (
    Dataset,
    GpModel,
    HyperSearchConfig,
    condition_fantasy,
    fit,
    fit_hyperparameters,
    log_marginal_likelihood,
    posterior_cov,
    posterior_mean,
    posterior_var,
)
from .harness import ExperimentConfig, cli_main, run_experiment
from .kernel import KernelSpec, eval_kernel, kernel_matrix, lipschitz_sigma
from .objectives import (
    Objective,
    analytic_objective,
    benchmark_eval,
    grid_points,
    load_tabular,
    observe,
    save_tabular,
    synthetic_gp,
    true_value,
)
from .sampling import (
    DiscreteSample,
    FeatureMap,
    PosteriorSample,
    RffPathSample,
    build_feature_map,
    sample_max,
    sample_path_discrete,
    sample_path_rff,
)
from .scheduler import (
    InitConfig,
    SchedulerState,
    Strategy,
    run_asynchronous,
    run_synchronous,
    select,
    select_bucb,
    select_kb,
    select_pts,
    select_rkb,
    select_rs,
    select_us,
)

__version__ = "0.1.0"
