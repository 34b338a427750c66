"""Optimal transport map estimation with Lipschitz-constrained adversarial nets.

A generator constrained to be L-Lipschitz (pairwise-sorting activations,
exact weight projections) is trained against a 1-Lipschitz discriminator
on the quadratic transport cost penalized by the neural Wasserstein-1
proxy.  An exact discrete assignment oracle and synthetic benchmarks with
closed-form optimal maps validate the result.
"""

from .data import GroundTruthMap, SourceSpec, apply_map, ground_truth_value, load_csv, sample, save_csv
from .discrete import (
    Matching,
    brute_force_matching,
    solve_assignment,
    transport_cost,
    wasserstein1,
)
from .errors import ConfigError, DataError, NumericError, OtmapError
from .evaluate import EvalReport, approx_harness, compare_to_discrete, fit_ipm, holdout_mse
from .figures import emit_figures
from .lipschitz import AuditReport, ConstraintSpec, audit_lipschitz, norm_2_inf, norm_inf, project_params
from .nn import (
    AdamState,
    NetworkGrads,
    NetworkParams,
    Tape,
    adam_step,
    as_map,
    backward,
    forward,
    groupsort2,
    init_adam,
    init_network,
    load_checkpoint,
    save_checkpoint,
)
from .train import (
    LossBreakdown,
    TrainConfig,
    TrainState,
    discriminator_step,
    generator_step,
    lambda_schedule,
    load_config,
    save_config,
    train,
)

__version__ = "0.1.0"
