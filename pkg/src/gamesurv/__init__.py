"""Discrete-time survival analysis where the censoring model is a player.

A failure-time model and a censoring-time model train against each other by
simultaneous gradient descent: each minimizes its own inverse-weighted
scoring loss with the other's weights frozen at the current step. The
population oracle in :mod:`gamesurv.oracle` certifies, in exact arithmetic,
that the true pair is the unique interior stationary point of that game,
while the *joint* objective is generally minimized elsewhere.
"""

from .core import (
    Batch,
    CategoricalSurvival,
    Dataset,
    RawSurvivalData,
    SurvivalRecord,
    assign_bins,
    bin_lower_bounds,
    discretize,
    quantile_discretize,
)
from .games import (
    GameState,
    SelectionResult,
    TrainConfig,
    family_of,
    init_state,
    select_models,
    step_multiplayer,
    step_summed,
    train,
)
from .losses import (
    ClampStats,
    LossSpec,
    batch_loss,
    ipcw_bll_censor,
    ipcw_bll_failure,
    ipcw_bs_censor,
    ipcw_bs_failure,
    ipcw_mean,
    nll,
    per_horizon_loss,
    resolve_times,
    summed_loss,
)
from .metrics import (
    EvalReport,
    KaplanMeier,
    calibration_curve,
    concordance,
    concordance_index,
    eval_bll,
    eval_bs,
    evaluate,
    km_censoring,
    km_fit,
    nll_metric,
)
from .models import ArchSpec, LossGradient, Model, loss_and_grad
from .oracle import (
    GradientField,
    JointScan,
    StationaryScan,
    gradient_field,
    joint_objective_scan,
    nll_censoring_dependence,
    population_failure_nll,
    population_fbs,
    population_fbs_dx,
    population_gbs,
    population_gbs_dy,
    population_gradients,
    population_loss,
    spurious_gbs_root_qy,
    stationary_scan,
)
from .simgen import (
    GammaSimConfig,
    MarginalWorld,
    Standardizer,
    gen_gamma,
    gen_marginal,
    population_batch,
    random_interior_world,
)

__version__ = "0.1.0"

__all__ = [
    "ArchSpec",
    "Batch",
    "CategoricalSurvival",
    "ClampStats",
    "Dataset",
    "EvalReport",
    "GameState",
    "GammaSimConfig",
    "GradientField",
    "JointScan",
    "KaplanMeier",
    "LossGradient",
    "LossSpec",
    "MarginalWorld",
    "Model",
    "RawSurvivalData",
    "SelectionResult",
    "StationaryScan",
    "Standardizer",
    "SurvivalRecord",
    "TrainConfig",
    "assign_bins",
    "batch_loss",
    "bin_lower_bounds",
    "calibration_curve",
    "concordance",
    "concordance_index",
    "discretize",
    "eval_bll",
    "eval_bs",
    "evaluate",
    "family_of",
    "gen_gamma",
    "gen_marginal",
    "gradient_field",
    "init_state",
    "ipcw_bll_censor",
    "ipcw_bll_failure",
    "ipcw_bs_censor",
    "ipcw_bs_failure",
    "ipcw_mean",
    "joint_objective_scan",
    "km_censoring",
    "km_fit",
    "loss_and_grad",
    "nll",
    "nll_censoring_dependence",
    "nll_metric",
    "per_horizon_loss",
    "population_batch",
    "population_failure_nll",
    "population_fbs",
    "population_fbs_dx",
    "population_gbs",
    "population_gbs_dy",
    "population_gradients",
    "population_loss",
    "quantile_discretize",
    "random_interior_world",
    "resolve_times",
    "select_models",
    "spurious_gbs_root_qy",
    "stationary_scan",
    "step_multiplayer",
    "step_summed",
    "summed_loss",
    "train",
]
