"""Monte-Carlo policy-gradient pricing of multi-exercise options and
impulse-control hedging under fixed transaction costs."""

__version__ = "0.1.0"

from .market import (AssetModel, PathBatch, TimeGrid, build_time_grid,
                     factor_covariance, path_generator, simulate_paths)
from .nets import (AdamState, MlpParams, RecurrentParams, adam_init,
                   adam_step, decay_per_100, load_checkpoint, mlp_forward,
                   mlp_gradient, mlp_init, recurrent_forward,
                   recurrent_gradient, recurrent_init, save_checkpoint)
from .policy import (DecisionBatch, ExerciseConstraints, Normalizer,
                     PolicyConfig, extract_stopping_times, fit_normalizer,
                     refraction_index, reinforce_gradient, sample_decisions,
                     threshold_decisions)
from .pricer import (EvalReport, Payoff, Seeds, StoppingProblem, TrainConfig,
                     evaluate_policy, payoff_eval, train_stopping)
from .baselines import (EuropeanSpec, bs_delta, bs_gamma, bs_price,
                        crr_bermudan, lsm_price)
from .hedging import (HedgeOutcome, HedgeProblem, HedgeReport,
                      HedgeTrainConfig, ImpulsePolicy, evaluate_impulse,
                      hedge_loss, loss_decomposition, naive_delta_run,
                      roll_portfolio, train_impulse, ww_band,
                      ww_gamma_search, ww_strategy_run)
from .config import (ConfigError, parse_config, validate_config)
from .profiles import get_profile, list_profiles
from .runner import config_digest, emit_history, parse_history, run_experiment

__all__ = [
    "AdamState", "AssetModel", "ConfigError", "DecisionBatch",
    "EuropeanSpec", "EvalReport", "ExerciseConstraints", "HedgeOutcome",
    "HedgeProblem", "HedgeReport", "HedgeTrainConfig", "ImpulsePolicy",
    "MlpParams", "Normalizer", "PathBatch", "Payoff", "PolicyConfig",
    "RecurrentParams", "Seeds", "StoppingProblem", "TimeGrid", "TrainConfig",
    "adam_init", "adam_step", "bs_delta", "bs_gamma", "bs_price",
    "build_time_grid", "config_digest", "crr_bermudan", "decay_per_100",
    "emit_history", "evaluate_impulse", "evaluate_policy",
    "extract_stopping_times", "factor_covariance", "fit_normalizer",
    "get_profile", "hedge_loss", "list_profiles", "load_checkpoint",
    "loss_decomposition", "lsm_price", "mlp_forward", "mlp_gradient",
    "mlp_init", "naive_delta_run", "parse_config", "parse_history",
    "path_generator", "payoff_eval", "recurrent_forward",
    "recurrent_gradient", "recurrent_init", "refraction_index",
    "reinforce_gradient", "roll_portfolio", "run_experiment",
    "sample_decisions", "save_checkpoint", "simulate_paths",
    "threshold_decisions", "train_impulse", "train_stopping",
    "validate_config", "ww_band", "ww_gamma_search", "ww_strategy_run",
]
