"""Contextual-bandit simulations with offline regression oracles and a
misspecification-safe fallback policy."""

from .algorithms import (
    AlgorithmConfig,
    action_kernel,
    action_probs,
    avg_epoch_check,
    check_is_safe,
    choose_safe,
    gamma_m,
    l_prime,
    lower_bound_L,
    run_falcon_plus,
    run_safe_falcon,
    safety_check_times,
)
from .core import (
    ConstantModel,
    EpochSchedule,
    LinearPerArmModel,
    OutcomeModel,
    RunTrace,
    TabularModel,
    epoch_of,
    greedy_policy,
    zero_model,
)
from .environments import (
    BanditEnvironment,
    IntroExampleEnv,
    LowerBoundEnv,
    RealizableLinearEnv,
    TabularEnv,
    realizable_linear_env,
    sample_round,
)
from .oracle import (
    CommonRate,
    EstimationRate,
    LinearChiSquaredRate,
    LinearPerArmOracle,
    RegressionOracle,
    validate_rate,
    xi,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
