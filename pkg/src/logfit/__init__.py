"""logfit: recover sigmoid-superposition parameters by adaptive ODE tracking.

The package recasts a sum of logistic sigmoids as the output of linearly
parameterized logistic differential equations, then estimates the unknown
coefficients online with a speed-gradient adaptation law wrapped in a
periodic reset schedule.  Gradient-flow baselines and a seeded experiment
harness round out the toolkit.
"""

__version__ = "0.1.0"

from .models import (
    LogisticEnsemble,
    SigmoidSum,
    eval_sigmoid_sum,
    logistic_to_sigmoid,
    scale_coordinates,
    sigmoid_to_logistic,
)
from .dynamics import (
    AdaptationConfig,
    AdaptationTrace,
    AdaptiveState,
    MultiInputSystem,
    ResetSchedule,
    adaptation_rhs,
    estimation_progress_bound,
    feedback_rhs,
    lambda_gate,
    multiinput_rhs,
    output,
    reference_rhs,
    signum_vec,
    stabilizing_gain,
    tracking_rhs,
)
from .integrator import (
    DivergenceError,
    IntegratorConfig,
    integrate_autonomous,
    integrate_feedback,
    integrate_multiinput,
    run_adaptive,
    step,
)
from .baselines import (
    ScalarSigmoidTarget,
    batch_cost,
    batch_gradient_rhs,
    pattern_gradient_rhs,
    run_baseline,
)
from .harness import (
    ExperimentConfig,
    TrialRecord,
    epoch_mse,
    example1,
    example2,
    param_distance,
    run_trial,
    run_trials,
)
from .rng import Xoshiro256StarStar, derive_subseed, splitmix64, trial_rng

__all__ = [
    "AdaptationConfig",
    "AdaptationTrace",
    "AdaptiveState",
    "DivergenceError",
    "ExperimentConfig",
    "IntegratorConfig",
    "LogisticEnsemble",
    "MultiInputSystem",
    "ResetSchedule",
    "ScalarSigmoidTarget",
    "SigmoidSum",
    "TrialRecord",
    "Xoshiro256StarStar",
    "adaptation_rhs",
    "batch_cost",
    "batch_gradient_rhs",
    "derive_subseed",
    "epoch_mse",
    "estimation_progress_bound",
    "eval_sigmoid_sum",
    "example1",
    "example2",
    "feedback_rhs",
    "integrate_autonomous",
    "integrate_feedback",
    "integrate_multiinput",
    "lambda_gate",
    "logistic_to_sigmoid",
    "multiinput_rhs",
    "output",
    "param_distance",
    "pattern_gradient_rhs",
    "reference_rhs",
    "run_adaptive",
    "run_baseline",
    "run_trial",
    "run_trials",
    "scale_coordinates",
    "sigmoid_to_logistic",
    "signum_vec",
    "splitmix64",
    "stabilizing_gain",
    "step",
    "tracking_rhs",
    "trial_rng",
]
