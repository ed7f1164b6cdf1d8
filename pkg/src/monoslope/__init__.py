"""Monotone estimators as slopes of concave/convex envelopes, and Monte Carlo
checks of their L_p-error asymptotics."""

from .asymptotics import GofResult, LimitConstants, gof_test, limit_constants, normalized_statistic
from .chernoff import ChernoffEstimate, argmax_drifted, estimate_constants, simulate_path
from .estimator import (
    Direction,
    MonotoneEstimate,
    concave_majorant,
    convex_minorant,
    inverse_process,
    monotone_estimate,
    monotone_estimate_csd,
)
from .functions import Custom, Exponential, Linear
from .models import Censoring, Dataset, ModelSpec, build_lambda_n, model_L, sample
from .stepfn import PiecewiseLinear, StepFunction, eval_upper, lp_distance, make_step

__version__ = "0.1.0"
