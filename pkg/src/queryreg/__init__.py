"""Estimation of linear regression parameters from scalar loss queries.

The package has three layers:

* a query oracle that hides the regression data behind two scalar
  responses per round (:mod:`queryreg.oracle`),
* the zeroth-order learner and the pre-committed block estimator that
  consume those responses (:mod:`queryreg.learner`,
  :mod:`queryreg.nonadaptive`),
* an analytic layer of noise moments, interaction matrices and the exact
  error recursion, each paired with an independent Monte Carlo oracle
  (:mod:`queryreg.moments`), plus an experiment harness and CLI.
"""

from .config import DesignSpec, SimConfig, load_config, parse_config_text
from .harness import (
    RateFit,
    excess_risk,
    fit_rate,
    run_adaptive,
    run_gap_experiment,
    run_nonadaptive,
)
from .learner import ScheduleParams, init_learner, learning_rate
from .moments import c_rq, moment_table, mu, sk_step, v_matrix, w_integrand
from .nonadaptive import plan, risk_bound
from .oracle import QuerySession, conditional_covariance, new_instance, reveal_truth
from .rng import RngStream, rng_stream

__version__ = "0.1.0"

__all__ = [
    "DesignSpec",
    "SimConfig",
    "load_config",
    "parse_config_text",
    "RateFit",
    "excess_risk",
    "fit_rate",
    "run_adaptive",
    "run_gap_experiment",
    "run_nonadaptive",
    "ScheduleParams",
    "init_learner",
    "learning_rate",
    "c_rq",
    "moment_table",
    "mu",
    "sk_step",
    "v_matrix",
    "w_integrand",
    "plan",
    "risk_bound",
    "QuerySession",
    "conditional_covariance",
    "new_instance",
    "reveal_truth",
    "RngStream",
    "rng_stream",
    "__version__",
]
