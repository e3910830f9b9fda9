"""Measuring and testing tail equivalence between copulas."""

__version__ = "0.1.0"

from .auxfun import AuxFunction, make_arctan, make_clamp, make_normcdf, parse_aux
from .copulas import (FGM, Independence, PairedSample, SkewNormal, SkewT, Survival, countermonotone_pair,
                      independent_pair, pseudo_observations, sample)
from .errors import (DataError, DegenerateError, EmptyIntervalError, ExcludedPairError, NumericalError,
                     ParameterError, TailEquivError)
from .finite import EmpiricalTails, TestResult, empirical_cdfs, finite_test, sigma2_hat, xi_hat
from .limit import LimitEstimator, limit_test, tail_order_estimate, xi_limit_hat
from .theory import (TailExpansion, TailQuantities, TailRelation, XiConfig, classify, threshold_schedule,
                     xi_limit, xi_threshold)
