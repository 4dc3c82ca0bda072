"""Stability certification tools for switching stochastic delay systems.

Uniformly stable rate functions, comparison bounds, Euler-Maruyama ensembles
and hypothesis monitors.
"""

from .signals import (AffineSum, Constant, Sampled, ScalarSignal, SinPower, SquareWave,
                      TCosTSquared, from_dict, integrate)
from .usf import (RazumikhinGainParams, UsfCertificate, UsfInconclusive, UsfRefutation,
                  check_gain_condition, check_usf, overshoot, ucs_contains)

__version__ = "0.1.0"
