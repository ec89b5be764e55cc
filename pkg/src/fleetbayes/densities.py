"""Log-density helpers kept free of scipy.stats call overhead.

These run inside MCMC inner loops, so they are plain numpy expressions that
broadcast over arrays.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

LOG_2PI = float(np.log(2.0 * np.pi))


def normal_logpdf(x, mean, std):
    """Gaussian log-density; std may broadcast against x."""
    x = np.asarray(x, dtype=float)
    std = np.asarray(std, dtype=float)
    z = (x - mean) / std
    return -0.5 * z * z - np.log(std) - 0.5 * LOG_2PI


def invgamma_logpdf(x, shape, scale):
    """Inverse-gamma log-density with the rate-free (shape, scale) convention."""
    x = np.asarray(x, dtype=float)
    return shape * np.log(scale) - gammaln(shape) - (shape + 1.0) * np.log(x) - scale / x


def invgamma_mode(shape, scale):
    """Mode scale/(shape+1); the usual stand-in when the mean does not exist."""
    return scale / (shape + 1.0)
