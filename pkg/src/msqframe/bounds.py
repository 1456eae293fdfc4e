"""Closed-form error predictions and bands for MSQ with random frames.

Contains the white-noise predictions (used only as comparison curves), the
two-sided band on the reconstruction error in terms of the bias term ``mu``
and the redundancy ``lam = m/k``, the worst-case cap on ``mu`` and the
Gaussian-specific band obtained by bracketing ``mu`` in closed form.

The absolute constants of the probabilistic statements are not known
numerically.  They are exposed as parameters with defaults ``C = 1`` and
``c3 = 1/8``; bands computed here are qualitative envelopes.
"""
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConstantsUndefinedError",
    "TheoremConstants",
    "wnh_prediction",
    "mwnh_prediction",
    "theorem1_band",
    "mu_cap",
    "gaussian_mu_bracket",
    "gaussian_corollary_band",
]


class ConstantsUndefinedError(ValueError):
    """Raised when ``lam <= (2 c_K)^2`` and ``A`` is undefined."""


@dataclass(frozen=True)
class TheoremConstants:
    """Constants of the two-sided error band.

    Parameters
    ----------
    lam : float
        Redundancy ``m / k``.
    c_k_ensemble : float
        Ensemble constant ``c_K`` of the singular-value band (1 for Gaussian).
    c1 : float
        Multiplier of the fluctuation term.  Use :meth:`from_c2` to derive it
        from a failure probability ``c2``.
    c2 : float
        Failure probability budget in (0, 1).
    c3 : float
        Absolute constant in ``2 exp(-c3 m)``.
    """

    lam: float
    c_k_ensemble: float = 1.0
    c1: float = 1.0
    c2: float = 0.5
    c3: float = 0.125

    def __post_init__(self):
        if not 0.0 < self.c2 < 1.0:
            raise ValueError("c2 must lie in (0, 1)")
        if self.lam <= 0 or self.c_k_ensemble <= 0:
            raise ValueError("lam and c_K must be positive")

    @classmethod
    def from_c2(cls, lam, c2, C=1.0, K=1.0, c_k_ensemble=1.0, c3=0.125):
        """``c1 = C K sqrt(ln(e^2 / c2))``."""
        if not 0.0 < c2 < 1.0:
            raise ValueError("c2 must lie in (0, 1)")
        c1 = C * K * math.sqrt(math.log(math.e ** 2 / c2))
        return cls(lam=lam, c_k_ensemble=c_k_ensemble, c1=c1, c2=c2, c3=c3)

    @property
    def A(self):
        base = 0.5 - self.c_k_ensemble / math.sqrt(self.lam)
        if base <= 0:
            raise ConstantsUndefinedError(
                f"A is undefined for lam={self.lam:g} <= (2 c_K)^2={(2 * self.c_k_ensemble) ** 2:g}")
        return base ** -2

    @property
    def A_prime(self):
        return (1.5 + self.c_k_ensemble / math.sqrt(self.lam)) ** -2

    def failure_probability(self, m):
        return self.c2 + 2.0 * math.exp(-self.c3 * m)


def wnh_prediction(k, m, delta, frob_norm_pinv):
    """RMS error ``||E^+||_F delta / sqrt(12)`` under the white-noise hypothesis."""
    if k <= 0 or m <= 0 or delta < 0 or frob_norm_pinv < 0:
        raise ValueError("wnh_prediction needs positive k, m and non-negative delta, norm")
    return math.sqrt(frob_norm_pinv ** 2 * delta ** 2 / 12.0)


def mwnh_prediction(k, m, delta, C=1.0):
    """Heuristic RMS error ``delta sqrt(C k / (12 m))`` (modified white-noise hypothesis)."""
    return delta * math.sqrt(C * k / (12.0 * m))


def theorem1_band(mu, constants, k, delta):
    """``(lower, upper)`` envelope of the reconstruction error.

    ``upper = A (mu + c1 sqrt(ln k) lam^-1/2 delta)`` and
    ``lower = A' max(0, mu - c1 sqrt(ln k) lam^-1/2 delta)``.
    """
    if k < 3:
        raise ValueError("band requires k >= 3")
    fluct = constants.c1 * math.sqrt(math.log(k)) * delta / math.sqrt(constants.lam)
    upper = constants.A * (mu + fluct)
    lower = constants.A_prime * max(0.0, mu - fluct)
    return lower, upper


def mu_cap(delta, k, m, c_k_ensemble=1.0):
    """Worst-case ``mu <= (delta/2) (1 + c_K sqrt(k/m))``."""
    return 0.5 * delta * (1.0 + c_k_ensemble * math.sqrt(k / m))


def gaussian_mu_bracket(x_norm, delta):
    """``(2|x|(t1 - t2), 2|x| t1)`` with ``t1 = exp(-2 pi^2 |x|^2/delta^2)``, ``t2 = t1^4``."""
    a = 2.0 * math.pi ** 2 * x_norm ** 2 / delta ** 2
    t1 = math.exp(-a)
    t2 = math.exp(-4.0 * a)
    return 2.0 * x_norm * (t1 - t2), 2.0 * x_norm * t1


def gaussian_corollary_band(x_norm, delta, lam, k, c1=1.0):
    """Error band for Gaussian frames (``c_K = 1``).

    The upper edge uses the upper bracket of ``mu`` and the lower edge its
    lower bracket.  ``lam`` must exceed 4.
    """
    if lam <= 4:
        raise ConstantsUndefinedError(f"Gaussian band needs lam > 4, got {lam:g}")
    lo_mu, hi_mu = gaussian_mu_bracket(x_norm, delta)
    const = TheoremConstants(lam=lam, c_k_ensemble=1.0, c1=c1)
    lower, _ = theorem1_band(lo_mu, const, k, delta)
    _, upper = theorem1_band(hi_mu, const, k, delta)
    return lower, upper


def fit_loglog_slope(lams, values):
    """Least-squares slope of ``log(values)`` against ``log(lams)``."""
    lx = np.log(np.asarray(lams, float))
    ly = np.log(np.asarray(values, float))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)
