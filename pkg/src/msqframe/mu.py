"""The bias term ``mu = (1/m) || E[E^T (E x - Q(E x))] ||``.

For frames with i.i.d. rows ``mu = || E[e (e.x - Q(e.x))] ||`` for a single
row ``e``.  Three routes are provided:

* :func:`mu_gaussian` - the alternating theta-type series for i.i.d.
  standard Gaussian entries, where the mean vector is ``2 x S`` with
  ``S = sum_{p>=1} (-1)^(p+1) exp(-2 pi^2 |x|^2 p^2 / delta^2)``;
* :func:`mu_schwartz` - the Fourier series for a general smooth (Schwartz)
  entry density, obtained from the Poisson summation formula;
* :func:`mu_monte_carlo` - a seeded block-parallel sample average.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bounds import mu_cap
from .ensembles import (EnsembleSpec, SchwartzDensity, gaussian_density,
                        make_rng, sample_rows, substream_seed)
from .quantizer import QuantizerConfig, residual
from .recon import Signal

__all__ = [
    "MuMethod",
    "MuEstimate",
    "SeriesConvergenceError",
    "SchwartzDensity",
    "mu_gaussian",
    "mu_schwartz",
    "mu_monte_carlo",
    "poisson_check",
]

REL_STOP = 1e-17
GAUSSIAN_P_CAP = 64
SCHWARTZ_P_CAP = 512
MC_BLOCK = 1 << 16


class SeriesConvergenceError(ArithmeticError):
    pass


class MuMethod(str, Enum):
    GAUSSIAN_CLOSED_FORM = "gaussian_closed_form"
    SCHWARTZ_SERIES = "schwartz_series"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class MuEstimate:
    value: float
    method: MuMethod
    std_error: float = 0.0
    truncation_p: int = 0
    trials: int = 0
    mean_vector: np.ndarray = None

    def within_cap(self, delta, k, m, c_k=1.0):
        return self.value <= mu_cap(delta, k, m, c_k) + 3.0 * self.std_error


def _signal(x):
    return x if isinstance(x, Signal) else Signal(x)


def _cfg(cfg):
    return cfg if isinstance(cfg, QuantizerConfig) else QuantizerConfig(cfg)


def _alternating_theta_tail(a):
    """``S(a) = sum_{p>=1} (-1)^(p+1) exp(-a p^2)`` and the number of terms used.

    Summed directly when 64 terms suffice.  For very small ``a`` the direct
    series is useless, and the Jacobi transform of the full theta sum
    ``1 - 2 S = sqrt(pi/a) sum_n exp(-pi^2 (n + 1/2)^2 / a)`` is summed instead.
    """
    if a * GAUSSIAN_P_CAP ** 2 >= 45.0:
        first = math.exp(-a)
        if first == 0.0:
            return 0.0, 1
        total = 0.0
        p = 1
        while True:
            term = math.exp(-a * p * p)
            total += term if p % 2 else -term
            nxt = math.exp(-a * (p + 1) ** 2)
            if nxt < REL_STOP * first or p >= GAUSSIAN_P_CAP:
                return total, p
            p += 1
    b = math.pi ** 2 / a
    theta = 0.0
    n = 0
    first = math.exp(-0.25 * b)
    while True:
        term = math.exp(-b * (n + 0.5) ** 2)
        theta += 2.0 * term
        n += 1
        if term < REL_STOP * first or n >= GAUSSIAN_P_CAP:
            break
    theta *= math.sqrt(math.pi / a)
    return 0.5 * (1.0 - theta), n


def mu_gaussian(x, cfg):
    """Exact ``mu`` for i.i.d. N(0, 1) entries.

    Depends on ``x`` only through ``|x|``: ``mu = 2 |x| S``.  The mean vector
    (per row) is stored on the result.
    """
    x = _signal(x)
    cfg = _cfg(cfg)
    nrm = x.norm
    if nrm == 0.0:
        return MuEstimate(0.0, MuMethod.GAUSSIAN_CLOSED_FORM, 0.0, 0, 0, np.zeros(x.k))
    a = 2.0 * math.pi ** 2 * nrm ** 2 / cfg.delta ** 2
    s, p = _alternating_theta_tail(a)
    return MuEstimate(2.0 * nrm * s, MuMethod.GAUSSIAN_CLOSED_FORM, 0.0, p, 0, 2.0 * s * x.values)


def _symmetric_series(term, p_cap=SCHWARTZ_P_CAP):
    """Sum ``term(p) + term(-p)`` for ``p = 1, 2, ...`` with the relative stopping rule."""
    total = 0.0 + 0.0j
    ref = 0.0
    p = 1
    while True:
        t = term(p) + term(-p)
        total += t
        mag = abs(t)
        ref = max(ref, mag)
        if p > 1 and (mag <= REL_STOP * ref or ref == 0.0):
            return total, p
        if p >= p_cap:
            raise SeriesConvergenceError(
                f"series did not meet the 1e-17 relative stopping rule by p={p_cap}")
        p += 1


def mu_schwartz(x, cfg, density=None):
    """``mu`` from the Fourier series for i.i.d. entries with a Schwartz density.

    Entry ``i`` of the mean vector (per row) is::

        x_i + x_i sum_p (-1)^p g^(|x_i| p / delta) prod_{s != i} phi^(x_s sign(x_i) p / delta)

    The ``p = 0`` term equals ``g^(0) = -E[e^2] = -1`` and cancels ``x_i``
    exactly; it is removed analytically.  Entries with ``x_i = 0`` are 0.
    """
    x = _signal(x)
    cfg = _cfg(cfg)
    density = density or gaussian_density()
    v = x.values
    d = cfg.delta
    out = np.zeros(v.size)
    pmax = 0
    g0 = complex(np.asarray(density.g_hat(0.0)))
    for i, xi in enumerate(v):
        if xi == 0.0:
            continue
        sgn = math.copysign(1.0, xi)
        others = np.delete(v, i) * sgn / d
        axi = abs(xi) / d

        def term(p, axi=axi, others=others):
            prod = np.prod(density.phi_hat(others * p)) if others.size else 1.0
            return (-1.0) ** abs(p) * complex(np.asarray(density.g_hat(axi * p))) * prod

        s, p_used = _symmetric_series(term)
        pmax = max(pmax, p_used)
        out[i] = xi * (1.0 + g0.real) + xi * s.real
    val = math.hypot(*out) if out.size else 0.0
    return MuEstimate(val, MuMethod.SCHWARTZ_SERIES, 0.0, pmax, 0, out)


def _mc_block(spec, x, cfg, seed, block, n):
    rng = make_rng(substream_seed(seed, block))
    rows = sample_rows(spec, n, x.size, rng, replace=True)
    r = residual(rows @ x, cfg)
    s = rows.conj() * r[:, None]
    if np.iscomplexobj(s):
        # stacked real/imaginary parts keep the covariance real
        s = np.concatenate([s.real, s.imag], axis=1)
    return s


def mu_monte_carlo(x, spec, trials, seed, cfg, threads=1, block_size=MC_BLOCK):
    """Sample-average estimate of ``|| E[conj(e) (e.x - Q(e.x))] ||``.

    Rows are drawn in fixed-size blocks; block ``b`` uses the substream
    ``(seed, b)``, so the value does not depend on ``threads``.  Sums are
    shifted by the first sample (exact when all samples coincide) and
    reduced in block order.  The standard error comes from the delta method
    on the sample covariance of the per-row vectors.
    """
    x = _signal(x)
    cfg = _cfg(cfg)
    if not isinstance(spec, EnsembleSpec):
        spec = EnsembleSpec(spec)
    trials = int(trials)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    k = x.k
    if not np.any(x.values):
        return MuEstimate(0.0, MuMethod.MONTE_CARLO, 0.0, 0, trials, np.zeros(k))
    nblocks = -(-trials // block_size)
    sizes = [min(block_size, trials - b * block_size) for b in range(nblocks)]
    dim = 2 * k if spec.is_complex else k

    def work(b):
        return _mc_block(spec, x.values, cfg, seed, b, sizes[b])

    shift = None
    total = np.zeros(dim)
    outer = np.zeros((dim, dim))

    def consume(s):
        nonlocal shift, total, outer
        if shift is None:
            shift = s[0].copy()
        dev = s - shift
        total = total + dev.sum(axis=0)
        outer = outer + dev.T @ dev

    if threads > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            for s in ex.map(work, range(nblocks)):
                consume(s)
    else:
        for b in range(nblocks):
            consume(work(b))

    mdev = total / trials
    mean = shift + mdev
    val = math.hypot(*mean)
    std = 0.0
    if trials > 1 and val > 0:
        cov = (outer - trials * np.outer(mdev, mdev)) / (trials - 1)
        grad = mean / val
        std = math.sqrt(max(float(grad @ cov @ grad), 0.0) / trials)
    if spec.is_complex:
        mean = mean[:k] + 1j * mean[k:]
    return MuEstimate(val, MuMethod.MONTE_CARLO, std, 0, trials, mean)


def poisson_check(density, a, b, p_cap=SCHWARTZ_P_CAP):
    """Both sides of Poisson summation for ``f = g`` of `density`.

    ``sum_n g(a n + b)`` versus ``sum_p (1/a) g^(p/a) exp(2 pi i p b / a)``.
    Returns ``(lhs, rhs, |lhs - rhs|)``.
    """
    if not a > 0:
        raise ValueError(f"Poisson summation needs a > 0, got {a!r}")
    if density.g is None:
        raise ValueError("density bundle has no spatial g")
    g = density.g

    lhs0 = complex(np.asarray(g(b)))
    lsum, _ = _symmetric_series(lambda n: complex(np.asarray(g(a * n + b))), p_cap)
    lhs = lhs0 + lsum
    rhs0 = complex(np.asarray(density.g_hat(0.0))) / a
    rsum, _ = _symmetric_series(
        lambda p: complex(np.asarray(density.g_hat(p / a))) / a * np.exp(2j * math.pi * p * b / a),
        p_cap)
    rhs = rhs0 + rsum
    lhs_v = lhs.real if abs(lhs.imag) < 1e-300 else lhs
    rhs_v = rhs.real if abs(rhs.imag) <= 1e-14 * max(1.0, abs(rhs)) else rhs
    return lhs_v, rhs_v, abs(lhs - rhs)
