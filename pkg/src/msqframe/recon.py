"""Quantize frame coefficients and reconstruct linearly with the pseudoinverse."""
from dataclasses import dataclass

import numpy as np

from .ensembles import Ensemble, FrameMatrix
from .linalg import DEFAULT_REL_TOL, pseudoinverse
from .quantizer import QuantizerConfig, quantize_index, quantize_vector

__all__ = [
    "Signal",
    "ReconResult",
    "reconstruct",
    "rough_bound",
    "bernoulli_commutation_check",
]


@dataclass(frozen=True)
class Signal:
    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if v.ndim != 1 or v.size < 1:
            raise ValueError("signal must be a non-empty 1-D vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal entries must be finite")
        object.__setattr__(self, "values", v)

    @property
    def k(self):
        return self.values.size

    @property
    def norm(self):
        return float(np.linalg.norm(self.values))

    @classmethod
    def random_unit(cls, k, rng):
        g = rng.standard_normal(k)
        return cls(g / np.linalg.norm(g))


@dataclass(frozen=True)
class ReconResult:
    x_hat: np.ndarray
    error: float
    sigma_min: float
    m: int
    k: int
    delta: float
    imag_norm: float = 0.0
    complex_frame: bool = False

    @property
    def rough_bound(self):
        d = self.delta * np.sqrt(2.0) if self.complex_frame else self.delta
        return rough_bound(self.sigma_min, self.m, d)


def _as_signal(x):
    return x if isinstance(x, Signal) else Signal(x)


def _as_frame(E):
    return E if isinstance(E, FrameMatrix) else FrameMatrix.from_array(E)


def _as_cfg(cfg):
    return cfg if isinstance(cfg, QuantizerConfig) else QuantizerConfig(cfg)


def rough_bound(sigma_min, m, delta):
    """Worst-case error ``sqrt(m) * delta / (2 sigma_min)``.

    For complex frames each coefficient carries two quantized parts, so
    callers pass ``delta * sqrt(2)``; ``ReconResult.rough_bound`` does this.
    """
    return np.sqrt(m) * delta / (2.0 * sigma_min)


def reconstruct(x, E, cfg, pinv=None, rel_tol=DEFAULT_REL_TOL):
    """Return ``x_hat = E^+ Q(E x)`` and its Euclidean error.

    A precomputed :class:`~msqframe.linalg.Pseudoinverse` may be passed to
    reuse one factorization across several step sizes.  For complex frames
    the least-squares solution is complex; its real part is returned and the
    norm of the discarded imaginary part is reported as ``imag_norm``.
    """
    x = _as_signal(x)
    E = _as_frame(E)
    cfg = _as_cfg(cfg)
    if E.k != x.k:
        raise ValueError(f"signal length {x.k} does not match frame width {E.k}")
    if pinv is None:
        pinv = pseudoinverse(E, rel_tol)
    q = quantize_vector(E.entries @ x.values, cfg)
    xh = pinv.matrix @ q
    imag_norm = 0.0
    cplx = bool(np.iscomplexobj(xh))
    if cplx:
        imag_norm = float(np.linalg.norm(xh.imag))
        xh = xh.real.copy()
    err = float(np.linalg.norm(x.values - xh))
    return ReconResult(xh, err, pinv.sigma_min, E.m, E.k, cfg.delta, imag_norm, cplx)


def bernoulli_commutation_check(x, E, cfg):
    """Whether ``Q(E x) == E Q(x)`` entrywise for a +-1 frame.

    Guaranteed true when every coordinate obeys ``|x_i - Q(x_i)| < delta/(2k)``.
    Comparison is on lattice indices so it is exact.
    """
    x = _as_signal(x)
    E = _as_frame(E)
    cfg = _as_cfg(cfg)
    a = E.entries
    if np.iscomplexobj(a) or not np.all(np.abs(a) == 1.0):
        raise ValueError("commutation check requires a +-1 (Bernoulli) frame")
    if E.spec.kind not in (Ensemble.BERNOULLI,) and E.seed != -1:
        raise ValueError(f"commutation check requires a Bernoulli frame, got {E.spec.kind.value}")
    lhs = quantize_index(a @ x.values, cfg)
    rhs = a @ quantize_index(x.values, cfg)
    return bool(np.array_equal(lhs, rhs))
