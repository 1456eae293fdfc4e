"""Uniform (memoryless) scalar quantization on the lattice delta*Z.

The quantizer maps ``v`` to ``n*delta`` where ``n`` is the unique integer with
``v`` in ``(n*delta - delta/2, n*delta + delta/2]``.  Cells are open on the
left and closed on the right, so ``0.5`` maps to ``0`` when ``delta == 1``
while ``-0.5`` maps to ``-1``.
"""
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuantizerConfig",
    "quantize_index",
    "quantize_scalar",
    "quantize_vector",
    "residual",
]


@dataclass(frozen=True)
class QuantizerConfig:
    """Step size of the quantizer. No dither, no saturation."""

    delta: float

    def __post_init__(self):
        d = float(self.delta)
        if not np.isfinite(d) or d <= 0:
            raise ValueError(f"quantizer step must be finite and > 0, got {self.delta!r}")
        object.__setattr__(self, "delta", d)


def _as_config(cfg):
    if isinstance(cfg, QuantizerConfig):
        return cfg
    return QuantizerConfig(cfg)


_SPLIT = 134217729.0  # 2**27 + 1


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    """``p + e == a * b`` exactly (Dekker), with ``p = fl(a * b)``."""
    p = a * b
    with np.errstate(over="ignore", invalid="ignore"):
        ah, al = _split(a)
        bh, bl = _split(b)
        e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, np.where(np.isfinite(e), e, 0.0)


def _exact_residual(v, n, d):
    p, e = _two_prod(n, d)
    return (v - p) - e


def _index_and_residual(v, d):
    """Lattice index and the residual ``v - n*delta`` computed without rounding.

    The residual of a double against ``n*delta`` (delta itself a double) is
    always representable, so with an error-free product it comes out exact.
    The initial guess ``ceil(v/delta - 1/2)`` is off by at most one step.
    """
    half = 0.5 * d
    t = v / d
    n = np.where(np.abs(t) >= 2.0 ** 52, t, np.ceil(t - 0.5))
    r = _exact_residual(v, n, d)
    n = n + (r > half) - (r <= -half)
    return n, _exact_residual(v, n, d)


def quantize_index(v, cfg):
    """Integer lattice index ``n`` of each (real) entry of `v`.

    ``v`` lies in ``(n*delta - delta/2, n*delta + delta/2]`` in exact
    arithmetic, with ``delta`` taken as the stored double.
    """
    cfg = _as_config(cfg)
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("quantizer input must be finite")
    return _index_and_residual(v, cfg.delta)[0]


def quantize_scalar(v, cfg):
    """Quantize one real number. Returns a Python float."""
    cfg = _as_config(cfg)
    v = float(v)
    if not np.isfinite(v):
        raise ValueError(f"quantizer input must be finite, got {v!r}")
    return float(quantize_index(v, cfg)) * cfg.delta


def quantize_vector(u, cfg):
    """Componentwise quantization of a real or complex array.

    Complex entries have their real and imaginary parts quantized
    independently with the same step.
    """
    cfg = _as_config(cfg)
    u = np.asarray(u)
    if np.iscomplexobj(u):
        return (quantize_index(u.real, cfg) * cfg.delta
                + 1j * (quantize_index(u.imag, cfg) * cfg.delta))
    return quantize_index(u, cfg) * cfg.delta


def residual(v, cfg):
    """The exact distance ``v - n*delta`` to the lattice point; lies in ``(-delta/2, delta/2]``.

    For complex input each part is handled separately.  Scalars come back as
    floats.  Note ``Q(v)`` is ``n*delta`` rounded to a double, so
    ``v - Q(v)`` can differ from this by that rounding.
    """
    cfg = _as_config(cfg)
    u = np.asarray(v)
    if np.iscomplexobj(u):
        return residual(u.real, cfg) + 1j * residual(u.imag, cfg)
    u = u.astype(float)
    if not np.all(np.isfinite(u)):
        raise ValueError("quantizer input must be finite")
    r = _index_and_residual(u, cfg.delta)[1]
    if np.isscalar(v) or u.ndim == 0:
        return float(r)
    return r
