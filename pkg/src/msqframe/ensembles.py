"""Seeded random measurement ensembles.

All randomness goes through numpy's PCG64 bit generator seeded by a
``SeedSequence``.  Substreams for parallel trials are derived with
:func:`substream_seed`, which hashes ``(master_seed, *keys)`` through
``SeedSequence`` entropy mixing, so a trial's draw depends only on its
keys and never on scheduling order.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

__all__ = [
    "Ensemble",
    "EnsembleSpec",
    "FrameMatrix",
    "SchwartzDensity",
    "ConfigError",
    "make_rng",
    "substream_seed",
    "sample_frame",
    "sample_rows",
    "gaussian_density",
    "gaussian_mixture_density",
]


class ConfigError(ValueError):
    """Invalid ensemble / experiment configuration."""


class Ensemble(str, Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"
    SPHERE_ROWS = "sphere"
    PARTIAL_DFT = "dft"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "gaussian": cls.GAUSSIAN, "normal": cls.GAUSSIAN,
            "bernoulli": cls.BERNOULLI, "rademacher": cls.BERNOULLI,
            "sphere": cls.SPHERE_ROWS, "sphererows": cls.SPHERE_ROWS,
            "dft": cls.PARTIAL_DFT, "partialdft": cls.PARTIAL_DFT,
            "fourier": cls.PARTIAL_DFT,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError(f"unknown ensemble {value!r}") from None


@dataclass(frozen=True)
class EnsembleSpec:
    """Which ensemble to draw from.

    ``ambient_n`` is the DFT size for the partial-DFT ensemble and ignored
    otherwise.  ``subgaussian_norm_k`` is carried as metadata (the psi_2 bound
    of the rows) and feeds the ``c_K`` defaults in :mod:`msqframe.bounds`.
    """

    kind: Ensemble = Ensemble.GAUSSIAN
    ambient_n: int = 0
    subgaussian_norm_k: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Ensemble.parse(self.kind))
        if self.subgaussian_norm_k <= 0:
            raise ConfigError("subgaussian_norm_k must be positive")
        if self.kind is Ensemble.PARTIAL_DFT and int(self.ambient_n) < 1:
            raise ConfigError("partial DFT ensemble needs ambient_n >= 1")

    @property
    def is_complex(self):
        return self.kind is Ensemble.PARTIAL_DFT


@dataclass(frozen=True)
class FrameMatrix:
    """An m x k analysis matrix together with how it was drawn."""

    entries: np.ndarray
    spec: EnsembleSpec = field(default_factory=EnsembleSpec)
    seed: int = -1

    @property
    def m(self):
        return self.entries.shape[0]

    @property
    def k(self):
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    @classmethod
    def from_array(cls, a, spec=None):
        """Wrap an explicit matrix (no ensemble provenance)."""
        a = np.atleast_2d(np.asarray(a))
        if a.ndim != 2:
            raise ValueError("frame matrix must be 2-D")
        if not np.iscomplexobj(a):
            a = a.astype(float)
        return cls(a, spec or EnsembleSpec(), -1)


def make_rng(seed):
    """PCG64 generator for a non-negative integer seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def substream_seed(master_seed, *keys):
    """Deterministic 64-bit seed for the substream ``(master_seed, *keys)``."""
    ss = np.random.SeedSequence([int(master_seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _dft_rows(indices, k, n):
    # (j*c) mod N keeps the phase argument exact for large N
    cols = np.arange(k, dtype=np.int64)
    phase = (np.asarray(indices, dtype=np.int64)[:, None] * cols[None, :]) % n
    return np.exp(-2j * np.pi * phase / n)


def sample_rows(spec, count, k, rng, replace=True):
    """Draw `count` rows of the ensemble using an existing generator.

    Partial-DFT rows are drawn uniformly from the N available rows, with or
    without replacement.
    """
    kind = spec.kind
    if kind is Ensemble.GAUSSIAN:
        return rng.standard_normal((count, k))
    if kind is Ensemble.BERNOULLI:
        return 2.0 * rng.integers(0, 2, size=(count, k)) - 1.0
    if kind is Ensemble.SPHERE_ROWS:
        g = rng.standard_normal((count, k))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        return g / norms * np.sqrt(k)
    if kind is Ensemble.PARTIAL_DFT:
        n = int(spec.ambient_n)
        if k > n:
            raise ConfigError(f"partial DFT needs k <= N, got k={k}, N={n}")
        if replace:
            idx = rng.integers(0, n, size=count)
        else:
            if count > n:
                raise ConfigError(f"cannot draw m={count} distinct rows from N={n}")
            idx = rng.choice(n, size=count, replace=False)
        return _dft_rows(idx, k, n)
    raise ConfigError(f"unsupported ensemble {kind!r}")


def sample_frame(spec, m, k, seed):
    """Draw an m x k frame; a deterministic function of ``(spec, m, k, seed)``."""
    m, k = int(m), int(k)
    if m < 1 or k < 1:
        raise ConfigError(f"need m >= 1 and k >= 1, got m={m}, k={k}")
    if spec.kind is Ensemble.PARTIAL_DFT and m > spec.ambient_n:
        raise ConfigError(f"partial DFT needs m <= N, got m={m}, N={spec.ambient_n}")
    rng = make_rng(seed)
    entries = sample_rows(spec, m, k, rng, replace=False)
    return FrameMatrix(entries, spec, int(seed))


@dataclass(frozen=True)
class SchwartzDensity:
    """Entry density bundle used by the Fourier-series bias formula.

    ``phi`` is the density, ``phi_hat`` its Fourier transform with the
    convention ``f^(w) = int exp(-2 pi i t w) f(t) dt``, ``g`` is
    ``z -> int_{-inf}^z t phi(t) dt`` and ``g_hat`` its transform.
    """

    phi: Callable
    phi_hat: Callable
    g_hat: Callable
    g: Callable = None
    name: str = "custom"


def gaussian_density():
    """Standard normal bundle: ``phi_hat(w) = exp(-2 pi^2 w^2)``, ``g_hat = -phi_hat``."""
    c = 1.0 / np.sqrt(2.0 * np.pi)
    two_pi2 = 2.0 * np.pi ** 2
    return SchwartzDensity(
        phi=lambda z: c * np.exp(-0.5 * np.square(z)),
        phi_hat=lambda w: np.exp(-two_pi2 * np.square(w)),
        g_hat=lambda w: -np.exp(-two_pi2 * np.square(w)),
        g=lambda z: -c * np.exp(-0.5 * np.square(z)),
        name="gaussian",
    )


def gaussian_mixture_density(weights, means, sigmas):
    """Bundle for a finite Gaussian mixture; must be centred with unit variance.

    Mixtures with unequal weights are asymmetric, so ``phi_hat`` and
    ``g_hat`` are complex.  ``g_hat`` follows from ``g' = t phi`` as
    ``g_hat(w) = phi_hat'(w) / (4 pi^2 w)`` with the limit ``-E[t^2]`` at 0.
    """
    w = np.asarray(weights, float)
    mu = np.asarray(means, float)
    sd = np.asarray(sigmas, float)
    if not np.isclose(w.sum(), 1.0) or np.any(w < 0) or np.any(sd <= 0):
        raise ConfigError("mixture weights must be a probability vector, sigmas > 0")
    mean = w @ mu
    second = w @ (sd ** 2 + mu ** 2)
    if abs(mean) > 1e-12 or abs(second - 1.0) > 1e-12:
        raise ConfigError("mixture must have mean 0 and variance 1 (isotropic rows)")
    from scipy.special import ndtr

    def phi(z):
        z = np.asarray(z, float)[..., None]
        return np.sum(w * np.exp(-0.5 * ((z - mu) / sd) ** 2) / (sd * np.sqrt(2 * np.pi)), axis=-1)

    def phi_hat(om):
        om = np.asarray(om, float)[..., None]
        return np.sum(w * np.exp(-2j * np.pi * om * mu - 2 * np.pi ** 2 * sd ** 2 * om ** 2), axis=-1)

    def dphi_hat(om):
        om = np.asarray(om, float)[..., None]
        base = np.exp(-2j * np.pi * om * mu - 2 * np.pi ** 2 * sd ** 2 * om ** 2)
        return np.sum(w * base * (-2j * np.pi * mu - 4 * np.pi ** 2 * sd ** 2 * om), axis=-1)

    def g_hat(om):
        om = np.asarray(om, float)
        out = np.empty(om.shape, dtype=complex)
        zero = om == 0
        out[zero] = -second
        nz = ~zero
        out[nz] = dphi_hat(om[nz]) / (4 * np.pi ** 2 * om[nz])
        return out if out.ndim else out[()]

    def g(z):
        # per component: int_{-inf}^z t N(t; m, s^2) dt = m Phi((z-m)/s) - s^2 N(z; m, s^2).
        # For z > 0 use the equal upper-tail form -(m Phi(-(z-m)/s) + s^2 N) so the
        # value decays to 0 instead of to the rounding error of sum(w m).
        z = np.asarray(z, float)
        zz = z[..., None]
        u = (zz - mu) / sd
        dens = np.exp(-0.5 * u ** 2) / (sd * np.sqrt(2 * np.pi))
        lower = np.sum(w * (mu * ndtr(u) - sd ** 2 * dens), axis=-1)
        upper = -np.sum(w * (mu * ndtr(-u) + sd ** 2 * dens), axis=-1)
        return np.where(z > 0, upper, lower)

    return SchwartzDensity(phi=phi, phi_hat=phi_hat, g_hat=g_hat, g=g, name="mixture")
