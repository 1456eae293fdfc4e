"""SVD-based pseudoinverse and extreme singular values."""
from dataclasses import dataclass

import numpy as np

from .ensembles import FrameMatrix

__all__ = [
    "Pseudoinverse",
    "RankDeficiencyError",
    "pseudoinverse",
    "singular_values",
    "singular_value_band",
    "moore_penrose_residuals",
]

DEFAULT_REL_TOL = 1e-12


class RankDeficiencyError(np.linalg.LinAlgError):
    """Raised when a frame is numerically rank deficient."""

    def __init__(self, sigma_min, sigma_max, rel_tol):
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)
        self.rel_tol = rel_tol
        super().__init__(
            f"matrix is numerically rank deficient: sigma_min={sigma_min:.3e} "
            f"< {rel_tol:g} * sigma_max={sigma_max:.3e}")


@dataclass(frozen=True)
class Pseudoinverse:
    """Left inverse ``E^+`` of a full-column-rank m x k matrix."""

    matrix: np.ndarray
    source_shape: tuple
    rank: int
    sigma_min: float
    sigma_max: float

    @property
    def condition(self):
        return self.sigma_max / self.sigma_min

    @property
    def frobenius_norm(self):
        return float(np.linalg.norm(self.matrix))

    def __matmul__(self, other):
        return self.matrix @ other


def _entries(E):
    if isinstance(E, FrameMatrix):
        return E.entries
    return np.atleast_2d(np.asarray(E))


def singular_values(E):
    """All singular values in descending order."""
    return np.linalg.svd(_entries(E), compute_uv=False)


def pseudoinverse(E, rel_tol=DEFAULT_REL_TOL):
    """Moore-Penrose pseudoinverse through the thin SVD.

    Avoids the normal equations, which would square the condition number.
    Raises :class:`RankDeficiencyError` if ``sigma_min < rel_tol * sigma_max``.
    """
    a = _entries(E)
    m, k = a.shape
    if m < k:
        raise ValueError(f"frame needs m >= k, got shape {a.shape}")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    smax = s[0] if s.size else 0.0
    smin = s[-1] if s.size else 0.0
    if smax == 0 or smin < rel_tol * smax:
        raise RankDeficiencyError(smin, smax, rel_tol)
    pinv = (vh.conj().T / s) @ u.conj().T
    return Pseudoinverse(pinv, (m, k), k, float(smin), float(smax))


def moore_penrose_residuals(a, p):
    """Max-abs residuals of the four Moore-Penrose identities for ``p = a^+``."""
    a = np.asarray(a)
    p = np.asarray(p)
    ap = a @ p
    pa = p @ a
    return (
        np.abs(ap @ a - a).max(),
        np.abs(pa @ p - p).max(),
        np.abs(ap - ap.conj().T).max(),
        np.abs(pa - pa.conj().T).max(),
    )


def singular_value_band(E, c_k=1.0, t=None):
    """Extreme singular values and whether they sit inside the concentration band.

    The band is ``sqrt(m) - c_k sqrt(k) - t <= s_min <= s_max <= sqrt(m) + c_k sqrt(k) + t``
    with ``t = sqrt(m)/2`` by default.  Returns ``(sigma_min, sigma_max, passes)``.
    """
    a = _entries(E)
    m, k = a.shape
    if m < k:
        raise ValueError(f"frame needs m >= k, got shape {a.shape}")
    s = singular_values(a)
    smin, smax = float(s[-1]), float(s[0])
    if smin < DEFAULT_REL_TOL * smax:
        smin = 0.0  # numerically rank deficient
    if t is None:
        t = np.sqrt(m) / 2.0
    lo = np.sqrt(m) - c_k * np.sqrt(k) - t
    hi = np.sqrt(m) + c_k * np.sqrt(k) + t
    passes = bool(smin > 0 and lo <= smin and smax <= hi)
    return smin, smax, passes
