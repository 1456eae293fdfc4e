"""Compressed sensing with MSQ: l1 coarse decoding and two-stage refinement.

The coarse decoder solves the constrained basis pursuit denoising problem

    min ||z||_1  subject to  ||Phi z - q||_2 <= eps

by following the lasso regularization path
``z(tau) = argmin 0.5 ||Phi z - q||^2 + tau ||z||_1`` downward from
``tau = ||Phi^T q||_inf`` until the residual norm reaches ``eps``.  The path
is piecewise linear, so the solution is exact up to rounding.  The final
``tau`` gives the dual certificate ``y = r / tau``.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .ensembles import FrameMatrix
from .linalg import DEFAULT_REL_TOL, pseudoinverse
from .quantizer import QuantizerConfig, quantize_vector

__all__ = [
    "SparseSignal",
    "BpdnProblem",
    "BpdnSolution",
    "BpdnConvergenceError",
    "TwoStageResult",
    "bpdn_solve",
    "bpdn_solve_full",
    "bpdn_dual_bound",
    "support_recover",
    "two_stage",
    "rip_sample_size",
]

log = logging.getLogger(__name__)

TOL_FEAS = 1e-8
TOL_OBJ = 1e-6
MAX_ITER = 50000


class BpdnConvergenceError(RuntimeError):
    """Solver stopped before meeting its tolerances."""

    def __init__(self, message, best=None, feasibility_gap=None):
        super().__init__(message)
        self.best = best
        self.feasibility_gap = feasibility_gap


@dataclass(frozen=True)
class SparseSignal:
    ambient_n: int
    support: np.ndarray
    values_on_support: np.ndarray

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=np.int64).ravel()
        vals = np.asarray(self.values_on_support, dtype=float).ravel()
        if sup.size != vals.size:
            raise ValueError("support and values differ in length")
        order = np.argsort(sup, kind="stable")
        sup, vals = sup[order], vals[order]
        if sup.size and (sup[0] < 0 or sup[-1] >= self.ambient_n):
            raise ValueError("support index out of range")
        if np.any(np.diff(sup) == 0):
            raise ValueError("support indices must be distinct")
        if np.any(vals == 0):
            raise ValueError("zero value stored on the support")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "values_on_support", vals)

    @property
    def k(self):
        return self.support.size

    def to_dense(self):
        out = np.zeros(self.ambient_n)
        out[self.support] = self.values_on_support
        return out

    @classmethod
    def from_dense(cls, x):
        x = np.asarray(x, float)
        sup = np.flatnonzero(x)
        return cls(x.size, sup, x[sup])

    @classmethod
    def random_pm(cls, n, k, rng):
        """k-sparse with a uniform random support and entries +-1/sqrt(k)."""
        sup = np.sort(rng.choice(n, size=k, replace=False))
        vals = rng.choice([-1.0, 1.0], size=k) / math.sqrt(k)
        return cls(n, sup, vals)


@dataclass(frozen=True)
class BpdnProblem:
    phi: np.ndarray
    q: np.ndarray
    epsilon: float

    def __post_init__(self):
        phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        q = np.asarray(self.q, dtype=float).ravel()
        if phi.shape[0] != q.size:
            raise ValueError(f"Phi has {phi.shape[0]} rows but q has {q.size} entries")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "epsilon", float(self.epsilon))


@dataclass
class BpdnSolution:
    z: np.ndarray
    residual_norm: float
    objective: float
    dual_bound: float
    tau: float
    iterations: int

    @property
    def gap(self):
        return self.objective - self.dual_bound


def bpdn_dual_bound(problem, y):
    """Lower bound ``q.y - eps ||y||`` after scaling `y` so ``||Phi^T y||_inf <= 1``."""
    y = np.asarray(y, float)
    s = np.abs(problem.phi.T @ y).max(initial=0.0)
    if s > 1.0:
        y = y / s
    return float(problem.q @ y - problem.epsilon * np.linalg.norm(y))


def _feasibility_limit(problem, tol_feas):
    # relative slack on eps plus a rounding floor (eps may be exactly 0)
    return problem.epsilon * (1.0 + tol_feas) + 1e-4 * tol_feas * np.linalg.norm(problem.q)


def _solve_active(phi_s, q, tau, signs):
    g = phi_s.T @ phi_s
    rhs = phi_s.T @ q - tau * signs
    try:
        c = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(g, rhs, rcond=None)[0], np.linalg.lstsq(g, signs, rcond=None)[0]
    zs = np.linalg.solve(c.T, np.linalg.solve(c, rhs))
    u = np.linalg.solve(c.T, np.linalg.solve(c, signs))
    return zs, u


def bpdn_solve_full(problem, tol_feas=TOL_FEAS, tol_obj=TOL_OBJ, max_iter=MAX_ITER):
    """Solve the constrained problem and return the solution with its certificate."""
    phi, q, eps = problem.phi, problem.q, problem.epsilon
    m, n = phi.shape
    qn = float(np.linalg.norm(q))
    if qn <= eps:
        return BpdnSolution(np.zeros(n), qn, 0.0, 0.0, math.inf, 0)

    c = phi.T @ q
    tau = float(np.abs(c).max())
    j0 = int(np.argmax(np.abs(c)))
    active = [j0]
    signs = [math.copysign(1.0, c[j0])]
    z = np.zeros(n)
    r = q.copy()
    eps2 = eps * eps
    # rounding floor so that eps = 0 (exact interpolation) terminates
    eps2_hit = max(eps2, (1e-13 * qn) ** 2)
    it = 0
    tiny = 1e-14 * tau
    last_added = j0
    last_dropped = -1
    while True:
        it += 1
        if it > max_iter:
            raise BpdnConvergenceError(
                f"homotopy exceeded max_iter={max_iter}", z,
                float(np.linalg.norm(r)) - eps)
        idx = np.asarray(active)
        s_vec = np.asarray(signs)
        phi_s = phi[:, idx]
        zs, u = _solve_active(phi_s, q, tau, s_vec)
        z = np.zeros(n)
        z[idx] = zs
        r = q - phi_s @ zs
        # moving tau -> tau - gamma: z_S += gamma u, r -= gamma v
        v = phi_s @ u
        a = phi.T @ v
        cr = phi.T @ r

        gamma = tau
        event = None
        inactive = np.ones(n, bool)
        inactive[idx] = False
        if last_dropped >= 0:
            # it left at |c_j| == tau; re-entry on rounding noise would reverse the path
            inactive[last_dropped] = False
        with np.errstate(divide="ignore", invalid="ignore"):
            g1 = (tau - cr) / (1.0 - a)
            g2 = (tau + cr) / (1.0 + a)
        for cand in (g1, g2):
            cand = np.where(inactive & (cand > tiny), cand, np.inf)
            j = int(np.argmin(cand))
            if cand[j] < gamma:
                gamma, event = float(cand[j]), ("add", j)
        with np.errstate(divide="ignore", invalid="ignore"):
            gd = -zs / u
        gd = np.where((gd > tiny) & (idx != last_added), gd, np.inf)
        if gd.size:
            jd = int(np.argmin(gd))
            if gd[jd] < gamma:
                gamma, event = float(gd[jd]), ("drop", jd)

        # ||r - gamma v||^2 = ||r_perp||^2 + (alpha - gamma)^2 ||v||^2 with r_perp _|_ v
        rr = float(r @ r)
        vv = float(v @ v)
        hit = None
        if rr <= eps2_hit:
            hit = 0.0
        elif vv > 0:
            alpha = float(r @ v) / vv
            rp = r - alpha * v
            rp2 = float(rp @ rp)
            if rp2 <= eps2_hit:
                g_hit = alpha - math.sqrt(max(eps2 - rp2, 0.0) / vv)
                if g_hit <= gamma:
                    hit = max(g_hit, 0.0)

        if hit is not None:
            tau_f = tau - hit
            zs_f = zs + hit * u
            z = np.zeros(n)
            z[idx] = zs_f
            r = q - phi_s @ zs_f
            # r(tau) = (I - P_S) q + tau v, hence y = r / tau = (I - P_S) q / tau + v
            r_ls = r - tau_f * v
            if float(r_ls @ r_ls) <= (1e-13 * qn) ** 2 or tau_f <= 0:
                y = v
            else:
                y = r_ls / tau_f + v
            break

        if event is None:
            # reached tau = 0 without meeting eps
            z = np.zeros(n)
            z[idx] = zs + tau * u
            r = q - phi_s @ z[idx]
            raise BpdnConvergenceError(
                "constraint ||Phi z - q|| <= eps is infeasible", z,
                float(np.linalg.norm(r)) - eps)
        tau -= gamma
        if event[0] == "add":
            j = event[1]
            c_j = cr[j] - gamma * a[j]
            active.append(j)
            signs.append(math.copysign(1.0, c_j))
            last_added = j
            last_dropped = -1
        else:
            jd = event[1]
            last_dropped = active[jd]
            del active[jd]
            del signs[jd]
            last_added = -1
        if len(active) > m:
            raise BpdnConvergenceError("active set exceeds the number of measurements", z,
                                       float(np.linalg.norm(r)) - eps)

    res = float(np.linalg.norm(r))
    obj = float(np.abs(z).sum())
    dual = bpdn_dual_bound(problem, y)
    sol = BpdnSolution(z, res, obj, dual, tau_f, it)
    if res > _feasibility_limit(problem, tol_feas):
        raise BpdnConvergenceError(
            f"final residual {res:.3e} exceeds eps={eps:.3e}", z, res - eps)
    if sol.gap > tol_obj * (1.0 + obj):
        raise BpdnConvergenceError(
            f"duality gap {sol.gap:.3e} above tolerance", z, res - eps)
    return sol


def bpdn_solve(problem, tol_feas=TOL_FEAS, tol_obj=TOL_OBJ, max_iter=MAX_ITER):
    """``argmin ||z||_1`` subject to ``||Phi z - q|| <= eps``.

    Deterministic.  Raises :class:`BpdnConvergenceError` (carrying the best
    iterate) when the tolerances cannot be certified.
    """
    return bpdn_solve_full(problem, tol_feas, tol_obj, max_iter).z


def support_recover(coarse, k):
    """Indices of the `k` largest-magnitude entries, ties to the lower index; sorted."""
    v = np.abs(np.asarray(coarse, float))
    if k > v.size:
        raise ValueError(f"k={k} exceeds vector length {v.size}")
    order = np.lexsort((np.arange(v.size), -v))
    return np.sort(order[:k])


@dataclass
class TwoStageResult:
    coarse: np.ndarray
    recovered_support: np.ndarray
    refined: np.ndarray
    coarse_error: float = math.nan
    refined_error: float = math.nan
    support_exact: bool = False
    sigma_min: float = math.nan
    m: int = 0
    solver: BpdnSolution = field(default=None, repr=False)


def _phi_array(phi):
    return phi.entries if isinstance(phi, FrameMatrix) else np.asarray(phi, float)


def two_stage(phi, x, cfg, tol_feas=TOL_FEAS, tol_obj=TOL_OBJ, max_iter=MAX_ITER,
              rel_tol=DEFAULT_REL_TOL):
    """Quantize ``Phi x``, decode coarsely with BPDN, then refine on the support.

    Stage 1 uses ``eps = sqrt(m) delta / 2``; Stage 2 applies the
    pseudoinverse of the columns of ``Phi`` on the recovered support to the
    same quantized measurements.
    """
    cfg = cfg if isinstance(cfg, QuantizerConfig) else QuantizerConfig(cfg)
    a = _phi_array(phi)
    m, n = a.shape
    if n != x.ambient_n:
        raise ValueError(f"Phi has {n} columns, signal lives in R^{x.ambient_n}")
    if m < x.k:
        raise ValueError("two-stage reconstruction needs m >= k")
    xd = x.to_dense()
    if x.k == 0:
        zero = np.zeros(n)
        return TwoStageResult(zero, np.zeros(0, np.int64), zero.copy(), 0.0, 0.0, True, math.nan, m)
    # measure through the support columns so Stage 2 matches the frame pipeline bit for bit
    q = quantize_vector(a[:, x.support] @ x.values_on_support, cfg)
    eps = math.sqrt(m) * cfg.delta / 2.0
    sol = bpdn_solve_full(BpdnProblem(a, q, eps), tol_feas, tol_obj, max_iter)
    coarse = sol.z
    sup = support_recover(coarse, x.k)
    pinv = pseudoinverse(FrameMatrix.from_array(a[:, sup]), rel_tol)
    refined = np.zeros(n)
    refined[sup] = pinv.matrix @ q
    exact = bool(np.array_equal(sup, x.support))
    union = np.union1d(sup, x.support)
    refined_err = float(np.linalg.norm(xd[union] - refined[union]))
    coarse_err = float(np.linalg.norm(xd - coarse))
    return TwoStageResult(coarse, sup, refined, coarse_err, refined_err, exact,
                          pinv.sigma_min, m, sol)


def rip_sample_size(k, n, epsilon=1.0 / math.sqrt(2.0), c4_bar=1.0):
    """Heuristic number of rows for the RIP of order 2k with constant `epsilon`.

    ``m >= c4_bar k ln(0.5 e N / k) / (2 epsilon^2)``; at the default
    ``epsilon = 1/sqrt(2)`` this is ``c4_bar k ln(0.5 e N / k)``.  Advisory only.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if k < 1 or n < 1:
        raise ValueError("k and N must be positive")
    val = c4_bar * k * math.log(0.5 * math.e * n / k) / (2.0 * epsilon ** 2)
    return max(1, math.ceil(val - 1e-12))
