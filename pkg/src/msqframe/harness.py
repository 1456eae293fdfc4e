"""Declarative experiment runner.

An :class:`ExperimentConfig` describes a grid of redundancies ``lam`` and
step sizes ``delta``.  Each (lam, delta) cell draws ``trials`` independent
matrices.  Trial ``t`` of redundancy index ``i`` uses the substream
``(master_seed, i, t)``, so results do not depend on the worker count and the
same frames are reused across step sizes (common random numbers).  Cells run
sequentially; trials inside a cell may run on a thread pool.  Per-cell
aggregates are reduced in trial order.
"""
import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum

import numpy as np

from . import bounds
from .cs import BpdnConvergenceError, SparseSignal, rip_sample_size, two_stage
from .ensembles import (ConfigError, Ensemble, EnsembleSpec, make_rng, sample_frame,
                        sample_rows, substream_seed)
from .linalg import RankDeficiencyError, pseudoinverse
from .mu import mu_gaussian, mu_monte_carlo
from .quantizer import QuantizerConfig
from .recon import Signal, reconstruct

log = logging.getLogger(__name__)

__all__ = [
    "Experiment",
    "SignalKind",
    "ExperimentConfig",
    "CurvePoint",
    "MuRow",
    "HardBoundViolation",
    "SolverBudgetExceeded",
    "run_frame_experiment",
    "run_constant_term_experiment",
    "run_fourier_experiment",
    "run_cs_experiment",
    "run_mu_study",
    "run",
    "write_csv",
    "write_sidecar",
    "CSV_HEADER",
]

CSV_HEADER = ["experiment", "ensemble", "k", "m", "lambda", "delta", "trials", "mean_error",
              "std_error", "band_lower", "band_upper", "support_rate", "plateau"]
MU_HEADER = ["experiment", "ensemble", "k", "delta", "trials", "mu_analytic", "mu_mc",
             "mu_std_error", "mu_cap", "bracket_lower", "bracket_upper"]

SIGNAL_KEY = 0x5167  # substream key reserved for the fixed signal
BOUND_SLACK = 1e-12  # rounding allowance on the hard worst-case bound
FULL_SCALE_TRIALS = 1000


class Experiment(str, Enum):
    FRAME = "frame"
    CONSTANT_TERM = "constant-term"
    FOURIER = "fourier"
    CS = "cs"
    MU = "mu"


class SignalKind(str, Enum):
    UNIT = "unit"          # seeded, uniformly random direction, unit norm
    SPIKE = "spike"        # (c, 0, ..., 0)
    EXPLICIT = "explicit"  # given vector
    SPARSE_PM = "sparse"   # k nonzeros +-1/sqrt(k), fresh per trial


class HardBoundViolation(AssertionError):
    """A trial broke the deterministic worst-case error bound."""


class SolverBudgetExceeded(RuntimeError):
    def __init__(self, failures, total, budget):
        self.failures, self.total, self.budget = failures, total, budget
        super().__init__(f"{failures}/{total} solver failures exceed budget {budget:g}")


_DEFAULTS = {
    Experiment.FRAME: dict(ensemble="gaussian", k=20, lam_range=(1.0, 100.0, 12),
                           deltas=(0.01, 0.05, 0.1)),
    Experiment.CONSTANT_TERM: dict(ensemble="gaussian", k=20, lam_range=(10.0, 1000.0, 9),
                                   deltas=(4.0,)),
    Experiment.FOURIER: dict(ensemble="dft", k=20, lam_range=(10.0, 1000.0, 9), deltas=(0.01,),
                             ambient_n=100000),
    Experiment.CS: dict(ensemble="gaussian", k=20, lam_range=(5.0, 25.0, 5),
                        deltas=(0.01, 0.05, 0.1), ambient_n=1000, signal="sparse"),
    Experiment.MU: dict(ensemble="gaussian", k=20, lam_range=(1000.0, 1000.0, 1),
                        deltas=(4.0,), trials=100000),
}


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run.

    ``lambdas`` are requested redundancies; the realized grid is
    ``m = round(lam * k)`` and rows report ``m / k``.  For the CS experiment
    ``k`` is the sparsity and ``ambient_n`` the signal length.  ``alpha_doc``
    is recorded in the sidecar only.
    """

    experiment: Experiment = Experiment.FRAME
    ensembles: tuple = ("gaussian",)
    k: int = 20
    lambdas: tuple = ()
    deltas: tuple = ()
    trials: int = 200
    master_seed: int = 0
    signal: SignalKind = SignalKind.UNIT
    signal_values: tuple = ()
    spike_value: float = 1.0
    ambient_n: int = 0
    subgaussian_norm_k: float = 1.0
    c_k: float = 1.0
    c1: float = 1.0
    alpha_doc: float = 0.0
    threads: int = 1
    failure_budget: float = 0.0
    allow_bernoulli_coarse: bool = False
    output_path: str = ""

    @classmethod
    def defaults(cls, experiment):
        experiment = Experiment(experiment)
        d = _DEFAULTS[experiment]
        lo, hi, n = d["lam_range"]
        lams = tuple(float(v) for v in np.geomspace(lo, hi, n))
        cfg = cls(experiment=experiment, ensembles=(d["ensemble"],), k=d["k"], lambdas=lams,
                  deltas=tuple(d["deltas"]), ambient_n=d.get("ambient_n", 0),
                  signal=SignalKind(d.get("signal", "unit")),
                  trials=d.get("trials", 200))
        return cfg

    def ensemble_specs(self):
        return [EnsembleSpec(Ensemble.parse(e), self.ambient_n, self.subgaussian_norm_k)
                for e in self.ensembles]

    @property
    def ensemble(self):
        return self.ensemble_specs()[0]

    def resolved_deltas(self):
        """Step sizes to run; Bernoulli CS drops delta >= 0.1 unless allowed."""
        ds = list(self.deltas)
        if (self.experiment is Experiment.CS and self.ensemble.kind is Ensemble.BERNOULLI
                and not self.allow_bernoulli_coarse):
            kept = [d for d in ds if d < 0.1]
            if len(kept) != len(ds):
                log.warning("Bernoulli CS: dropping delta >= 0.1 (support condition fails there)")
            ds = kept
        return ds

    def m_grid(self):
        return [max(1, int(round(lam * self.k))) for lam in self.lambdas]

    def validate(self):
        errors = []
        try:
            self.experiment = Experiment(self.experiment)
            self.signal = SignalKind(self.signal)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.trials < 1:
            errors.append("trials: must be >= 1")
        if self.k < 1:
            errors.append("k: must be >= 1")
        if not self.lambdas:
            errors.append("lambdas: empty grid")
        if any(not (lam >= 1) for lam in self.lambdas):
            errors.append("lambdas: every lambda must be >= 1")
        if not self.deltas:
            errors.append("deltas: empty list")
        if any(not (d > 0) for d in self.deltas):
            errors.append("deltas: every delta must be > 0")
        if self.threads < 1:
            errors.append("threads: must be >= 1")
        if not 0 <= self.failure_budget <= 1:
            errors.append("failure_budget: must lie in [0, 1]")
        if self.master_seed < 0 or self.master_seed >= 2 ** 64:
            errors.append("master_seed: must be an unsigned 64-bit integer")
        try:
            specs = self.ensemble_specs()
        except ConfigError as exc:
            errors.append(f"ensemble: {exc}")
            specs = []
        exp = self.experiment
        if exp is not Experiment.MU and len(specs) > 1:
            errors.append("ensemble: only the mu study accepts several ensembles")
        kinds = {s.kind for s in specs}
        if exp in (Experiment.FRAME, Experiment.CONSTANT_TERM, Experiment.CS):
            if Ensemble.PARTIAL_DFT in kinds:
                errors.append(f"ensemble: {exp.value} needs a real ensemble (gaussian, bernoulli, sphere)")
        if exp is Experiment.FOURIER:
            if kinds != {Ensemble.PARTIAL_DFT}:
                errors.append("ensemble: fourier experiment needs the dft ensemble")
            elif self.lambdas and max(self.m_grid()) > self.ambient_n:
                errors.append("ambient_n: partial DFT needs m <= N for every lambda")
        if exp is Experiment.CS:
            if self.ambient_n < self.k:
                errors.append("ambient_n: CS signal length N must be >= k")
            if self.signal is not SignalKind.SPARSE_PM:
                errors.append("signal: CS experiment draws sparse +-1/sqrt(k) signals")
        elif self.signal is SignalKind.SPARSE_PM:
            errors.append("signal: sparse signals are only used by the cs experiment")
        if self.signal is SignalKind.EXPLICIT and len(self.signal_values) != self.k:
            errors.append(f"signal_values: need exactly k={self.k} entries")
        if errors:
            raise ConfigError("; ".join(errors))
        return self

    def fixed_signal(self):
        """The signal held fixed across all trials of a run (non-CS experiments)."""
        if self.signal is SignalKind.UNIT:
            return Signal.random_unit(self.k, make_rng(substream_seed(self.master_seed, SIGNAL_KEY)))
        if self.signal is SignalKind.SPIKE:
            v = np.zeros(self.k)
            v[0] = self.spike_value
            return Signal(v)
        if self.signal is SignalKind.EXPLICIT:
            return Signal(np.asarray(self.signal_values, float))
        raise ConfigError("no fixed signal for sparse experiments")

    def to_json(self):
        d = asdict(self)
        d["experiment"] = self.experiment.value
        d["signal"] = self.signal.value
        d["ensembles"] = [Ensemble.parse(e).value for e in self.ensembles]
        d["realized_m"] = self.m_grid()
        d["resolved_deltas"] = self.resolved_deltas()
        return d


@dataclass
class CurvePoint:
    lam: float
    m: int
    delta: float
    mean_error: float
    std_error: float
    trials: int
    band_lower: float = None
    band_upper: float = None
    support_rate: float = None
    plateau: float = None
    failures: int = 0
    max_bound_ratio: float = 0.0
    coarse_error: float = None
    imag_norm: float = None
    refine_mismatches: int = 0
    errors: np.ndarray = field(default=None, repr=False)


@dataclass
class MuRow:
    ensemble: str
    k: int
    delta: float
    trials: int
    mu_mc: float
    mu_std_error: float
    mu_cap: float
    mu_analytic: float = None
    bracket_lower: float = None
    bracket_upper: float = None


def _pairwise_sum(a):
    # fixed-order pairwise reduction so aggregates do not depend on chunking
    a = np.asarray(a, float)
    n = a.size
    if n <= 8:
        s = 0.0
        for v in a:
            s += v
        return s
    h = n // 2
    return _pairwise_sum(a[:h]) + _pairwise_sum(a[h:])


def _mean_and_se(values):
    v = np.asarray(values, float)
    n = v.size
    if n == 0:
        return math.nan, math.nan
    mean = _pairwise_sum(v) / n
    if n == 1:
        return float(mean), 0.0
    var = _pairwise_sum((v - mean) ** 2) / (n - 1)
    return float(mean), float(math.sqrt(var / n))


def _map_trials(fn, n, threads):
    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, range(n)))
    return [fn(t) for t in range(n)]


def _check_bound(res):
    bound = res.rough_bound
    ratio = res.error / bound
    if res.error > bound * (1.0 + BOUND_SLACK):
        raise HardBoundViolation(
            f"error {res.error:.6e} exceeds worst-case bound {bound:.6e} "
            f"(m={res.m}, delta={res.delta:g}, sigma_min={res.sigma_min:.4e})")
    return ratio


def _frame_cells(cfg):
    """Shared loop for the frame-type experiments; yields CurvePoints per (lam, delta)."""
    spec = cfg.ensemble
    x = cfg.fixed_signal()
    deltas = cfg.resolved_deltas()
    qcfgs = [QuantizerConfig(d) for d in deltas]
    points = []
    for i, m in enumerate(cfg.m_grid()):
        if m < cfg.k:
            raise ConfigError(f"lambda grid gives m={m} < k={cfg.k}")

        def trial(t, i=i, m=m):
            E = sample_frame(spec, m, cfg.k, substream_seed(cfg.master_seed, i, t))
            try:
                P = pseudoinverse(E)
            except RankDeficiencyError:
                return None
            return [reconstruct(x, E, q, pinv=P) for q in qcfgs]

        outs = _map_trials(trial, cfg.trials, cfg.threads)
        failures = sum(o is None for o in outs)
        for j, d in enumerate(deltas):
            results = [o[j] for o in outs if o is not None]
            ratios = [_check_bound(r) for r in results]
            errs = np.array([r.error for r in results])
            mean, se = _mean_and_se(errs)
            imag = None
            if spec.is_complex and results:
                imag = _mean_and_se([r.imag_norm for r in results])[0]
            points.append(CurvePoint(
                lam=m / cfg.k, m=m, delta=d, mean_error=mean, std_error=se,
                trials=len(results), failures=failures,
                max_bound_ratio=max(ratios, default=0.0), imag_norm=imag, errors=errs))
        if failures:
            log.warning("m=%d: %d rank-deficient draws excluded", m, failures)
    return points


def _attach_plateau(points):
    """Plateau = mean of the mean errors over the top decade of lambda, per delta."""
    for d in sorted({p.delta for p in points}):
        curve = [p for p in points if p.delta == d]
        top = max(p.lam for p in curve)
        sel = [p.mean_error for p in curve if p.lam >= top / 10.0]
        plateau = float(np.mean(sel))
        for p in curve:
            p.plateau = plateau
    return points


def run_frame_experiment(cfg):
    """Mean reconstruction error of a fixed signal versus redundancy."""
    cfg.validate()
    if cfg.ensemble.kind is Ensemble.PARTIAL_DFT:
        raise ConfigError("ensemble: frame experiment needs a real ensemble")
    return _frame_cells(cfg)


def run_constant_term_experiment(cfg):
    """Large-step frame experiment exposing the non-vanishing error floor.

    Bands: the Gaussian closed-form band when ``lam > 4`` and ``k >= 3``;
    otherwise ``[0, A (mu_cap + fluctuation)]`` from the worst-case cap.
    """
    cfg.validate()
    points = _frame_cells(cfg)
    x = cfg.fixed_signal()
    for p in points:
        if cfg.k < 3 or p.lam <= (2 * cfg.c_k) ** 2:
            continue
        if cfg.ensemble.kind is Ensemble.GAUSSIAN:
            p.band_lower, p.band_upper = bounds.gaussian_corollary_band(
                x.norm, p.delta, p.lam, cfg.k, cfg.c1)
        else:
            const = bounds.TheoremConstants(lam=p.lam, c_k_ensemble=cfg.c_k, c1=cfg.c1)
            cap = bounds.mu_cap(p.delta, cfg.k, p.m, cfg.c_k)
            p.band_lower = 0.0
            p.band_upper = bounds.theorem1_band(cap, const, cfg.k, p.delta)[1]
    return _attach_plateau(points)


def run_fourier_experiment(cfg):
    """Frame experiment on random rows of the first k DFT columns."""
    cfg.validate()
    return _attach_plateau(_frame_cells(cfg))


def run_cs_experiment(cfg):
    """Two-stage CS reconstruction error versus ``lam = m / k``.

    Each trial draws a fresh matrix and a fresh sparse signal.  Solver
    failures are counted per cell and compared against ``failure_budget``.
    """
    cfg.validate()
    spec = cfg.ensemble
    n = cfg.ambient_n
    deltas = cfg.resolved_deltas()
    need = rip_sample_size(cfg.k, n)
    points = []
    total = fails = 0
    for i, m in enumerate(cfg.m_grid()):
        if m < need:
            log.info("m=%d is below the RIP sample-size heuristic %d", m, need)

        def trial(t, i=i, m=m):
            rng = make_rng(substream_seed(cfg.master_seed, i, t))
            phi = sample_rows(spec, m, n, rng)
            x = SparseSignal.random_pm(n, cfg.k, rng)
            out = []
            for d in deltas:
                try:
                    r = two_stage(phi, x, d)
                except (BpdnConvergenceError, RankDeficiencyError) as exc:
                    log.warning("m=%d delta=%g trial=%d: %s", m, d, t, exc)
                    out.append(None)
                    continue
                same = True
                if r.support_exact:
                    # Stage 2 must coincide with frame reconstruction on (x_T, Phi_T)
                    fr = reconstruct(x.values_on_support, phi[:, x.support], d)
                    same = fr.error == r.refined_error
                out.append((r, same))
            return out

        outs = _map_trials(trial, cfg.trials, cfg.threads)
        for j, d in enumerate(deltas):
            pairs = [o[j] for o in outs if o[j] is not None]
            results = [r for r, _ in pairs]
            mismatches = sum(not same for _, same in pairs)
            nfail = cfg.trials - len(results)
            total += cfg.trials
            fails += nfail
            ratios = []
            for r in results:
                if r.support_exact:
                    bound = math.sqrt(m) * d / (2.0 * r.sigma_min)
                    if r.refined_error > bound * (1.0 + BOUND_SLACK):
                        raise HardBoundViolation(
                            f"refined error {r.refined_error:.6e} exceeds bound {bound:.6e}")
                    ratios.append(r.refined_error / bound)
            errs = np.array([r.refined_error for r in results])
            mean, se = _mean_and_se(errs)
            points.append(CurvePoint(
                lam=m / cfg.k, m=m, delta=d, mean_error=mean, std_error=se,
                trials=len(results), failures=nfail,
                support_rate=(float(np.mean([r.support_exact for r in results]))
                              if results else math.nan),
                coarse_error=_mean_and_se([r.coarse_error for r in results])[0],
                max_bound_ratio=max(ratios, default=0.0), errors=errs,
                refine_mismatches=mismatches))
    if total and fails / total > cfg.failure_budget:
        err = SolverBudgetExceeded(fails, total, cfg.failure_budget)
        err.points = points
        raise err
    return points


def run_mu_study(cfg):
    """Analytic versus Monte Carlo bias term for each (ensemble, delta)."""
    cfg.validate()
    x = cfg.fixed_signal()
    m_ref = max(cfg.m_grid())
    rows = []
    for e_idx, spec in enumerate(cfg.ensemble_specs()):
        for d_idx, d in enumerate(cfg.resolved_deltas()):
            seed = substream_seed(cfg.master_seed, e_idx, d_idx)
            mc = mu_monte_carlo(x, spec, cfg.trials, seed, d, threads=cfg.threads)
            cap = bounds.mu_cap(d, cfg.k, m_ref, cfg.c_k)
            # the cap is a hard assertion up to three standard errors
            if mc.value > cap + 3.0 * mc.std_error:
                raise HardBoundViolation(f"MC mu {mc.value:.6e} above cap {cap:.6e}")
            row = MuRow(spec.kind.value, cfg.k, d, cfg.trials, mc.value, mc.std_error, cap)
            if spec.kind is Ensemble.GAUSSIAN:
                row.mu_analytic = mu_gaussian(x, d).value
                row.bracket_lower, row.bracket_upper = bounds.gaussian_mu_bracket(x.norm, d)
            rows.append(row)
    return rows


RUNNERS = {
    Experiment.FRAME: run_frame_experiment,
    Experiment.CONSTANT_TERM: run_constant_term_experiment,
    Experiment.FOURIER: run_fourier_experiment,
    Experiment.CS: run_cs_experiment,
    Experiment.MU: run_mu_study,
}


def run(cfg):
    return RUNNERS[Experiment(cfg.experiment)](cfg)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(cfg, rows, path):
    """Write curve points (or mu rows) with the fixed header to a path or open file."""
    if hasattr(path, "write"):
        _write_rows(cfg, rows, path)
    else:
        with open(path, "w", newline="") as fh:
            _write_rows(cfg, rows, fh)


def _write_rows(cfg, rows, fh):
    exp = Experiment(cfg.experiment)
    w = csv.writer(fh, lineterminator="\n")
    if exp is Experiment.MU:
        w.writerow(MU_HEADER)
        for r in rows:
            w.writerow([exp.value, r.ensemble, r.k, _fmt(r.delta), r.trials,
                        _fmt(r.mu_analytic), _fmt(r.mu_mc), _fmt(r.mu_std_error),
                        _fmt(r.mu_cap), _fmt(r.bracket_lower), _fmt(r.bracket_upper)])
        return
    w.writerow(CSV_HEADER)
    ens = cfg.ensemble.kind.value
    for p in rows:
        w.writerow([exp.value, ens, cfg.k, p.m, _fmt(p.lam), _fmt(p.delta), p.trials,
                    _fmt(p.mean_error), _fmt(p.std_error), _fmt(p.band_lower),
                    _fmt(p.band_upper), _fmt(p.support_rate), _fmt(p.plateau)])


def sidecar_path(csv_path):
    root, _ = os.path.splitext(csv_path)
    return root + ".json"


def write_sidecar(cfg, rows, path, extra=None):
    """JSON with the resolved config, seed and per-cell diagnostics."""
    diag = []
    if Experiment(cfg.experiment) is not Experiment.MU:
        for p in rows:
            diag.append({"m": p.m, "delta": p.delta, "failures": p.failures,
                         "max_bound_ratio": p.max_bound_ratio,
                         "coarse_error": p.coarse_error, "imag_norm": p.imag_norm,
                         "support_rate": p.support_rate,
                         "refine_mismatches": p.refine_mismatches})
    payload = {"config": cfg.to_json(), "master_seed": cfg.master_seed,
               "prng": "numpy PCG64 via SeedSequence([master_seed, lambda_index, trial])",
               "diagnostics": diag}
    if cfg.signal is not SignalKind.SPARSE_PM:
        payload["signal"] = cfg.fixed_signal().values.tolist()
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


# ---- flat key = value config files ---------------------------------------

_LIST_FIELDS = {"ensembles", "lambdas", "deltas", "signal_values"}
_ALIASES = {"ensemble": "ensembles", "seed": "master_seed", "n": "ambient_n",
            "N": "ambient_n", "out": "output_path", "output": "output_path",
            "alpha": "alpha_doc", "lambda": "lambdas", "delta": "deltas"}


def _coerce(name, raw):
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in types:
        raise ConfigError(f"{name}: unknown config key")
    if name in _LIST_FIELDS:
        items = [s.strip() for s in str(raw).split(",") if s.strip()]
        if name == "ensembles":
            return tuple(items)
        try:
            return tuple(float(s) for s in items)
        except ValueError:
            raise ConfigError(f"{name}: expected comma-separated numbers, got {raw!r}") from None
    default = getattr(ExperimentConfig(), name)
    try:
        if isinstance(default, bool):
            return str(raw).strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, Enum):
            return type(default)(str(raw).strip())
        if isinstance(default, int):
            return int(str(raw).strip(), 0)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    return str(raw).strip()


def parse_config_text(text):
    """Parse ``key = value`` lines ('#' comments) into a dict of typed overrides."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        out[key] = _coerce(key, val)
    return out


def lambda_range(lo, hi, n):
    """Geometric grid of `n` redundancies between `lo` and `hi` inclusive."""
    return tuple(float(v) for v in np.geomspace(lo, hi, int(n)))


def build_config(experiment, overrides):
    cfg = ExperimentConfig.defaults(experiment)
    if "lam_range" in overrides:
        cfg.lambdas = lambda_range(*overrides.pop("lam_range"))
    return replace(cfg, **overrides)
