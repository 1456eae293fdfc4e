import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msqframe.ensembles import Ensemble, EnsembleSpec, FrameMatrix, make_rng, sample_frame
from msqframe.linalg import RankDeficiencyError
from msqframe.quantizer import QuantizerConfig, quantize_scalar, residual
from msqframe.recon import Signal, bernoulli_commutation_check, reconstruct, rough_bound


def test_signal_validation():
    with pytest.raises(ValueError):
        Signal([])
    with pytest.raises(ValueError):
        Signal([1.0, np.nan])
    s = Signal.random_unit(20, make_rng(1))
    assert s.k == 20 and s.norm == pytest.approx(1.0, abs=1e-15)


def test_lattice_measurements_give_zero_error():
    # integer frame and integer signal: Ex lies on the lattice for delta = 1
    rng = np.random.default_rng(0)
    E = rng.integers(-3, 4, size=(30, 5)).astype(float)
    x = rng.integers(-5, 6, size=5).astype(float)
    res = reconstruct(x, E, 1.0)
    assert res.error < 1e-13


@pytest.mark.parametrize("m", range(1, 65))
def test_bernoulli_k1_error_is_scalar_residual(m):
    d = 0.1
    x = 0.437
    E = sample_frame(EnsembleSpec("bernoulli"), m, 1, m)
    res = reconstruct([x], E, d)
    assert res.error == pytest.approx(abs(x - quantize_scalar(x, d)), abs=1e-15)


@pytest.mark.parametrize("kind", ["gaussian", "bernoulli", "sphere"])
@pytest.mark.parametrize("delta", [0.01, 0.1, 4.0])
def test_rough_bound_every_draw(kind, delta):
    rng = make_rng(7)
    for t in range(40):
        m = int(rng.integers(3, 200))
        E = sample_frame(EnsembleSpec(kind), m, 3, t)
        x = rng.normal(size=3)
        try:
            res = reconstruct(x, E, delta)
        except RankDeficiencyError:
            continue
        assert res.error <= res.rough_bound * (1 + 1e-12)
        assert res.rough_bound == pytest.approx(rough_bound(res.sigma_min, m, delta))


def test_rough_bound_complex():
    E = sample_frame(EnsembleSpec("dft", ambient_n=512), 100, 10, 3)
    x = Signal.random_unit(10, make_rng(2))
    res = reconstruct(x, E, 0.05)
    assert res.complex_frame and res.imag_norm >= 0
    assert res.error <= res.rough_bound


def test_dft_spike_error_is_scalar_residual():
    # column 0 of the DFT is all ones, so every coefficient equals c
    c = 0.5123456
    d = 0.01
    x = np.zeros(20)
    x[0] = c
    for seed in range(5):
        E = sample_frame(EnsembleSpec("dft", ambient_n=100_000), 400, 20, seed)
        res = reconstruct(x, E, d)
        assert res.error == pytest.approx(abs(residual(c, d)), abs=1e-12)


def test_mismatched_shapes():
    with pytest.raises(ValueError):
        reconstruct([1.0, 2.0], np.eye(3), 0.1)


def test_precomputed_pinv_reused():
    from msqframe.linalg import pseudoinverse
    E = sample_frame(EnsembleSpec(), 50, 4, 1)
    x = np.array([0.1, -0.3, 0.2, 0.05])
    P = pseudoinverse(E)
    assert reconstruct(x, E, 0.1, pinv=P).error == reconstruct(x, E, 0.1).error


def test_bernoulli_commutation_lattice_and_small_offset():
    d = 0.1
    rng = np.random.default_rng(5)
    for t in range(50):
        n = rng.integers(-20, 20, size=4)
        x_lat = n * d
        E = sample_frame(EnsembleSpec("bernoulli"), 30, 4, t)
        assert bernoulli_commutation_check(x_lat, E, d)
        x_off = x_lat + d / 16
        assert bernoulli_commutation_check(x_off, E, d)


def test_bernoulli_commutation_by_enumeration():
    d = 1.0
    x = [0.5 + 0.125]  # residual exceeds delta/2k with k = 1
    m = 3
    outcomes = []
    for signs in itertools.product([-1.0, 1.0], repeat=m):
        E = FrameMatrix(np.array(signs)[:, None], EnsembleSpec("bernoulli"))
        outcomes.append(bernoulli_commutation_check(x, E, d))
    # Q(-0.625) = -1 but -Q(0.625) = -1 as well; Q(0.625) = 1: commutation holds for every sign
    assert all(outcomes)
    x = [0.5]  # exactly on the right-closed edge: Q(0.5)=0 but Q(-0.5)=-1
    outcomes = [bernoulli_commutation_check(x, FrameMatrix(np.array(s)[:, None], EnsembleSpec("bernoulli")), d)
                for s in itertools.product([-1.0, 1.0], repeat=m)]
    assert outcomes.count(True) == 1 and not all(outcomes)


def test_commutation_rejects_non_bernoulli():
    E = sample_frame(EnsembleSpec(), 10, 2, 0)
    with pytest.raises(ValueError):
        bernoulli_commutation_check([0.1, 0.2], E, 0.1)


def test_scenario_c_finite_outputs():
    # k = 2: once all sign patterns appear, adding rows cannot push the
    # minimum error over complete draws below a positive floor
    d = 1.0
    x = np.array([0.3, 0.45])
    pats = np.array(list(itertools.product([-1.0, 1.0], repeat=2)))
    errs = []
    for reps in range(1, 40):
        E = np.repeat(pats, reps, axis=0)
        errs.append(reconstruct(x, E, d).error)
    assert min(errs) > 0.1
    assert np.ptp(errs) < 1e-12


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32), m=st.integers(4, 120), d=st.sampled_from([0.01, 0.3, 2.0]))
def test_rough_bound_property(seed, m, d):
    E = sample_frame(EnsembleSpec("gaussian"), m, 4, seed)
    x = make_rng(seed + 1).normal(size=4)
    res = reconstruct(x, E, QuantizerConfig(d))
    assert res.error <= res.rough_bound * (1 + 1e-12)
