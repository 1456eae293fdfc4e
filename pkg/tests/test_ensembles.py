import numpy as np
import pytest
from scipy import integrate

from msqframe.ensembles import (ConfigError, Ensemble, EnsembleSpec, FrameMatrix,
                                gaussian_density, gaussian_mixture_density, make_rng,
                                sample_frame, sample_rows, substream_seed)

SPECS = [EnsembleSpec("gaussian"), EnsembleSpec("bernoulli"), EnsembleSpec("sphere"),
         EnsembleSpec("dft", ambient_n=4096)]


def test_parse_aliases():
    assert Ensemble.parse("Rademacher") is Ensemble.BERNOULLI
    assert Ensemble.parse("sphere_rows") is Ensemble.SPHERE_ROWS
    assert Ensemble.parse("partial-dft") is Ensemble.PARTIAL_DFT
    with pytest.raises(ConfigError):
        Ensemble.parse("cauchy")


def test_dft_needs_size():
    with pytest.raises(ConfigError):
        EnsembleSpec("dft")


def test_bernoulli_entries_are_signs():
    E = sample_frame(EnsembleSpec("bernoulli"), 4, 2, 11)
    assert E.shape == (4, 2)
    assert set(np.unique(E.entries)) <= {-1.0, 1.0}


def test_sphere_rows_have_norm_sqrt_k():
    E = sample_frame(EnsembleSpec("sphere"), 3, 20, 5)
    np.testing.assert_allclose(np.linalg.norm(E.entries, axis=1), np.sqrt(20), rtol=0, atol=1e-12)


def test_gaussian_moments():
    e = sample_frame(EnsembleSpec("gaussian"), 100_000, 1, 42).entries[:, 0]
    assert abs(e.mean()) <= 0.02
    assert 0.98 <= e.var() <= 1.02


def test_dft_rows_distinct_unit_modulus():
    spec = EnsembleSpec("dft", ambient_n=64)
    E = sample_frame(spec, 64, 5, 3)
    np.testing.assert_allclose(np.abs(E.entries), 1.0, atol=1e-15)
    # the second column identifies the row index; a full draw uses each row once
    idx = np.round(-np.angle(E.entries[:, 1]) * 64 / (2 * np.pi)).astype(int) % 64
    assert sorted(idx) == list(range(64))


def test_dft_too_many_rows():
    with pytest.raises(ConfigError):
        sample_frame(EnsembleSpec("dft", ambient_n=10), 11, 2, 0)


def test_dft_phase_is_exact_for_large_n():
    n = 100_000
    spec = EnsembleSpec("dft", ambient_n=n)
    E = sample_frame(spec, 50, 20, 9)
    idx = np.round(-np.angle(E.entries[:, 1]) * n / (2 * np.pi)).astype(np.int64) % n
    ref = np.exp(-2j * np.pi * np.outer(idx, np.arange(20)) / n)
    np.testing.assert_allclose(E.entries, ref, atol=1e-9)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind.value)
def test_reproducible(spec):
    a = sample_frame(spec, 30, 4, 123).entries
    b = sample_frame(spec, 30, 4, 123).entries
    c = sample_frame(spec, 30, 4, 124).entries
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind.value)
def test_isotropy(spec):
    m, k = 100_000, 4
    rows = sample_rows(spec, m, k, make_rng(77))
    second = rows.conj().T @ rows / m
    assert np.abs(second - np.eye(k)).max() <= 5 * 3 / np.sqrt(m)


def test_substreams_distinct_and_stable():
    seeds = {substream_seed(0, i, t) for i in range(10) for t in range(100)}
    assert len(seeds) == 1000
    assert substream_seed(5, 1, 2) == substream_seed(5, 1, 2)
    assert substream_seed(5, 1, 2) != substream_seed(5, 2, 1)


def test_from_array_has_no_provenance():
    F = FrameMatrix.from_array([[1, 2], [3, 4], [5, 6]])
    assert F.seed == -1 and F.m == 3 and F.k == 2 and F.entries.dtype == float


def _numeric_ft(f, w):
    re = integrate.quad(lambda t: f(t) * np.cos(2 * np.pi * t * w), -12, 12, limit=200)[0]
    im = integrate.quad(lambda t: -f(t) * np.sin(2 * np.pi * t * w), -12, 12, limit=200)[0]
    return re + 1j * im


def test_gaussian_bundle_transforms():
    b = gaussian_density()
    for w in (0.0, 0.1, 0.37, 1.0):
        assert abs(_numeric_ft(b.phi, w) - b.phi_hat(w)) < 1e-9
        assert abs(_numeric_ft(b.g, w) - b.g_hat(w)) < 1e-9


def _mixture():
    # weights 1/4, 3/4 with means -0.9, 0.3 (mean 0); equal sigma fixes unit variance
    w = np.array([0.25, 0.75])
    mu = np.array([-0.9, 0.3])
    s = np.sqrt(1 - w @ mu ** 2)
    return gaussian_mixture_density(w, mu, [s, s])


def test_mixture_transforms_match_quadrature():
    b = _mixture()
    assert abs(integrate.quad(b.phi, -12, 12)[0] - 1) < 1e-10
    for w in (0.0, 0.05, 0.3, 0.8):
        assert abs(_numeric_ft(b.phi, w) - b.phi_hat(w)) < 1e-9
        assert abs(_numeric_ft(b.g, w) - b.g_hat(w)) < 1e-9


def test_mixture_g_is_partial_first_moment():
    b = _mixture()
    for z in (-2.0, 0.0, 0.7):
        ref = integrate.quad(lambda t: t * b.phi(t), -15, z)[0]
        assert abs(b.g(z) - ref) < 1e-10


def test_mixture_must_be_isotropic():
    with pytest.raises(ConfigError):
        gaussian_mixture_density([0.5, 0.5], [0.0, 1.0], [1.0, 1.0])
