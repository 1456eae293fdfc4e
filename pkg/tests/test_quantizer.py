import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msqframe.quantizer import (QuantizerConfig, quantize_index, quantize_scalar,
                                quantize_vector, residual)
from oracles import q_index_exact

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
deltas = st.sampled_from([0.01, 0.1, 0.25, 1.0, 4.0, 0.3, 7.5])


def test_config_rejects_bad_steps():
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            QuantizerConfig(bad)


def test_zero_is_lattice():
    assert quantize_scalar(0.0, QuantizerConfig(0.1)) == 0.0


def test_rounds_to_nearest_cell():
    assert quantize_scalar(0.26, 0.1) == pytest.approx(0.3, abs=1e-15)
    assert residual(0.26, 0.1) == pytest.approx(-0.04, abs=1e-15)


def test_right_closed_boundary():
    assert quantize_scalar(0.5, 1.0) == 0.0
    assert quantize_scalar(-0.5, 1.0) == -1.0
    assert residual(0.5, 1.0) == 0.5


def test_lattice_points_have_zero_residual():
    for d in (0.5, 1.0, 4.0):
        for n in range(-50, 51):
            assert residual(n * d, d) == 0.0


def test_non_finite_input_raises():
    with pytest.raises(ValueError):
        quantize_scalar(math.inf, 1.0)
    with pytest.raises(ValueError):
        quantize_vector(np.array([0.0, math.nan]), 1.0)
    with pytest.raises(ValueError):
        residual(math.nan, 1.0)


def test_vector_componentwise():
    np.testing.assert_array_equal(quantize_vector(np.zeros(3), 0.1), np.zeros(3))
    np.testing.assert_allclose(quantize_vector([0.26, -0.26], 0.1), [0.3, -0.3], atol=1e-15)


def test_complex_parts_quantized_independently():
    out = quantize_vector(np.array([1.07 - 0.26j]), 0.1)
    assert out[0].real == quantize_scalar(1.07, 0.1)
    assert out[0].imag == quantize_scalar(-0.26, 0.1)
    assert out[0] == pytest.approx(1.1 - 0.3j, abs=1e-12)


def test_decimal_looking_edge_follows_stored_delta():
    # the double nearest 1.05 lies just below 10.5 * fl(0.1)
    assert q_index_exact(1.05, 0.1) == 10
    assert quantize_index(1.05, 0.1) == 10


@settings(max_examples=400, deadline=None)
@given(v=finite, d=deltas)
def test_index_matches_exact_rational_oracle(v, d):
    assert int(quantize_index(v, d)) == q_index_exact(v, d)


@pytest.mark.parametrize("d", [0.01, 0.1, 0.3, 7.7])
def test_index_exact_at_float_edges(d):
    j = np.arange(-3000, 3001)
    for e in (j * d + d / 2, j * d - d / 2, np.nextafter(j * d + d / 2, np.inf)):
        got = quantize_index(e, d)
        want = [q_index_exact(float(v), d) for v in e]
        assert np.array_equal(got, want)
        r = residual(e, d)
        assert np.all((r > -d / 2) & (r <= d / 2))


@settings(max_examples=300, deadline=None)
@given(v=finite, d=deltas)
def test_residual_is_exact(v, d):
    n = q_index_exact(v, d)
    assert Fraction(residual(v, d)) == Fraction(v) - n * Fraction(d)


@settings(max_examples=300, deadline=None)
@given(v=finite, d=deltas)
def test_idempotent_and_residual_range(v, d):
    q = quantize_scalar(v, d)
    assert quantize_scalar(q, d) == q
    r = residual(v, d)
    assert -d / 2 < r <= d / 2


@settings(max_examples=300, deadline=None)
@given(v=finite, d=st.sampled_from([0.25, 1.0, 4.0]), n=st.integers(-1000, 1000))
def test_shift_covariance_on_dyadic_steps(v, d, n):
    assert quantize_index(v + n * d, d) == quantize_index(v, d) + n


@settings(max_examples=300, deadline=None)
@given(v=finite, d=deltas)
def test_odd_symmetry_off_boundary(v, d):
    if abs(residual(v, d)) < d / 2:
        assert quantize_scalar(-v, d) == -quantize_scalar(v, d)


def test_odd_symmetry_fails_exactly_at_boundary():
    d = 1.0
    for n in range(-5, 5):
        v = n + 0.5
        assert residual(v, d) == 0.5
        assert quantize_scalar(-v, d) != -quantize_scalar(v, d)


def test_boundary_points_map_to_left_lattice_point():
    for d in (0.25, 1.0, 4.0):
        n = np.arange(-1000, 1001)
        up = n * d + d / 2
        lo = n * d - d / 2
        np.testing.assert_array_equal(quantize_index(up, d), n)
        np.testing.assert_array_equal(quantize_index(lo, d), n - 1)


def test_residual_array_matches_scalar():
    rng = np.random.default_rng(3)
    v = rng.normal(scale=5, size=200)
    r = residual(v, 0.1)
    assert all(r[i] == residual(float(v[i]), 0.1) for i in range(v.size))
