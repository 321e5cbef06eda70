import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from numpy.polynomial import chebyshev as C

from unirenorm.errors import DegenerateIntervalError, MonotonicityError, NonFiniteError, RangeError, SectorError
from unirenorm.funcs import (
    OrientedInterval,
    PolyDiffeo,
    QtParams,
    Stadium,
    affine_to,
    cheb_nodes,
    compose_refit,
    fit_from_samples,
    grid_nodes,
    pin_endpoints,
    qt_complex_eval,
    qt_eval,
    zoom,
)


def cubic_half():
    """phi(x) = (x + x^3) / 2."""
    return PolyDiffeo(pin_endpoints(C.poly2cheb([0.0, 0.5, 0.0, 0.5])))


def random_diffeo(seed, degree=20, scale=0.1):
    rng = np.random.default_rng(seed)
    c = np.zeros(degree + 1)
    c[1] = 1.0
    c[2:8] = scale * rng.standard_normal(6) / np.arange(2, 8) ** 2
    return PolyDiffeo(pin_endpoints(c))


# --------------------------------------------------------------------------
# q_t


@pytest.mark.parametrize("t, alpha, x, expected", [
    (1.0, 2.0, 0.0, 1.0),
    (0.3, 2.7, 1.0, -1.0),
    (0.8, 1.5, -1.0, -1.0),
    (0.9, 2.0, 4.0 / 9.0, 4.0 / 9.0),
])
def test_qt_eval_examples(t, alpha, x, expected):
    assert qt_eval(QtParams(t, alpha), x) == pytest.approx(expected, abs=1e-15)


def test_qt_params_validation():
    with pytest.raises(ValueError):
        QtParams(1.1, 2.0)
    with pytest.raises(ValueError):
        QtParams(0.5, 1.0)


@given(st.floats(0, 1), st.floats(1.01, 5), st.floats(-1, 1))
def test_qt_range(t, alpha, x):
    y = qt_eval(QtParams(t, alpha), x)
    assert -1 - 1e-15 <= y <= 2 * t - 1 + 1e-15


def test_qt_complex_examples():
    assert qt_complex_eval(QtParams(1.0, 2.0), 0.5 + 0j, 1) == pytest.approx(0.5, abs=1e-15)
    assert qt_complex_eval(QtParams(0.5, 3.0), 1 + 0j, 1) == pytest.approx(-1.0, abs=1e-15)
    eps = 1e-3
    assert qt_complex_eval(QtParams(1.0, 2.0), 1j * eps, 1) == pytest.approx(1 + 2 * eps ** 2, abs=1e-15)
    with pytest.raises(SectorError):
        qt_complex_eval(QtParams(1.0, 3.0), 1j * eps, 1)
    with pytest.raises(SectorError):
        qt_complex_eval(QtParams(1.0, 3.0), 1j * eps, -1)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 2.5, 3.0, 4.0])
def test_qt_complex_matches_real_axis(alpha):
    p = QtParams(0.83, alpha)
    x = np.linspace(-0.999, 0.999, 201)
    x = x[x != 0]
    branch = np.where(x > 0, 1, -1)
    z = np.array([qt_complex_eval(p, xi + 0j, b) for xi, b in zip(x, branch)])
    assert np.max(np.abs(z - qt_eval(p, x))) < 1e-14


@given(st.floats(1e-3, 1.0), st.floats(0, 1))
def test_qt_complex_branch_independent_for_even_alpha(y, t):
    # for alpha = 2 the two closed sectors meet on the imaginary axis
    p = QtParams(t, 2.0)
    z = 1j * y
    assert abs(qt_complex_eval(p, z, 1) - qt_complex_eval(p, z, -1)) < 1e-13


# --------------------------------------------------------------------------
# intervals and affine maps


def test_affine_examples():
    A = affine_to(OrientedInterval(-1.0, 1.0, 1))
    assert (A.scale, A.shift) == (1.0, 0.0)
    A = affine_to(OrientedInterval(0.0, 1.0, 1))
    assert A(0.0) == -1.0 and A(0.25) == -0.5
    A = affine_to(OrientedInterval(0.0, 1.0, -1))
    assert A(0.0) == 1.0 and A(1.0) == -1.0 and A(0.25) == 0.5


def test_degenerate_interval():
    with pytest.raises(DegenerateIntervalError):
        OrientedInterval(0.3, 0.3)


@given(st.floats(-5, 5), st.floats(1e-6, 5), st.sampled_from([1, -1]))
def test_affine_inverse_roundtrip(lo, length, o):
    J = OrientedInterval(lo, lo + length, o)
    A = affine_to(J)
    x = np.linspace(J.lo, J.hi, 100)
    assert np.max(np.abs(A.inverse()(A(x)) - x)) <= 1e-14 * max(1.0, abs(lo) + length)


def test_stadium_grid_distance():
    s = Stadium(OrientedInterval(-1.0, 1.0), 0.1)
    b = s.boundary(200)
    d = np.abs(b - np.clip(b.real, -1, 1))
    assert np.allclose(d, 0.1, atol=1e-12)
    with pytest.raises(ValueError):
        Stadium(OrientedInterval(-1.0, 1.0), 0.0)


# --------------------------------------------------------------------------
# fitting, composition, zoom


def test_fit_identity_and_basis():
    assert np.allclose(fit_from_samples(lambda x: x, 10).coeffs, np.eye(11)[1], atol=1e-15)
    for k in (0, 3, 10):
        c = fit_from_samples(lambda x, k=k: C.chebval(x, np.eye(11)[k]), 10).coeffs
        assert np.max(np.abs(c - np.eye(11)[k])) < 1e-13


def test_fit_sine_degree_40():
    f = fit_from_samples(lambda x: np.sin(np.pi * x / 2), 40)
    x = np.linspace(-1, 1, 5001)
    assert np.max(np.abs(f(x) - np.sin(np.pi * x / 2))) < 1e-12


def test_fit_rejects_nonfinite():
    with pytest.raises(NonFiniteError):
        with np.errstate(divide="ignore", invalid="ignore"):
            fit_from_samples(lambda x: 1 / (x - x), 8)


def test_compose_refit_examples():
    ident = PolyDiffeo.identity(60)
    assert np.max(np.abs(compose_refit(ident, ident, 60).coeffs - ident.coeffs)) < 1e-15
    phi = random_diffeo(3)
    back = compose_refit(phi, phi.inverse, 60)
    x = np.linspace(-1, 1, 2001)
    assert np.max(np.abs(back(x) - x)) < 1e-10
    h = cubic_half()
    comp = compose_refit(h, h, 60)
    z = np.random.default_rng(17).uniform(-1, 1, 17)
    assert np.max(np.abs(comp(z) - h(h(z)))) < 1e-12


def test_compose_range_violation():
    with pytest.raises(RangeError):
        compose_refit(lambda x: x, lambda x: 1.5 * x, 20)


def test_zoom_examples():
    ident = PolyDiffeo.identity(30)
    z = zoom(ident, OrientedInterval(0.2, 0.7, -1), 30)
    assert np.max(np.abs(z.coeffs - ident.coeffs)) < 1e-14
    phi = random_diffeo(5, 30)
    z = zoom(phi, OrientedInterval(-1.0, 1.0), 30)
    assert np.max(np.abs(z.coeffs - phi.coeffs)) < 1e-13
    assert zoom(cubic_half(), OrientedInterval(0.0, 1.0), 30)(0.0) == pytest.approx(-3.0 / 8.0, abs=1e-14)


def test_zoom_rejects_fold():
    with pytest.raises(MonotonicityError):
        zoom(lambda x: x ** 2, OrientedInterval(-0.5, 0.5), 20)


@given(st.integers(0, 10 ** 6), st.floats(-0.9, 0.5), st.floats(0.05, 0.4), st.sampled_from([1, -1]))
def test_zoom_idempotent_and_valid(seed, lo, length, o):
    phi = random_diffeo(seed, 30)
    assume(phi.is_valid())
    z = zoom(phi, OrientedInterval(lo, lo + length, o), 30)
    assert z.is_valid()
    zz = zoom(z, OrientedInterval(-1.0, 1.0), 30)
    assert np.max(np.abs(zz.coeffs - z.coeffs)) < 1e-12


@given(st.integers(0, 10 ** 6))
def test_inverse_roundtrip(seed):
    phi = random_diffeo(seed, 25, 0.2)
    assume(phi.is_valid())
    x = grid_nodes(300)
    assert np.max(np.abs(phi.inverse(phi(x)) - x)) < 1e-13


@given(st.integers(0, 10 ** 6), st.integers(8, 40))
def test_pin_endpoints(seed, degree):
    c = np.random.default_rng(seed).standard_normal(degree + 1)
    p = PolyDiffeo(pin_endpoints(c))
    assert p.endpoint_error() < 1e-12


def test_with_degree_repins():
    phi = random_diffeo(9, 30)
    for d in (16, 40):
        assert phi.with_degree(d).endpoint_error() < 1e-14


def test_cheb_nodes_ascending():
    x = cheb_nodes(10)
    assert x[0] == -1.0 and x[-1] == 1.0 and np.all(np.diff(x) > 0)
    assert math.isclose(x[5], 0.0, abs_tol=1e-15)
