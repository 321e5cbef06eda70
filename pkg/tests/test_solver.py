import math
import warnings

import numpy as np
import pytest

from unirenorm.errors import NumericError, PrecisionWarning
from unirenorm.funcs import PolyDiffeo, QtParams, qt_eval
from unirenorm.renorm import renormalize
from unirenorm.solver import (
    accumulation_parameter,
    confirm_residual,
    continue_in_alpha,
    find_superstable_t,
    fixed_point,
    iterate_orbit,
    pair_residual,
)
from unirenorm.unimodal import Pair, UnimodalPermutation, iterate

T_STAR_2 = 0.8866562298937984  # doubling fixed point at alpha = 2, degree 60


def f_q_at_zero(t, q, alpha=2.0):
    p = QtParams(t, alpha)
    return iterate(lambda x: qt_eval(p, x), np.array([0.0]), q)[0]


def test_superstable_examples():
    assert find_superstable_t(None, 2.0, 1, (0.3, 0.7)) == pytest.approx(0.5, abs=1e-15)
    assert find_superstable_t(None, 2.0, 2, (0.7, 0.9)) == pytest.approx((1 + math.sqrt(5)) / 4, abs=1e-15)
    t4 = find_superstable_t(None, 2.0, 4, (0.85, 0.88))
    assert 0.809 < t4 < 1
    assert abs(f_q_at_zero(t4, 4)) < 1e-13
    assert t4 == pytest.approx(0.8746404248319255, abs=1e-13)


def test_superstable_needs_sign_change():
    with pytest.raises(NumericError):
        find_superstable_t(None, 2.0, 1, (0.6, 0.7))


def test_superstable_ordering():
    brackets = {2: (0.7, 0.85), 4: (0.85, 0.88), 8: (0.885, 0.8905), 16: (0.8912, 0.8922)}
    ts = [find_superstable_t(None, 2.0, q, b) for q, b in brackets.items()]
    assert all(0 < t < 1 for t in ts)
    assert all(np.diff(ts) > 0)


def test_fixed_point_alpha_two(fp2):
    assert fp2.residual < 1e-10
    assert fp2.t_star == pytest.approx(T_STAR_2, abs=1e-9)
    assert fp2.phi_star.endpoint_error() < 1e-12
    assert fp2.phi_star.is_valid()
    assert fp2.confirm_residual <= max(10 * fp2.residual, 1e-10)


def test_newton_certificate(fp2):
    new, _ = renormalize(fp2.pair)
    assert pair_residual(fp2.pair, new) <= 10 * fp2.residual
    assert confirm_residual(fp2.pair, fp2.sigma, 80) < 1e-10


def test_accumulation_parameter_is_near_fixed_t():
    t_inf = accumulation_parameter(None, 2.0, 12)
    assert t_inf == pytest.approx(0.8924864179677341, abs=1e-10)


def test_continue_same_alpha_is_identity(fp2):
    assert continue_in_alpha(fp2, 2.0) is fp2
    with pytest.raises(ValueError):
        continue_in_alpha(fp2, 2.1, step=0.0)


@pytest.mark.slow
def test_continuation_round_trip(fp2):
    trail = []
    up = continue_in_alpha(fp2, 2.1, 0.05, trail=trail)
    assert [r.alpha for r in trail] == pytest.approx([2.05, 2.1])
    assert all(r.residual < 1e-10 for r in trail)
    ts = [fp2.t_star] + [r.t_star for r in trail]
    assert np.all(np.abs(np.diff(ts)) < 0.05)
    back = continue_in_alpha(up, 2.0, 0.05)
    assert abs(back.t_star - fp2.t_star) < 1e-8
    n = min(len(back.phi_star.coeffs), len(fp2.phi_star.coeffs))
    assert np.max(np.abs(back.phi_star.coeffs[:n] - fp2.phi_star.coeffs[:n])) < 1e-8


@pytest.mark.slow
def test_continuation_below_two(fp2):
    rec = continue_in_alpha(fp2, 1.9, 0.05)
    assert rec.residual < 1e-10
    assert rec.t_star < fp2.t_star


def test_orbit_of_fixed_point(fp2):
    orbit = iterate_orbit(fp2.pair, None, 3, fp2)
    assert orbit.complete
    assert orbit.distances()[0] == 0.0
    # the expanding direction amplifies the residual by about delta per step
    assert np.all(orbit.distances() <= 1e-10)


def test_orbit_contracts_toward_fixed_point(fp2):
    t_inf = accumulation_parameter(None, 2.0, 12)
    orbit = iterate_orbit(Pair.make(PolyDiffeo.identity(60), t_inf, 2.0), None, 8, fp2)
    assert orbit.complete
    d = orbit.distances()
    # two stable eigenvalues of similar size (0.160 and -0.124) make the
    # step ratios oscillate; the geometric rate over iterates 2..8 is steady
    assert np.all(d[3:] < d[2])
    rate = (d[8] / d[2]) ** (1 / 6)
    assert 0.1 < rate < 0.2
    assert d[-1] < 1e-7


@pytest.mark.slow
def test_period_three_smoke():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PrecisionWarning)
        rec = fixed_point(2.0, UnimodalPermutation((2, 3, 1)), degree=40, ladder=False)
    assert rec.residual < 1e-10
    assert rec.t_star == pytest.approx(0.9619002163564833, abs=1e-9)
    new, _ = renormalize(rec.pair, rec.sigma)
    assert pair_residual(rec.pair, new) <= 10 * max(rec.residual, 1e-14)
