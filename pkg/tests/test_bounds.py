import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from unirenorm.bounds import (
    decomposition_decay,
    fixed_point_bounds,
    mobius_map,
    near_identity_bound_check,
    near_identity_family,
    propagation_check,
    real_bounds_report,
    stadium_propagation,
    univalence_check,
    winding_number,
)
from unirenorm.errors import NestingError
from unirenorm.funcs import OrientedInterval, PolyDiffeo, Stadium
from unirenorm.renorm import nested_cycles
from unirenorm.unimodal import Cycle, Pair

IDENT = PolyDiffeo.identity(60)
UNIT = OrientedInterval(-1.0, 1.0)


class Square:
    """x -> x^2 with its derivative, for the univalence screen."""

    def __call__(self, z):
        return np.asarray(z) ** 2

    def derivative(self, z):
        return 2 * np.asarray(z)


@pytest.fixture(scope="module")
def fp_bounds(fp2):
    return fixed_point_bounds(fp2.pair, 8)


@pytest.fixture(scope="module")
def fp_cycles(fp2):
    return nested_cycles(fp2.pair, 8).cycles


# --------------------------------------------------------------------------
# real bounds


def test_fixed_point_ratios(fp_bounds):
    lo, hi = fp_bounds.ratio_range(range(3, 9))
    assert 0.05 < lo and hi < 0.95
    assert 0 < fp_bounds.b() < 0.5
    assert np.all((fp_bounds.ratios() > 0) & (fp_bounds.ratios() < 1))


def test_single_level_ratios():
    pair = Pair.make(IDENT, 0.9, 2.0)
    cyc = nested_cycles(pair, 1).cycles[0]
    rep = real_bounds_report([cyc])
    assert sorted(rep.levels[1].child) == pytest.approx(sorted(I.length / 2 for I in cyc.intervals), abs=1e-15)


def test_nesting_violation():
    outer = Cycle((OrientedInterval(0.1, 0.5), OrientedInterval(-0.5, 0.1, -1)), 0.1, None)
    stray = Cycle((OrientedInterval(0.6, 0.7),), 0.6, None)
    with pytest.raises(NestingError):
        real_bounds_report([outer, stray])


def test_ratios_converge_to_fixed_point_geometry(fp2, fp_bounds):
    from unirenorm.solver import accumulation_parameter

    t = accumulation_parameter(None, 2.0, 12)
    h = nested_cycles(Pair.make(IDENT, t, 2.0), 8)
    other = real_bounds_report(h.cycles, 2.0)
    gaps = []
    for n in (2, 5, 8):
        a = np.sort(np.array(other.levels[n].child))
        b = np.sort(np.array(fp_bounds.levels[n].child))
        gaps.append(np.max(np.abs(a - b)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-4


def _moved(cycles, scale, shift, sign):
    def move(I):
        a, b = sorted((sign * scale * I.lo + shift, sign * scale * I.hi + shift))
        return OrientedInterval(a, b, I.orientation * sign)

    out = [Cycle(tuple(move(I) for I in c.intervals), sign * scale * c.p + shift, c.combinatorics) for c in cycles]
    return out, move(UNIT)


def _same_report(a, b, tol):
    for n in a.levels:
        assert sorted(b.levels[n].child) == pytest.approx(sorted(a.levels[n].child), abs=tol)
        assert sorted(b.levels[n].gap) == pytest.approx(sorted(a.levels[n].gap), abs=tol)


@given(st.integers(-6, 6), st.sampled_from([1, -1]))
def test_ratios_invariant_under_exact_rescaling(fp_cycles, k, sign):
    moved, base = _moved(fp_cycles, 2.0 ** k, 0.0, sign)
    _same_report(real_bounds_report(fp_cycles), real_bounds_report(moved, base=base), 0.0)


@given(st.floats(0.1, 10), st.floats(-1, 1), st.sampled_from([1, -1]))
def test_ratios_invariant_under_affine_maps(fp_cycles, scale, offset, sign):
    # rounding the moved endpoints costs eps / (shortest length) in each
    # ratio, so the comparison stops at level 5 where lengths exceed 1e-3
    moved, base = _moved(fp_cycles[:5], scale, offset * scale, sign)
    _same_report(real_bounds_report(fp_cycles[:5]), real_bounds_report(moved, base=base), 1e-12)


# --------------------------------------------------------------------------
# decay sums


def test_phi_sums_decay(fp_bounds):
    assert fp_bounds.phi_slope(range(2, 9)) < -0.1


def test_q_sums_decay_in_k(fp_bounds):
    prof = [s for _, s in fp_bounds.q_profile(6)]
    assert len(prof) >= 3
    assert all(b / a < 1 for a, b in zip(prof, prof[1:]))


def test_identity_pair_first_level():
    from unirenorm.solver import accumulation_parameter

    pair = Pair.make(IDENT, accumulation_parameter(None, 2.0, 12), 2.0)
    h = nested_cycles(pair, 4)
    rep = decomposition_decay(pair, h.cycles, levels={1})
    assert rep.phi_sums[1] < 1e-13


def test_decay_needs_depth(fp_cycles, fp2):
    with pytest.raises(ValueError):
        decomposition_decay(fp2.pair, fp_cycles[:3])


def test_real_sums_below_stadium_sums(fp2, fp_cycles):
    small = decomposition_decay(fp2.pair, fp_cycles[:6], radius=1e-9, n_layers=2)
    wide = decomposition_decay(fp2.pair, fp_cycles[:6])
    for n in small.phi_sums:
        assert small.phi_sums[n] <= wide.phi_sums[n] * (1 + 1e-12)
    for key in small.q_sums:
        assert small.q_sums[key] <= wide.q_sums[key] * (1 + 1e-12)


def test_report_csv(fp_bounds):
    text = fp_bounds.to_csv()
    lines = text.splitlines()
    assert lines[0] == "alpha,n,k,quantity,value"
    assert any(",S_phi," in l for l in lines)
    assert any(",S_q," in l for l in lines)


# --------------------------------------------------------------------------
# univalence screen


@pytest.mark.parametrize("radius", [0.05, 0.5, 2.0])
def test_identity_is_univalent(radius):
    assert univalence_check(IDENT, Stadium(UNIT, radius))


def test_square_is_not_univalent():
    assert not univalence_check(Square(), Stadium(UNIT, 0.5))


def test_fixed_point_diffeo_is_univalent(fp2):
    assert univalence_check(fp2.phi_star, Stadium(UNIT, 0.1))


def test_univalence_monotone_in_radius(fp2):
    radii = [0.02, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6]
    verdicts = [univalence_check(fp2.phi_star, Stadium(UNIT, r)) for r in radii]
    # once the screen fails it keeps failing as the radius grows
    first_fail = verdicts.index(False) if False in verdicts else len(verdicts)
    assert all(verdicts[:first_fail]) and not any(verdicts[first_fail:])
    assert univalence_check(fp2.phi_star, Stadium(UNIT, 0.1), 128) == verdicts[2]


def test_winding_number():
    z = np.exp(2j * np.pi * np.arange(100) / 100)
    assert winding_number(z) == 1
    assert winding_number(z ** 2) == 2
    assert winding_number(z + 3) == 0


# --------------------------------------------------------------------------
# stadium propagation


def test_propagation_examples():
    assert stadium_propagation(0.0, 0.3, 5.0) == 0.3
    assert stadium_propagation(1.0, 1.0, 1.0) == pytest.approx(math.exp(-1), abs=1e-15)
    with pytest.raises(ValueError):
        stadium_propagation(-1.0, 1.0, 1.0)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 1))
def test_propagation_monotone(d, rho, K, extra):
    assert stadium_propagation(d + extra, rho, K) <= stadium_propagation(d, rho, K)
    assert stadium_propagation(d, rho, K) <= rho


@pytest.mark.xfail(strict=True, reason="K calibrated on level 3 undershoots level 5 by about 3e-8 relative")
def test_propagation_calibrated_on_level_three(fp2, fp_cycles):
    check = propagation_check(fp2.pair, fp_cycles, calibration_level=3, check_level=5)
    assert check.passed


def test_propagation_calibrated_on_same_level(fp2, fp_cycles):
    check = propagation_check(fp2.pair, fp_cycles, calibration_level=5, check_level=5)
    assert check.passed
    assert check.K > 0


# --------------------------------------------------------------------------
# near-identity estimate


def test_near_identity_of_identity():
    rep = near_identity_bound_check([("id", lambda z: z, lambda z: np.ones_like(z))], 100.0, 2.0)
    assert rep.distances == (0.0,)


def test_near_identity_mobius():
    rep = near_identity_bound_check([("m", *mobius_map(0.5 / 100))], 100.0, 2.0)
    assert rep.rejected == ()
    assert np.isfinite(rep.constant) and rep.constant > 0


def test_near_identity_scaling():
    eps = 2.0
    a = near_identity_bound_check(near_identity_family(50.0), 50.0, eps)
    b = near_identity_bound_check(near_identity_family(100.0), 100.0, eps)
    assert a.names == b.names and not a.rejected
    ratios = dict(zip(a.names, np.array(b.distances) / np.array(a.distances)))
    mobius = [r for name, r in ratios.items() if name.startswith("mobius")]
    assert mobius and all(abs(r - 0.5) <= 0.25 * 0.5 for r in mobius)
    # univalence on B(0, K) forces the cubic coefficient down like 1/K^2
    assert all(r == pytest.approx(0.25, rel=1e-9) for name, r in ratios.items() if name.startswith("cubic"))


def test_near_identity_rejects_non_univalent():
    rep = near_identity_bound_check([("sq", lambda z: z ** 2, lambda z: 2 * z)], 10.0, 2.0)
    assert rep.rejected == ("sq",)
    with pytest.raises(ValueError):
        near_identity_bound_check([], 3.0, 2.0)
