"""Empirical checks of the a priori bounds: real bounds ratios of nested
cycles, decay sums of the per-level decomposition, a univalence screen on
stadiums, and the stadium propagation and near-identity estimates.

Everything here is a screen on finite grids, not a proof.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LinearRing

from .errors import SectorError
from .funcs import OrientedInterval, QtParams, Stadium, qt_complex_eval
from .renorm import nested_cycles, phi_preimage_interval
from .unimodal import Cycle, Pair, UnimodalPermutation, level_sets

DECAY_RADIUS = 0.05
BOUNDARY_POINTS = 64
RADIAL_LAYERS = 16
UNIT = OrientedInterval(-1.0, 1.0)


# --------------------------------------------------------------------------
# real bounds


@dataclass(frozen=True)
class LevelRatios:
    level: int
    child: tuple
    gap: tuple


@dataclass
class BoundsReport:
    alpha: float
    levels: dict = field(default_factory=dict)
    phi_sums: dict = field(default_factory=dict)
    q_sums: dict = field(default_factory=dict)
    univalence: dict = field(default_factory=dict)

    def ratios(self, levels=None) -> np.ndarray:
        keys = sorted(self.levels) if levels is None else [n for n in levels if n in self.levels]
        out = [r for n in keys for r in self.levels[n].child + self.levels[n].gap]
        return np.array(out)

    def ratio_range(self, levels=None) -> tuple:
        r = self.ratios(levels)
        return float(r.min()), float(r.max())

    def b(self, levels=None) -> float:
        """Largest b with every recorded ratio in [b, 1 - b]."""
        r = self.ratios(levels)
        return float(min(r.min(), (1.0 - r).min()))

    def phi_slope(self, levels=None) -> float:
        """Least-squares slope of log S_phi(n) against n."""
        ns = sorted(self.phi_sums) if levels is None else [n for n in levels if n in self.phi_sums]
        y = np.log([self.phi_sums[n] for n in ns])
        return float(np.polyfit(ns, y, 1)[0])

    def q_profile(self, n: int) -> list:
        """[(k, S_q(n, k))] in increasing k."""
        return sorted((k, s) for (m, k), s in self.q_sums.items() if m == n)

    def to_csv(self) -> str:
        """Rows keyed by (alpha, n, k); k is empty for per-level quantities."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "n", "k", "quantity", "value"])
        a = repr(self.alpha)
        for n in sorted(self.levels):
            lv = self.levels[n]
            for r in lv.child:
                w.writerow([a, n, "", "child_ratio", f"{r:.17g}"])
            for r in lv.gap:
                w.writerow([a, n, "", "gap_ratio", f"{r:.17g}"])
        for n in sorted(self.phi_sums):
            w.writerow([a, n, "", "S_phi", f"{self.phi_sums[n]:.17g}"])
        for (n, k) in sorted(self.q_sums):
            w.writerow([a, n, k, "S_q", f"{self.q_sums[(n, k)]:.17g}"])
        for (n, r) in sorted(self.univalence):
            w.writerow([a, n, "", f"univalent_r{r:g}", int(self.univalence[(n, r)])])
        return buf.getvalue()


def _children(parent: OrientedInterval, cycle: Cycle, tol: float) -> list:
    return [I for I in cycle.intervals if parent.lo - tol <= I.lo and I.hi <= parent.hi + tol]


def _gaps(parent: OrientedInterval, kids: list) -> list:
    """Lengths of the components of parent minus the children (positive only)."""
    out = []
    edge = parent.lo
    for I in sorted(kids, key=lambda I: I.lo):
        if I.lo > edge:
            out.append(I.lo - edge)
        edge = max(edge, I.hi)
    if parent.hi > edge:
        out.append(parent.hi - edge)
    return out


def real_bounds_report(cycles, alpha: float = float("nan"), base: OrientedInterval = UNIT,
                       first_level: int = 1, rel_tol: float = 1e-9, report: BoundsReport | None = None) -> BoundsReport:
    """Child/parent and gap/parent length ratios of nested cycles.

    cycles[i] is the cycle of level first_level + i; the parent of the
    first one is `base`.  Gaps of relative length below `rel_tol` are
    shared endpoints and are not components.
    """
    from .errors import NestingError

    report = BoundsReport(alpha) if report is None else report
    parents = [base]
    for i, cyc in enumerate(cycles):
        n = first_level + i
        child, gap = [], []
        seen = 0
        for J in parents:
            kids = _children(J, cyc, rel_tol * J.length)
            seen += len(kids)
            child.extend(I.length / J.length for I in kids)
            gap.extend(g / J.length for g in _gaps(J, kids) if g > rel_tol * J.length)
        if seen != cyc.period:
            raise NestingError(f"level {n}: {cyc.period - seen} intervals outside the previous cycle")
        report.levels[n] = LevelRatios(n, tuple(child), tuple(gap))
        parents = list(cyc.intervals)
    return report


# --------------------------------------------------------------------------
# decay sums of the per-level decomposition


def _to_unit(I: OrientedInterval, z):
    """Oriented affine chart A_I (start -> -1)."""
    return I.orientation * (2.0 * z - I.lo - I.hi) / (I.hi - I.lo)


def _from_unit(I: OrientedInterval, s):
    return 0.5 * (I.lo + I.hi) + I.orientation * 0.5 * (I.hi - I.lo) * s


def decomposition_pieces(pair: Pair, cycle: Cycle) -> tuple:
    """Callables (phi_0, ..., phi_{q-1}) and (q_1, ..., q_{q-1}) for the
    decomposition along `cycle`, evaluated by exact composition so they
    extend to complex arguments."""
    params = QtParams(pair.t, pair.alpha)
    phi = pair.phi
    K = [phi_preimage_interval(pair, cycle.interval(j)) for j in range(1, cycle.period + 1)]

    def phi_piece(j):
        src, dst = K[j], cycle.interval(j + 1)
        return lambda z: _to_unit(dst, phi(_from_unit(src, z)))

    def q_piece(j):
        I, dst = cycle.interval(j), K[j]
        branch = 1 if I.lo > 0 else -1
        return lambda z: _to_unit(dst, qt_complex_eval(params, _from_unit(I, z), branch))

    phis = tuple(phi_piece(j) for j in range(cycle.period))
    qs = tuple(q_piece(j) for j in range(1, cycle.period))
    return phis, qs


def _dist_to_id(f, pts) -> float:
    return float(np.max(np.abs(f(pts) - pts)))


def decomposition_decay(pair: Pair, hierarchy_cycles, radius: float = DECAY_RADIUS, n_boundary: int = BOUNDARY_POINTS,
                        n_layers: int = RADIAL_LAYERS, report: BoundsReport | None = None,
                        levels=None) -> BoundsReport:
    """S_phi(n) = sum_j |phi_j^n - id| and S_q(n, k) = sum over L_k^n of |q_j^n - id|,
    sup norms over a stadium grid of the given radius (real base included)."""
    if len(hierarchy_cycles) < 4:
        raise ValueError("decay sums need at least 4 levels")
    report = BoundsReport(pair.alpha) if report is None else report
    pts = Stadium(UNIT, radius).grid(n_boundary, n_layers)
    ls = level_sets(hierarchy_cycles)
    for n, cyc in enumerate(hierarchy_cycles, start=1):
        if levels is not None and n not in levels:
            continue
        phis, qs = decomposition_pieces(pair, cyc)
        report.phi_sums[n] = sum(_dist_to_id(f, pts) for f in phis)
        for k, idx in ls.levels[n].items():
            js = [j for j in idx if j < cyc.period]
            if k == 0 or not js:
                continue
            try:
                report.q_sums[(n, k)] = sum(_dist_to_id(qs[j - 1], pts) for j in js)
            except SectorError:
                report.q_sums[(n, k)] = math.inf
    return report


def fixed_point_bounds(pair: Pair, depth: int = 8, sigma: UnimodalPermutation | None = None,
                       radius: float = DECAY_RADIUS) -> BoundsReport:
    """Real bounds ratios and decay sums along the nested cycles of `pair`."""
    h = nested_cycles(pair, depth, sigma)
    rep = real_bounds_report(h.cycles, pair.alpha)
    return decomposition_decay(pair, h.cycles, radius, report=rep)


# --------------------------------------------------------------------------
# univalence screen


def winding_number(values) -> int:
    """Winding number around 0 of the closed polygon through `values`."""
    w = np.asarray(values, dtype=complex)
    steps = np.angle(np.roll(w, -1) / w)
    return int(round(float(np.sum(steps)) / (2 * np.pi)))


def _simple_curve(values) -> bool:
    w = np.asarray(values, dtype=complex)
    if not np.all(np.isfinite(w)):
        return False
    ring = LinearRing(np.column_stack([w.real, w.imag]))
    return bool(ring.is_valid and ring.is_simple)


def univalent_on_curve(f, df, boundary, interior, deriv_floor: float = 1e-10) -> bool:
    """Screen: derivative bounded away from 0 on the sample points, no zero
    of the derivative enclosed by the boundary, and a simple boundary image."""
    d_in = np.abs(df(interior))
    d_bd = df(boundary)
    scale = max(float(np.max(d_in)), float(np.max(np.abs(d_bd))))
    if not np.all(np.isfinite(d_in)) or np.min(d_in) <= deriv_floor * scale:
        return False
    if np.min(np.abs(d_bd)) <= deriv_floor * scale or winding_number(d_bd) != 0:
        return False
    return _simple_curve(f(boundary))


def univalence_check(phi, s: Stadium, grid_density: int = BOUNDARY_POINTS, n_layers: int = RADIAL_LAYERS) -> bool:
    """Univalence screen of `phi` (callable with .derivative) on a stadium.

    The boundary is sampled with 8 * grid_density points for the winding
    and simplicity tests.  Deterministic for fixed density.
    """
    boundary = s.boundary(8 * grid_density)
    interior = s.grid(grid_density, n_layers)
    return univalent_on_curve(phi, phi.derivative, boundary, interior)


def orbit_univalence(pair: Pair, n: int, radius: float = 0.1, sigma: UnimodalPermutation | None = None,
                     report: BoundsReport | None = None) -> BoundsReport:
    """Univalence verdicts for the diffeomorphic parts of R^k(pair), k = 1..n."""
    from .renorm import renormalize

    report = BoundsReport(pair.alpha) if report is None else report
    cur = pair
    for k in range(1, n + 1):
        cur = renormalize(cur, sigma)[0]
        report.univalence[(k, radius)] = univalence_check(cur.phi, Stadium(UNIT, radius))
    return report


# --------------------------------------------------------------------------
# stadium propagation


def stadium_propagation(dist_to_id: float, rho_psi: float, K: float) -> float:
    """Lower bound e^{-K dist} rho_psi for the composable stadium radius."""
    if dist_to_id < 0 or rho_psi < 0 or K < 0:
        raise ValueError("inputs must be nonnegative")
    return math.exp(-K * dist_to_id) * rho_psi


def _dist_to_unit(w) -> np.ndarray:
    return np.abs(w - np.clip(w.real, -1.0, 1.0))


def safe_radius(f, rho_psi: float, n_boundary: int = 256, iters: int = 50) -> float:
    """Largest rho <= rho_psi with f(D_rho) inside D_{rho_psi}, by bisection.

    Containment is tested on the boundary of D_rho, which suffices for
    maps holomorphic on D_rho by the maximum principle applied to the
    distance from the image to [-1, 1] along the boundary sample.
    """
    def fits(rho):
        return float(np.max(_dist_to_unit(f(Stadium(UNIT, rho).boundary(n_boundary))))) <= rho_psi

    if fits(rho_psi):
        return float(rho_psi)
    lo, hi = 0.0, rho_psi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fits(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class PropagationCheck:
    K: float
    calibration_level: int
    check_level: int
    predicted: tuple
    measured: tuple

    @property
    def passed(self) -> bool:
        return all(p <= m * (1 + 1e-12) for p, m in zip(self.predicted, self.measured))


def _phi_dists_and_radii(pair: Pair, cycle: Cycle, rho_psi: float):
    phis, _ = decomposition_pieces(pair, cycle)
    pts = Stadium(UNIT, rho_psi).grid(BOUNDARY_POINTS, RADIAL_LAYERS)
    d = [_dist_to_id(f, pts) for f in phis]
    r = [safe_radius(f, rho_psi) for f in phis]
    return d, r


def propagation_check(pair: Pair, hierarchy_cycles, rho_psi: float = DECAY_RADIUS,
                      calibration_level: int = 3, check_level: int = 5) -> PropagationCheck:
    """Calibrate K as the smallest constant making the propagation bound hold
    for the phi pieces at one level, then compare prediction and
    measurement at another."""
    d, r = _phi_dists_and_radii(pair, hierarchy_cycles[calibration_level - 1], rho_psi)
    K = max([math.log(rho_psi / ri) / di for di, ri in zip(d, r) if di > 0 and ri < rho_psi] + [0.0])
    d5, r5 = _phi_dists_and_radii(pair, hierarchy_cycles[check_level - 1], rho_psi)
    pred = tuple(stadium_propagation(di, rho_psi, K) for di in d5)
    return PropagationCheck(K, calibration_level, check_level, pred, tuple(r5))


# --------------------------------------------------------------------------
# near-identity estimate


def mobius_map(a: float):
    """Disk automorphism restriction z -> (z + a) / (1 + a z); fixes +-1."""
    return (lambda z: (z + a) / (1 + a * z)), (lambda z: (1 - a * a) / (1 + a * z) ** 2)


def odd_cubic_map(b: float):
    """z -> z + b (z^3 - z); fixes +-1 and 0."""
    return (lambda z: z + b * (z ** 3 - z)), (lambda z: 1 + b * (3 * z ** 2 - 1))


def near_identity_family(K: float, strengths=(0.1, 0.3, 0.5, 0.7, 0.9)) -> list:
    """Named test maps whose univalence radius scales with K."""
    fam = []
    for c in strengths:
        fam.append((f"mobius({c:g}/K)", *mobius_map(c / K)))
        fam.append((f"cubic({c:g}/K^2)", *odd_cubic_map(c / (3.0 * K * K))))
    return fam


@dataclass(frozen=True)
class NearIdentityReport:
    K: float
    eps: float
    names: tuple
    distances: tuple
    ratios: tuple
    rejected: tuple

    @property
    def constant(self) -> float:
        """max over the family of |phi - id|_{B(0,eps)} / (eps / K)."""
        return max(self.ratios) if self.ratios else 0.0

    @property
    def max_distance(self) -> float:
        return max(self.distances) if self.distances else 0.0


def _circle(radius: float, n: int) -> np.ndarray:
    return radius * np.exp(2j * np.pi * np.arange(n) / n)


def near_identity_bound_check(family, K: float, eps: float, n_boundary: int = 512) -> NearIdentityReport:
    """Measure |phi - id| on B(0, eps) against eps / K over a family of
    (name, f, df) maps; maps failing the univalence screen on B(0, K) are
    rejected and listed."""
    if not (1.0 < eps < K / 2.0):
        raise ValueError("need 1 < eps < K/2")
    outer = _circle(K, n_boundary)
    inner = np.concatenate([_circle(K * s, n_boundary // 4) for s in (0.25, 0.5, 0.75)] + [np.zeros(1, complex)])
    ball = np.concatenate([_circle(eps, n_boundary)] + [_circle(eps * s, n_boundary // 4) for s in (0.25, 0.5, 0.75)])
    names, dists, ratios, rejected = [], [], [], []
    for name, f, df in family:
        if not univalent_on_curve(f, df, outer, inner):
            rejected.append(name)
            continue
        d = _dist_to_id(f, ball)
        names.append(name)
        dists.append(d)
        ratios.append(d / (eps / K))
    return NearIdentityReport(K, eps, tuple(names), tuple(dists), tuple(ratios), tuple(rejected))
