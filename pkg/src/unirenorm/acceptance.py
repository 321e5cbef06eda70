"""Acceptance criteria as executable checks with a deterministic report.

Each criterion returns a CriterionResult; `run_suite` evaluates a
selection sharing one Context, so fixed points solved for one criterion
are reused by the next.  Report lines contain no timings; runtime limits
enter only as pass/fail flags.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C

from .bounds import decomposition_decay, orbit_univalence, real_bounds_report
from .errors import RenormError
from .funcs import PolyDiffeo, grid_nodes, pin_endpoints
from .oracle import cascade_delta
from .records import RunConfig
from .renorm import classic_renormalize, injectivity_probe, nested_cycles, renormalize
from .solver import (
    FixedPointRecord,
    accumulation_parameter,
    continue_in_alpha,
    find_superstable_t,
    fixed_point,
    iterate_orbit,
)
from .spectral import spectral_report, spectrum_equality_check
from .unimodal import Pair

ORACLE_REFERENCE_DELTA = 4.669201
SWEEP = tuple(round(1.6 + 0.05 * k, 2) for k in range(17))
CODIM_ALPHAS = (1.8, 1.9, 2.0, 2.1, 2.2)
PERTURBATION_SUP = 0.05
BURN_IN = 2
ORBIT_LENGTH = 8


@dataclass(frozen=True)
class CriterionResult:
    number: int
    key: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict, compare=False)
    elapsed: float = field(default=0.0, compare=False)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.number:2d} {self.key}: {self.detail}"


class Context:
    """Per-run cache of fixed points, spectra and test pairs."""

    def __init__(self, config: RunConfig | None = None):
        self.config = RunConfig() if config is None else config
        self.records: dict = {}
        self.spectra: dict = {}
        self._test_pairs = None
        self._oracle12 = None

    def record(self, alpha: float) -> FixedPointRecord:
        alpha = round(float(alpha), 12)
        if alpha not in self.records:
            if not self.records:
                cfg = self.config
                self.records[2.0] = fixed_point(2.0, cfg.permutation, degree=cfg.degree, tol=cfg.newton_tol)
            if alpha not in self.records:
                near = min(self.records, key=lambda a: (abs(a - alpha), a))
                self.records[alpha] = continue_in_alpha(self.records[near], alpha, 0.05, self.config.newton_tol)
        return self.records[alpha]

    def spectrum(self, alpha: float):
        alpha = round(float(alpha), 12)
        if alpha not in self.spectra:
            self.spectra[alpha] = spectral_report(self.record(alpha))
        return self.spectra[alpha]

    def oracle12(self):
        if self._oracle12 is None:
            self._oracle12 = cascade_delta(2.0, 12)
        return self._oracle12

    def test_pairs(self) -> list:
        """(name, pair) for the identity and a cubic perturbation of sup norm
        0.05, each at the accumulation parameter of its own cascade."""
        if self._test_pairs is None:
            out = []
            for name, phi in (("identity", PolyDiffeo.identity(self.config.degree)),
                              ("cubic", perturbed_identity(PERTURBATION_SUP, self.config.degree))):
                t = accumulation_parameter(phi, 2.0, 12)
                out.append((name, Pair.make(phi, t, 2.0)))
            self._test_pairs = out
        return self._test_pairs


def perturbed_identity(sup: float, degree: int) -> PolyDiffeo:
    """x + c (x - x^3) with sup norm of the perturbation equal to `sup`."""
    c = sup * 3.0 * math.sqrt(3.0) / 2.0
    coeffs = np.zeros(degree + 1)
    coeffs[:4] = C.poly2cheb([0.0, 1.0 + c, 0.0, -c])
    return PolyDiffeo(pin_endpoints(coeffs))


def geometric_rate(distances, start: int) -> float:
    """exp of the least-squares slope of log distance against index from `start` on."""
    d = np.asarray(distances[start:], dtype=float)
    k = np.arange(start, start + len(d))
    return float(math.exp(np.polyfit(k, np.log(d), 1)[0]))


# --------------------------------------------------------------------------
# criteria


def c_oracle_delta(ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    tab = cascade_delta(2.0, 9)
    dt = time.perf_counter() - t0
    err = abs(tab.delta - ORACLE_REFERENCE_DELTA)
    ok = err < 1e-3 and dt < 30
    return CriterionResult(1, "oracle-delta", ok, f"delta(levels 9) = {tab.delta:.8f}, |err| = {err:.2e} (< 1e-3), "
                           f"runtime under 30 s: {dt < 30}", {"delta": tab.delta}, dt)


def c_operator_delta(ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    rep = ctx.spectrum(2.0)
    dt = time.perf_counter() - t0
    ref = ctx.oracle12().delta
    rel = abs(rep.delta - ref) / ref
    ok = rel < 1e-3 and dt < 120
    return CriterionResult(2, "operator-delta", ok, f"delta = {rep.delta:.10f} vs oracle {ref:.8f}, rel = {rel:.2e} "
                           f"(< 1e-3), runtime under 120 s: {dt < 120}", {"delta": rep.delta, "oracle": ref}, dt)


def c_codimension(ctx: Context) -> CriterionResult:
    counts = {a: ctx.spectrum(a).expanding_count for a in CODIM_ALPHAS}
    ok = all(c == 1 for c in counts.values())
    detail = "expanding counts " + ", ".join(f"{a:g}:{c}" for a, c in counts.items()) + " (all 1)"
    return CriterionResult(3, "codimension-one", ok, detail, {"counts": counts})


def c_continuation(ctx: Context) -> CriterionResult:
    res, jumps = {}, []
    for side in (tuple(a for a in SWEEP if a >= 2.0), tuple(a for a in reversed(SWEEP) if a <= 2.0)):
        prev = None
        for a in side:
            try:
                rec = ctx.record(a)
            except RenormError as exc:
                return CriterionResult(4, "continuation", False, f"failed at alpha={a:g}: {exc}")
            res[a] = rec.residual
            if prev is not None:
                jumps.append(abs(rec.t_star - prev.t_star))
            prev = rec
    worst = max(res.values())
    ok = worst <= 1e-10 and max(jumps) < 0.05
    return CriterionResult(4, "continuation", ok, f"{len(res)} stops on [1.6, 2.4], max residual {worst:.1e} "
                           f"(<= 1e-10), max |dt*| {max(jumps):.4f} (< 0.05)", {"residuals": res})


def conjugacy_pairs(ctx: Context) -> list:
    rec = ctx.record(2.0)
    d = ctx.config.degree
    pairs = [("fixed-point", rec.pair)] + ctx.test_pairs()
    pairs.append(("fixed-point-shifted-t", Pair.make(rec.phi_star, rec.t_star + 2e-3, 2.0)))
    pairs.append(("identity-t0.87", Pair.make(PolyDiffeo.identity(d), 0.87, 2.0)))
    return pairs


def conjugacy_deviation(pair: Pair, n_grid: int = 2048) -> float:
    new, step = renormalize(pair)
    Rf = classic_renormalize(pair, step.cycle.period, -step.cycle.p)
    x = grid_nodes(n_grid)
    return float(np.max(np.abs(new(x) - Rf(x))))


def c_conjugacy(ctx: Context) -> CriterionResult:
    devs = {name: conjugacy_deviation(p) for name, p in conjugacy_pairs(ctx)}
    worst = max(devs.values())
    return CriterionResult(5, "conjugacy", worst < 1e-9, f"max |L(R~ pair) - R(L pair)| over {len(devs)} pairs "
                           f"{worst:.2e} (< 1e-9)", {"deviations": devs})


def c_spectrum_equality(ctx: Context) -> CriterionResult:
    rep = spectrum_equality_check(ctx.record(2.0))
    worst = float(np.max(rep.relative_differences))
    return CriterionResult(6, "spectrum-equality", rep.passed,
                           f"top-5 max rel diff {worst:.2e} (<= 1e-5), multiplicities {rep.pair_multiplicities} vs "
                           f"{rep.classic_multiplicities}, conjugation residual {rep.conjugation_residual:.1e}",
                           {"pair": rep.pair_eigenvalues, "classic": rep.classic_eigenvalues})


def c_superstable(ctx: Context) -> CriterionResult:
    t = find_superstable_t(None, 2.0, 2, (0.7, 0.9))
    err = abs(t - (1 + math.sqrt(5)) / 4)
    return CriterionResult(7, "superstable", err < 1e-12, f"t = {t:.16f}, |err| = {err:.1e} (< 1e-12)")


def c_universality(ctx: Context) -> CriterionResult:
    rec = ctx.record(2.0)
    lam2 = abs(ctx.spectrum(2.0).second)
    parts, ok = [], True
    vals = {}
    for name, pair in ctx.test_pairs():
        orb = iterate_orbit(pair, rec.sigma, ORBIT_LENGTH, rec)
        d = orb.distances()
        if not orb.complete:
            return CriterionResult(8, "universality", False, f"{name}: renormalizability lost")
        rate = geometric_rate(d, BURN_IN)
        mismatch = abs(1.0 / rate - 1.0 / lam2) * lam2
        ok &= d[ORBIT_LENGTH] < 1e-6 and mismatch <= 0.1
        vals[name] = (d[ORBIT_LENGTH], rate)
        parts.append(f"{name}: d8 = {d[ORBIT_LENGTH]:.1e}, 1/rate = {1 / rate:.3f} ({mismatch:.1%})")
    return CriterionResult(8, "universality", ok, "; ".join(parts) + f"; 1/|lambda2| = {1 / lam2:.3f}", vals)


def c_real_bounds(ctx: Context) -> CriterionResult:
    h = nested_cycles(ctx.record(2.0).pair, 8)
    rep = real_bounds_report(h.cycles, 2.0)
    lo, hi = rep.ratio_range(range(3, 9))
    ok = 0.05 < lo and hi < 0.95
    return CriterionResult(9, "real-bounds", ok, f"ratios for n = 3..8 in [{lo:.4f}, {hi:.4f}] (inside (0.05, 0.95))")


def c_decay(ctx: Context) -> CriterionResult:
    pair = ctx.record(2.0).pair
    h = nested_cycles(pair, 8)
    rep = decomposition_decay(pair, h.cycles)
    slope = rep.phi_slope(range(2, 9))
    prof = [s for _, s in rep.q_profile(6)]
    decreasing = all(b < a for a, b in zip(prof, prof[1:]))
    ok = slope < 0 and decreasing
    return CriterionResult(10, "decay", ok, f"slope of log S_phi over n = 2..8 {slope:.4f} (< 0), S_q(6, k) "
                           f"strictly decreasing over k = 1..{len(prof)}: {decreasing}")


def c_univalence(ctx: Context) -> CriterionResult:
    verdicts = {}
    for name, pair in ctx.test_pairs():
        rep = orbit_univalence(pair, 6, 0.1)
        verdicts[name] = all(rep.univalence.values())
    ok = all(verdicts.values())
    return CriterionResult(11, "univalence", ok, "diffeo parts n = 1..6 at radius 0.1: " +
                           ", ".join(f"{k} {'pass' if v else 'fail'}" for k, v in verdicts.items()))


def random_diffeo(rng, degree: int, scale: float) -> np.ndarray:
    """Coefficients of a random analytic diffeomorphism near the identity."""
    while True:
        c = np.zeros(degree + 1)
        c[1] = 1.0
        k = np.arange(2, 11)
        c[2:11] = scale * rng.standard_normal(9) / k ** 2
        phi = PolyDiffeo(pin_endpoints(c))
        if phi.min_derivative() > 0.05:
            return phi.coeffs


def injectivity_samples(n: int = 100, seed: int = 20240607, degree: int = 30, min_distance: float = 1e-4) -> list:
    rng = np.random.default_rng(seed)
    x = grid_nodes(2048)
    out = []
    while len(out) < n:
        c1 = random_diffeo(rng, degree, 0.05)
        s = 10 ** rng.uniform(-3.5, -1.0)
        c2 = c1.copy()
        c2[2:11] += s * rng.standard_normal(9) / np.arange(2, 11) ** 2
        p2 = PolyDiffeo(pin_endpoints(c2))
        if p2.min_derivative() <= 0.05:
            continue
        t1 = rng.uniform(0.6, 1.0)
        t2 = float(np.clip(t1 + s * rng.standard_normal(), 0.55, 1.0))
        a, b = Pair.make(PolyDiffeo(c1), t1, 2.0), Pair.make(p2, t2, 2.0)
        dist = max(float(np.max(np.abs(a.phi(x) - b.phi(x)))), abs(t1 - t2))
        if dist > min_distance:
            out.append((a, b, dist))
    return out


def c_injectivity(ctx: Context) -> CriterionResult:
    samples = injectivity_samples()
    devs = [injectivity_probe(a, b) for a, b, _ in samples]
    worst = min(devs)
    return CriterionResult(12, "injectivity", worst > 1e-8, f"{len(devs)} pair-pairs, min L-deviation {worst:.2e} (> 1e-8)")


DETERMINISM_SUBSET = ("superstable", "oracle-delta", "conjugacy", "real-bounds", "injectivity")


def c_determinism(ctx: Context) -> CriterionResult:
    reports = [format_report(run_suite(ctx.config, DETERMINISM_SUBSET)) for _ in range(2)]
    same = reports[0] == reports[1]
    return CriterionResult(13, "determinism", same, f"two fresh runs of {len(DETERMINISM_SUBSET)} criteria give "
                           f"byte-identical reports: {same}")


CRITERIA = {
    "oracle-delta": c_oracle_delta,
    "operator-delta": c_operator_delta,
    "codimension-one": c_codimension,
    "continuation": c_continuation,
    "conjugacy": c_conjugacy,
    "spectrum-equality": c_spectrum_equality,
    "superstable": c_superstable,
    "universality": c_universality,
    "real-bounds": c_real_bounds,
    "decay": c_decay,
    "univalence": c_univalence,
    "injectivity": c_injectivity,
    "determinism": c_determinism,
}
NUMBERS = {k: i for i, k in enumerate(CRITERIA, start=1)}


def resolve(selection) -> list:
    """Criterion keys from names or numbers; None selects all."""
    if selection is None:
        return list(CRITERIA)
    keys = []
    for s in selection:
        s = str(s).strip()
        if s.isdigit() and 1 <= int(s) <= len(CRITERIA):
            s = list(CRITERIA)[int(s) - 1]
        if s not in CRITERIA:
            raise KeyError(s)
        keys.append(s)
    return keys


def run_criterion(key: str, ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        res = CRITERIA[key](ctx)
    except Exception as exc:  # a crashing criterion is a failing one
        res = CriterionResult(NUMBERS[key], key, False, f"error {type(exc).__name__}: {exc}")
    if not res.elapsed:
        res = CriterionResult(res.number, res.key, res.passed, res.detail, res.values, time.perf_counter() - t0)
    return res


def run_suite(config: RunConfig | None = None, selection=None, ctx: Context | None = None, on_result=None) -> list:
    ctx = Context(config) if ctx is None else ctx
    out = []
    for key in resolve(selection):
        res = run_criterion(key, ctx)
        out.append(res)
        if on_result is not None:
            on_result(res)
    return out


def format_report(results) -> str:
    lines = [r.line() for r in results]
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} criteria passed")
    return "\n".join(lines) + "\n"
