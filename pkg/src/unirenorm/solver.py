"""Superstable parameters, Newton fixed points of the decomposed operator,
continuation in the critical exponent, and orbit experiments."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import NewtonDivergence, NoCycleError, NumericError, RenormError
from .funcs import DEFAULT_DEGREE, GRID_SIZE, PolyDiffeo, QtParams, cheb_nodes, pin_endpoints, qt_eval
from .renorm import renormalize, t_next
from .oracle import aitken, superstable_cascade
from .unimodal import Pair, UnimodalPermutation, find_cycle, iterate

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_FD_STEP = 1e-7
MAX_NEWTON = 50
DEGREE_LADDER = (40, 60, 80)
CONFIRM_DEGREE = 80


def find_superstable_t(phi: PolyDiffeo | None, alpha: float, q: int, bracket: tuple,
                       tol: float = 1e-13) -> float:
    """t in `bracket` with f_t^q(0) = 0, where f_t = phi o q_t."""
    phi = PolyDiffeo.identity(2) if phi is None else phi

    def g(t):
        p = QtParams(t, alpha)
        return float(iterate(lambda x: phi(qt_eval(p, x)), np.array([0.0]), q)[0])

    a, b = bracket
    ga, gb = g(a), g(b)
    if ga == 0.0:
        return float(a)
    if gb == 0.0:
        return float(b)
    if ga * gb > 0:
        raise NumericError(f"no sign change of f^{q}(0) on [{a}, {b}]")
    t = brentq(g, a, b, xtol=1e-16, rtol=1e-15, maxiter=500)
    if abs(g(t)) >= tol:
        # the root is bracketed to machine precision; |f^q(0)| is then limited by conditioning
        log.debug("superstable residual %.3e at q=%d", abs(g(t)), q)
    return float(t)


def accumulation_parameter(phi=None, alpha: float = 2.0, levels: int = 12) -> float:
    """Limit of the doubling cascade of superstable parameters of phi o q_t (Aitken)."""
    ts = superstable_cascade(alpha, levels, phi)
    return aitken(ts)


# --------------------------------------------------------------------------
# Newton


def pair_to_vector(pair: Pair) -> np.ndarray:
    return np.concatenate([pair.phi.coeffs[2:], [pair.t]])


def vector_to_pair(u: np.ndarray, alpha: float) -> Pair:
    c = np.concatenate([[0.0, 0.0], u[:-1]])
    return Pair.make(PolyDiffeo(pin_endpoints(c)), float(u[-1]), alpha)


def operator_vector(u: np.ndarray, alpha: float, sigma: UnimodalPermutation) -> np.ndarray:
    """Coordinates of the renormalized pair."""
    pair = vector_to_pair(u, alpha)
    new, _ = renormalize(pair, sigma, pair.phi.degree)
    return pair_to_vector(new)


def fd_jacobian(u: np.ndarray, alpha: float, sigma: UnimodalPermutation, step: float,
                func=None) -> np.ndarray:
    """Central-difference Jacobian of the coordinate map of the operator.

    The step is scaled by max(1, |u_j|); if a perturbed pair stops being
    renormalizable the step is halved, at most four times.
    """
    func = (lambda v: operator_vector(v, alpha, sigma)) if func is None else func
    n = len(u)
    J = np.empty((n, n))
    for j in range(n):
        h = step * max(1.0, abs(u[j]))
        for _ in range(5):
            try:
                e = np.zeros(n)
                e[j] = h
                J[:, j] = (func(u + e) - func(u - e)) / (2 * h)
                break
            except (RenormError, ValueError):
                h /= 2
        else:
            raise NumericError(f"renormalizability lost when perturbing unknown {j}")
    return J


def pair_residual(pair: Pair, new: Pair) -> float:
    x = cheb_nodes(GRID_SIZE)
    return float(max(np.max(np.abs(new.phi(x) - pair.phi(x))), abs(new.t - pair.t)))


@dataclass(frozen=True, eq=False)
class FixedPointRecord:
    alpha: float
    t_star: float
    phi_star: PolyDiffeo
    residual: float
    degree: int
    sigma: UnimodalPermutation
    spectral: object = None
    history: tuple = field(default=())
    confirm_residual: float = math.nan

    @property
    def pair(self) -> Pair:
        return Pair.make(self.phi_star, self.t_star, self.alpha)


def _newton(pair: Pair, sigma, tol, fd_step, max_steps, alpha):
    u = pair_to_vector(pair)
    hist = []
    best = None
    for k in range(max_steps):
        try:
            g = operator_vector(u, alpha, sigma) - u
        except (RenormError, ValueError) as exc:
            raise NewtonDivergence(f"cycle lost during Newton at step {k}: {exc}", alpha) from exc
        cur = vector_to_pair(u, alpha)
        res = pair_residual(cur, vector_to_pair(u + g, alpha))
        hist.append(res)
        log.debug("newton step %d residual %.3e", k, res)
        if best is None or res < best[0]:
            best = (res, u.copy())
        if res <= tol and k > 0 and hist[-2] <= 1e3 * tol:
            break
        if k >= 6 and res > 0.5 * min(hist[:-3]):
            # no contraction; stop once the residual cannot improve further
            break
        J = fd_jacobian(u, alpha, sigma, fd_step)
        du = np.linalg.solve(J - np.eye(len(u)), -g)
        lam = 1.0
        while lam > 1e-3:
            try:
                operator_vector(u + lam * du, alpha, sigma)
                break
            except (RenormError, ValueError):
                lam /= 2
        u = u + lam * du
    return best, hist


def fixed_point(alpha: float, sigma: UnimodalPermutation | None = None, init: Pair | None = None,
                degree: int = DEFAULT_DEGREE, tol: float = NEWTON_TOL, fd_step: float = NEWTON_FD_STEP,
                max_steps: int = MAX_NEWTON, ladder: bool = True,
                confirm_degree: int | None = CONFIRM_DEGREE) -> FixedPointRecord:
    """Newton solve of R(phi, t) = (phi, t) in Chebyshev coordinates.

    Without `init` the seed is phi = id with t the accumulation parameter
    of the doubling cascade (the parameter solving t_next(id, t) = t for
    other combinatorics), followed by three forward iterations.  With
    `ladder` the solve runs at degree 40 and is refined at `degree`.
    The solution is then padded to `confirm_degree` and one more
    application of the operator must not move it by more than
    max(10 * residual, tol).
    """
    sigma = UnimodalPermutation.doubling() if sigma is None else sigma
    if init is None:
        init = _forward(seed_pair(alpha, sigma, 40 if ladder else degree), sigma, 3)
    stages = [d for d in DEGREE_LADDER if d < degree] + [degree] if ladder else [degree]
    pair = init
    hist_all = []
    res = math.inf
    for d in stages:
        pair = Pair.make(pair.phi.with_degree(d), pair.t, alpha)
        (res, u), hist = _newton(pair, sigma, tol, fd_step, max_steps, alpha)
        hist_all.extend(hist)
        pair = vector_to_pair(u, alpha)
    if not res <= tol:
        raise NewtonDivergence(f"Newton residual {res:.3e} above {tol:.1e} at alpha={alpha}", alpha)
    confirm = math.nan
    if confirm_degree is not None and confirm_degree > degree:
        confirm = confirm_residual(pair, sigma, confirm_degree)
        if not confirm <= max(10 * res, tol):
            raise NumericError(f"residual grows to {confirm:.3e} at degree {confirm_degree}")
    return FixedPointRecord(alpha, pair.t, pair.phi, res, degree, sigma, None, tuple(hist_all), confirm)


def confirm_residual(pair: Pair, sigma: UnimodalPermutation, degree: int) -> float:
    """Displacement under one operator step after padding to `degree`."""
    padded = Pair.make(pair.phi.with_degree(degree), pair.t, pair.alpha)
    try:
        new = renormalize(padded, sigma, degree)[0]
    except RenormError as exc:
        raise NumericError(f"confirmation step failed: {exc}") from exc
    return pair_residual(padded, new)


def _self_consistent_t(phi: PolyDiffeo, alpha: float, sigma: UnimodalPermutation, lo: float, hi: float,
                       n: int) -> float | None:
    """Root of t_next(phi, t) = t on a scan of [lo, hi], or None."""
    def h(t):
        pair = Pair.make(phi, t, alpha)
        cyc = find_cycle(pair, sigma.period)
        if cyc is None or cyc.combinatorics != sigma:
            return None
        return t_next(pair, cyc) - t

    prev = None
    for t in np.linspace(lo, hi, n):
        v = h(t)
        if v is not None and prev is not None and prev[1] * v < 0:
            return float(brentq(lambda s: h(s) if h(s) is not None else np.nan, prev[0], t, xtol=1e-14))
        prev = (t, v) if v is not None else None
    return None


def seed_pair(alpha: float, sigma: UnimodalPermutation, degree: int) -> Pair:
    phi = PolyDiffeo.identity(degree)
    if sigma == UnimodalPermutation.doubling():
        return Pair.make(phi, accumulation_parameter(None, alpha, 12), alpha)
    t = _self_consistent_t(phi, alpha, sigma, 0.5, 1.0, 501)
    if t is None:
        raise NoCycleError(f"no seed found for combinatorics {sigma.images}")
    return Pair.make(phi, t, alpha)


def _forward(pair: Pair, sigma: UnimodalPermutation, steps: int) -> Pair:
    """Iterate the operator, re-solving t after each step so that the
    expanding direction does not carry the parameter out of its window."""
    for _ in range(steps):
        try:
            new = renormalize(pair, sigma)[0]
        except RenormError:
            break
        if sigma != UnimodalPermutation.doubling():
            w = 0.01
            t = _self_consistent_t(new.phi, pair.alpha, sigma, max(new.t - w, 0.5), min(new.t + w, 1.0), 41)
            if t is None:
                break
            new = Pair.make(new.phi, t, pair.alpha)
        pair = new
    return pair


# --------------------------------------------------------------------------
# continuation and orbits


def continue_in_alpha(start: FixedPointRecord, alpha_target: float, step: float = 0.05,
                      tol: float = NEWTON_TOL, trail: list | None = None,
                      confirm_degree: int | None = CONFIRM_DEGREE) -> FixedPointRecord:
    """March from start.alpha to alpha_target re-solving at each stop.

    Stops are spaced by at most `step`; every intermediate record is
    appended to `trail` when given.  A failing stop raises
    NewtonDivergence carrying that exponent.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if alpha_target == start.alpha:
        return start
    n = max(1, math.ceil(abs(alpha_target - start.alpha) / step - 1e-9))
    stops = np.linspace(start.alpha, alpha_target, n + 1)[1:]
    rec = start
    for a in stops:
        a = float(round(a, 12))
        init = Pair.make(rec.phi_star, rec.t_star, a)
        try:
            new = fixed_point(a, rec.sigma, init, rec.degree, tol, ladder=False, confirm_degree=confirm_degree)
        except RenormError as exc:
            raise NewtonDivergence(f"continuation failed at alpha={a}: {exc}", a) from exc
        rec = new
        if trail is not None:
            trail.append(rec)
    return rec


@dataclass(frozen=True)
class OrbitStep:
    index: int
    phi_distance: float
    t_distance: float

    @property
    def distance(self) -> float:
        return max(self.phi_distance, self.t_distance)


@dataclass(frozen=True)
class Orbit:
    steps: tuple
    complete: bool
    pairs: tuple = field(default=(), repr=False)

    def distances(self) -> np.ndarray:
        return np.array([s.distance for s in self.steps])

    def contraction_factors(self) -> np.ndarray:
        d = self.distances()
        return d[1:] / d[:-1]


def iterate_orbit(pair: Pair, sigma: UnimodalPermutation | None, n: int,
                  reference: FixedPointRecord) -> Orbit:
    """Distances of R^k(pair) to the reference fixed point, k = 0..n."""
    sigma = UnimodalPermutation.doubling() if sigma is None else sigma
    x = cheb_nodes(GRID_SIZE)
    ref = reference.phi_star(x)
    steps, pairs = [], [pair]
    cur = pair
    complete = True
    for k in range(n + 1):
        steps.append(OrbitStep(k, float(np.max(np.abs(cur.phi(x) - ref))), abs(cur.t - reference.t_star)))
        if k == n:
            break
        try:
            cur = renormalize(cur, sigma, reference.degree)[0]
        except RenormError:
            complete = False
            break
        pairs.append(cur)
    return Orbit(tuple(steps), complete, tuple(pairs))
