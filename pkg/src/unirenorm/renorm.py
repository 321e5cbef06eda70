"""Decomposed renormalization of pairs, classic renormalization, and the
composition map L with its derivative and right inverse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Chebyshev

from .errors import NestingError, NoCycleError, RenormError
from .funcs import (
    DEFAULT_DEGREE,
    OrientedInterval,
    PolyDiffeo,
    cheb_nodes,
    fit_from_samples,
    grid_nodes,
    pin_endpoints,
    qt_eval,
    vals_to_coeffs,
    zoom,
)
from .unimodal import Cycle, Pair, UnimodalPermutation, combinatorics_of, find_cycle, iterate


@dataclass(frozen=True)
class DecomposedStep:
    """Pieces (phi_0, q_1, phi_1, ..., q_{q-1}, phi_{q-1}) in application order."""

    pieces: tuple
    t_next: float
    cycle: Cycle

    @property
    def phis(self) -> tuple:
        return self.pieces[0::2]

    @property
    def qs(self) -> tuple:
        return self.pieces[1::2]

    def compose(self, x):
        for piece in self.pieces:
            x = piece(x)
        return x


def _cycle_for(pair: Pair, sigma: UnimodalPermutation | None, q: int | None = None) -> Cycle:
    q = sigma.period if sigma is not None else q
    cyc = find_cycle(pair, q)
    if cyc is None:
        raise NoCycleError(f"no admissible cycle of period {q} at t={pair.t!r}")
    if sigma is not None and cyc.combinatorics != sigma:
        raise NoCycleError(f"cycle combinatorics {cyc.combinatorics.images} differ from {sigma.images}")
    return cyc


def phi_preimage_interval(pair: Pair, I: OrientedInterval) -> OrientedInterval:
    """phi^{-1}(I) with the orientation of I."""
    lo, hi = pair.phi.inverse(np.array([I.lo, I.hi]))
    return OrientedInterval(float(lo), float(hi), I.orientation)


def t_next(pair: Pair, cycle: Cycle) -> float:
    """|q_t(I_q)| / |phi^{-1}(I_1)|."""
    P = abs(cycle.p)
    return 2.0 * pair.t * P ** pair.alpha / phi_preimage_interval(pair, cycle.interval(1)).length


def decompose(pair: Pair, cycle: Cycle, degree: int | None = None) -> DecomposedStep:
    """Zoomed pieces of the first return map along `cycle`."""
    degree = pair.phi.degree if degree is None else degree
    q = cycle.period
    phi = pair.phi
    params = pair.params

    def qt(x):
        return qt_eval(params, x)

    pieces = [zoom(phi, phi_preimage_interval(pair, cycle.interval(1)), degree, target=cycle.interval(1))]
    for i in range(1, q):
        I, J = cycle.interval(i), cycle.interval(i + 1)
        K = phi_preimage_interval(pair, J)
        pieces.append(zoom(qt, I, degree, target=K))
        pieces.append(zoom(phi, K, degree, target=J))
    return DecomposedStep(tuple(pieces), t_next(pair, cycle), cycle)


def renormalize(pair: Pair, sigma: UnimodalPermutation | None = None, degree: int | None = None,
                cycle: Cycle | None = None) -> tuple:
    """One step of the decomposed operator; returns (new pair, DecomposedStep).

    With `sigma` absent the doubling combinatorics is used.
    """
    sigma = UnimodalPermutation.doubling() if sigma is None else sigma
    degree = pair.phi.degree if degree is None else degree
    if cycle is None:
        cycle = _cycle_for(pair, sigma)
    step = decompose(pair, cycle, degree)
    fit = fit_from_samples(step.compose, degree)
    phi = PolyDiffeo(pin_endpoints(fit.coeffs), max(fit.residual, max(pc.residual for pc in step.pieces)))
    if not 0.0 < step.t_next <= 1.0 + 1e-12:
        raise RenormError(f"renormalized parameter {step.t_next!r} outside (0, 1]")
    return Pair.make(phi, min(step.t_next, 1.0), pair.alpha), step


def renormalize_n(pair: Pair, n: int, sigma: UnimodalPermutation | None = None, degree: int | None = None) -> list:
    """[pair, R(pair), ..., R^n(pair)]."""
    out = [pair]
    for _ in range(n):
        out.append(renormalize(out[-1], sigma, degree)[0])
    return out


# --------------------------------------------------------------------------
# classic operator and the composition map


def compose_L(pair: Pair):
    """The unimodal map phi o q_t as a callable."""
    return lambda x: pair(x)


def classic_renormalize(f, q: int, p: float, tol: float = 1e-10):
    """z -> f^q(p z) / p.

    p must satisfy f^q(p) = +-p; the minus sign is the one that makes the
    result normalized as f(+-1) = -1 when f is normalized that way.
    """
    if abs(p) < 1e-14:
        raise ValueError("p must be nonzero")
    fq = float(iterate(f, np.array([p]), q)[0])
    if min(abs(fq - p), abs(fq + p)) > tol:
        raise ValueError(f"f^{q}(p) = {fq!r} is not +-p for p = {p!r}")

    def g(z):
        return iterate(f, p * np.asarray(z, dtype=float), q) / p

    return g


def _even_exponent(alpha: float) -> int:
    r = alpha / 2.0
    if abs(r - round(r)) > 1e-12 or round(r) < 1:
        raise ValueError(f"exponent {alpha!r} is not an even integer")
    return int(round(r))


def dL(pair: Pair, omega, v: float):
    """Derivative of L at `pair` in direction (omega, v); even exponents only."""
    r = _even_exponent(pair.alpha)
    params = pair.params

    def w(x):
        x = np.asarray(x, dtype=float)
        y = qt_eval(params, x)
        return omega(y) + pair.phi.derivative(y) * 2.0 * v * (1.0 - x ** (2 * r))

    return w


@dataclass(frozen=True)
class Lift:
    omega: Chebyshev
    b: float


PSI_CHOP = 1e-13


def F_lift(w, pair: Pair, degree: int = DEFAULT_DEGREE, odd_tol: float = 1e-10) -> Lift:
    """Right inverse of dL at `pair` on even fields w = psi(x^{2r}) vanishing at +-1.

    Writing w = beta o q_t, the lift is b = t beta(1) / (2 Dphi(1)) and
    omega(y) = beta(y) - Dphi(y) b (1 + y) / t.
    """
    r = _even_exponent(pair.alpha)
    t = pair.t
    x = cheb_nodes(degree)
    wc = vals_to_coeffs(np.asarray(w(x), dtype=float))
    if np.sum(np.abs(wc[1::2])) > odd_tol * max(1.0, np.sum(np.abs(wc))):
        raise ValueError("vector field is not even")
    if max(abs(w(np.array([1.0]))[0]), abs(w(np.array([-1.0]))[0])) > 1e-10:
        raise ValueError("vector field does not vanish at +-1")
    psi = Chebyshev.interpolate(lambda s: w(np.clip(s, 0.0, None) ** (1.0 / (2 * r))), degree, domain=[0.0, 1.0])
    # beta(1) lies outside the sampled range; rounding noise in the tail
    # coefficients would be amplified by the extrapolation, so drop it
    psi = psi.trim(PSI_CHOP * max(np.max(np.abs(psi.coef)), 1e-300))

    def beta(y):
        return psi((2.0 * t - 1.0 - y) / (2.0 * t))

    dphi1 = float(pair.phi.derivative(1.0))
    b = t * float(beta(1.0)) / (2.0 * dphi1)

    def omega_vals(y):
        return beta(y) - pair.phi.derivative(y) * b * (1.0 + y) / t

    omega = Chebyshev.interpolate(omega_vals, degree)
    return Lift(omega, b)


def injectivity_probe(pair1: Pair, pair2: Pair, n: int = 2048) -> float:
    """Max deviation of L(pair1) - L(pair2) on a Chebyshev grid."""
    x = grid_nodes(n)
    return float(np.max(np.abs(pair1(x) - pair2(x))))


# --------------------------------------------------------------------------
# deep cycles through the renormalization hierarchy


@dataclass(frozen=True)
class Hierarchy:
    """Nested cycles of f at depths 1..N (cycles[n-1] has period q^n) and the
    renormalized pairs R^k(pair), k = 0..N-1, used to build them."""

    cycles: tuple
    pairs: tuple


def _scale_interval(s: float, I: OrientedInterval) -> OrientedInterval:
    a, b = s * I.start, s * I.end
    return OrientedInterval.from_endpoints(a, b)


def nested_cycles(pair: Pair, depth: int, sigma: UnimodalPermutation | None = None,
                  degree: int | None = None, renormalized: list | None = None) -> Hierarchy:
    """Cycles of f of periods q, q^2, ..., q^depth.

    The level-n periodic point and the intervals that return to the
    central interval of level n-1 are transported from the cycle of
    R^{n-1}(pair) by the linear chart relating the two maps; the other
    intervals are pullbacks along the parent level.
    """
    sigma = UnimodalPermutation.doubling() if sigma is None else sigma
    q = sigma.period
    pairs = list(renormalized) if renormalized is not None else [pair]
    while len(pairs) < depth:
        pairs.append(renormalize(pairs[-1], sigma, degree)[0])
    cycles = []
    scale = 1.0
    parent = None
    for n in range(1, depth + 1):
        g = pairs[n - 1]
        cyc_g = _cycle_for(g, sigma)
        if n == 1:
            cycles.append(cyc_g)
            parent = cyc_g
            scale = -cyc_g.p
            continue
        Q = q ** (n - 1)
        qn = Q * q
        anchors = {m * Q: _scale_interval(scale, cyc_g.interval(m)) for m in range(1, q + 1)}
        p_n = scale * cyc_g.p
        intervals = [None] * qn
        for i, I in anchors.items():
            intervals[i - 1] = I
        for m in range(1, q + 1):
            nxt = anchors[m * Q]
            for i in range(m * Q - 1, (m - 1) * Q, -1):
                par = parent.interval(i % Q)
                side = 1 if par.lo >= 0 else -1
                ends = pair.preimage(np.array([max(nxt.lo, -1.0), min(nxt.hi, pair.critical_value)]), side)
                start = float(pair.preimage(np.array([min(max(nxt.start, -1.0), pair.critical_value)]), side)[0])
                lo, hi = float(min(ends)), float(max(ends))
                orient = 1 if abs(start - lo) <= abs(start - hi) else -1
                nxt = OrientedInterval(lo, hi, orient)
                intervals[i - 1] = nxt
        cyc = Cycle(tuple(intervals), p_n, combinatorics_of(intervals))
        _check_nesting(cyc, parent)
        cycles.append(cyc)
        parent = cyc
        scale *= -cyc_g.p
    return Hierarchy(tuple(cycles), tuple(pairs[:depth]))


def _check_nesting(child: Cycle, parent: Cycle, rel_tol: float = 1e-9):
    Q = parent.period
    for i, I in enumerate(child.intervals, start=1):
        J = parent.interval(i)
        tol = rel_tol * J.length
        if I.lo < J.lo - tol or I.hi > J.hi + tol:
            raise NestingError(f"level-{child.period} interval {i} escapes its parent {(i - 1) % Q + 1}")

