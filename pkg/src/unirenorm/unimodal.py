"""Unimodal maps f = phi o q_t: evaluation, cycles, combinatorics, level sets."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import NestingError, NumericError
from .funcs import GRID_SIZE, OrientedInterval, PolyDiffeo, QtParams, affine_to, grid_nodes, qt_derivative, qt_eval

SCAN_STEP = 1e-3
REPEL_MARGIN = 1e-8
OVERLAP_TOL = 1e-12
PERIODIC_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Pair:
    """A diffeomorphism phi and the parameters of q_t, read as f = phi o q_t."""

    phi: PolyDiffeo
    params: QtParams

    @property
    def t(self) -> float:
        return self.params.t

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @classmethod
    def make(cls, phi: PolyDiffeo, t: float, alpha: float) -> "Pair":
        return cls(phi, QtParams(t, alpha))

    def __call__(self, x):
        return self.phi(qt_eval(self.params, x))

    def derivative(self, x):
        return self.phi.derivative(qt_eval(self.params, x)) * qt_derivative(self.params, x)

    @property
    def critical_value(self) -> float:
        return float(self.phi(2.0 * self.t - 1.0))

    def preimage(self, y, side: int):
        """The x with f(x) = y and sign(x) = side; y must lie in [-1, f(0)]."""
        u = self.phi.inverse(y)
        s = np.clip((2.0 * self.t - 1.0 - u) / (2.0 * self.t), 0.0, None)
        return side * s ** (1.0 / self.alpha)

    def maps_into_interval(self) -> bool:
        y = self(grid_nodes())
        return bool(np.all(np.abs(y) <= 1.0 + 1e-12))


def eval_pair(pair: Pair, x):
    """phi(q_t(x))."""
    return pair(x)


def iterate(f, x, n: int):
    for _ in range(n):
        x = f(x)
    return x


def iterate_with_derivative(f, x, n: int):
    x = np.asarray(x)
    d = np.ones_like(x, dtype=np.result_type(x, float))
    for _ in range(n):
        d = d * f.derivative(x)
        x = f(x)
    return x, d


# --------------------------------------------------------------------------
# permutations


def _as_images(perm) -> tuple:
    if isinstance(perm, UnimodalPermutation):
        return perm.images
    return tuple(int(v) for v in perm)


def _is_single_cycle(images: tuple) -> bool:
    q = len(images)
    seen, i = 0, 1
    for _ in range(q):
        i = images[i - 1]
        seen += 1
        if i == 1:
            break
    return seen == q and i == 1


def is_unimodal_permutation(perm) -> bool:
    """True iff perm is a single q-cycle whose graph is increasing then decreasing."""
    images = _as_images(perm)
    q = len(images)
    if q == 0 or sorted(images) != list(range(1, q + 1)):
        return False
    if not _is_single_cycle(images):
        return False
    d = np.sign(np.diff(images))
    # one increasing run followed by one decreasing run (either may be empty)
    return not np.any(np.diff(d) > 0)


@dataclass(frozen=True)
class UnimodalPermutation:
    """images[i-1] = sigma(i), positions numbered left to right from 1."""

    images: tuple

    def __post_init__(self):
        object.__setattr__(self, "images", _as_images(self.images))
        if not is_unimodal_permutation(self.images):
            raise ValueError(f"{self.images} is not a unimodal cyclic permutation")

    @property
    def period(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i - 1]

    @property
    def peak(self) -> int:
        """Position of the interval containing the critical point."""
        return self.images.index(self.period) + 1

    @classmethod
    def doubling(cls, levels: int = 1) -> "UnimodalPermutation":
        sigma = cls((2, 1))
        for _ in range(levels - 1):
            sigma = star(sigma, cls((2, 1)))
        return sigma

    @property
    def name(self) -> str:
        if self == UnimodalPermutation.doubling(1):
            return "doubling"
        return "perm-" + "".join(str(v) for v in self.images) if self.period < 10 else \
            "perm-" + "-".join(str(v) for v in self.images)


def all_unimodal_permutations(q: int) -> list:
    return [UnimodalPermutation(p) for p in itertools.permutations(range(1, q + 1))
            if is_unimodal_permutation(p)]


def _orbit_positions(sigma: UnimodalPermutation) -> list:
    """positions[i-1] = position of I_i, using that I_1 is rightmost."""
    q = sigma.period
    pos = [q]
    for _ in range(q - 1):
        pos.append(sigma(pos[-1]))
    return pos


def star(outer: UnimodalPermutation, inner: UnimodalPermutation) -> UnimodalPermutation:
    """Combinatorics of renormalizing by `outer` and then by `inner`."""
    a, b = outer.period, inner.period
    opos = _orbit_positions(outer)
    ipos = _orbit_positions(inner)
    central = opos[a - 1]
    # eps[j-1]: orientation of f^{j-1} from I_1 to I_j of the outer cycle
    eps = [1]
    for j in range(1, a):
        eps.append(eps[-1] * (1 if opos[j - 1] < central else -1))
    pos = []
    for k in range(1, a * b + 1):
        m, j = divmod(k - 1, a)
        j += 1
        r = ipos[m]
        if eps[j - 1] < 0:
            r = b + 1 - r
        pos.append((opos[j - 1] - 1) * b + r)
    images = [0] * (a * b)
    for k in range(a * b):
        images[pos[k] - 1] = pos[(k + 1) % (a * b)]
    return UnimodalPermutation(tuple(images))


def _split(sigma: UnimodalPermutation, a: int):
    """Try sigma = star(outer, inner) with period(outer) = a."""
    q = sigma.period
    b = q // a
    block = [(i - 1) // b for i in range(1, q + 1)]
    block_images = {}
    for i in range(1, q + 1):
        tgt = block[sigma(i) - 1]
        if block_images.setdefault(block[i - 1], tgt) != tgt:
            return None
    outer_images = tuple(block_images[k] + 1 for k in range(a))
    if not is_unimodal_permutation(outer_images):
        return None
    outer = UnimodalPermutation(outer_images)
    c = block[sigma.peak - 1]
    members = list(range(c * b + 1, c * b + b + 1))
    raw = []
    for i in members:
        j = i
        for _ in range(a):
            j = sigma(j)
        raw.append(j - c * b)
    opos = _orbit_positions(outer)
    eps = 1
    for j in range(1, a):
        eps *= 1 if opos[j - 1] < opos[a - 1] else -1
    if eps < 0:
        raw = [b + 1 - raw[b - 1 - r] for r in range(b)]
    if not is_unimodal_permutation(raw):
        return None
    inner = UnimodalPermutation(tuple(raw))
    if star(outer, inner) != sigma:
        return None
    return outer, inner


def maximal_factorization(sigma: UnimodalPermutation) -> list:
    """Prime factors of sigma in application order (first renormalization first).

    The product of the factor periods equals the period of sigma; each
    factor admits no further splitting.
    """
    q = sigma.period
    for a in range(2, q):
        if q % a:
            continue
        split = _split(sigma, a)
        if split is not None:
            outer, inner = split
            return [outer] + maximal_factorization(inner)
    return [sigma]


def is_prime(sigma: UnimodalPermutation) -> bool:
    return len(maximal_factorization(sigma)) == 1


# --------------------------------------------------------------------------
# cycles


@dataclass(frozen=True)
class Cycle:
    """Intervals I_1..I_q (intervals[0] is I_1) and the periodic point p."""

    intervals: tuple
    p: float
    combinatorics: UnimodalPermutation

    @property
    def period(self) -> int:
        return len(self.intervals)

    def interval(self, i: int) -> OrientedInterval:
        """I_i with 1-based index; I_0 is identified with I_q."""
        q = self.period
        return self.intervals[(i - 1) % q]

    @property
    def central(self) -> OrientedInterval:
        return self.intervals[-1]


def combinatorics_of(cycle_or_intervals) -> UnimodalPermutation:
    intervals = cycle_or_intervals.intervals if isinstance(cycle_or_intervals, Cycle) else cycle_or_intervals
    q = len(intervals)
    order = np.argsort([I.lo for I in intervals], kind="stable")
    pos = np.empty(q, dtype=int)
    pos[order] = np.arange(1, q + 1)
    images = [0] * q
    for i in range(q):
        images[pos[i] - 1] = int(pos[(i + 1) % q])
    return UnimodalPermutation(tuple(images))


def _periodic_candidates(f, q: int) -> list:
    n = int(round(2.0 / SCAN_STEP))
    xs = np.linspace(-1.0, 1.0, n + 1)[1:-1]
    g = iterate(f, xs, q) - xs
    roots = []
    for k in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
        try:
            r = brentq(lambda x: float(iterate(f, np.array([x]), q)[0] - x), xs[k], xs[k + 1],
                       xtol=1e-15, rtol=1e-15, maxiter=200)
        except (ValueError, RuntimeError) as exc:
            raise NumericError(f"periodic point refinement failed near {xs[k]}") from exc
        roots.append(_polish_periodic(f, r, q))
    for k in np.nonzero(g == 0)[0]:
        roots.append(float(xs[k]))
    return roots


def _polish_periodic(f, x, q: int, steps: int = 3) -> float:
    for _ in range(steps):
        y, d = iterate_with_derivative(f, np.array([x]), q)
        if d[0] == 1.0:
            break
        dx = (y[0] - x) / (d[0] - 1.0)
        if abs(dx) > 1e-8:
            break
        x = x - dx
    return float(x)


def pullback_cycle(f, p: float, q: int, sides: Sequence[int] | None = None,
                   overlap_tol: float = OVERLAP_TOL):
    """Build I_q = [-|p|, |p|] and pull it back along the orbit of p.

    `sides[i-1]` gives the side of 0 on which I_i lies; by default it is
    read from the forward orbit of p.  Returns the tuple of intervals or
    None when the construction breaks one of the cycle conditions.
    """
    P = abs(p)
    if not 0 < P < 1:
        return None
    fc = f.critical_value
    if sides is None:
        orbit = [float(p)]
        for _ in range(q - 1):
            orbit.append(float(f(np.array([orbit[-1]]))[0]))
        sides = [1 if x > 0 else -1 for x in orbit[1:]]
    intervals = [None] * q
    intervals[q - 1] = OrientedInterval(-P, P, 1 if p < 0 else -1)
    nxt = (-P, P)
    starts = [None] * q
    starts[q - 1] = p
    for i in range(q - 1, 0, -1):
        lo, hi = nxt
        if hi > fc + 1e-14 or lo < -1.0 - 1e-14:
            return None
        lo, hi = max(lo, -1.0), min(hi, fc)
        s = sides[i - 1]
        ends = f.preimage(np.array([lo, hi]), s)
        a, b = float(min(ends)), float(max(ends))
        if not a < b or (a < 0 < b):
            return None
        # the orbit point f^i(p) is the preimage of the start of I_{i+1}
        nxt_start = starts[i]
        x_start = float(f.preimage(np.array([nxt_start]), s)[0])
        starts[i - 1] = x_start
        orient = 1 if abs(x_start - a) <= abs(x_start - b) else -1
        intervals[i - 1] = OrientedInterval(a, b, orient)
        nxt = (a, b)
    I1 = intervals[0]
    if not I1.contains(fc, tol=1e-14):
        return None
    srt = sorted(intervals, key=lambda I: I.lo)
    for u, v in zip(srt, srt[1:]):
        if v.lo < u.hi - overlap_tol:
            return None
    return tuple(intervals)


def find_cycle(f, q: int) -> Cycle | None:
    """Cycle of period q for the unimodal map f, or None when there is none.

    Candidates are the repelling fixed points of f^q found by a bracket
    scan; the central interval is [-|p|, |p|] and the remaining intervals
    are its pullbacks along the orbit of p.  Among admissible cycles the
    one with the smallest central interval is returned.
    """
    if q < 2:
        raise ValueError("period must be at least 2")
    best = None
    for p in _periodic_candidates(f, q):
        if abs(p) >= 1 - 1e-12:
            continue
        _, d = iterate_with_derivative(f, np.array([p]), q)
        if not abs(d[0]) > 1 + REPEL_MARGIN:
            continue
        intervals = pullback_cycle(f, p, q)
        if intervals is None:
            continue
        if best is None or abs(p) < abs(best[0]):
            best = (p, intervals)
    if best is None:
        return None
    p, intervals = best
    return Cycle(intervals, p, combinatorics_of(intervals))


def cycle_violations(f, cycle: Cycle, periodic_tol: float = PERIODIC_TOL) -> list:
    """Names of the cycle conditions that fail (empty when the cycle is valid)."""
    bad = []
    q = cycle.period
    p = cycle.p
    P = abs(p)
    Iq = cycle.central
    if abs(Iq.lo + P) > 1e-15 or abs(Iq.hi - P) > 1e-15:
        bad.append("central")
    if abs(iterate(f, np.array([p]), q)[0] - p) > periodic_tol:
        bad.append("periodic")
    nodes = grid_nodes(GRID_SIZE)
    for i in range(1, q):
        I, J = cycle.interval(i), cycle.interval(i + 1)
        y = f(affine_to(I).inverse()(nodes))
        d = np.diff(y)
        if not (np.all(d > 0) or np.all(d < 0)):
            bad.append(f"monotone[{i}]")
        tol = 1e-12 * max(1.0, 1.0 / J.length) * J.length + 1e-13
        if y.min() < J.lo - tol or y.max() > J.hi + tol:
            bad.append(f"image[{i}]")
    I1 = cycle.interval(1)
    fI = f(Iq.lo + (Iq.hi - Iq.lo) * (nodes + 1) / 2)
    if fI.min() < I1.lo - 1e-12 or fI.max() > I1.hi + 1e-12:
        bad.append("return")
    fp = float(f(np.array([p]))[0])
    if min(abs(fp - I1.lo), abs(fp - I1.hi)) > periodic_tol:
        bad.append("boundary")
    srt = sorted(cycle.intervals, key=lambda I: I.lo)
    for u, v in zip(srt, srt[1:]):
        if v.lo < u.hi - OVERLAP_TOL:
            bad.append("disjoint")
            break
    return bad


# --------------------------------------------------------------------------
# level sets


@dataclass(frozen=True)
class LevelSets:
    """levels[n][k] is the list of 1-based indices i with I_i^n in L_k^n.

    levels[0] = {0: [1]} stands for L_0^0 = {[-1, 1]}.
    """

    levels: tuple

    def sizes(self, n: int) -> tuple:
        lv = self.levels[n]
        return tuple(len(lv.get(k, [])) for k in range(max(lv) + 1))


def _parent_index(intervals, I: OrientedInterval, tol: float) -> int:
    for j, J in enumerate(intervals):
        if J.lo - tol <= I.lo and I.hi <= J.hi + tol:
            return j + 1
    raise NestingError(f"interval [{I.lo}, {I.hi}] is not contained in any parent")


def level_sets(cycles: Sequence[Cycle], tol: float = 1e-12) -> LevelSets:
    """Inductive partition of each cycle into levels L_k^n."""
    levels = [{0: [1]}]
    parents = (OrientedInterval(-1.0, 1.0),)
    parent_level = {1: 0}
    for cyc in cycles:
        cur = {}
        cur_level = {}
        for i, I in enumerate(cyc.intervals, start=1):
            if I.lo <= 0.0 <= I.hi:
                k = 0
            else:
                k = parent_level[_parent_index(parents, I, tol)] + 1
            cur.setdefault(k, []).append(i)
            cur_level[i] = k
        levels.append(dict(sorted(cur.items())))
        parents, parent_level = cyc.intervals, cur_level
    return LevelSets(tuple(levels))


@dataclass(frozen=True)
class RenormClassParams:
    """Constants (C, eta, M) of the class of M-times renormalizable pairs whose
    diffeomorphic part is univalent on the eta-stadium with C^3 norm <= C."""

    C: float
    eta: float
    M: int | None = None

    def __post_init__(self):
        if not (self.C > 0 and self.eta > 0):
            raise ValueError("C and eta must be positive")


def c3_norm(phi: PolyDiffeo) -> float:
    from numpy.polynomial import chebyshev as Ch

    x = grid_nodes()
    c = phi.coeffs
    return float(max(np.max(np.abs(Ch.chebval(x, Ch.chebder(c, k)))) if k else np.max(np.abs(phi(x)))
                     for k in range(4)))
