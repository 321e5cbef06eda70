"""Forward-mode linearization of the renormalization operators.

Values are carried together with their derivatives along every unknown
(`Dual`), so one pass through the operator yields its full Jacobian in
coefficient coordinates without finite-difference cancellation.  The
discrete structure of a cycle (sides, orientations) is taken from an
ordinary evaluation; periodic points and preimages are linearized by a
single Newton step from their converged real values.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev as C

from .funcs import cheb_nodes, vals_to_coeffs
from .renorm import _cycle_for
from .unimodal import Pair, UnimodalPermutation, iterate_with_derivative


def _real_array(v) -> np.ndarray:
    """float64 unless the input already carries extended precision."""
    a = np.asarray(v)
    return a if a.dtype == np.longdouble else a.astype(float)


class Dual:
    """Value `v` (shape S) with derivatives `d` (shape S + (n,))."""

    __slots__ = ("v", "d")

    def __init__(self, v, d):
        self.v = _real_array(v)
        self.d = _real_array(d)

    @classmethod
    def const(cls, v, n: int):
        v = _real_array(v)
        return cls(v, np.zeros(v.shape + (n,), dtype=v.dtype))

    @property
    def n(self) -> int:
        return self.d.shape[-1]

    def _lift(self, other):
        if isinstance(other, Dual):
            return other
        return Dual.const(other, self.n)

    def __add__(self, other):
        o = self._lift(other)
        return Dual(self.v + o.v, self.d + o.d)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.v, -self.d)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        return Dual(self.v * o.v, self.d * o.v[..., None] + o.d * self.v[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        v = self.v / o.v
        return Dual(v, (self.d - o.d * v[..., None]) / o.v[..., None])

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def power(self, a: float):
        """|self|^a on the side of the real value (self must not vanish)."""
        s = np.sign(self.v)
        m = s * self.v
        return Dual(m ** a, (a * m ** (a - 1) * s)[..., None] * self.d)

    def __getitem__(self, idx):
        return Dual(self.v[idx], self.d[idx])


def cheb_dual(x: Dual, c: Dual) -> Dual:
    """Clenshaw evaluation of sum c_k T_k(x) with dual argument and coefficients."""
    n = x.n
    shape = x.v.shape
    zero = np.zeros(shape, dtype=np.result_type(x.v, c.v))
    b1 = Dual.const(zero, n)
    b2 = Dual.const(zero, n)
    two_x = x * 2.0
    for k in range(len(c.v) - 1, 0, -1):
        ck = Dual(np.broadcast_to(c.v[k], shape), np.broadcast_to(c.d[k], shape + (n,)))
        b1, b2 = ck + two_x * b1 - b2, b1
    c0 = Dual(np.broadcast_to(c.v[0], shape), np.broadcast_to(c.d[0], shape + (n,)))
    return c0 + x * b1 - b2


def _pin_dual(c: Dual) -> Dual:
    """Endpoint pinning: values get the affine correction, derivatives the linear part."""
    k = np.arange(len(c.v))
    sgn = (-1.0) ** k
    v = c.v.copy()
    e_p, e_m = v.sum() - 1.0, (v * sgn).sum() + 1.0
    v[0] -= 0.5 * (e_p + e_m)
    v[1] -= 0.5 * (e_p - e_m)
    d = c.d.copy()
    dp, dm = d.sum(axis=0), (d * sgn[:, None]).sum(axis=0)
    d[0] -= 0.5 * (dp + dm)
    d[1] -= 0.5 * (dp - dm)
    return Dual(v, d)


def _coeffs_dual(vals: Dual) -> Dual:
    v = vals_to_coeffs(vals.v)
    d = np.stack([vals_to_coeffs(vals.d[:, j]) for j in range(vals.n)], axis=1)
    return Dual(v, d)


class _DualPair:
    """f = phi o q_t with dual coefficients and parameter."""

    def __init__(self, c: Dual, t: Dual, alpha: float, real: Pair):
        self.c, self.t, self.alpha, self.real = c, t, alpha, real

    def phi(self, y: Dual) -> Dual:
        return cheb_dual(y, self.c)

    def qt(self, x: Dual) -> Dual:
        return self.t * 2.0 * (1.0 - x.power(self.alpha)) - 1.0

    def __call__(self, x: Dual) -> Dual:
        return self.phi(self.qt(x))

    def phi_inverse(self, y: Dual) -> Dual:
        z0 = self.real.phi.inverse(y.v)
        z = Dual.const(z0, y.n)
        return z - (self.phi(z) - y) / self.real.phi.derivative(z0)

    def preimage(self, y: Dual, side: int) -> Dual:
        z = self.phi_inverse(y)
        s = (self.t * 2.0 - 1.0 - z) / (self.t * 2.0)
        return s.power(1.0 / self.alpha) * float(side)


def _dual_pair(pair: Pair) -> tuple:
    """Dual pair in the unknowns (c_2..c_d, t)."""
    c = pair.phi.coeffs
    d = len(c) - 1
    n = d
    dc = np.zeros((d + 1, n))
    dc[2:, : d - 1] = np.eye(d - 1)
    cd = _pin_dual(Dual(c, dc))
    tv = np.zeros(n)
    tv[-1] = 1.0
    return _DualPair(cd, Dual(pair.t, tv), pair.alpha, pair), n


def renormalize_jacobian(pair: Pair, sigma: UnimodalPermutation | None = None) -> tuple:
    """(coordinates of R(pair), Jacobian) in the unknowns (c_2..c_d, t).

    The linearized map is the exact composition of the first-return
    branch sampled at Chebyshev nodes; it agrees with the piecewise-refit
    operator to interpolation accuracy.
    """
    sigma = UnimodalPermutation.doubling() if sigma is None else sigma
    cyc = _cycle_for(pair, sigma)
    f, n = _dual_pair(pair)
    q = cyc.period
    degree = pair.phi.degree

    # periodic point: one Newton step from the converged value
    p0 = cyc.p
    x = Dual.const(np.array([p0]), n)
    for _ in range(q):
        x = f(x)
    _, dfq = iterate_with_derivative(pair, np.array([p0]), q)
    p = Dual(np.array([p0]), -x.d / (dfq[0] - 1.0))
    P = p * float(np.sign(p0))

    # pull back the central interval to I_1
    lo, hi = -P, P
    xs = p0
    orbit = [p0]
    for _ in range(q - 1):
        xs = float(pair(np.array([xs]))[0])
        orbit.append(xs)
    for i in range(q - 1, 0, -1):
        side = 1 if orbit[i] > 0 else -1
        a, b = f.preimage(lo, side), f.preimage(hi, side)
        lo, hi = (a, b) if a.v[0] < b.v[0] else (b, a)
    K_lo, K_hi = f.phi_inverse(lo), f.phi_inverse(hi)
    K_len = K_hi - K_lo
    t_new = f.t * 2.0 * P.power(pair.alpha) / K_len

    # first-return branch at the nodes, normalized by the central interval
    nodes = cheb_nodes(degree)
    s = Dual.const((nodes + 1.0) / 2.0, n)
    y = _affine_dual(K_lo, K_len, s)
    y = f.phi(y)
    for _ in range(q - 1):
        y = f(y)
    vals = -(y / _bcast(p, len(nodes)))
    cf = _pin_dual(_coeffs_dual(vals))
    out = Dual(np.concatenate([cf.v[2:], t_new.v]), np.concatenate([cf.d[2:], t_new.d], axis=0))
    return out.v, out.d


def _bcast(x: Dual, m: int) -> Dual:
    return Dual(np.broadcast_to(x.v, (m,)), np.broadcast_to(x.d, (m, x.n)))


def _affine_dual(start: Dual, length: Dual, s: Dual) -> Dual:
    m = len(s.v)
    return _bcast(start, m) + s * _bcast(length, m)


# --------------------------------------------------------------------------
# classic operator on even maps g(x) = G(x^{2r}), G(s) = sum a_k T_k(2s - 1)


def even_coeffs_of(g, r: int, degree: int, dtype=float) -> np.ndarray:
    """Chebyshev coefficients of G(s) = g(s^{1/(2r)}) on s in [0, 1]."""
    s = (cheb_nodes(degree, dtype) + 1) / 2
    return vals_to_coeffs(np.asarray(g(s ** (np.asarray(1, dtype=dtype) / (2 * r))), dtype=dtype))


def even_map(a: np.ndarray, r: int):
    return lambda x: C.chebval(2 * np.asarray(x) ** (2 * r) - 1, a)


def even_map_derivative(a: np.ndarray, r: int):
    da = C.chebder(a)

    def dg(x):
        x = np.asarray(x)
        return C.chebval(2 * x ** (2 * r) - 1, da) * 4 * r * x ** (2 * r - 1)

    return dg


class _EvenMap:
    def __init__(self, a: np.ndarray, r: int):
        self._g = even_map(a, r)
        self._dg = even_map_derivative(a, r)

    def __call__(self, x):
        return self._g(x)

    def derivative(self, x):
        return self._dg(x)


def periodic_point(a: np.ndarray, r: int, q: int, p0, steps: int = 4):
    """Newton refinement of a period-q point of g = G(x^{2r}) in the dtype of a."""
    g = _EvenMap(a, r)
    p = np.asarray(p0, dtype=a.dtype)
    for _ in range(steps):
        y, d = iterate_with_derivative(g, p, q)
        p = p - (y - p) / (d - 1)
    return p


def classic_jacobian(a: np.ndarray, r: int, q: int, p0: float) -> tuple:
    """(coordinates of R g, Jacobian) for g = G(x^{2r}) with G(1) = -1.

    Unknowns are a_1..a_N (a_0 is eliminated by the normalization);
    `p0` is the signed periodic point of g defining the central interval,
    and the operator is z -> -g^q(-p z) / p, i.e. the rescaled return map
    keeping g(+-1) = -1.  The arithmetic follows the dtype of `a`.
    """
    N = len(a) - 1
    n = N
    da = np.zeros((N + 1, n), dtype=a.dtype)
    da[1:, :] = np.eye(N)
    da[0, :] = -1
    A = Dual(a, da)

    def g(x: Dual) -> Dual:
        u = x.power(2 * r) * 2 - 1
        return cheb_dual(u, A)

    p0 = np.asarray([p0], dtype=a.dtype)
    x = Dual.const(p0, n)
    for _ in range(q):
        x = g(x)
    _, dfq = iterate_with_derivative(_EvenMap(a, r), p0, q)
    p = Dual(p0, -x.d / (dfq[0] - 1))

    s_nodes = (cheb_nodes(N, a.dtype) + 1) / 2
    z = s_nodes ** (np.asarray(1, dtype=a.dtype) / (2 * r))
    pm = _bcast(-p, len(z))
    y = pm * z
    for _ in range(q):
        y = g(y)
    vals = -(y / _bcast(p, len(z)))
    cf = _coeffs_dual(vals)
    return cf.v[1:], cf.d[1:]


def classic_fixed_point(a: np.ndarray, r: int, q: int, p0, steps: int = 4) -> tuple:
    """Newton refinement of the classic fixed point in the dtype of `a`.

    Returns (a, p, J) with J the Jacobian at the refined point.  The
    linear solves run in float64; residuals and the Jacobian itself are
    evaluated in the working dtype.
    """
    a = a.copy()
    p = periodic_point(a, r, q, p0)
    for _ in range(steps):
        v, J = classic_jacobian(a, r, q, p[0] if np.ndim(p) else p)
        res = v - a[1:]
        step = np.linalg.solve(np.asarray(J, dtype=float) - np.eye(len(res)), -np.asarray(res, dtype=float))
        a[1:] += step.astype(a.dtype)
        a[0] = -1 - a[1:].sum()
        p = periodic_point(a, r, q, p)
    v, J = classic_jacobian(a, r, q, p[0] if np.ndim(p) else p)
    return a, p, J
