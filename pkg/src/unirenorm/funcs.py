"""Function representation and geometric primitives.

Diffeomorphisms of [-1, 1] are stored as truncated Chebyshev series and
sampled at Chebyshev points of the second kind, which include both
endpoints.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct

from .errors import (
    DegenerateIntervalError,
    MonotonicityError,
    NonFiniteError,
    PrecisionWarning,
    RangeError,
    SectorError,
)

DEFAULT_DEGREE = 60
ENDPOINT_TOL = 1e-12
RESIDUAL_WARN = 1e-9
GRID_SIZE = 512

Evaluable = Callable[[np.ndarray], np.ndarray]


def cheb_nodes(n: int, dtype=float) -> np.ndarray:
    """Return the n+1 Chebyshev extreme points on [-1, 1], ascending."""
    if n == 0:
        return np.zeros(1, dtype=dtype)
    pi = np.arccos(np.asarray(-1, dtype=dtype))
    return -np.cos(pi * np.arange(n + 1, dtype=dtype) / n)


def grid_nodes(n: int = GRID_SIZE) -> np.ndarray:
    """Chebyshev points of the first kind (interior only), ascending."""
    k = np.arange(n)
    return -np.cos(np.pi * (2 * k + 1) / (2 * n))


def vals_to_coeffs(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through values at cheb_nodes."""
    v = np.asarray(values)
    n = v.shape[0] - 1
    if n == 0:
        return v.copy()
    # cheb_nodes are ascending; the DCT-I formula expects cos(pi k / n) order
    c = dct(v[::-1], type=1, axis=0) / n
    c[0] /= 2
    c[-1] /= 2
    return c


# --------------------------------------------------------------------------
# q_t family


@dataclass(frozen=True)
class QtParams:
    t: float
    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.t <= 1.0):
            raise ValueError(f"t must lie in [0, 1], got {self.t}")
        if not self.alpha > 1.0:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")


def qt_eval(p: QtParams, x):
    """q_t(x) = -2t|x|^alpha + 2t - 1."""
    x = np.asarray(x, dtype=float)
    return -2.0 * p.t * np.abs(x) ** p.alpha + 2.0 * p.t - 1.0


def qt_derivative(p: QtParams, x):
    x = np.asarray(x, dtype=float)
    return -2.0 * p.t * p.alpha * np.sign(x) * np.abs(x) ** (p.alpha - 1.0)


def _in_sector(z, alpha, branch):
    w = z if branch > 0 else -z
    ang = np.abs(np.angle(w))
    # closed sector; z = 0 is admitted by both branches
    return (ang <= np.pi / alpha + 1e-14) | (w == 0)


def qt_complex_eval(p: QtParams, z, branch: int):
    """Holomorphic branch of q_t on the sector S_alpha^+ (branch=+1) or S_alpha^-.

    |z|^alpha is replaced by exp(alpha log z) (resp. log(-z)) with the
    principal logarithm.  Raises SectorError outside the sector.
    """
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    z = np.asarray(z, dtype=complex)
    if not np.all(_in_sector(z, p.alpha, branch)):
        raise SectorError(f"argument outside sector S_{p.alpha}^{'+' if branch > 0 else '-'}")
    w = z if branch > 0 else -z
    with np.errstate(divide="ignore", invalid="ignore"):
        power = np.where(w == 0, 0.0, np.exp(p.alpha * np.log(np.where(w == 0, 1.0, w))))
    return -2.0 * p.t * power + 2.0 * p.t - 1.0


# --------------------------------------------------------------------------
# intervals and affine normalizations


@dataclass(frozen=True)
class OrientedInterval:
    lo: float
    hi: float
    orientation: int = 1

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DegenerateIntervalError(f"degenerate interval [{self.lo}, {self.hi}]")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def start(self) -> float:
        """The endpoint sent to -1 by the normalizing affine map."""
        return self.lo if self.orientation > 0 else self.hi

    @property
    def end(self) -> float:
        return self.hi if self.orientation > 0 else self.lo

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def with_orientation(self, orientation: int) -> "OrientedInterval":
        return OrientedInterval(self.lo, self.hi, orientation)

    @classmethod
    def from_endpoints(cls, start: float, end: float) -> "OrientedInterval":
        """Interval oriented so that `start` is sent to -1."""
        if start < end:
            return cls(start, end, 1)
        return cls(end, start, -1)


@dataclass(frozen=True)
class AffineMap:
    """x -> scale * x + shift."""

    scale: float
    shift: float

    def __call__(self, x):
        return self.scale * x + self.shift

    def inverse(self) -> "AffineMap":
        return AffineMap(1.0 / self.scale, -self.shift / self.scale)


def affine_to(J: OrientedInterval) -> AffineMap:
    """The affine map carrying J onto [-1, 1], respecting J's orientation."""
    if not J.lo < J.hi:
        raise DegenerateIntervalError("degenerate interval")
    s = 2.0 / (J.end - J.start)
    return AffineMap(s, -1.0 - s * J.start)


@dataclass(frozen=True)
class Stadium:
    """Complex points within `radius` of the segment `base`."""

    base: OrientedInterval
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("stadium radius must be positive")

    def boundary(self, n: int = 64) -> np.ndarray:
        """n points on the boundary, counter-clockwise, roughly equispaced."""
        a, b, r = self.base.lo, self.base.hi, self.radius
        L = b - a
        perim = 2 * L + 2 * np.pi * r
        s = np.arange(n) * perim / n
        z = np.empty(n, dtype=complex)
        for i, si in enumerate(s):
            if si < L:
                z[i] = complex(a + si, -r)
            elif si < L + np.pi * r:
                th = -np.pi / 2 + (si - L) / r
                z[i] = b + r * np.exp(1j * th)
            elif si < 2 * L + np.pi * r:
                z[i] = complex(b - (si - L - np.pi * r), r)
            else:
                th = np.pi / 2 + (si - 2 * L - np.pi * r) / r
                z[i] = a + r * np.exp(1j * th)
        return z

    def grid(self, n_boundary: int = 64, n_layers: int = 16) -> np.ndarray:
        """Nested boundary layers at radii radius*k/n_layers plus the base segment."""
        pts = [np.linspace(self.base.lo, self.base.hi, n_boundary).astype(complex)]
        for k in range(1, n_layers + 1):
            pts.append(Stadium(self.base, self.radius * k / n_layers).boundary(n_boundary))
        return np.concatenate(pts)


# --------------------------------------------------------------------------
# polynomial diffeomorphisms


@dataclass(frozen=True, eq=False)
class PolyDiffeo:
    """Chebyshev series of an orientation preserving diffeomorphism of [-1, 1].

    `residual` records the max-norm interpolation error of the fit that
    produced the coefficients (0 for exact constructions).
    """

    coeffs: np.ndarray
    residual: float = field(default=0.0)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return C.chebval(x, self.coeffs)

    def derivative(self, x):
        return C.chebval(x, C.chebder(self.coeffs))

    def second_derivative(self, x):
        return C.chebval(x, C.chebder(self.coeffs, 2))

    def inverse(self, y, tol: float = 1e-15, maxiter: int = 100):
        """Solve phi(x) = y for x in [-1, 1] by safeguarded Newton."""
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        lo = np.full(y.shape, -1.0)
        hi = np.full(y.shape, 1.0)
        x = np.clip(y, -1.0, 1.0)
        dc = C.chebder(self.coeffs)
        for _ in range(maxiter):
            fx = C.chebval(x, self.coeffs) - y
            below = fx < 0
            lo = np.where(below, x, lo)
            hi = np.where(below, hi, x)
            d = C.chebval(x, dc)
            step = fx / d
            xn = x - step
            bad = ~((xn >= lo) & (xn <= hi)) | ~np.isfinite(xn)
            xn = np.where(bad, 0.5 * (lo + hi), xn)
            done = np.abs(xn - x) <= tol * (1 + np.abs(x))
            x = xn
            if np.all(done):
                break
        # two plain Newton polishes keep the result smooth in the inputs
        for _ in range(2):
            x = x - (C.chebval(x, self.coeffs) - y) / C.chebval(x, dc)
        return x[0] if scalar else x

    def with_degree(self, degree: int) -> "PolyDiffeo":
        """Truncate or zero-pad to `degree`; endpoints are re-pinned."""
        c = np.zeros(degree + 1)
        m = min(degree, self.degree) + 1
        c[:m] = self.coeffs[:m]
        return PolyDiffeo(pin_endpoints(c), self.residual)

    @classmethod
    def identity(cls, degree: int = DEFAULT_DEGREE) -> "PolyDiffeo":
        c = np.zeros(degree + 1)
        c[1] = 1.0
        return cls(c)

    def endpoint_error(self) -> float:
        return max(abs(self(-1.0) + 1.0), abs(self(1.0) - 1.0))

    def min_derivative(self) -> float:
        return float(np.min(self.derivative(grid_nodes())))

    def is_valid(self, tol: float = ENDPOINT_TOL) -> bool:
        return self.endpoint_error() <= tol and self.min_derivative() > 0

    def sup_distance(self, other: Evaluable, n: int = GRID_SIZE) -> float:
        x = cheb_nodes(n)
        return float(np.max(np.abs(self(x) - other(x))))


def pin_endpoints(c: np.ndarray) -> np.ndarray:
    """Adjust c0, c1 so the series takes the values -1, 1 at -1, 1."""
    c = np.array(c, dtype=float)
    at_p = c.sum()
    at_m = (c * (-1.0) ** np.arange(len(c))).sum()
    e_p, e_m = at_p - 1.0, at_m + 1.0
    c[0] -= 0.5 * (e_p + e_m)
    c[1] -= 0.5 * (e_p - e_m)
    return c


def _dense_residual(f: Evaluable, coeffs: np.ndarray) -> float:
    x = cheb_nodes(4 * (len(coeffs) - 1))
    return float(np.max(np.abs(C.chebval(x, coeffs) - f(x))))


def fit_from_samples(f: Evaluable, degree: int = DEFAULT_DEGREE, check: bool = True) -> PolyDiffeo:
    """Interpolate f at degree+1 Chebyshev extreme points.

    The returned series carries the max-norm residual measured on a grid
    four times denser; a residual above RESIDUAL_WARN emits a
    PrecisionWarning.
    """
    x = cheb_nodes(degree)
    v = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("non-finite sample values")
    c = vals_to_coeffs(v)
    res = _dense_residual(f, c) if check else 0.0
    if res > RESIDUAL_WARN:
        warnings.warn(f"interpolation residual {res:.3e} at degree {degree}", PrecisionWarning, stacklevel=2)
    return PolyDiffeo(c, res)


def compose_refit(outer: Evaluable, inner: Evaluable, degree: int = DEFAULT_DEGREE,
                  domain_tol: float = 1e-12) -> PolyDiffeo:
    """Refit outer o inner as a diffeomorphism of [-1, 1]."""
    x = cheb_nodes(degree)
    y = np.asarray(inner(x), dtype=float)
    if np.any(np.abs(y) > 1.0 + domain_tol):
        raise RangeError("inner map leaves [-1, 1]")

    def comp(s):
        return outer(np.clip(inner(s), -1.0, 1.0))

    out = fit_from_samples(comp, degree)
    return PolyDiffeo(pin_endpoints(out.coeffs), out.residual)


def is_strictly_monotone(values: np.ndarray) -> int:
    """+1 or -1 for strictly increasing/decreasing sequences, else 0."""
    d = np.diff(values)
    if np.all(d > 0):
        return 1
    if np.all(d < 0):
        return -1
    return 0


def image_interval(f: Evaluable, I: OrientedInterval) -> OrientedInterval:
    """f(I), oriented so that f(I.start) is its start."""
    a = float(f(np.array([I.start]))[0])
    b = float(f(np.array([I.end]))[0])
    return OrientedInterval.from_endpoints(a, b)


def zoom_map(f: Evaluable, I: OrientedInterval, target: OrientedInterval | None = None) -> Evaluable:
    """x -> A_{f(I)}(f(A_I^{-1}(x))) as a callable (no refit).

    The target orientation defaults to the one making the result
    orientation preserving; passing `target` forces a given one.
    """
    J = image_interval(f, I) if target is None else target
    a_in = affine_to(I).inverse()
    a_out = affine_to(J)

    def z(x):
        return a_out(f(a_in(x)))

    return z


def zoom(f: Evaluable, I: OrientedInterval, degree: int = DEFAULT_DEGREE,
         target: OrientedInterval | None = None) -> PolyDiffeo:
    """Zoom operator Z_I(f) = A_{f(I)} o f o A_I^{-1}, refit as a PolyDiffeo.

    Raises MonotonicityError if f is not strictly monotone on I (checked
    on a 512-node grid).
    """
    xs = affine_to(I).inverse()(grid_nodes())
    if is_strictly_monotone(np.asarray(f(xs), dtype=float)) == 0:
        raise MonotonicityError(f"map not monotone on [{I.lo}, {I.hi}]")
    J = image_interval(f, I) if target is None else target
    out = fit_from_samples(zoom_map(f, I, J), degree)
    return PolyDiffeo(pin_endpoints(out.coeffs), out.residual)
