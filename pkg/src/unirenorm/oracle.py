"""Brute-force cascade oracles for the doubling constants.

Only map iteration, bracketing and root refinement are used here; nothing
from the renormalization pipeline is imported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NumericError
from .funcs import QtParams, qt_eval

SCAN_POINTS = 400


def _scalar_orbit(t: float, alpha: float, n: int, phi=None) -> float:
    x = 0.0
    if phi is None:
        a, b = -2.0 * t, 2.0 * t - 1.0
        for _ in range(n):
            x = a * abs(x) ** alpha + b
        return x
    for _ in range(n):
        x = float(phi(np.array([-2.0 * t * abs(x) ** alpha + 2.0 * t - 1.0]))[0])
    return x


def _vector_orbit(ts: np.ndarray, alpha: float, n: int, phi=None) -> np.ndarray:
    x = np.zeros_like(ts)
    for _ in range(n):
        y = -2.0 * ts * np.abs(x) ** alpha + 2.0 * ts - 1.0
        x = y if phi is None else phi(y)
    return x


def superstable_cascade(alpha: float, levels: int, phi=None) -> list:
    """Superstable parameters t_0 < t_1 < ... for periods 1, 2, ..., 2^levels.

    Each new parameter is bracketed by the first sign change of
    f^{2^{n+1}}(0) past t_n on a uniform scan, then refined by Brent's
    method.  Stops early (returning a shorter list) when no bracket is
    found.
    """
    def g(t, q):
        return _scalar_orbit(t, alpha, q, phi)

    t0 = brentq(lambda t: g(t, 1), 1e-3, 1.0, xtol=1e-16, rtol=1e-15)
    ts = [t0]
    for n in range(levels):
        q = 2 ** (n + 1)
        if n == 0:
            start, stop = ts[-1] + 1e-6, 1.0
        else:
            gap = ts[-1] - ts[-2]
            start, stop = ts[-1] + 1e-3 * gap, min(ts[-1] + 0.6 * gap, 1.0)
        grid = np.linspace(start, stop, SCAN_POINTS)
        vals = _vector_orbit(grid, alpha, q, phi)
        idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        if len(idx) == 0:
            break
        k = idx[0]
        try:
            ts.append(brentq(lambda t: g(t, q), grid[k], grid[k + 1], xtol=1e-16, rtol=1e-15, maxiter=500))
        except (ValueError, RuntimeError) as exc:
            raise NumericError(f"bracket refinement failed at period {q}") from exc
    return ts


def aitken(seq) -> float:
    a, b, c = seq[-3:]
    den = (c - b) - (b - a)
    if den == 0:
        return float(c)
    return float(c - (c - b) ** 2 / den)


@dataclass(frozen=True)
class CascadeTable:
    alpha: float
    t: tuple
    ratios: tuple
    delta: float

    def rows(self):
        """(n, t_n, d_n or nan, running estimate or nan) per level."""
        out = []
        for n, t in enumerate(self.t):
            d = self.ratios[n - 1] if 1 <= n <= len(self.ratios) else math.nan
            est = aitken(self.ratios[:n]) if n >= 3 and n <= len(self.ratios) else math.nan
            out.append((n, t, d, est))
        return out


def cascade_delta(alpha: float, levels: int) -> CascadeTable:
    """Ratios d_n = (t_n - t_{n-1}) / (t_{n+1} - t_n) and their Aitken limit."""
    if levels < 6:
        raise ValueError("at least 6 levels are required")
    ts = superstable_cascade(alpha, levels)
    ratios = [(ts[n] - ts[n - 1]) / (ts[n + 1] - ts[n]) for n in range(1, len(ts) - 1)]
    if len(ratios) < 3:
        raise NumericError("too few levels resolved for extrapolation")
    return CascadeTable(float(alpha), tuple(ts), tuple(ratios), aitken(ratios))


def closest_returns(alpha: float, t: float, n: int) -> list:
    """|f^{2^k}(0)| for k = 0..n at parameter t."""
    p = QtParams(t, alpha)
    out = []
    x = 0.0
    steps = 0
    for k in range(n + 1):
        target = 2 ** k
        while steps < target:
            x = float(qt_eval(p, x))
            steps += 1
        out.append(abs(x))
    return out


def cascade_scaling(alpha: float, levels: int) -> tuple:
    """Limit of |f^{2^{k+1}}(0)| / |f^{2^k}(0)| at the deepest superstable parameter.

    Returns (ratio list, extrapolated limit).  The last few ratios feel the
    superstable orbit closing up and are excluded from the extrapolation.
    """
    if levels < 6:
        raise ValueError("at least 6 levels are required")
    ts = superstable_cascade(alpha, levels)
    L = len(ts) - 1
    d = closest_returns(alpha, ts[-1], L)
    ratios = [d[k + 1] / d[k] for k in range(L)]
    usable = ratios[: L - 3]
    return tuple(ratios), aitken(usable)
