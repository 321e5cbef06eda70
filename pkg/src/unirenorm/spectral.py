"""Spectrum of the linearized operator at a fixed point, truncation
stability across degrees, and comparison with the classic operator."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import NumericError
from .renorm import _cycle_for, dL
from .funcs import cheb_nodes, vals_to_coeffs
from .solver import FixedPointRecord, continue_in_alpha, fd_jacobian, fixed_point, pair_to_vector
from .tangent import classic_fixed_point, even_coeffs_of, renormalize_jacobian
from .unimodal import Pair

STABILITY_DEGREES = (40, 60, 80)
STABILITY_TOL = 1e-6
DEFAULT_FD_STEP = 1e-6


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    delta: float
    expanding_count: int
    stable_flags: tuple
    fd_step: float
    method: str = "tangent"
    degrees: tuple = ()

    @property
    def stable_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[np.array(self.stable_flags, dtype=bool)]

    @property
    def second(self) -> complex:
        """Largest stable eigenvalue after the dominant one."""
        s = self.stable_eigenvalues
        return complex(s[1]) if len(s) > 1 else complex("nan")


def sorted_eigenvalues(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix has non-finite entries")
    try:
        ev = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigenvalue solver failed: {exc}") from exc
    # modulus descending; ties broken by real then imaginary part for determinism
    order = np.lexsort((-ev.imag, -ev.real, -np.round(np.abs(ev), 12)))
    return ev[order]


def match_eigenvalues(primary, other, rel_tol: float = STABILITY_TOL) -> np.ndarray:
    """Greedy pairing in modulus order; returns per-eigenvalue relative mismatch."""
    other = list(other)
    used = np.zeros(len(other), dtype=bool)
    out = np.full(len(primary), np.inf)
    for i, lam in enumerate(primary):
        best, bj = np.inf, -1
        for j, mu in enumerate(other):
            if used[j]:
                continue
            d = abs(lam - mu) / max(abs(lam), 1e-300)
            if d < best:
                best, bj = d, j
        if bj >= 0:
            used[bj] = True
            out[i] = best
    return out


def spectrum(matrix, companions=(), rel_tol: float = STABILITY_TOL, fd_step: float = float("nan"),
             method: str = "tangent", degrees: tuple = ()) -> SpectralReport:
    """Eigen-decomposition of `matrix`; an eigenvalue is flagged stable when
    each companion matrix (the same operator at other truncation degrees)
    has a match within `rel_tol`.  Without companions every eigenvalue is
    considered stable."""
    ev = sorted_eigenvalues(matrix)
    stable = np.ones(len(ev), dtype=bool)
    for comp in companions:
        stable &= match_eigenvalues(ev, sorted_eigenvalues(comp), rel_tol) <= rel_tol
    stable_ev = ev[stable]
    if len(stable_ev) == 0:
        raise NumericError("no truncation-stable eigenvalue")
    top = stable_ev[0]
    delta = float(top.real) if abs(top.imag) <= 1e-12 * abs(top) else float(abs(top))
    expanding = int(np.sum(np.abs(stable_ev) > 1.0))
    return SpectralReport(ev, delta, expanding, tuple(bool(s) for s in stable), fd_step, method, tuple(degrees))


def jacobian_matrix(record: FixedPointRecord, fd_step: float = DEFAULT_FD_STEP, method: str = "tangent") -> np.ndarray:
    """Linearization of the operator at the record in (c_2..c_d, t) coordinates.

    `method="tangent"` propagates exact derivatives through one
    evaluation; `method="fd"` uses central differences with the given
    step (halved automatically when a perturbed pair loses its cycle).
    """
    if method == "tangent":
        return renormalize_jacobian(record.pair, record.sigma)[1]
    if method == "fd":
        return fd_jacobian(pair_to_vector(record.pair), record.alpha, record.sigma, fd_step)
    raise ValueError(f"unknown method {method!r}")


def record_at_degree(record: FixedPointRecord, degree: int) -> FixedPointRecord:
    if degree == record.degree:
        return record
    init = Pair.make(record.phi_star.with_degree(degree), record.t_star, record.alpha)
    return fixed_point(record.alpha, record.sigma, init, degree, ladder=False)


def spectral_report(record: FixedPointRecord, degrees=STABILITY_DEGREES, fd_step: float = DEFAULT_FD_STEP,
                    method: str = "tangent", rel_tol: float = STABILITY_TOL) -> SpectralReport:
    """Spectrum at record.degree with stability judged against the other degrees."""
    main = jacobian_matrix(record, fd_step, method)
    comps = [jacobian_matrix(record_at_degree(record, d), fd_step, method) for d in degrees if d != record.degree]
    return spectrum(main, comps, rel_tol, fd_step, method, tuple(degrees))


def with_spectrum(record: FixedPointRecord, **kw) -> FixedPointRecord:
    return replace(record, spectral=spectral_report(record, **kw))


def delta_of_alpha(alpha_grid, sigma=None, base: FixedPointRecord | None = None, step: float = 0.05,
                   degrees=STABILITY_DEGREES) -> list:
    """(alpha, delta) pairs, each fixed point reached by continuation from the
    nearest exponent already solved."""
    if base is None:
        base = fixed_point(2.0, sigma)
    solved = {base.alpha: base}
    out = []
    for a in alpha_grid:
        a = float(a)
        if a not in solved:
            near = min(solved, key=lambda s: abs(s - a))
            solved[a] = continue_in_alpha(solved[near], a, step)
        out.append((a, spectral_report(solved[a], degrees).delta))
    return out


# --------------------------------------------------------------------------
# comparison with the classic operator on even maps


CLASSIC_DTYPE = np.longdouble


def classic_linearization(record: FixedPointRecord, dtype=CLASSIC_DTYPE) -> tuple:
    """(even coefficients of the classic fixed point, Jacobian of the classic
    operator there).

    The even coefficients of L(pair) seed a Newton refinement run in
    `dtype`.  The small stable eigenvalues of this operator are much more
    sensitive to rounding than those of the pair operator, and in float64
    the fifth one already moves by about 1e-6 between degrees.
    """
    r = _even_r(record.alpha)
    pair = record.pair
    a = even_coeffs_of(pair, r, record.degree).astype(dtype)
    cyc = _cycle_for(pair, record.sigma)
    a, _, J = classic_fixed_point(a, r, record.sigma.period, cyc.p)
    return np.asarray(a, dtype=float), np.asarray(J, dtype=float)


def _even_r(alpha: float) -> int:
    r = alpha / 2.0
    if abs(r - round(r)) > 1e-12:
        raise ValueError("spectrum equality needs an even integer exponent")
    return int(round(r))


def tangent_to_even(record: FixedPointRecord, vec) -> np.ndarray:
    """Image under dL of a tangent vector in (c_2..c_d, t) coordinates,
    written in the even coordinates a_1..a_N of the classic side."""
    r = _even_r(record.alpha)
    vec = np.asarray(vec)
    comps = []
    for part in (vec.real, vec.imag):
        dc = np.concatenate([[0.0, 0.0], part[:-1]])
        k = np.arange(len(dc))
        sgn = (-1.0) ** k
        dp, dm = dc.sum(), (dc * sgn).sum()
        dc[0] -= 0.5 * (dp + dm)
        dc[1] -= 0.5 * (dp - dm)
        w = dL(record.pair, lambda y, c=dc: C.chebval(y, c), float(part[-1]))
        s = (cheb_nodes(record.degree) + 1.0) / 2.0
        comps.append(vals_to_coeffs(w(s ** (1.0 / (2 * r))))[1:])
    return comps[0] + 1j * comps[1]


@dataclass(frozen=True)
class EqualityReport:
    pair_eigenvalues: np.ndarray
    classic_eigenvalues: np.ndarray
    relative_differences: np.ndarray
    pair_multiplicities: tuple
    classic_multiplicities: tuple
    conjugation_residual: float
    dominant_difference: float
    tol: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (len(self.relative_differences) > 0
                and bool(np.all(self.relative_differences <= self.tol))
                and self.pair_multiplicities == self.classic_multiplicities)


def _multiplicities(top, full, rel_tol):
    return tuple(int(np.sum(np.abs(full - lam) <= rel_tol * abs(lam))) for lam in top)


def spectrum_equality_check(record: FixedPointRecord, top: int = 5, degrees=STABILITY_DEGREES,
                            tol: float = 1e-5, rel_tol: float = STABILITY_TOL) -> EqualityReport:
    """Compare the stable spectra of the pair operator and of the classic
    operator at L(pair), and check the intertwining relation on the
    dominant eigenvector."""
    recs = {d: record_at_degree(record, d) for d in degrees}
    if record.degree not in recs:
        recs[record.degree] = record
    pair_J = {d: jacobian_matrix(rec) for d, rec in recs.items()}
    classic_J = {d: classic_linearization(rec)[1] for d, rec in recs.items()}
    main = record.degree
    rep_p = spectrum(pair_J[main], [pair_J[d] for d in degrees if d != main], rel_tol)
    rep_c = spectrum(classic_J[main], [classic_J[d] for d in degrees if d != main], rel_tol)
    sp = _nonzero(rep_p.stable_eigenvalues)[:top]
    sc = _nonzero(rep_c.stable_eigenvalues)[:top]
    m = min(len(sp), len(sc))
    diffs = np.abs(sp[:m] - sc[:m]) / np.abs(sp[:m])
    if m < top:
        diffs = np.concatenate([diffs, np.full(top - m, np.inf)])
    mult_p = _multiplicities(sp, rep_p.stable_eigenvalues, rel_tol)
    mult_c = _multiplicities(sp, rep_c.stable_eigenvalues, rel_tol)

    w, V = np.linalg.eig(pair_J[main])
    i = int(np.argmax(np.abs(w)))
    a = tangent_to_even(record, V[:, i])
    Jc = classic_J[main]
    conj = float(np.linalg.norm(Jc @ a - w[i] * a) / (abs(w[i]) * np.linalg.norm(a)))
    dom = float(abs(sp[0] - sc[0]) / abs(sp[0])) if m else float("inf")
    return EqualityReport(sp, sc, diffs, mult_p, mult_c, conj, dom, tol,
                          {"pair_stable": rep_p.stable_eigenvalues, "classic_stable": rep_c.stable_eigenvalues})


def _nonzero(ev, floor: float = 1e-12) -> np.ndarray:
    return ev[np.abs(ev) > floor]
