"""Run configuration, JSON documents for fixed points, and CSV output."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .funcs import PolyDiffeo
from .solver import FixedPointRecord
from .spectral import SpectralReport
from .unimodal import UnimodalPermutation

OUTPUT_ENV = "UNIRENORM_OUTPUT_DIR"
SCHEMA_VERSION = 1


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def parse_sigma(text: str | None, period: int | None = None) -> UnimodalPermutation:
    """'doubling' (optionally with a period 2^k) or comma-separated images."""
    if text is None or text == "doubling":
        if period is None or period == 2:
            return UnimodalPermutation.doubling()
        k = round(math.log2(period))
        if 2 ** k != period:
            raise ValueError(f"doubling combinatorics has no period {period}")
        return UnimodalPermutation.doubling(k)
    images = tuple(int(v) for v in text.replace(" ", "").split(","))
    sigma = UnimodalPermutation(images)
    if period is not None and sigma.period != period:
        raise ValueError(f"sigma has period {sigma.period}, not {period}")
    return sigma


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 2.0
    sigma: str = "doubling"
    period: int = 2
    degree: int = 60
    newton_tol: float = 1e-10
    cycle_tol: float = 1e-12
    fd_step: float = 1e-6
    output_dir: str = field(default_factory=lambda: os.environ.get(OUTPUT_ENV, "."))

    def __post_init__(self):
        for name in ("newton_tol", "cycle_tol", "fd_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.degree < 16:
            raise ValueError("degree must be at least 16")
        if not self.alpha > 1:
            raise ValueError("alpha must exceed 1")
        if self.period < 2:
            raise ValueError("period must be at least 2")

    @property
    def permutation(self) -> UnimodalPermutation:
        return parse_sigma(self.sigma, self.period)

    def provenance(self) -> dict:
        """Config fields that influence results (the output directory does not)."""
        d = asdict(self)
        d.pop("output_dir")
        return d


# --------------------------------------------------------------------------
# fixed-point documents


def _complex_list(values) -> list:
    return [[float(np.real(v)), float(np.imag(v))] for v in values]


def record_to_dict(rec: FixedPointRecord, config: RunConfig | None = None, timestamp: str | None = None) -> dict:
    spec = rec.spectral
    doc = {
        "schema": SCHEMA_VERSION,
        "alpha": float(rec.alpha),
        "sigma": {"name": rec.sigma.name, "period": rec.sigma.period, "images": list(rec.sigma.images)},
        "degree": int(rec.degree),
        "t_star": float(rec.t_star),
        "coeffs": [float(c) for c in rec.phi_star.coeffs],
        "residual": float(rec.residual),
        "eigenvalues": _complex_list(spec.eigenvalues) if spec is not None else [],
        "stable_flags": list(spec.stable_flags) if spec is not None else [],
        "delta": float(spec.delta) if spec is not None else None,
        "expanding_count": int(spec.expanding_count) if spec is not None else None,
        "provenance": {"version": package_version(), "config": config.provenance() if config else {}},
    }
    if timestamp is not None:
        doc["provenance"]["timestamp"] = timestamp
    return doc


_REQUIRED = {
    "alpha": (int, float),
    "sigma": dict,
    "degree": int,
    "t_star": (int, float),
    "coeffs": list,
    "residual": (int, float),
    "eigenvalues": list,
    "delta": (int, float, type(None)),
    "expanding_count": (int, type(None)),
    "provenance": dict,
}


def record_from_dict(doc) -> FixedPointRecord:
    """Inverse of record_to_dict; raises SchemaError naming the offending field."""
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "document must be an object")
    for name, typ in _REQUIRED.items():
        if name not in doc:
            raise SchemaError(name, "missing")
        if not isinstance(doc[name], typ) or isinstance(doc[name], bool):
            raise SchemaError(name, f"unexpected type {type(doc[name]).__name__}")
    coeffs = doc["coeffs"]
    if len(coeffs) != doc["degree"] + 1 or not all(isinstance(c, (int, float)) for c in coeffs):
        raise SchemaError("coeffs", f"expected {doc['degree'] + 1} numbers")
    if not 0 < doc["t_star"] < 1:
        raise SchemaError("t_star", "must lie in (0, 1)")
    if not doc["alpha"] > 1:
        raise SchemaError("alpha", "must exceed 1")
    for k in ("version", "config"):
        if k not in doc["provenance"]:
            raise SchemaError(f"provenance.{k}", "missing")
    try:
        images = doc["sigma"]["images"]
        sigma = UnimodalPermutation(tuple(int(v) for v in images))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError("sigma", f"invalid combinatorics: {exc}") from exc
    ev = doc["eigenvalues"]
    if not all(isinstance(v, list) and len(v) == 2 for v in ev):
        raise SchemaError("eigenvalues", "entries must be [re, im] pairs")
    spectral = None
    if ev:
        vals = np.array([complex(a, b) for a, b in ev])
        flags = tuple(bool(f) for f in doc.get("stable_flags", [True] * len(vals)))
        if len(flags) != len(vals):
            raise SchemaError("stable_flags", "length differs from eigenvalues")
        spectral = SpectralReport(vals, float(doc["delta"]), int(doc["expanding_count"]), flags, float("nan"))
    return FixedPointRecord(float(doc["alpha"]), float(doc["t_star"]), PolyDiffeo(np.array(coeffs, dtype=float)),
                            float(doc["residual"]), int(doc["degree"]), sigma, spectral)


def dumps_record(rec: FixedPointRecord, config: RunConfig | None = None, timestamp: str | None = None) -> str:
    return json.dumps(record_to_dict(rec, config, timestamp), indent=2, sort_keys=True) + "\n"


def write_record(path, rec: FixedPointRecord, config: RunConfig | None = None, timestamp: str | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_record(rec, config, timestamp))
    return path


def read_record(path) -> FixedPointRecord:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError("<root>", f"not valid JSON: {exc.msg}") from exc
    return record_from_dict(doc)


# --------------------------------------------------------------------------
# CSV


def fmt(x) -> str:
    """17 significant digits; integers and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()
