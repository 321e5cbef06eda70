import contextlib
import csv
import io
import json

import numpy as np
import pytest

from unirenorm import cli
from unirenorm.errors import NumericError, SchemaError
from unirenorm.records import (
    RunConfig,
    dumps_record,
    fmt,
    parse_sigma,
    read_record,
    record_from_dict,
    record_to_dict,
    to_csv,
    write_record,
)
from unirenorm.renorm import renormalize
from unirenorm.solver import pair_residual
from unirenorm.unimodal import Pair, UnimodalPermutation


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def kv(text):
    """Parse 'key,value' lines of command output."""
    return dict(line.split(",", 1) for line in text.splitlines() if line.count(",") == 1)


@pytest.fixture(scope="module")
def fp_document(tmp_path_factory):
    """Default `fixed-point --alpha 2` run: (printed values, document path)."""
    out_dir = tmp_path_factory.mktemp("fp")
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli.main(["fixed-point", "--alpha", "2", "--output-dir", str(out_dir)])
    assert code == 0
    printed = kv(buf.getvalue())
    return printed, out_dir / "fixed_point_alpha2.json"


# --------------------------------------------------------------------------
# configuration


def test_run_config_defaults():
    cfg = RunConfig()
    assert (cfg.alpha, cfg.degree, cfg.newton_tol, cfg.cycle_tol, cfg.fd_step) == (2.0, 60, 1e-10, 1e-12, 1e-6)
    assert cfg.permutation == UnimodalPermutation.doubling()
    assert "output_dir" not in cfg.provenance()


@pytest.mark.parametrize("kwargs", [{"newton_tol": 0.0}, {"cycle_tol": -1.0}, {"fd_step": 0.0}, {"degree": 15},
                                    {"alpha": 1.0}, {"period": 1}])
def test_run_config_rejects(kwargs):
    with pytest.raises(ValueError):
        RunConfig(**kwargs)


def test_output_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("UNIRENORM_OUTPUT_DIR", str(tmp_path))
    assert RunConfig().output_dir == str(tmp_path)
    args = cli.build_parser().parse_args(["oracle"])
    assert cli.config_from(args).output_dir == str(tmp_path)


def test_parse_sigma():
    assert parse_sigma("doubling", 4) == UnimodalPermutation.doubling(2)
    assert parse_sigma("2,3,1") == UnimodalPermutation((2, 3, 1))
    with pytest.raises(ValueError):
        parse_sigma("doubling", 6)
    with pytest.raises(ValueError):
        parse_sigma("2,3,1", 2)


def test_fmt_and_csv():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3" and fmt(True) == "1" and fmt("x") == "x"
    text = to_csv(["a", "b"], [(1, 0.5), (2, 1 / 3)])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows == [["a", "b"], ["1", "0.5"], ["2", "0.33333333333333331"]]


# --------------------------------------------------------------------------
# documents


def test_document_round_trip(fp2, tmp_path):
    path = write_record(tmp_path / "fp.json", fp2, RunConfig(), "2000-01-01T00:00:00+00:00")
    back = read_record(path)
    assert back.alpha == fp2.alpha and back.t_star == fp2.t_star and back.degree == fp2.degree
    assert np.array_equal(back.phi_star.coeffs, fp2.phi_star.coeffs)
    assert back.sigma == fp2.sigma
    new, _ = renormalize(back.pair)
    assert pair_residual(back.pair, new) <= 10 * max(fp2.residual, 1e-15)
    assert dumps_record(back, RunConfig(), "2000-01-01T00:00:00+00:00") == path.read_text()


def test_document_fields(fp2):
    doc = record_to_dict(fp2, RunConfig())
    for key in ("alpha", "sigma", "degree", "t_star", "coeffs", "residual", "eigenvalues", "delta",
                "expanding_count", "provenance"):
        assert key in doc
    assert set(doc["provenance"]) >= {"version", "config"}
    assert "timestamp" not in doc["provenance"]


@pytest.mark.parametrize("field, value", [("alpha", None), ("coeffs", [1.0, 2.0]), ("t_star", 1.5),
                                          ("degree", "sixty"), ("eigenvalues", [1.0]), ("sigma", {"images": [1, 2]})])
def test_malformed_document_names_field(fp2, field, value):
    doc = record_to_dict(fp2, RunConfig())
    doc[field] = value
    with pytest.raises(SchemaError) as info:
        record_from_dict(doc)
    assert info.value.field == field


def test_missing_field_and_bad_json(fp2, tmp_path):
    doc = record_to_dict(fp2, RunConfig())
    del doc["residual"]
    with pytest.raises(SchemaError, match="residual"):
        record_from_dict(doc)
    del doc["provenance"]["version"]
    doc["residual"] = 0.0
    with pytest.raises(SchemaError, match="provenance.version"):
        record_from_dict(doc)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SchemaError):
        read_record(bad)


# --------------------------------------------------------------------------
# commands


def test_find_cycle_found(capsys):
    code, out, _ = run(capsys, "find-cycle", "--alpha", "2", "--t", "0.9", "--period", "2")
    assert code == 0
    assert float(kv(out)["p"]) == pytest.approx(0.444444, abs=1e-6)
    assert kv(out)["combinatorics"] == "doubling"
    assert out.splitlines()[0] == "i,lo,hi,orientation"


def test_find_cycle_absent(capsys):
    code, out, _ = run(capsys, "find-cycle", "--alpha", "2", "--t", "0.5", "--period", "2")
    assert code == 1
    assert "no cycle" in out


@pytest.mark.parametrize("argv", [["find-cycle", "--t", "0.9", "--period", "1"],
                                  ["find-cycle", "--t", "1.5"],
                                  ["oracle", "--levels", "3"],
                                  ["sweep-alpha", "--alpha-min", "2", "--alpha-max", "2", "--step", "0"],
                                  ["sweep-alpha", "--alpha-min", "2.2", "--alpha-max", "2", "--step", "0.1"],
                                  ["oracle", "--alpha", "0.5"],
                                  ["verify", "--criteria", "nonsense"],
                                  ["frobnicate"]])
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as info:
        code = cli.main(argv)
        raise SystemExit(code)
    assert info.value.code == 64


def test_malformed_document_is_usage_error(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"alpha": 2.0}))
    code, _, err = run(capsys, "find-cycle", "--t", "0.9", "--record", str(bad))
    assert code == 64
    assert "sigma" in err or "missing" in err


def test_numeric_failure_exit_code(capsys, monkeypatch):
    import unirenorm.solver

    def boom(*args, **kwargs):
        raise NumericError("did not converge")

    monkeypatch.setattr(unirenorm.solver, "fixed_point", boom)
    code, _, err = run(capsys, "fixed-point", "--no-spectrum")
    assert code == 2
    assert "numeric failure" in err


def test_oracle_csv_is_deterministic(capsys):
    code, first, _ = run(capsys, "oracle", "--alpha", "2", "--levels", "9")
    assert code == 0
    _, second, _ = run(capsys, "oracle", "--alpha", "2", "--levels", "9")
    assert first == second
    last = first.splitlines()[-1]
    assert last.startswith("# delta_hat,")
    assert float(last.split(",")[1]) == pytest.approx(4.6692, abs=1e-4)
    rows = list(csv.reader(io.StringIO(first)))
    assert rows[0] == ["alpha", "n", "t_n", "d_n", "delta_hat"]


def test_oracle_writes_into_output_dir(capsys, monkeypatch, tmp_path):
    monkeypatch.setenv("UNIRENORM_OUTPUT_DIR", str(tmp_path))
    code, out, _ = run(capsys, "oracle", "--levels", "6", "--out", "table.csv")
    assert code == 0
    assert (tmp_path / "table.csv").read_text().startswith("alpha,n,t_n,d_n,delta_hat")


def test_fixed_point_command(fp_document):
    printed, path = fp_document
    assert float(printed["residual"]) < 1e-10
    assert float(printed["delta"]) == pytest.approx(4.6692016, abs=1e-6)
    assert printed["expanding_count"] == "1"
    rec = read_record(path)
    assert rec.residual == float(printed["residual"])
    new, _ = renormalize(Pair.make(rec.phi_star, rec.t_star, rec.alpha))
    assert pair_residual(rec.pair, new) <= 10 * max(rec.residual, 1e-15)


def test_fixed_point_from_document(capsys, fp_document, tmp_path):
    _, path = fp_document
    code, out, _ = run(capsys, "fixed-point", "--init", str(path), "--no-spectrum", "--output-dir", str(tmp_path))
    assert code == 0
    assert float(kv(out)["t_star"]) == pytest.approx(float(fp_document[0]["t_star"]), abs=1e-12)


def test_sweep_single_point_matches_fixed_point(capsys, fp_document):
    printed, _ = fp_document
    code, out, _ = run(capsys, "sweep-alpha", "--alpha-min", "2", "--alpha-max", "2", "--step", "0.05")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1
    assert rows[0]["t_star"] == printed["t_star"]
    assert rows[0]["delta"] == printed["delta"]
    assert rows[0]["expanding_count"] == "1"


@pytest.mark.slow
def test_sweep_around_two(capsys):
    code, out, _ = run(capsys, "sweep-alpha", "--alpha-min", "1.8", "--alpha-max", "2.2", "--step", "0.05")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [float(r["alpha"]) for r in rows] == pytest.approx([1.8 + 0.05 * k for k in range(9)])
    assert all(r["expanding_count"] == "1" for r in rows)


def test_verify_filter(capsys):
    code, out, _ = run(capsys, "verify", "--criteria", "superstable")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# generated ")
    assert lines[1].startswith("PASS  7 superstable")
    assert lines[-1] == "1/1 criteria passed"


@pytest.mark.slow
def test_verify_negative_control(capsys):
    code, out, _ = run(capsys, "verify", "--newton-tol", "1e-2", "--criteria", "continuation")
    assert code == 1
    assert "FAIL  4 continuation" in out
