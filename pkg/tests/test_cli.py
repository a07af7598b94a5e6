import csv
import io
import tempfile

import pytest

from cli import main
from susceptibility import CommandManager
from susceptibility.config import RunConfig


def _body(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def _table(text):
    return list(csv.DictReader(io.StringIO("\n".join(_body(text)))))


def _run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_manager_lists_commands():
    manager = CommandManager()
    assert manager.list_commands() == ["bound", "expand", "curve", "rescale-check"]


def test_manager_rejects_unknown_command():
    err = io.StringIO()
    assert CommandManager().handle(RunConfig("nope"), out=io.StringIO(), err=err) == 2
    assert "Unknown command" in err.getvalue()


def test_bound_sparse(capsys):
    code, out, _ = _run(capsys, ["bound", "--theorem", "sparse", "--n", "784", "--eps", "56"])
    assert code == 0
    assert out.startswith("# tool: susceptibility ")
    assert "# seed: none" in out
    assert "# config: n=784" in out
    rows = _table(out)
    assert len(rows) == 1
    assert float(rows[0]["value"]) == pytest.approx(0.963369, abs=1e-6)
    assert rows[0]["valid"] == "true"


def test_bound_existence_defaults_dimension_for_l2(capsys):
    code, out, _ = _run(capsys, ["bound", "--theorem", "existence", "--p", "2", "--eps", "1"])
    assert code == 0
    assert float(_table(out)[0]["value"]) == pytest.approx(0.021607, abs=1e-6)


def test_bound_small_p_tight_expression_radius(capsys):
    code, out, _ = _run(
        capsys, ["bound", "--theorem", "small-p-tight", "--n", "784", "--vol", "0.5", "--eps", "sqrt(n*log(2)/2),30"]
    )
    assert code == 0
    rows = _table(out)
    assert float(rows[0]["eps"]) == pytest.approx(16.48374, abs=1e-5)
    assert float(rows[1]["value"]) == pytest.approx(0.3726, abs=2e-4)


def test_bound_hypothesis_violation_exits_2(capsys):
    code, out, err = _run(capsys, ["bound", "--theorem", "sphere", "--n", "3", "--fc", "0.6", "--eps", "0.5"])
    assert code == 2
    assert out == ""
    assert "f_c ≤ 1/2" in err


def test_bound_unknown_theorem_exits_2(capsys):
    code, _, err = _run(capsys, ["bound", "--theorem", "nonsense", "--eps", "1"])
    assert code == 2
    assert "must be one of" in err


def test_expand_slab_bound_below_oracle(capsys):
    argv = ["expand", "--set", "slab", "--n", "10", "--p", "2", "--width", "0.5", "--eps", "0,0.1,0.2"]
    code, out, _ = _run(capsys, argv + ["--samples", "2000", "--seed", "1"])
    assert code == 0
    rows = _table(out)
    assert [float(r["eps"]) for r in rows] == [0.0, 0.1, 0.2]
    for row in rows:
        assert float(row["bound"]) <= float(row["oracle_exact"])
        assert row["mc_estimate"] != ""
    assert float(rows[0]["bound"]) == 0.5 and float(rows[0]["oracle_exact"]) == 0.5


def test_expand_flags_printed_variant(capsys):
    argv = ["expand", "--set", "slab", "--n", "100", "--variant", "as_printed", "--eps", "0.2"]
    code, out, _ = _run(capsys, argv)
    assert code == 0
    row = _table(out)[0]
    assert float(row["bound"]) > float(row["oracle_exact"])
    assert "bound exceeds exact expansion" in row["note"]
    assert row["mc_estimate"] == ""


def test_expand_sampling_is_reproducible_across_threads(capsys):
    argv = ["expand", "--set", "halfspace", "--n", "20", "--eps", "0,0.5,1", "--samples", "300000", "--seed", "4"]
    code_a, out_a, _ = _run(capsys, argv)
    code_b, out_b, _ = _run(capsys, argv + ["--threads", "4"])
    assert code_a == code_b == 0
    assert _body(out_a) == _body(out_b)
    assert all(r["mc_estimate"] != "" for r in _table(out_a))


def test_expand_half_sphere_needs_geodesic(capsys):
    code, _, err = _run(capsys, ["expand", "--set", "half-sphere", "--n", "10", "--p", "l2", "--eps", "0.1"])
    assert code == 3
    assert "geodesic" in err


def test_expand_sampling_needs_seed(capsys):
    code, _, err = _run(capsys, ["expand", "--set", "halfspace", "--n", "5", "--eps", "0.5", "--samples", "100"])
    assert code == 2
    assert "--seed is required" in err


CURVE = ["curve", "--n", "10", "--count", "40", "--eps", "0,0.2,0.4", "--steps", "10", "--epochs", "20", "--seed", "5"]


def test_curve_is_reproducible_across_threads(capsys):
    code_a, out_a, _ = _run(capsys, CURVE)
    code_b, out_b, _ = _run(capsys, CURVE + ["--threads", "3"])
    assert code_a == code_b == 0
    assert _body(out_a) == _body(out_b)
    rows = _table(out_a)
    assert float(rows[0]["eps"]) == 0.0
    assert all(r["n_points"] == "20" for r in rows)
    fractions = [float(r["fooled_fraction"]) for r in rows]
    assert fractions == sorted(fractions)


def test_curve_requires_seed_and_valid_grid(capsys):
    code, _, err = _run(capsys, ["curve", "--n", "10", "--eps", "0,0.1"])
    assert code == 2 and "--seed" in err
    code, _, _ = _run(capsys, ["curve", "--n", "10", "--eps", "0.2,0.1", "--seed", "1"])
    assert code == 2


def test_rescale_check_passes(capsys):
    argv = ["rescale-check", "--b", "1,2", "--pairs", "50", "--height", "4", "--width", "4", "--seed", "0"]
    code, out, _ = _run(capsys, argv)
    assert code == 0
    rows = _table(out)
    assert len(rows) == 12
    assert all(r["violations"] == "0" for r in rows)


def test_rescale_check_is_reproducible_across_threads(capsys):
    argv = ["rescale-check", "--b", "1,2,3", "--pairs", "30", "--height", "4", "--width", "3", "--seed", "2"]
    code_a, out_a, _ = _run(capsys, argv)
    code_b, out_b, _ = _run(capsys, argv + ["--threads", "3"])
    assert code_a == code_b == 0
    assert _body(out_a) == _body(out_b)


def test_rescale_check_dumps_pair_without_dump_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setattr(tempfile, "tempdir", str(tmp_path))
    argv = ["rescale-check", "--b", "2", "--pairs", "20", "--height", "4", "--width", "4", "--seed", "0"]
    code, _, err = _run(capsys, argv + ["--inject-fault"])
    assert code == 1
    assert "offending pair written to" in err
    assert len(list(tmp_path.glob("rescale-check-*/*_b2_x.bin"))) == 1
    assert len(list(tmp_path.glob("rescale-check-*/*_b2_y.bin"))) == 1


def test_rescale_check_reports_injected_fault(capsys, tmp_path):
    argv = ["rescale-check", "--b", "2", "--pairs", "20", "--height", "4", "--width", "4", "--seed", "0"]
    code, out, err = _run(capsys, argv + ["--inject-fault", "--dump-dir", str(tmp_path)])
    assert code == 1
    assert any(r["violations"] != "0" for r in _table(out))
    assert "violated" in err
    assert len(list(tmp_path.glob("*_b2_x.bin"))) == 1
    assert len(list(tmp_path.glob("*_b2_y.bin"))) == 1


def test_output_file_and_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("theorem = sparse\nn = 784\neps = 56\n")
    target = tmp_path / "out.csv"
    code, out, _ = _run(capsys, ["bound", "--config", str(cfg), "--output", str(target)])
    assert code == 0
    assert out == ""
    rows = _table(target.read_text())
    assert float(rows[0]["value"]) == pytest.approx(0.963369, abs=1e-6)


def test_bad_log_level(capsys):
    code, _, err = _run(capsys, ["bound", "--theorem", "sparse", "--n", "4", "--eps", "1", "--log-level", "LOUD"])
    assert code == 2
    assert "log level" in err
