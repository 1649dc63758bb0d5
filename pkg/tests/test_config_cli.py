import csv
import io
import json

import numpy as np
import pytest

from compact_sde.analysis import Metric, parse_report
from compact_sde.cli import main
from compact_sde.config import BUILTINS, ConfigError, builtin_config, list_builtins, parse_config, validate
from compact_sde.geometry import Polyhedron, contains
from compact_sde.nets import mlp_init, save_mlp
from compact_sde.runner import check_assertions, run_experiment

SMALL = {
    "name": "small",
    "parameterizations": ["unconstrained", "absorbed", "wsp"],
    "solver": {"name": "milstein", "dt": 0.001, "T": 0.5},
    "z0": [0.99],
    "seeds": [0, 1],
    "samples_per_seed": 2,
    "network": {"hidden": [16, 16]},
}


def _write_config(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


class TestValidation:
    def test_builtins(self):
        assert set(list_builtins()) == {"fig1_weights", "fig2_top", "fig2_stationary", "fig3_kl",
                                        "conditions_suite"}
        for name in list_builtins():
            assert validate(BUILTINS[name]) == []

    def test_z0_outside(self):
        errors = validate({"z0": [1.5], "parameterizations": ["wsp"]})
        assert any("z0 outside polyhedron" in e for e in errors)

    def test_dt_not_positive(self):
        assert any("dt must be positive" in e for e in validate({"solver": {"dt": 0}}))

    def test_reports_every_problem_and_names_fields(self):
        errors = validate({"seeds": [], "bogus": 1, "solver": {"dt": -1, "nope": 2}, "kind": "x"})
        joined = "\n".join(errors)
        for field in ("seeds:", "bogus:", "solver.dt:", "solver.nope:", "kind:"):
            assert field in joined

    def test_unit_interval_only_baselines(self):
        raw = {"parameterizations": ["absorbed"], "z0": [0.5, 0.5],
               "polyhedra": [{"box": {"lo": [0, 0], "hi": [1, 1]}}]}
        assert any("K = [0, 1]" in e for e in validate(raw))

    def test_bad_polyhedron(self):
        raw = {"polyhedra": [{"halfspaces": [{"u": [0.0], "v": [1.0]}]}], "z0": [0.5]}
        assert any("not compact" in e for e in validate(raw))

    def test_parse_raises_with_all_errors(self):
        with pytest.raises(ConfigError) as info:
            parse_config({"seeds": [], "solver": {"dt": 0}})
        assert len(info.value.errors) >= 2

    def test_overrides(self):
        cfg = builtin_config("fig2_top").with_overrides(seeds=[7], output="/tmp/x")
        assert cfg.seeds == (7,) and cfg.output == "/tmp/x"


class TestRunner:
    def test_outputs_are_byte_identical_across_runs_and_workers(self, tmp_path):
        a = run_experiment(parse_config(SMALL), tmp_path / "a")
        b = run_experiment(parse_config(dict(SMALL, workers=2)), tmp_path / "b")
        names = sorted(str(p.relative_to(tmp_path / "a")) for p in a.files)
        assert names == sorted(str(p.relative_to(tmp_path / "b")) for p in b.files)
        assert "unconstrained.csv" in names and "wsp.svg" in names
        for name in names:
            if name != "config.json":
                assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    def test_csv_layout_and_in_k_flags(self, tmp_path):
        run_experiment(parse_config(SMALL), tmp_path)
        rows = list(csv.DictReader(io.StringIO((tmp_path / "unconstrained.csv").read_text())))
        assert list(rows[0]) == ["seed", "sample", "t", "z_1", "in_k"]
        assert len(rows) == 2 * 2 * 501
        z = np.array([[float(r["z_1"])] for r in rows])
        flags = np.array([r["in_k"] == "1" for r in rows])
        np.testing.assert_array_equal(flags, contains(Polyhedron.box([0.0], [1.0]), z, 1e-6))

    def test_report_and_network_dumps(self, tmp_path):
        res = run_experiment(parse_config(SMALL), tmp_path)
        metrics = {m.name: m for m in parse_report((tmp_path / "report.txt").read_text())}
        assert metrics["wsp.viability.fraction_in_k"].passed
        assert metrics["absorbed.viability.fraction_in_k"].passed
        assert (tmp_path / "networks" / "seed0_drift.txt").exists()
        assert res.exit_code == 0

    def test_assertions(self):
        metrics = [Metric("a.x", 1.0, True), Metric("b.x", 2.0, False), Metric("c.x", 3.0)]
        assert check_assertions(metrics, ["a.*"]) == []
        assert check_assertions(metrics, ["*.x"]) == ["b.x = 2.0 FAIL"]
        assert "no checked metric" in check_assertions(metrics, ["c.*"])[0]


class TestCli:
    def test_list(self, capsys):
        assert main(["list"]) == 0
        assert "fig2_top" in capsys.readouterr().out.split()

    def test_validate(self, tmp_path, capsys):
        assert main(["validate", "fig2_top"]) == 0
        assert main(["validate", _write_config(tmp_path, {"solver": {"dt": 0}})]) == 2
        assert "dt must be positive" in capsys.readouterr().err

    def test_unreadable_config(self, tmp_path, capsys):
        assert main(["validate", str(tmp_path / "missing.json")]) == 2
        (tmp_path / "broken.json").write_text("{")
        assert main(["run", str(tmp_path / "broken.json")]) == 2

    def test_run_exit_codes(self, tmp_path, capsys):
        ok = dict(SMALL, parameterizations=["wsp"], **{"assert": ["wsp.viability.*"]})
        assert main(["run", _write_config(tmp_path, ok), "--out", str(tmp_path / "ok"), "--quiet"]) == 0
        bad = dict(SMALL, parameterizations=["unconstrained"], **{"assert": ["unconstrained.viability.*"]})
        assert main(["run", _write_config(tmp_path, bad), "--out", str(tmp_path / "bad"), "--quiet"]) == 1
        assert "assertion failed" in capsys.readouterr().err

    def test_numeric_abort(self, tmp_path, capsys):
        raw = dict(SMALL, parameterizations=["sigmoid_ito"], solver={"name": "euler", "dt": 0.5, "T": 5.0},
                   network={"hidden": [16, 16]})
        code = main(["run", _write_config(tmp_path, raw), "--out", str(tmp_path / "o"), "--quiet"])
        assert code == 3
        err = capsys.readouterr().err
        assert "seed" in err and "step" in err

    def test_seed_override(self, tmp_path):
        path = _write_config(tmp_path, dict(SMALL, parameterizations=["wsp"]))
        assert main(["run", path, "--out", str(tmp_path / "o"), "--seeds", "3", "--quiet"]) == 0
        rows = list(csv.DictReader(io.StringIO((tmp_path / "o" / "wsp.csv").read_text())))
        assert {r["seed"] for r in rows} == {"3"}

    def test_check(self, tmp_path, capsys):
        p = mlp_init([1, 8, 1], "silu", 4)
        save_mlp(p, tmp_path / "net.txt")
        assert main(["check", str(tmp_path / "net.txt")]) == 0
        out = capsys.readouterr().out
        assert "sizes 1-8-1" in out and f"sha256 {p.checksum()}" in out
        assert main(["check", str(tmp_path / "none.txt")]) == 2
