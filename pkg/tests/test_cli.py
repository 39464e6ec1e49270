import csv
import io
import json
import os
import subprocess
import sys

import pytest

from dellsys import cli
from dellsys.errors import ConfigError


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(path)


def _run(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestConfig:
    def test_unknown_key(self, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", {"lamda": 0.5})
        code, _, err = _run(["verify", "--config", cfg], capsys)
        assert code == 2
        assert "lamda" in err

    def test_complex_pairs(self):
        cfg = cli.parse_config("verify", {"eta": [0.1, 0.2], "tau": [0.0, 0.9], "omega": 0.05})
        assert cfg["eta"] == 0.1 + 0.2j
        assert cfg["tau"] == 0.9j
        assert cfg["omega"] == 0.05

    @pytest.mark.parametrize("raw", [{"eta": [1, 2, 3]}, {"eta": "0.1"}, {"eta": True}, {"shift_cap": 2.5},
                                     {"sizes": []}, {"sizes": 2}, [1, 2]])
    def test_bad_values(self, raw):
        with pytest.raises(ConfigError):
            cli.parse_config("verify", raw)

    def test_command_specific_keys(self):
        with pytest.raises(ConfigError):
            cli.parse_config("theta", {"N": 2})
        with pytest.raises(ConfigError):
            cli.parse_config("eigen", {"tau": [0, 1]})
        assert cli.parse_config("eigen", {"N": 3, "partition": [2, 1]})["N"] == 3

    def test_invalid_json(self, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", "{not json")
        assert _run(["theta", "--config", cfg], capsys)[0] == 2

    def test_missing_file(self, tmp_path, capsys):
        assert _run(["theta", "--config", str(tmp_path / "nope.json")], capsys)[0] == 2

    def test_out_of_domain_model(self, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", {"omega": 1.5})
        assert _run(["theta", "--config", cfg], capsys)[0] == 2


class TestFlags:
    @pytest.mark.parametrize("seed", ["-1", str(2 ** 64), "abc"])
    def test_bad_seed(self, seed, capsys):
        assert _run(["theta", "--seed", seed], capsys)[0] == 2

    def test_seed_range(self):
        assert cli.parse_seed(str(2 ** 64 - 1)) == 2 ** 64 - 1
        assert cli.parse_seed("0x10") == 16

    def test_unknown_subcommand(self, capsys):
        assert _run(["frobnicate"], capsys)[0] == 2

    def test_bad_format(self, capsys):
        assert _run(["theta", "--format", "xml"], capsys)[0] == 2

    def test_suite_only_for_verify(self, capsys):
        assert _run(["theta", "--suite", "theta"], capsys)[0] == 2

    def test_unknown_suite(self, capsys):
        code, _, err = _run(["verify", "--suite", "theta,bogus"], capsys)
        assert code == 2 and "bogus" in err

    def test_suite_order_canonical(self):
        assert cli.parse_suites("xi,theta") == ["theta", "xi"]
        assert cli.parse_suites(None) == list(cli.SUITES)


class TestVerify:
    def test_suite_filter_and_records(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        code, stdout, _ = _run(["verify", "--suite", "theta,xi", "--seed", "7", "--out", str(out)], capsys)
        assert code == 0 and stdout == ""
        rep = json.loads(out.read_text())
        assert rep["summary"]["failed"] == 0
        assert rep["summary"]["total"] == len(rep["records"]) > 0
        assert rep["environment"]["seed"] == 7
        assert set(rep["environment"]["truncation"]) >= {"tail_tolerance", "max_index", "shift_cap"}
        for r in rep["records"]:
            assert set(r) >= {"name", "anchor", "residual", "tolerance", "pass"}
            assert r["pass"] is True and r["residual"] <= r["tolerance"]

    def test_filter_does_not_change_samples(self, capsys):
        cli.main(["verify", "--suite", "xi", "--seed", "5"])
        alone = json.loads(capsys.readouterr().out)["records"]
        cli.main(["verify", "--suite", "theta,xi", "--seed", "5"])
        both = json.loads(capsys.readouterr().out)["records"]
        xi = [r for r in both if r["name"] in {a["name"] for a in alone}]
        assert xi == alone

    def test_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for p in (a, b):
            assert _run(["verify", "--suite", "cauchy,fay,omega_zero", "--seed", "11", "--out", str(p)], capsys)[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_samples(self, capsys):
        cli.main(["verify", "--suite", "cauchy", "--seed", "1"])
        r1 = capsys.readouterr().out
        cli.main(["verify", "--suite", "cauchy", "--seed", "2"])
        r2 = capsys.readouterr().out
        assert r1 != r2

    def test_csv(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        assert _run(["verify", "--suite", "theta", "--format", "csv", "--out", str(out)], capsys)[0] == 0
        rows = list(csv.DictReader(io.StringIO(out.read_text())))
        assert rows and list(rows[0]) == ["name", "anchor", "residual", "tolerance", "pass"]
        assert {r["pass"] for r in rows} == {"true"}


class TestTheta:
    def test_table(self, capsys):
        code, out, _ = _run(["theta"], capsys)
        rep = json.loads(out)
        assert code == 0 and len(rep["table"]) == 3

    def test_check_failure_exit(self, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", {"tail_tolerance": 1e-2, "p": 0.5})
        code, out, _ = _run(["theta", "--config", cfg], capsys)
        assert code == 1
        assert json.loads(out)["summary"]["failed"] > 0

    def test_guard_exhaustion_exit(self, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", {"max_index": 1, "p": 0.9})
        assert _run(["theta", "--config", cfg], capsys)[0] == 3

    def test_zero_point_is_config_error(self, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", {"points": [0.0]})
        assert _run(["theta", "--config", cfg], capsys)[0] == 2

    @pytest.mark.parametrize("kind", ["jacobi", "jacobi_deriv", "char"])
    def test_kinds(self, kind, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", {"kind": kind, "points": [[0.1, 0.05], 0.3]})
        assert _run(["theta", "--config", cfg], capsys)[0] == 0

    def test_csv_table_sidecar(self, tmp_path, capsys):
        out = tmp_path / "t.csv"
        assert _run(["theta", "--format", "csv", "--out", str(out)], capsys)[0] == 0
        side = tmp_path / "t.table.csv"
        assert side.exists()
        assert side.read_text().splitlines()[0] == "x_re,x_im,value_re,value_im"


class TestEigen:
    def test_default(self, capsys):
        code, out, _ = _run(["eigen"], capsys)
        rep = json.loads(out)
        assert code == 0
        assert any(r["name"] == "GL(2) eigenvalue" for r in rep["records"])
        assert rep["environment"]["truncation"]["omega_order"] == 2

    def test_bad_partition(self, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", {"partition": [0, 1]})
        assert _run(["eigen", "--config", cfg], capsys)[0] == 2


class TestClassical:
    def test_short_run(self, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", {"horizon": 0.01, "dt": 1e-3, "record_every": 5})
        code, out, _ = _run(["classical", "--config", cfg], capsys)
        rep = json.loads(out)
        assert code == 0, rep
        assert len(rep["table"]) == 3
        assert {r["name"] for r in rep["records"]} >= {"det L conservation", "manakov equation"}

    def test_mismatched_state(self, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", {"positions": [0.1, 0.2], "momenta": [0.0]})
        assert _run(["classical", "--config", cfg], capsys)[0] == 2

    def test_bad_gradient_method(self, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", {"gradient": "symbolic"})
        assert _run(["classical", "--config", cfg], capsys)[0] == 2

    def test_guard_exit(self, tmp_path, capsys):
        cfg = _write(tmp_path, "c.json", {"z0": 0.0, "horizon": 0.01, "dt": 1e-2})
        assert _run(["classical", "--config", cfg], capsys)[0] == 3


class TestAtomicWrite:
    def test_replaces(self, tmp_path):
        p = tmp_path / "x.txt"
        p.write_text("old")
        cli.atomic_write(str(p), "new")
        assert p.read_text() == "new"
        assert [f.name for f in tmp_path.iterdir()] == ["x.txt"]

    def test_no_partial_file_on_failure(self, tmp_path, monkeypatch):
        p = tmp_path / "x.txt"
        p.write_text("old")

        def boom(*a, **k):
            raise OSError("disk on fire")

        monkeypatch.setattr(os, "replace", boom)
        with pytest.raises(OSError):
            cli.atomic_write(str(p), "new")
        assert p.read_text() == "old"
        assert [f.name for f in tmp_path.iterdir()] == ["x.txt"]


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "dellsys", "theta", "--format", "csv"],
                         capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == 0
    assert res.stdout.startswith("name,anchor,residual,tolerance,pass")
