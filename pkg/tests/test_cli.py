import json

import pytest

from ruelle import cli
from ruelle.io import SvgPlot, fmt, read_csv, write_csv
from ruelle.transfer import NumericalError


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def meta(out):
    return json.loads((out / "run.json").read_text())


class TestCommands:
    def test_dimension(self, tmp_path):
        code, out = run(tmp_path, "dimension", "--gauss", "2")
        assert code == cli.EXIT_OK
        hdr, rows = read_csv(out / "dimension.csv")
        assert hdr[0] == "dimension" and float(rows[0][0]) == pytest.approx(0.531, abs=0.002)
        m = meta(out)
        assert m["exit_status"] == 0 and m["config"]["system"] == {"kind": "gauss", "n_branches": 2}
        assert set(m["versions"]) >= {"ruelle", "numpy", "scipy", "python"}
        assert m["wall_time_s"] >= 0 and "figure" in m

    def test_spectrum_svg(self, tmp_path):
        code, out = run(tmp_path, "spectrum", "--gauss", "3", "--a", "1", "--b", "40", "--svg")
        assert code == 0
        hdr, rows = read_csv(out / "spectrum.csv")
        assert hdr == ["N", "a", "b", "M", "re", "im", "modulus", "log_modulus", "arg", "stable"]
        assert rows and all(r[0] == "3" for r in rows)
        assert (out / "spectrum.svg").read_text().startswith("<svg")

    def test_trapped_set_band(self, tmp_path):
        code, out = run(tmp_path, "trapped-set", "--gauss", "3", "--max-period", "4")
        assert code == 0 and meta(out)["summary"]["band_fraction"] == 1.0
        _, rows = read_csv(out / "trapped_set.csv")
        assert rows[0][3] == "1"  # words are printed 1-based

    def test_captivity(self, tmp_path):
        code, out = run(tmp_path, "captivity", "--schottky", "example")
        cert = json.loads((out / "captivity.json").read_text())
        assert code == 0 and cert["boxes"]["status"] == "captive" and cert["mobius"]["status"] == "captive"

    def test_schottky_config_file(self, tmp_path):
        from pathlib import Path
        cfg = Path(__file__).resolve().parents[1] / "configs" / "schottky_three_funnel.json"
        code, out = run(tmp_path, "dimension", "--schottky", str(cfg), "--depth", "8")
        assert code == 0
        assert float(read_csv(out / "dimension.csv")[1][0][0]) == pytest.approx(0.405, abs=0.002)

    def test_gap_scan_small(self, tmp_path):
        code, out = run(tmp_path, "gap-scan", "--gauss", "2", "--b-grid", "0:40:3", "--max-period", "6")
        hdr, rows = read_csv(out / "gap_scan.csv")
        assert code == 0 and len(rows) == 3 and hdr[-1] == "gamma_plus"

    def test_zeta_zeros(self, tmp_path):
        code, out = run(tmp_path, "zeta-zeros", "--gauss", "2", "--rect", "0.2:1:-1:1")
        assert code == 0 and meta(out)["summary"]["validated"] == 1


class TestExitCodes:
    def test_conflicting_systems(self, tmp_path, capsys):
        code, _ = run(tmp_path, "dimension", "--gauss", "2", "--schottky", "example")
        assert code == cli.EXIT_CONFIG
        assert "exactly one" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run(tmp_path, "dimension", "--config", str(tmp_path / "nope.json"))[0] == cli.EXIT_CONFIG

    def test_bad_interval(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"kind": "custom", "intervals": [[1, 0]], "branches": []}))
        code, out = run(tmp_path, "dimension", "--config", str(p))
        assert code == cli.EXIT_CONFIG and "error" in meta(out)

    def test_bad_range(self, tmp_path):
        assert run(tmp_path, "pressure", "--gauss", "2", "--depth", "0")[0] == cli.EXIT_CONFIG
        assert run(tmp_path, "weyl", "--gauss", "2", "--b-grid", "5:1:4")[0] == cli.EXIT_CONFIG
        assert run(tmp_path, "weyl", "--gauss", "2", "--b-grid", "abc")[0] == cli.EXIT_CONFIG

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["frobnicate", "--gauss", "2"])
        assert info.value.code == 2

    def test_budget(self, tmp_path):
        code, out = run(tmp_path, "dimension", "--gauss", "3", "--max-orbits", "1000")
        assert code == cli.EXIT_BUDGET and meta(out)["exit_status"] == cli.EXIT_BUDGET
        assert run(tmp_path, "spectrum", "--gauss", "3", "--nodes", "400", "--max-matrix", "500")[0] == cli.EXIT_BUDGET

    def test_numerical(self, tmp_path, monkeypatch):
        def broken(*a, **k):
            raise NumericalError("eigensolver failed")
        monkeypatch.setattr(cli.transfer, "spectrum", broken)
        assert run(tmp_path, "spectrum", "--gauss", "2")[0] == cli.EXIT_NUMERICAL

    def test_inconclusive(self, tmp_path):
        code, out = run(tmp_path, "captivity", "--gauss", "3", "--depth", "3")
        assert code == cli.EXIT_INCONCLUSIVE
        assert "suggestion" in json.loads((out / "captivity.json").read_text())["boxes"]


class TestDeterminism:
    @pytest.mark.parametrize("args, fname", [
        (["dimension", "--gauss", "3"], "dimension.csv"),
        (["spectrum", "--schottky", "example", "--a", "0.5", "--b", "10"], "spectrum.csv"),
        (["pressure", "--gauss", "2", "--beta", "0.7"], "pressure.csv"),
    ])
    def test_byte_identical(self, tmp_path, args, fname):
        _, o1 = run(tmp_path, *args, name="one")
        _, o2 = run(tmp_path, *args, name="two")
        assert (o1 / fname).read_bytes() == (o2 / fname).read_bytes()

    def test_workers_agree(self, tmp_path):
        _, o1 = run(tmp_path, "pressure", "--gauss", "3", name="serial")
        _, o2 = run(tmp_path, "pressure", "--gauss", "3", "--workers", "4", name="parallel")
        p1 = float(read_csv(o1 / "pressure.csv")[1][0][1])
        p2 = float(read_csv(o2 / "pressure.csv")[1][0][1])
        assert abs(p1 - p2) <= 1e-12


class TestIo:
    def test_fmt(self):
        assert fmt(0.1) == "0.10000000000000001"
        assert fmt(True) == "true" and fmt(3) == "3"
        assert fmt(1 - 2j) == "1-2j"

    def test_csv_roundtrip(self, tmp_path):
        p = write_csv(tmp_path / "a" / "t.csv", ["x", "y"], [[1.5, 2], [float("nan"), -0.25]])
        hdr, rows = read_csv(p)
        assert hdr == ["x", "y"] and rows == [["1.5", "2"], ["nan", "-0.25"]]
        assert b"\r" not in p.read_bytes()

    def test_svg_escapes(self):
        s = SvgPlot(title="a < b & c").scatter([0, 1], [0, float("nan")]).render()
        assert "a &lt; b &amp; c" in s and s.count("<circle") == 1


def test_script_runs(tmp_path):
    import subprocess
    import sys
    from pathlib import Path
    script = Path(__file__).resolve().parents[1] / "scripts" / "trapped_set.py"
    res = subprocess.run([sys.executable, str(script), "--max-period", "3", "--out", str(tmp_path)],
                         capture_output=True, text=True, check=True)
    assert "39/39" in res.stdout
    assert (tmp_path / "trapped_set.svg").exists()
