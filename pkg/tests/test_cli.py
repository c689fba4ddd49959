import csv
import json

import pytest

from catpulse.cli import THREADS_ENV, main, resolve_threads
from catpulse.config import load_config, parse_config
from catpulse.errors import ConfigError

SINGLE = """\
kind = "single-cat"
unit = "g"

[system]
delta = 1000.0
gamma = 0.01
kappa_in = 0.1
kappa_ex = "optimal"

[pulse]
kappa_tau = 20.0
alpha = 1.0
"""

SWEEP = """\
kind = "kex-sweep"
unit = "gamma"

[system]
g = 10.0
delta = 1000.0

[pulse]
kappa_tau = 50.0
alpha = 2.0

[sweep]
kappa_in_over_g = [0.1]
"""


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestParse:
    def test_single(self):
        cfg = parse_config(SINGLE)
        p = cfg.system_params()
        assert cfg.kind == "single-cat"
        assert p.g == 1.0
        assert p.kappa_ex == pytest.approx(0.1 * (1 + 2 * 1 / (2 * 0.1 * 0.01)) ** 0.5)
        assert cfg.source == SINGLE

    def test_unit_reference_defaults_to_one(self):
        assert parse_config(SWEEP).system["gamma"] == 1.0

    @pytest.mark.parametrize("text, fragment", [
        (SINGLE.replace("alpha = 1.0", "alpha = 1.0\nbogus = 2"), "unknown keys"),
        (SINGLE + "\n[extra]\nx = 1\n", "unknown top-level"),
        (SINGLE.replace('unit = "g"', 'unit = "kappa"'), "unit"),
        (SINGLE.replace('kind = "single-cat"', 'kind = "movie"'), "kind"),
        (SINGLE.replace("gamma = 0.01", "gamma = -1.0"), "gamma"),
        (SINGLE.replace("[system]", "[system]\ng = 2.0"), "must be 1"),
        (SINGLE.replace("kappa_tau = 20.0", "kappa_tau = 20.0\ntau = 3.0"), "exactly one"),
        (SINGLE.replace('kappa_ex = "optimal"', 'kappa_ex = "best"'), "kappa_ex"),
        (SINGLE.replace('kappa_ex = "optimal"\n', ""), "kappa_ex"),
        (SINGLE.replace("alpha = 1.0", "alpha = [1.0, 2.0, 3.0]"), "alpha"),
        (SINGLE.replace("alpha = 1.0", 'alpha = "big"'), "alpha"),
        ("kind = [", "TOML"),
    ])
    def test_rejected(self, text, fragment):
        with pytest.raises(ConfigError, match=fragment):
            parse_config(text)

    def test_complex_amplitude(self):
        cfg = parse_config(SINGLE.replace("alpha = 1.0", "alpha = [0.0, 1.5]"))
        assert cfg.pulse["alpha"] == 1.5j

    def test_four_cat_needs_beta(self):
        text = SINGLE.replace('kind = "single-cat"', 'kind = "four-cat"')
        with pytest.raises(ConfigError, match="beta"):
            parse_config(text)
        cfg = parse_config(text.replace("alpha = 1.0", "beta = 1.0"))
        assert cfg.system_params().n_emitters == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "none.toml")

    def test_tolerances(self):
        cfg = parse_config(SINGLE + "\n[numerics]\nrtol = 1e-7\n")
        assert cfg.tolerances == (1e-7, 1e-10)
        assert parse_config(SINGLE).tolerances is None


class TestThreads:
    def test_precedence(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert resolve_threads(None) == 3
        assert resolve_threads(2) == 2
        monkeypatch.delenv(THREADS_ENV)
        assert resolve_threads(None) == 1

    def test_invalid(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "many")
        with pytest.raises(ConfigError):
            resolve_threads(None)
        with pytest.raises(ConfigError):
            resolve_threads(0)


class TestValidate:
    def test_clean_sweep_config(self, tmp_path, capsys):
        assert main(["validate", "--config", write(tmp_path, SWEEP)]) == 0
        assert "warning:" not in capsys.readouterr().out

    def test_adiabaticity_warning(self, tmp_path, capsys):
        # tau = tau_c = 1/g for kappa = g
        text = SINGLE.replace("kappa_tau = 20.0", "tau = 1.0").replace('kappa_ex = "optimal"', "kappa_ex = 0.9")
        assert main(["validate", "--config", write(tmp_path, text)]) == 0
        out = capsys.readouterr().out
        assert "τ ≫ τ_c" in out

    def test_omega0_warning(self, tmp_path, capsys):
        text = SWEEP.replace("[0.1]", "[0.001]")
        assert main(["validate", "--config", write(tmp_path, text)]) == 0
        assert "omega0" in capsys.readouterr().out

    def test_negative_gamma(self, tmp_path, capsys):
        text = SINGLE.replace("gamma = 0.01", "gamma = -0.01")
        assert main(["validate", "--config", write(tmp_path, text)]) == 2
        assert "gamma" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "missing.toml")]) == 2


class TestRun:
    def test_single_cat_record(self, tmp_path):
        cfg = write(tmp_path, SINGLE + "\n[wigner]\npoints = 61\n")
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["run", "--config", cfg, "--out", str(out2)]) == 0
        for name in ("record.json", "trajectory.csv", "wigner.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        rec = json.loads((out1 / "record.json").read_text())
        assert rec["config"] == (tmp_path / "run.toml").read_text()
        assert rec["status"] == "ok"
        summary = rec["result"]["summary"]
        assert summary["fidelity"] >= summary["F_min"] - 0.01
        assert abs(rec["result"]["wigner"]["integral"] - 1) < 1e-3
        timing = json.loads((out1 / "timing.json").read_text())
        assert timing["wall_clock_seconds"] > 0
        with open(out1 / "trajectory.csv") as fh:
            header = next(csv.reader(fh))
        assert header[:2] == ["t", "trace"]
        assert "sx[emitter1]" in header

    def test_output_dir_from_config(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write(tmp_path, SINGLE + '\n[output]\ndir = "from_cfg"\ntrajectory = false\n')
        assert main(["run", "--config", cfg]) == 0
        assert (tmp_path / "from_cfg" / "record.json").exists()
        assert not (tmp_path / "from_cfg" / "trajectory.csv").exists()

    def test_numerical_failure(self, tmp_path):
        cfg = write(tmp_path, SINGLE + "\n[numerics]\nn_virtual = 3\n")
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
        rec = json.loads((tmp_path / "o" / "record.json").read_text())
        assert rec["status"] == "failed"
        assert rec["error"]["type"] == "TruncationError"
        assert rec["diagnostics"]["tail_population"]["virtual"] > 1e-6

    def test_config_error(self, tmp_path):
        cfg = write(tmp_path, SINGLE.replace("alpha", "alfa"))
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_pe_map(self, tmp_path):
        text = """\
kind = "pe-map"
unit = "g"
[system]
delta = 100.0
gamma = 0.5
[pulse]
alpha = 1.0
[pe_map]
kappa_over_g = [1.0, 2.0]
kappa_tau = [5.0]
n_cavity = 6
"""
        out = tmp_path / "pe"
        assert main(["run", "--config", write(tmp_path, text), "--out", str(out), "--threads", "2"]) == 0
        with open(out / "pe_map.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [float(r["kappa_over_g"]) for r in rows] == [1.0, 2.0]
        for r in rows:
            assert 0 < float(r["P_e"]) < 1

    def test_four_cat_wigner(self, tmp_path):
        text = """\
kind = "wigner"
unit = "g"
[system]
delta = 1000.0
gamma = 1e-6
kappa_ex = 1.0
[pulse]
kappa_tau = 20.0
beta = 1.0
[wigner]
target = "four-cat"
points = 81
"""
        out = tmp_path / "w"
        assert main(["run", "--config", write(tmp_path, text), "--out", str(out)]) == 0
        rec = json.loads((out / "record.json").read_text())
        assert rec["result"]["summary"]["fidelity"] > 0.99
        assert rec["result"]["summary"]["probability"] > 0
        assert abs(rec["result"]["wigner"]["integral"] - 1) < 1e-3

    @pytest.mark.slow
    def test_kex_sweep(self, tmp_path):
        text = """\
kind = "kex-sweep"
unit = "g"
[system]
delta = 1000.0
gamma = 0.1
[pulse]
kappa_tau = 20.0
alpha = 1.0
[sweep]
kappa_in_over_g = [0.1]
bracket_over_kappa_in = [1.0, 100.0]
rel_tol = 0.3
"""
        out = tmp_path / "k"
        assert main(["run", "--config", write(tmp_path, text), "--out", str(out)]) == 0
        rec = json.loads((out / "record.json").read_text())
        row = rec["result"]["rows"][0]
        assert 0.5 <= row["ratio"] <= 2.0
        assert (out / "sweep_0.csv").exists()
        assert row["F_best"] >= row["F_min_at_best"] - 0.01
