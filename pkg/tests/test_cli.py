import json

import jsonschema
import pytest

from tunnellab.cli import main
from tunnellab.config import SUBCOMMANDS, ConfigError, RunConfig, bundled_config_path, load_schema


def write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    return path


SMALL_PACKET = {
    "barrier": {"v0": 2.0, "a": 1.0, "b": 0.5, "profile": "smoothstep3"},
    "packet": {"x0": -125.0, "k0": 2.0, "sigma": 10.0},
    "grid": {"xmin": -260.0, "xmax": 260.0, "n": 4096, "dt": 0.01, "tmax": 130.0},
    "region_R": [40.0, 60.0],
    "sample_every": 10,
}


class TestConfig:
    def test_schema_is_valid(self):
        jsonschema.Draft202012Validator.check_schema(load_schema())

    @pytest.mark.parametrize("name", SUBCOMMANDS)
    def test_bundled_configs_validate(self, name):
        RunConfig.load(bundled_config_path(name), name)

    def test_defaults(self):
        cfg = RunConfig.from_dict({"barrier": {"v0": 1, "a": 1, "b": 0}})
        assert cfg.units.hbar == 1.0 and cfg.tolerances["unitarity"] == 1e-8

    def test_tolerance_override(self):
        cfg = RunConfig.from_dict({"barrier": {"v0": 1, "a": 1, "b": 0}, "tolerances": {"delay": 1e-9}})
        assert cfg.tolerances["delay"] == 1e-9 and cfg.tolerances["phase"] == 1e-8

    def test_inverted_energy_range(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"barrier": {"v0": 1, "a": 1, "b": 0}, "energies": {"min": 2, "max": 1, "n": 5}})


class TestSubcommands:
    @pytest.mark.parametrize("name", ["amplitudes", "delays", "hartman", "classical", "semiclassical"])
    def test_bundled_runs(self, name, tmp_path, capsys):
        assert main([name, "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["status"] == "pass" and report["subcommand"] == name
        assert all("tolerance" in c for c in report["checks"])
        assert (tmp_path / f"{name}.csv").exists()
        assert (tmp_path / f"{name}.png").exists()
        assert "PASS" in capsys.readouterr().out

    def test_verify_bundled(self, tmp_path):
        assert main(["verify", "--out", str(tmp_path)]) == 0
        names = [c["name"] for c in json.loads((tmp_path / "report.json").read_text())["checks"]]
        assert any("unitarity" in n for n in names)
        assert any("delay identity" in n for n in names)
        assert any("rectangular oracle" in n for n in names)

    def test_wavepacket(self, tmp_path):
        cfg = write(tmp_path, "wp.json", SMALL_PACKET)
        assert main(["wavepacket", "--config", str(cfg), "--out", str(tmp_path / "o"), "--no-figures"]) == 0
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert abs(summary["P_tr"] + summary["P_re"] - 1) < 1e-6
        assert {"spectral_transmitted", "centroid_transmitted", "sojourn_R=40"} <= set(summary["delays"])
        header = (tmp_path / "o" / "timeseries.csv").read_text().splitlines()[0]
        assert header == "t,norm,centroid,P_R=40,P_R=60"
        assert not (tmp_path / "o" / "wavepacket.png").exists()

    def test_hartman_ratio_is_informational(self, tmp_path):
        assert main(["hartman", "--out", str(tmp_path), "--no-figures"]) == 0
        checks = json.loads((tmp_path / "report.json").read_text())["checks"]
        ratio = [c for c in checks if c["name"].startswith("tau_tr v")][0]
        assert not ratio["asserted"] and not ratio["passed"]


class TestExitCodes:
    def test_domain_error(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"barrier": {"v0": 1, "a": 1, "b": 0}, "hartman": {"E": 1.2, "a_values": [1, 2]}})
        assert main(["hartman", "--config", str(cfg), "--out", str(tmp_path)]) == 3
        assert "0 < E < v0" in capsys.readouterr().err

    def test_negative_width(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"barrier": {"v0": 1, "a": -1, "b": 0}, "energies": {"min": 0.1, "max": 1, "n": 3}})
        assert main(["amplitudes", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "barrier/a" in capsys.readouterr().err

    @pytest.mark.parametrize("payload", ['{"barrier": {"v0": 1, "a": 1, "b": 0}, "extra": 1}', "{not json", "[1, 2]",
                                         '{"energies": {"min": 0.1, "max": 1, "n": 3}}'])
    def test_config_errors(self, tmp_path, payload):
        cfg = write(tmp_path, "c.json", payload)
        assert main(["amplitudes", "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["delays", "--config", str(tmp_path / "nope.json")]) == 2

    def test_failed_check(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"barrier": {"v0": 1, "a": 1, "b": 0.5, "profile": "cosine"},
                                         "energies": {"min": 0.1, "max": 2, "n": 20},
                                         "tolerances": {"unitarity": 1e-30}})
        assert main(["amplitudes", "--config", str(cfg), "--out", str(tmp_path), "--no-figures"]) == 1
        assert "unitarity" in capsys.readouterr().err
        assert json.loads((tmp_path / "report.json").read_text())["status"] == "fail"

    def test_bad_threads(self, tmp_path):
        assert main(["delays", "--threads", "0", "--out", str(tmp_path)]) == 2


class TestDeterminism:
    def test_repeat_identical(self, tmp_path):
        for d in ("a", "b"):
            assert main(["delays", "--out", str(tmp_path / d), "--no-figures"]) == 0
        assert (tmp_path / "a" / "delays.csv").read_bytes() == (tmp_path / "b" / "delays.csv").read_bytes()

    def test_threads_identical(self, tmp_path):
        assert main(["hartman", "--out", str(tmp_path / "1"), "--no-figures"]) == 0
        assert main(["hartman", "--out", str(tmp_path / "2"), "--threads", "2", "--no-figures"]) == 0
        assert (tmp_path / "1" / "hartman.csv").read_bytes() == (tmp_path / "2" / "hartman.csv").read_bytes()

    def test_seed(self, tmp_path):
        runs = {}
        for name, seed in (("a", "7"), ("b", "7"), ("c", "8")):
            assert main(["verify", "--seed", seed, "--out", str(tmp_path / name)]) == 0
            runs[name] = (tmp_path / name / "verify.csv").read_bytes()
        assert runs["a"] == runs["b"] and runs["a"] != runs["c"]
