import json

import pytest
import yaml

from sdwave.cli import main
from sdwave.errors import ConfigError
from sdwave.scenarios import SCENARIOS, Table, default_radii, parse_config, run_scenario
from sdwave.spectral import Grid


def _write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestConfig:
    def test_defaults_are_filled(self):
        cfg = parse_config("scenario: tail\n")
        echo = cfg.echo()
        assert echo["grid"] == {"dim": 1, "box_length": 100.0, "modes": 1024}
        assert echo["model"]["alpha"] == 0.75
        assert echo["model"]["forcing"]["kind"] == "bump"
        assert echo["options"]["T"] == 10.0

    def test_every_scenario_parses(self):
        for name in SCENARIOS:
            assert parse_config(f"scenario: {name}\n").scenario == name

    @pytest.mark.parametrize(
        "text, message",
        [
            ("scenario: decay\nmodel: {alpha: 1.2}\n", "[dynamics] dissipative index out of (1/2,1)"),
            ("scenario: decay\ngrid: {dim: 5}\nmodel: {p: 5}\n", "[nonlinearity] p ≥ p_α = 4"),
            ("scenario: decay\nbogus: 1\n", "[cli] unknown key 'bogus'"),
            ("scenario: nope\n", "scenario"),
        ],
    )
    def test_invalid(self, text, message):
        with pytest.raises(ConfigError) as exc:
            parse_config(text)
        assert any(message in p for p in exc.value.problems)

    def test_default_radii(self):
        assert default_radii(Grid(1, 100.0, 64)) == [6.25, 12.5, 18.75]


class TestTable:
    def test_layout(self, tmp_path):
        t = Table("demo", ["a", "b"], [[1.0, 2], [0.1, 3]])
        path = tmp_path / "t.csv"
        t.write(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "# schema=sdwave.table.demo/1"
        assert lines[1] == "a,b"
        assert lines[3].startswith("0.1,")


class TestMain:
    def test_echo(self, tmp_path, capsys):
        code = main([_write(tmp_path, "scenario: mollifier-suite\n"), "--echo"])
        assert code == 0
        echo = yaml.safe_load(capsys.readouterr().out)
        assert echo["scenario"] == "mollifier-suite"
        assert echo["options"]["levels"] == [0, 1, 2, 3, 4]

    def test_invalid_alpha_exit_code(self, tmp_path, capsys):
        code = main([_write(tmp_path, "scenario: decay\nmodel: {alpha: 1.2}\n")])
        assert code == 2
        assert "dissipative index out of (1/2,1)" in capsys.readouterr().err

    def test_supercritical_message(self, tmp_path, capsys):
        code = main([_write(tmp_path, "scenario: decay\ngrid: {dim: 5}\nmodel: {p: 5}\n")])
        assert code == 2
        assert "p ≥ p_α = 4" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main([str(tmp_path / "absent.yaml")]) == 2

    def test_huge_dt_fails_cleanly(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main([_write(tmp_path, "scenario: stability\nintegrator: {dt: 5.0}\n"), "-o", str(out)])
        assert code != 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["passed"] is False
        fail = [a for a in summary["assertions"] if a["name"] == "run_completed"][0]
        assert fail["passed"] is False
        assert "StepSizeError" in str(fail["value"])

    def test_mollifier_suite_runs(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main([_write(tmp_path, "scenario: mollifier-suite\n"), "-o", str(out)])
        assert code == 0
        text = capsys.readouterr().out
        assert "PASS selfadjoint_defect" in text
        summary = json.loads((out / "summary.json").read_text())
        assert summary["schema"] == "sdwave.summary/1"
        for name in summary["files"]:
            assert (out / name).read_text().startswith("# schema=sdwave.table.")

    def test_byte_identical_reruns(self, tmp_path):
        cfg = _write(tmp_path, "scenario: mollifier-suite\nseed: 7\n")
        blobs = []
        for run in ("a", "b"):
            out = tmp_path / run
            assert main([cfg, "-o", str(out), "--no-timing", "-q"]) == 0
            blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert blobs[0] == blobs[1]

    def test_seed_override(self, tmp_path):
        cfg = _write(tmp_path, "scenario: mollifier-suite\nseed: 1\n")
        main([cfg, "-o", str(tmp_path / "a"), "--seed", "5", "--no-timing", "-q"])
        summary = json.loads((tmp_path / "a" / "summary.json").read_text())
        assert summary["params"]["seed"] == 5


class TestRunScenario:
    def test_timing_fields(self, tmp_path):
        cfg = parse_config("scenario: mollifier-suite\n")
        status, summary = run_scenario(cfg, str(tmp_path), timing=True)
        assert status == 0
        assert summary["wall_time"] > 0
        _, quiet = run_scenario(cfg, str(tmp_path), timing=False)
        assert quiet["wall_time"] is None and quiet["stage_times"] is None
