import json
import math

import pytest

from contactfb.cli import main
from contactfb.fatou_bieberbach import build_pushout, desk_schedule, save_state


def write_config(path, **overrides):
    doc = {
        "n": 1,
        "i_max": 3,
        "k_max": 2,
        "samples": {"lemma_disks": 5, "per_shell": 20, "identity": 50,
                    "divergence": 20},
        "lemma_n0": [1],
        "budget": {"restarts": 2, "iterations": 12, "degree": 2},
    }
    doc.update(overrides)
    path.write_text(json.dumps(doc))
    return str(path)


class TestValidate:
    def test_defaults_printed(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{}")
        assert main(["validate", "--config", str(cfg)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["n"] == 1 and out["k_max"] == 6
        assert out["eps_base"] == 0.5
        assert len(out["config_hash"]) == 16

    def test_invalid_shell_named_by_index(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"schedule": {
            "kind": "explicit", "shells": [[1, 3, 5], [2, 4, 10]]}}))
        assert main(["validate", "--config", str(cfg)]) == 2
        err = capsys.readouterr().err
        assert "schedule.shells[2]" in err and "interleaved" in err

    def test_parse_error(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert main(["validate", "--config", str(cfg)]) == 2
        assert "config invalid" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["validate", "--config", str(tmp_path / "nope.json")]) == 2

    def test_decimal_strings_accepted(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"eps_base": "0.25", "k_max": "3"}))
        assert main(["validate", "--config", str(cfg)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["eps_base"] == 0.25 and out["k_max"] == 3


class TestRun:
    def test_lemma_suite_passes(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json")
        code = main(["run", "--suite", "lemma", "--config", cfg])
        out = capsys.readouterr().out
        assert code == 0
        lines = [ln for ln in out.splitlines() if ln.startswith(("PASS", "FAIL"))]
        assert lines and all(ln.startswith("PASS") for ln in lines)
        assert "passed=True" in out

    def test_pushout_suite_writes_artifacts(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json")
        out_dir = tmp_path / "out"
        code = main(["run", "--suite", "pushout", "--config", cfg,
                     "--out", str(out_dir)])
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["passed"] is True
        assert report["suite"] == "pushout"
        names = [c["name"] for c in report["checks"]]
        assert names == sorted(names)
        assert (out_dir / "pushout_state.json").exists()
        csv_text = (out_dir / "orbits.csv").read_text()
        assert csv_text.splitlines()[0] == \
            "point_index,coordinates,round,log_magnitude,classification"

    def test_deterministic_artifacts(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json")
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--suite", "pushout", "--config", cfg,
                     "--out", str(a)]) == 0
        assert main(["run", "--suite", "pushout", "--config", cfg,
                     "--out", str(b)]) == 0
        assert (a / "orbits.csv").read_bytes() == (b / "orbits.csv").read_bytes()
        assert (a / "pushout_state.json").read_bytes() == \
            (b / "pushout_state.json").read_bytes()

    def test_failing_check_exits_nonzero(self, tmp_path, capsys):
        # a tiny scaling budget cannot push the full-space bound under the
        # degeneration threshold, so that check fails
        cfg = write_config(tmp_path / "cfg.json",
                           budget={"restarts": 2, "iterations": 10,
                                   "degree": 2, "lambda_budget": 10})
        code = main(["run", "--suite", "kobayashi", "--config", cfg])
        out = capsys.readouterr().out
        assert code == 1
        assert any(ln.startswith("FAIL kobayashi/full-space-degeneration")
                   for ln in out.splitlines())

    def test_invalid_config_exits_two(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"eps_base": 2.0}))
        assert main(["run", "--suite", "lemma", "--config", str(cfg)]) == 2

    def test_thread_env_recorded(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("CONTACTFB_THREADS", "2")
        cfg = write_config(tmp_path / "cfg.json")
        out_dir = tmp_path / "out"
        assert main(["run", "--suite", "lemma", "--config", cfg,
                     "--out", str(out_dir)]) == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["environment"]["threads"] == "2"


@pytest.fixture(scope="module")
def saved_state(tmp_path_factory):
    path = tmp_path_factory.mktemp("state") / "state.json"
    save_state(build_pushout(desk_schedule(2, 3), dim=2, k_max=2), path)
    return str(path)


class TestClassify:
    def test_classifications(self, saved_state, tmp_path, capsys):
        pts = tmp_path / "pts.csv"
        pts.write_text("# header comment\n0,0\n2.0,0\n")
        code = main(["classify", "--state", saved_state,
                     "--points", str(pts)])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "point_index,classification"
        assert lines[1] == "0,in_omega_certified"
        assert lines[2] == "1,escaped"

    def test_dimension_mismatch(self, saved_state, tmp_path, capsys):
        pts = tmp_path / "pts.csv"
        pts.write_text("0,0,0\n")
        assert main(["classify", "--state", saved_state,
                     "--points", str(pts)]) == 2
        assert "expected 2 coordinates" in capsys.readouterr().err


class TestPlanPath:
    def test_endpoint_reached(self, capsys):
        code = main(["plan-path", "--from", "0,0,0", "--to", "1,2,3"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["segments"]
        end = [complex(s) for s in doc["endpoint"]]
        assert max(abs(a - b) for a, b in zip(end, [1, 2, 3])) <= 1e-10

    def test_identity_path(self, capsys):
        code = main(["plan-path", "--from", "1,2,3", "--to", "1,2,3"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["segments"] == []
        assert [complex(s) for s in doc["endpoint"]] == [1, 2, 3]

    def test_dimension_mismatch(self, capsys):
        assert main(["plan-path", "--from", "0,0,0",
                     "--to", "0,0,0,0,0"]) == 2

    def test_complex_literals(self, capsys):
        code = main(["plan-path", "--from", "0,0,0", "--to", "1+2j,0,1j"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        end = [complex(s) for s in doc["endpoint"]]
        assert end[0] == pytest.approx(1 + 2j, abs=1e-10)
        assert end[2] == pytest.approx(1j, abs=1e-10)
