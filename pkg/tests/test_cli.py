import json

import numpy as np
import pytest

from coalitiond.cli import RunConfig, config_from_dict, execute, main, run
from coalitiond.game import glove_game, save_game
from coalitiond.markets import synthetic_market_snapshots, write_market_csv
from coalitiond.tracking import TrackerConfig


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_run_is_deterministic(tmp_path):
    cfg = write_json(tmp_path / "cfg.json", {
        "scenario": "synthetic", "n_agents": 3, "horizon": 30, "seed": 4,
        "output_root": str(tmp_path / "out"),
    })
    assert main(["run", "--config", str(cfg), "--tag", "a"]) == 0
    assert main(["run", "--config", str(cfg), "--tag", "b"]) == 0
    base = tmp_path / "out" / "synthetic"
    for name in ("trajectory.csv", "errors.csv"):
        assert (base / "a" / name).read_bytes() == (base / "b" / name).read_bytes()
    manifest = json.loads((base / "a" / "manifest.json").read_text())
    assert manifest["tracker"] == "shapley" and manifest["seed"] == 4
    summary = json.loads((base / "a" / "summary.json").read_text())
    assert summary["horizon"] == 30
    lines = (base / "a" / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "k,agent,component,value" and len(lines) == 1 + 30 * 9


def test_run_overrides(tmp_path):
    cfg = write_json(tmp_path / "cfg.json", {"scenario": "synthetic", "n_agents": 2, "horizon": 10,
                                             "output_root": str(tmp_path)})
    assert main(["run", "--config", str(cfg), "--alpha", "0.3", "--horizon", "5"]) == 0
    manifest = json.loads((tmp_path / "synthetic" / "default" / "manifest.json").read_text())
    assert manifest["tracker_config"]["alpha"] == 0.3 and manifest["horizon"] == 5


def test_missing_config_exit_code(tmp_path, capsys):
    missing = tmp_path / "absent.json"
    assert main(["run", "--config", str(missing)]) == 2
    assert "absent.json" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json", {"scenario": "weather"})
    assert main(["run", "--config", str(cfg)]) == 2
    assert "scenario" in capsys.readouterr().err


def test_empty_core_exit_code(tmp_path, capsys):
    from coalitiond.game import InstantaneousGame

    game = tmp_path / "majority.json"
    save_game(InstantaneousGame.from_table(3, [0.0, 0, 0, 1, 0, 1, 1, 1]), game)
    cfg = write_json(tmp_path / "cfg.json", {
        "scenario": "custom-game-file", "input_path": str(game), "tracker": "core", "horizon": 2,
        "output_root": str(tmp_path), "tracker_config": {"alpha": 0.5, "max_iter": 100},
    })
    assert main(["run", "--config", str(cfg)]) == 1
    assert "step 0" in capsys.readouterr().err


def test_shapley_exact_command(tmp_path, capsys):
    path = tmp_path / "glove.json"
    save_game(glove_game(), path)
    assert main(["shapley-exact", str(path)]) == 0
    assert json.loads(capsys.readouterr().out) == [0.6667, 0.1667, 0.1667]


def test_core_check_command(tmp_path, capsys):
    game = tmp_path / "glove.json"
    save_game(glove_game(), game)
    x = tmp_path / "x.csv"
    x.write_text("0,0.5,0.5\n")
    assert main(["core-check", str(game), str(x)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["in_core"] is False
    assert report["worst_violation"] == pytest.approx(0.5)
    x.write_text("1,0,0\n")
    assert main(["core-check", str(game), str(x)]) == 0
    assert json.loads(capsys.readouterr().out)["in_core"] is True


def test_validate_command(tmp_path, capsys):
    good = write_json(tmp_path / "good.json", {"scenario": "forecast"})
    assert main(["validate", str(good)]) == 0
    capsys.readouterr()
    bad = write_json(tmp_path / "bad.json", {"scenario": "forecast", "lead_time_minutes": 5,
                                             "tracker_config": {"alpha": 2.0}})
    assert main(["validate", str(bad)]) == 1
    problems = json.loads(capsys.readouterr().out)["problems"]
    assert any("alpha" in p for p in problems)


def test_config_from_dict_reports_everything():
    cfg, problems = config_from_dict({"scenario": "electricity", "lead_time_minutes": 7, "bogus": 1,
                                      "tracker_config": {"alpha": 0.95, "gamma_reg": 0.2}})
    assert cfg is None
    assert len(problems) == 3


def test_benchmark_command(tmp_path, capsys):
    cfg = write_json(tmp_path / "bench.json", {"n_range": [2, 3], "scenario": "forecast", "reps": 1})
    assert main(["benchmark", str(cfg)]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["N"] for r in rows] == [2, 3]


def test_electricity_from_csv(tmp_path):
    path = tmp_path / "market.csv"
    write_market_csv(synthetic_market_snapshots(4, 10.0, seed=1)[:4], path)
    cfg = RunConfig(scenario="electricity", input_path=str(path), lead_time_minutes=5.0,
                    tracker_config=TrackerConfig(alpha=0.9, gamma_reg=0.1), reference_tolerance=1e-4)
    result, summary = execute(cfg)
    assert result.horizon == 7
    assert summary["tracker"] == "core"
    assert np.isfinite(summary["terminal_mean_cum_error"])


def test_run_returns_output_dir(tmp_path):
    out = run(RunConfig(scenario="forecast", n_agents=3, horizon=12, output_root=str(tmp_path), tag="t"))
    assert out == tmp_path / "forecast" / "t"
    assert sorted(p.name for p in out.iterdir()) == ["errors.csv", "manifest.json", "summary.json",
                                                      "trajectory.csv"]
