"""Command-line scenario runner.

    coalitiond run --config cfg.json [--alpha A] [--seed S] [--horizon K] [--tag T]
    coalitiond shapley-exact game.json
    coalitiond core-check game.json x.csv
    coalitiond benchmark bench.json
    coalitiond validate cfg.json
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .exact import core_membership, shapley_exact
from .game import ConvergenceError, DynamicGame, GameError, drifting_game, load_game
from .markets import (
    forecast_scenario, ingest_timeseries, market_scenario, synthetic_forecast_records,
    synthetic_market_snapshots,
)
from .metrics import benchmark_step_cost, mean_cumulative_error, payoff_difference
from .network import GraphSchedule
from .tracking import REFERENCE_MODES, TrackerConfig, TrackResult, core_track, shapley_track

SCENARIOS = ("forecast", "electricity", "synthetic", "custom-game-file")
TRACKERS = ("shapley", "core")
LEAD_TIMES = (2.0, 5.0, 10.0)

_DEFAULT_AGENTS = {"forecast": 6, "electricity": 10, "synthetic": 5}
_DEFAULT_HORIZON = {"forecast": 1152, "synthetic": 500, "custom-game-file": 200}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    topology: str = "complete"
    edge_prob: float = 0.5
    time_varying: bool = False
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run. ``None`` fields take scenario defaults."""

    scenario: str = "synthetic"
    tracker: str | None = None
    n_agents: int | None = None
    horizon: int | None = None
    seed: int = 0
    lead_time_minutes: float | None = None
    input_path: str | None = None
    output_root: str | None = None
    tag: str = "default"
    smoothness: float = 50.0
    noise: float = 0.03
    drift: float = 0.01
    reference: str = "chain"
    reference_tolerance: float | None = None
    tracker_config: TrackerConfig = field(default_factory=TrackerConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)

    def problems(self) -> list[str]:
        out = []
        if self.scenario not in SCENARIOS:
            out.append(f"scenario must be one of {', '.join(SCENARIOS)}")
        if self.tracker is not None and self.tracker not in TRACKERS:
            out.append(f"tracker must be one of {', '.join(TRACKERS)}")
        if self.lead_time_minutes is not None:
            if self.scenario != "electricity":
                out.append("lead_time_minutes applies to the electricity scenario only")
            elif float(self.lead_time_minutes) not in LEAD_TIMES:
                out.append("lead_time_minutes must be 2, 5 or 10")
        if self.scenario == "custom-game-file" and not self.input_path:
            out.append("custom-game-file needs input_path")
        if self.n_agents is not None and self.n_agents < 1:
            out.append("n_agents must be >= 1")
        if self.horizon is not None and self.horizon < 1:
            out.append("horizon must be >= 1")
        if self.reference not in REFERENCE_MODES:
            out.append(f"reference must be one of {', '.join(REFERENCE_MODES)}")
        if self.network.topology not in ("complete", "path", "random"):
            out.append("network.topology must be complete, path or random")
        if not 0.0 <= self.network.edge_prob <= 1.0:
            out.append("network.edge_prob must lie in [0, 1]")
        if self.resolved_tracker() == "core":
            tc = self.tracker_config
            if tc.alpha * (1.0 + tc.gamma_reg) > 1.0 + 1e-12:
                out.append("core tracker needs alpha * (1 + gamma_reg) <= 1")
        return out

    def resolved_tracker(self) -> str:
        if self.tracker is not None:
            return self.tracker
        return "core" if self.scenario == "electricity" else "shapley"

    def resolved(self) -> "RunConfig":
        """Copy with every scenario default filled in."""
        n = self.n_agents
        if n is None and self.scenario in _DEFAULT_AGENTS:
            n = _DEFAULT_AGENTS[self.scenario]
        lead = self.lead_time_minutes
        if self.scenario == "electricity" and lead is None:
            lead = 5.0
        root = self.output_root or os.environ.get("COALITIOND_OUT", "out")
        return replace(self, tracker=self.resolved_tracker(), n_agents=n, lead_time_minutes=lead,
                       horizon=self.horizon if self.horizon is not None else _DEFAULT_HORIZON.get(self.scenario),
                       output_root=root)

    def to_json(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["tracker_config"] = self.tracker_config.to_json()
        out["network"] = asdict(self.network)
        return out


def config_from_dict(obj: dict) -> tuple[RunConfig | None, list[str]]:
    """Build a ``RunConfig``; returns ``(None, problems)`` when it is malformed."""
    if not isinstance(obj, dict):
        return None, ["config must be a JSON object"]
    problems = []
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(obj) - known)
    problems += [f"unknown field {k!r}" for k in unknown]
    kwargs = {k: v for k, v in obj.items() if k in known}
    tc = kwargs.pop("tracker_config", {}) or {}
    net = kwargs.pop("network", {}) or {}
    tc_known = {f.name for f in fields(TrackerConfig)}
    problems += [f"unknown tracker_config field {k!r}" for k in sorted(set(tc) - tc_known)]
    try:
        tracker_config = TrackerConfig(**{k: v for k, v in tc.items() if k in tc_known})
    except (TypeError, ValueError) as exc:
        problems += [f"tracker_config: {p}" for p in str(exc).split("; ")]
        tracker_config = None
    net_known = {f.name for f in fields(NetworkConfig)}
    problems += [f"unknown network field {k!r}" for k in sorted(set(net) - net_known)]
    network = NetworkConfig(**{k: v for k, v in net.items() if k in net_known})
    if tracker_config is None:
        return None, problems
    try:
        cfg = RunConfig(**kwargs, tracker_config=tracker_config, network=network)
    except TypeError as exc:
        return None, problems + [str(exc)]
    problems += cfg.problems()
    return (None if problems else cfg), problems


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    cfg, problems = config_from_dict(obj)
    if problems:
        raise ConfigError(f"{path}: " + "; ".join(problems))
    return cfg


# building and running

def build_scenario(cfg: RunConfig) -> DynamicGame:
    cfg = cfg.resolved()
    if cfg.scenario == "forecast":
        if cfg.input_path:
            records = ingest_timeseries(cfg.input_path, "forecast")
        else:
            records = synthetic_forecast_records(cfg.n_agents, cfg.horizon, cfg.smoothness, cfg.noise, cfg.seed)
        dyn = forecast_scenario(records)
    elif cfg.scenario == "electricity":
        if cfg.input_path:
            snaps = ingest_timeseries(cfg.input_path, "electricity", resolution_minutes=cfg.lead_time_minutes)
        else:
            snaps = synthetic_market_snapshots(cfg.n_agents, cfg.lead_time_minutes, seed=cfg.seed)
        dyn = market_scenario(snaps)
    elif cfg.scenario == "synthetic":
        dyn = drifting_game(cfg.n_agents, cfg.horizon, cfg.drift, seed=cfg.seed)
    else:
        dyn = DynamicGame.repeat(load_game(cfg.input_path), cfg.horizon)
    if cfg.horizon is not None and cfg.horizon < dyn.horizon:
        dyn = DynamicGame(dyn.games[: cfg.horizon])
    return dyn


def execute(cfg: RunConfig) -> tuple[TrackResult, dict]:
    """Run the configured tracker; returns the trajectory and summary metrics."""
    cfg = cfg.resolved()
    dyn = build_scenario(cfg)
    net = cfg.network
    schedule = GraphSchedule(dyn.n_agents, net.topology, net.edge_prob, net.time_varying, net.seed)
    t0 = time.perf_counter()
    if cfg.tracker == "shapley":
        result = shapley_track(dyn, schedule, cfg.tracker_config)
        stacked = mean_cumulative_error(result.x, result.reference, result.grand, "shapley_error")
        averaged = mean_cumulative_error(result.mean_proposals(), result.reference, result.grand, "shapley_error")
    else:
        result = core_track(dyn, schedule, cfg.tracker_config, reference=cfg.reference,
                            reference_tolerance=cfg.reference_tolerance)
        stacked = None
        averaged = mean_cumulative_error(result.mean_proposals(), result.reference, result.grand, "core_error")
    runtime = time.perf_counter() - t0
    primary = stacked if stacked is not None else averaged
    diff = payoff_difference(result.mean_proposals(), result.reference, result.grand)
    summary = {
        "scenario": cfg.scenario,
        "tracker": cfg.tracker,
        "alpha": cfg.tracker_config.alpha,
        "n_agents": dyn.n_agents,
        "horizon": dyn.horizon,
        "terminal_mean_cum_error": primary.terminal,
        "terminal_mean_cum_error_averaged": averaged.terminal,
        "max_payoff_diff": float(diff.max()),
        "payoff_diff": diff.tolist(),
        "skipped_steps": primary.skipped,
        "runtime": runtime,
    }
    result.errors["mean_cum_error"] = primary.values
    result.errors["mean_cum_error_averaged"] = averaged.values
    return result, summary


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trajectory(result: TrackResult, path) -> None:
    K, n, _ = result.x.shape
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "agent", "component", "value"])
        for k in range(K):
            for i in range(n):
                for j in range(n):
                    w.writerow([k, i, j, _fmt(result.x[k, i, j])])


def write_errors(result: TrackResult, path) -> None:
    names = sorted(result.errors)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "grand_value"] + names)
        for k in range(result.horizon):
            w.writerow([k, _fmt(result.grand[k])] + [_fmt(result.errors[name][k]) for name in names])


def _write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(cfg: RunConfig) -> Path:
    """Run and persist artifacts; returns the output directory."""
    cfg = cfg.resolved()
    out = Path(cfg.output_root) / cfg.scenario / cfg.tag
    out.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.to_json(), out / "manifest.json")
    result, summary = execute(cfg)
    write_trajectory(result, out / "trajectory.csv")
    write_errors(result, out / "errors.csv")
    _write_json(summary, out / "summary.json")
    return out


# subcommands

def _read_vector(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    values = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            for cell in row:
                cell = cell.strip()
                if not cell:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    if values:
                        raise ConfigError(f"{path}: non-numeric entry {cell!r}") from None
    return np.array(values)


def _game(path):
    if not Path(path).exists():
        raise FileNotFoundError(f"game file not found: {path}")
    return load_game(path)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    over = {}
    if args.alpha is not None:
        over["tracker_config"] = replace(cfg.tracker_config, alpha=args.alpha)
    for name in ("seed", "horizon", "tag"):
        if getattr(args, name) is not None:
            over[name] = getattr(args, name)
    cfg = replace(cfg, **over)
    problems = cfg.problems()
    if problems:
        raise ConfigError("; ".join(problems))
    out = run(cfg)
    print(str(out))
    return 0


def cmd_shapley(args) -> int:
    phi = shapley_exact(_game(args.game))
    print(json.dumps([round(float(v), 4) for v in phi]))
    return 0


def cmd_core_check(args) -> int:
    game = _game(args.game)
    x = _read_vector(args.x)
    if len(x) != game.n_agents:
        raise ConfigError(f"{args.x}: expected {game.n_agents} values, got {len(x)}")
    print(json.dumps(core_membership(game, x, args.tol).to_json(game.n_agents)))
    return 0


def cmd_benchmark(args) -> int:
    path = Path(args.config)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    rows = benchmark_step_cost(
        tuple(obj.get("n_range", (4, 6, 8, 10))), obj.get("scenario", "electricity"),
        reps=int(obj.get("reps", 10)), seed=int(obj.get("seed", 0)),
    )
    print(json.dumps(rows, indent=2))
    return 0


def cmd_validate(args) -> int:
    path = Path(args.config)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        obj, problems = None, [f"invalid JSON ({exc})"]
    else:
        _, problems = config_from_dict(obj)
    print(json.dumps({"valid": not problems, "problems": problems}, indent=2))
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coalitiond", description="Online payoff allocation in dynamic coalitional games")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--tag")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("shapley-exact", help="print the exact Shapley value of a game file")
    p.add_argument("game")
    p.set_defaults(func=cmd_shapley)

    p = sub.add_parser("core-check", help="check whether an allocation lies in the core")
    p.add_argument("game")
    p.add_argument("x")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_core_check)

    p = sub.add_parser("benchmark", help="time online steps against exact solutions")
    p.add_argument("config")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("validate", help="list problems in a run config")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        where = f"step {exc.step}: " if exc.step is not None else ""
        print(f"error: {where}{exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ConfigError, GameError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
