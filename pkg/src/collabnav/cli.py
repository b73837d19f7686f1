"""Command-line front end: ``run``, ``oracle`` and ``validate``.

Exit codes: 0 success, 1 a trial failed or validation found problems,
2 the command line or an input file is unusable.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from dataclasses import dataclass, replace

from .errors import CollabNavError, ConfigError, LimitExceeded, ParseError, ValidationError
from .graph import load_graph
from .oracle import oracle_expected_makespan
from .planner import COLLABORATIVE, INDEPENDENT, initial_state
from .scenarios import load_scenario
from .sim import CONTINUOUS, GRAPH, TrialConfig, exact_policy_makespan, run_trial, write_outputs
from .world import DEFAULT_INFLATION, inflate, load_scene, rasterize_obstacles, scene_violations

SUMMARY_HEADER = [
    "planner", "agent", "trials", "complete",
    "makespan_mean_s", "makespan_min_s", "makespan_max_s",
    "graph_distance_mean_m", "wait_time_mean_s",
]


class UsageError(Exception):
    pass


def parse_seeds(text: str) -> list[int]:
    """``"A..B"`` (inclusive) or a single integer."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise UsageError(f"--seeds expects A..B, got {text!r}") from None
    if hi < lo:
        raise UsageError(f"--seeds range {text!r} is empty")
    return list(range(lo, hi + 1))


def _read(path: str, flag: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"{flag} {path}: {exc.strerror or exc}") from None


@dataclass
class RunSpec:
    graph_path: str
    scenario_path: str
    scene_path: str | None = None
    seeds: tuple[int, ...] = (0,)
    planner: str = COLLABORATIVE
    fidelity: str = GRAPH
    out_dir: str = "out"
    rollouts: int | None = None
    wait_quantum: float | None = None
    message_delay: float = 0.0

    def planners(self) -> list[str]:
        return [COLLABORATIVE, INDEPENDENT] if self.planner == "both" else [self.planner]

    def base_config(self) -> TrialConfig:
        if self.fidelity == CONTINUOUS and not self.scene_path:
            raise UsageError("--fidelity continuous requires --scene")
        g = load_graph(_read(self.graph_path, "--graph"))
        agents, params = load_scenario(_read(self.scenario_path, "--scenario"), g)
        if self.rollouts is not None:
            params = replace(params, rollout_count=self.rollouts)
        if self.wait_quantum is not None:
            params = replace(params, wait_quantum=self.wait_quantum)
        scene = None
        if self.scene_path:
            scene = load_scene(_read(self.scene_path, "--scene"), g)
        cfg = TrialConfig(g, agents, params, fidelity=self.fidelity, scene=scene,
                          message_delay=self.message_delay)
        problems = cfg.violations()
        if problems:
            raise ConfigError("; ".join(problems))
        return cfg


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def summary_csv(results: list[tuple[str, object]]) -> str:
    """One row per (planner, agent) plus a TEAM row per planner."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    planners = []
    for p, _ in results:
        if p not in planners:
            planners.append(p)
    for p in planners:
        rs = [r for q, r in results if q == p]
        complete = [r for r in rs if r.complete]
        spans = [r.makespan for r in complete]
        agent_ids = list(rs[0].agents)

        def stats(values):
            if not values:
                return ["", "", ""]
            return [_fmt(sum(values) / len(values)), _fmt(min(values)), _fmt(max(values))]

        for aid in agent_ids:
            arrivals = [r.agents[aid].arrival for r in complete if r.agents[aid].arrival is not None]
            dist = [r.agents[aid].graph_distance for r in rs]
            wait = [r.agents[aid].wait_time for r in rs]
            w.writerow([p, aid, len(rs), len(complete), *stats(arrivals),
                        _fmt(sum(dist) / len(dist)), _fmt(sum(wait) / len(wait))])
        team_dist = [sum(a.graph_distance for a in r.agents.values()) for r in rs]
        team_wait = [sum(a.wait_time for a in r.agents.values()) for r in rs]
        w.writerow([p, "TEAM", len(rs), len(complete), *stats(spans),
                    _fmt(sum(team_dist) / len(rs)), _fmt(sum(team_wait) / len(rs))])
    return buf.getvalue()


def cmd_run(spec: RunSpec, out=None) -> int:
    out = out or sys.stdout
    cfg = spec.base_config()
    results = []
    for planner in spec.planners():
        for seed in spec.seeds:
            trial_cfg = replace(cfg, planner=replace(cfg.planner, mode=planner), world_seed=seed)
            r = run_trial(trial_cfg)
            write_outputs(r, spec.out_dir, f"{planner}_{seed}")
            results.append((planner, r))
            label = "Complete" if r.complete else f"Failed ({r.reason})"
            print(f"{planner} seed {seed}: {label}, makespan {r.makespan:.3f} s", file=out)
    path = os.path.join(spec.out_dir, "summary.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(summary_csv(results))
    failed = sum(not r.complete for _, r in results)
    print(f"{len(results)} trials, {failed} failed; summary in {path}", file=out)
    return 1 if failed else 0


def cmd_oracle(spec: RunSpec, out=None) -> int:
    out = out or sys.stdout
    if spec.fidelity != GRAPH:
        raise UsageError("oracle runs at --fidelity graph only")
    cfg = spec.base_config()
    try:
        best = oracle_expected_makespan(cfg.graph, initial_state(cfg.graph, cfg.agents),
                                        wait_quantum=cfg.planner.wait_quantum).value
        collab = exact_policy_makespan(cfg, COLLABORATIVE)
        indep = exact_policy_makespan(cfg, INDEPENDENT)
    except LimitExceeded as exc:
        raise UsageError(f"instance too large for the oracle: {exc}") from None

    def ratio(x):
        if best == 0:
            return 1.0 if x == 0 else math.inf
        return x / best

    w = csv.writer(out, lineterminator="\n")
    w.writerow(["oracle_s", "collaborative_s", "independent_s",
                "collaborative_ratio", "independent_ratio"])
    w.writerow([_fmt(best), _fmt(collab), _fmt(indep), _fmt(ratio(collab)), _fmt(ratio(indep))])
    return 0


def validate_files(graph_path: str, scene_path: str | None) -> list[str]:
    try:
        g = load_graph(_read(graph_path, "--graph"))
    except ValidationError as exc:
        return list(exc.violations)
    except ParseError as exc:
        return [str(exc)]
    if not scene_path:
        return []
    try:
        scene = load_scene(_read(scene_path, "--scene"), g)
    except ParseError as exc:
        return [str(exc)]
    grid = inflate(rasterize_obstacles(scene), DEFAULT_INFLATION)
    return scene_violations(grid, g, scene.bounds)


def cmd_validate(graph_path: str, scene_path: str | None = None, out=None) -> int:
    out = out or sys.stdout
    problems = validate_files(graph_path, scene_path)
    for p in problems:
        print(p, file=out)
    print(f"{len(problems)} violations", file=out)
    return 1 if problems else 0


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True, help="graph JSON file")
    p.add_argument("--scenario", required=True, help="agents and planner parameters (JSON)")
    p.add_argument("--scene", help="obstacle scene JSON (continuous fidelity)")
    p.add_argument("--planner", choices=[COLLABORATIVE, INDEPENDENT, "both"], default=COLLABORATIVE)
    p.add_argument("--fidelity", choices=[GRAPH, CONTINUOUS], default=GRAPH)
    p.add_argument("--seeds", default="0", help="world seeds, A..B inclusive")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--rollouts", type=int, help="override rollouts per candidate")
    p.add_argument("--wait-quantum", type=float, help="override the Wait duration (s)")
    p.add_argument("--message-delay", type=float, default=0.0, help="one-way message delay (s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collabnav", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("run", help="run trials and write metrics"))
    _add_run_flags(sub.add_parser("oracle", help="compare closed-loop planners to the optimum"))
    v = sub.add_parser("validate", help="check a graph (and scene) for problems")
    v.add_argument("--graph", required=True)
    v.add_argument("--scene")
    return parser


def _spec(args) -> RunSpec:
    return RunSpec(
        graph_path=args.graph,
        scenario_path=args.scenario,
        scene_path=args.scene,
        seeds=tuple(parse_seeds(args.seeds)),
        planner=args.planner,
        fidelity=args.fidelity,
        out_dir=args.out,
        rollouts=args.rollouts,
        wait_quantum=args.wait_quantum,
        message_delay=args.message_delay,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "validate":
            return cmd_validate(args.graph, args.scene)
        spec = _spec(args)
        if args.command == "run":
            return cmd_run(spec)
        return cmd_oracle(spec)
    except (UsageError, CollabNavError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
