"""
Scouting versus going it alone
==============================

A slow robot's short route crosses an edge that may be blocked. A robot
eight times faster can check that edge with a modest detour. Here the edge
is blocked, and we compare the team plan against each robot planning alone.
"""

from dataclasses import replace

from collabnav import INDEPENDENT, Status, TrialConfig, scout_scenario, run_trial, world_from_mapping
from collabnav.scenarios import data_text
from collabnav.world import load_scene

sc = scout_scenario()
g = sc.graph
truth = world_from_mapping(g, {g.edge_by_name("X-GH"): Status.BLOCKED})
cfg = TrialConfig(g, sc.agents, sc.planner, truth=truth)

# The first assignments show the difference: the fast robot senses, the slow one waits.
collab = run_trial(cfg)
solo = run_trial(replace(cfg, planner=replace(cfg.planner, mode=INDEPENDENT)))
for label, r in ("collaborative", collab), ("independent", solo):
    print(label, [m for _, m in r.assignments()[:2]])

print()
print(f"{'':16}{'makespan':>10}{'husky m':>10}{'jackal m':>10}{'husky wait':>12}")
for label, r in ("collaborative", collab), ("independent", solo):
    h, j = r.agents["husky"], r.agents["jackal"]
    print(f"{label:16}{r.makespan:10.2f}{h.graph_distance:10.1f}{j.graph_distance:10.1f}{h.wait_time:12.1f}")

# Same scene with obstacles and a wall across the edge. Numbers shift a
# little (3 m goal regions, grid paths) but the ordering holds.
scene = load_scene(data_text("scout_scene.json"), g)
cont = replace(cfg, fidelity="continuous", scene=scene)
print()
for label, c in ("collaborative", cont), ("independent", replace(cont, planner=replace(cont.planner, mode=INDEPENDENT))):
    r = run_trial(c)
    h, j = r.agents["husky"], r.agents["jackal"]
    print(f"{label:16}{r.makespan:10.2f}{h.graph_distance:10.1f}{j.graph_distance:10.1f}{h.wait_time:12.1f}")
