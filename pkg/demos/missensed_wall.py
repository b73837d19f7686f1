"""
A wall seen too late
====================

The observation action only looks 20 m down an edge. Put the wall 45 m
from one end and the robot standing there reports the edge clear. When it
later looks again from the other end, the two reports disagree.
"""

from dataclasses import replace

from collabnav import Status, TrialConfig, load_graph, run_trial, world_from_mapping
from collabnav.scenarios import data_text, load_scenario
from collabnav.world import load_scene

g = load_graph(data_text("reobserve_graph.json"))
agents, params = load_scenario(data_text("reobserve_scenario.json"), g)
scene = load_scene(data_text("reobserve_scene.json"), g)
truth = world_from_mapping(g, {g.edge_by_name("A-B"): Status.BLOCKED})
cfg = TrialConfig(g, agents, params, fidelity="continuous", scene=scene, truth=truth)

r = run_trial(cfg)
for e in r.events:
    if e["kind"] == "observe":
        d = e["detail"]
        print(f"t={e['t']:7.2f}  {d['edge']} from {d['from']}: saw {d['status']}, truth {d['truth']}")
print("halt policy:", r.outcome_label)

# Trusting the latest report lets the robot carry on around the wall.
r = run_trial(replace(cfg, observation_conflict_policy="trust_latest"))
print("trust_latest:", r.outcome_label, f"makespan {r.makespan:.1f} s")
