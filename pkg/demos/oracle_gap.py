"""
How far from optimal?
=====================

On small random instances we can afford the exact optimum: enumerate every
world and search the joint macro-action tree. The closed-loop planners are
scored exactly too, by running the trial in every world.
"""

import numpy as np

from collabnav import INDEPENDENT, TrialConfig, corpus, exact_policy_makespan, initial_state, oracle_expected_makespan

ratios = []
for sc in corpus(40):
    cfg = TrialConfig(sc.graph, sc.agents, sc.planner)
    best = oracle_expected_makespan(sc.graph, initial_state(sc.graph, sc.agents)).value
    ratios.append((exact_policy_makespan(cfg) / best, exact_policy_makespan(cfg, INDEPENDENT) / best))

ratios = np.array(ratios)
print("mean ratio to the optimum (collaborative, independent):", ratios.mean(axis=0).round(4))
print("worst:", ratios.max(axis=0).round(4))
print("instances where the team plan beats solo planning:", int((ratios[:, 0] < ratios[:, 1] - 1e-9).sum()))
