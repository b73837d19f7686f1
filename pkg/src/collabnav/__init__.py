"""Hierarchical collaborative navigation under edge-traversability uncertainty.

A team of robots shares a graph whose stochastic edges may be blocked. A
central planner assigns macro-actions (go to goal, go and sense an edge,
wait), agents execute them as navigate/observe/wait primitives, and the
team replans whenever any agent finishes.
"""

from .errors import (
    CollabNavError,
    ConfigError,
    ConflictError,
    LimitExceeded,
    ParseError,
    PlanningStuck,
    ProtocolError,
    SceneError,
    ValidationError,
)
from .graph import (
    Edge,
    EdgeBelief,
    Mode,
    NavGraph,
    Path,
    Status,
    WorldSample,
    apply_observation,
    enumerate_worlds,
    load_graph,
    parse_graph,
    sample_world,
    shortest_path,
    world_from_mapping,
)
from .macro import AgentSpec, NavigateAndSense, NavigateGoal, Wait, enumerate_candidates, optimistic_bound, prune
from .executor import AgentExec, MacroResult, NavigateEdge, ObserveEdge, WaitFor, alternative_goals, expand
from .planner import (
    COLLABORATIVE,
    INDEPENDENT,
    AgentState,
    PlannerParams,
    TeamState,
    initial_state,
    plan_independent,
    plan_joint,
)
from .oracle import OracleResult, oracle_expected_makespan
from .world import OccupancyGrid, Scene, load_scene, navigate_action, observe_edge, plan_grid_path, rasterize
from .sim import TrialConfig, TrialResult, exact_policy_makespan, run_trial, write_outputs
from .scenarios import Scenario, corpus, scout_scenario, random_instance

__all__ = sorted(
    name for name, value in globals().items()
    if not name.startswith("_") and not isinstance(value, type(errors))
)
