"""Risk-adaptive multi-objective 3D trajectory planner.

Trajectories are clamped 4D rational B-splines (position plus speed
profile). A constrained NSGA-II minimizes time, safety, and energy; a
risk-weighted rank vote picks one Pareto member for the current mission
state.
"""

from .costs import ConstraintReport, CostVector
from .environment import (
    BoxObstacle,
    CapsuleObstacle,
    DomainBox,
    Environment,
    OrientedHull,
    SafetyParams,
    SignedDistanceField,
    SphereObstacle,
    build_environment,
    build_sdf,
    hull_signed_distance,
    query_distance,
)
from .moo import (
    Bounds,
    EvaluatedIndividual,
    EvaluationContext,
    MooParams,
    decode,
    encode,
    evaluate,
    make_context,
    run_nsga2,
)
from .nurbs import NurbsCurve4D, TrajectorySamples, make_clamped_uniform_knots, sample_uniform
from .pipeline import PlanResult, plan, sweep
from .power import PowerQuadricModel, PowerSample, fit_quadric, power_for_direction
from .scenario import Hyperparams, Scenario, load_scenario
from .seeding import SeedingParams, find_seed_path, initial_population
from .voting import RiskState, VoteWeights, adjust_coefficients, rank_objectives, vote

__version__ = "0.1.0"

__all__ = [
    "BoxObstacle",
    "Bounds",
    "CapsuleObstacle",
    "ConstraintReport",
    "CostVector",
    "DomainBox",
    "Environment",
    "EvaluatedIndividual",
    "EvaluationContext",
    "Hyperparams",
    "MooParams",
    "NurbsCurve4D",
    "OrientedHull",
    "PlanResult",
    "PowerQuadricModel",
    "PowerSample",
    "RiskState",
    "SafetyParams",
    "Scenario",
    "SeedingParams",
    "SignedDistanceField",
    "SphereObstacle",
    "TrajectorySamples",
    "VoteWeights",
    "adjust_coefficients",
    "build_environment",
    "build_sdf",
    "decode",
    "encode",
    "evaluate",
    "find_seed_path",
    "fit_quadric",
    "hull_signed_distance",
    "initial_population",
    "load_scenario",
    "make_clamped_uniform_knots",
    "make_context",
    "plan",
    "power_for_direction",
    "query_distance",
    "rank_objectives",
    "run_nsga2",
    "sample_uniform",
    "sweep",
    "vote",
]
