"""Constrained NSGA-II over the trajectory design vector.

The design vector fixes start and goal (positions and speeds) and exposes
[w_0, then per interior control point: x, y, z, speed, w, then w_n].
Candidates decode to a clamped 4D NURBS, get sampled, and are scored by the
cost module. Constraint handling is the feasibility-first dominance rule:
feasible beats infeasible, infeasible compare on total violation.

The generational loop works on plain arrays for speed; dataclass wrappers
are built only for results crossing the module boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import costs as costs_mod
from .costs import ConstraintReport, CostVector
from .environment import Environment, SafetyParams
from .errors import DecodeError, ValidationError
from .nurbs import NurbsCurve4D, basis_matrix, make_clamped_uniform_knots
from .power import PowerQuadricModel

log = logging.getLogger(__name__)

OBJECTIVE_NAMES = ("time", "safety", "energy")
ERROR_COST_SENTINEL = 1e9
ERROR_VIOLATION_SENTINEL = 1e6
FRONT_DEDUP_TOL = 1e-9

DEFAULT_WEIGHT_BOUNDS = (0.1, 10.0)


def decision_arity(n_interior: int) -> int:
    return 5 * n_interior + 2


def interior_count(arity: int) -> int:
    n, rem = divmod(arity - 2, 5)
    if rem != 0 or n < 0:
        raise DecodeError(f"decision vector length {arity} does not match 5k+2 layout")
    return n


def decision_layout(n_interior: int) -> dict:
    """Index arrays for the three variable kinds in the flat layout."""
    pos_idx = []
    speed_idx = []
    weight_idx = [0]
    for i in range(n_interior):
        base = 1 + 5 * i
        pos_idx.extend([base, base + 1, base + 2])
        speed_idx.append(base + 3)
        weight_idx.append(base + 4)
    weight_idx.append(5 * n_interior + 1)
    return {
        "position": np.array(pos_idx, dtype=int),
        "speed": np.array(speed_idx, dtype=int),
        "weight": np.array(weight_idx, dtype=int),
    }


@dataclass(frozen=True)
class Bounds:
    """Per-entry box bounds for a decision vector of fixed arity."""

    lower: np.ndarray
    upper: np.ndarray
    n_interior: int

    def __post_init__(self):
        if self.lower.shape != self.upper.shape:
            raise ValidationError("bounds arrays must have equal shape")
        if not np.all(self.lower < self.upper):
            raise ValidationError("every lower bound must be < its upper bound")

    def clip(self, decisions: np.ndarray) -> np.ndarray:
        return np.clip(decisions, self.lower, self.upper)


def build_bounds(
    domain,
    n_interior: int,
    v_floor: float = costs_mod.DEFAULT_V_FLOOR,
    weight_bounds: tuple = DEFAULT_WEIGHT_BOUNDS,
) -> Bounds:
    layout = decision_layout(n_interior)
    arity = decision_arity(n_interior)
    lower = np.empty(arity)
    upper = np.empty(arity)
    lower[layout["position"]] = np.tile(domain.min_corner, n_interior)
    upper[layout["position"]] = np.tile(domain.max_corner, n_interior)
    lower[layout["speed"]] = v_floor
    upper[layout["speed"]] = domain.v_max
    lower[layout["weight"]] = weight_bounds[0]
    upper[layout["weight"]] = weight_bounds[1]
    return Bounds(lower=lower, upper=upper, n_interior=n_interior)


def decode(
    decision: np.ndarray,
    start,
    goal,
    v_start: float,
    v_goal: float,
    degree: int,
) -> NurbsCurve4D:
    """Decision vector to curve: fixed endpoints plus interior entries."""
    decision = np.asarray(decision, dtype=float)
    n_interior = interior_count(len(decision))
    n_ctrl = n_interior + 2
    if n_ctrl < degree + 1:
        raise DecodeError(
            f"{n_ctrl} control points cannot support degree {degree} (need >= {degree + 1})"
        )
    ctrl = np.empty((n_ctrl, 4))
    weights = np.empty(n_ctrl)
    ctrl[0, :3] = np.asarray(start, dtype=float)
    ctrl[0, 3] = v_start
    ctrl[-1, :3] = np.asarray(goal, dtype=float)
    ctrl[-1, 3] = v_goal
    weights[0] = decision[0]
    weights[-1] = decision[-1]
    interior = decision[1:-1].reshape(n_interior, 5)
    ctrl[1:-1, :] = interior[:, :4]
    weights[1:-1] = interior[:, 4]
    knots = make_clamped_uniform_knots(n_ctrl, degree)
    return NurbsCurve4D(control_points=ctrl, weights=weights, degree=degree, knots=knots)


def encode(curve: NurbsCurve4D) -> np.ndarray:
    """Inverse of decode for the free entries (endpoints are dropped)."""
    n_interior = len(curve.control_points) - 2
    decision = np.empty(decision_arity(n_interior))
    decision[0] = curve.weights[0]
    decision[-1] = curve.weights[-1]
    block = np.column_stack([curve.control_points[1:-1], curve.weights[1:-1]])
    decision[1:-1] = block.reshape(-1)
    return decision


@dataclass(frozen=True)
class EvaluatedIndividual:
    decision: np.ndarray
    costs: CostVector
    constraints: ConstraintReport

    @property
    def feasible(self) -> bool:
        return self.constraints.feasible


@dataclass(frozen=True)
class MooParams:
    n_gen: int
    pop_size: int
    crossover_rate: float = 0.95
    eta_crossover: float = 10.0
    mutation_rate: Optional[float] = None  # default 1/D, resolved at run time
    eta_mutation: float = 50.0
    rng_seed: int = 0

    def __post_init__(self):
        problems = []
        if self.pop_size < 8 or self.pop_size % 4 != 0:
            problems.append("pop_size must be >= 8 and divisible by 4")
        if not 0 <= self.crossover_rate <= 1:
            problems.append("crossover_rate must be in [0, 1]")
        if self.mutation_rate is not None and not 0 <= self.mutation_rate <= 1:
            problems.append("mutation_rate must be in [0, 1]")
        if self.eta_crossover <= 0 or self.eta_mutation <= 0:
            problems.append("distribution indices must be > 0")
        if self.n_gen < 1:
            problems.append("n_gen must be >= 1")
        if problems:
            raise ValidationError(problems)


@dataclass(frozen=True)
class EvaluationContext:
    """Everything needed to score a decision vector, frozen for a run."""

    env: Environment
    power: PowerQuadricModel
    safety: SafetyParams
    start: np.ndarray
    goal: np.ndarray
    v_start: float
    v_goal: float
    degree: int
    n_samples: int
    a_max: float
    v_floor: float
    bounds: Bounds
    basis: np.ndarray = field(repr=False)
    objectives: tuple = OBJECTIVE_NAMES


def make_context(
    env: Environment,
    power: PowerQuadricModel,
    safety: SafetyParams,
    start,
    goal,
    v_start: float,
    v_goal: float,
    degree: int,
    n_samples: int,
    a_max: float,
    n_interior: int,
    v_floor: float = costs_mod.DEFAULT_V_FLOOR,
    weight_bounds: tuple = DEFAULT_WEIGHT_BOUNDS,
    objectives: tuple = OBJECTIVE_NAMES,
) -> EvaluationContext:
    n_ctrl = n_interior + 2
    knots = make_clamped_uniform_knots(n_ctrl, degree)
    params = np.linspace(knots[degree], knots[-degree - 1], n_samples)
    basis = basis_matrix(knots, degree, params)
    bounds = build_bounds(env.domain, n_interior, v_floor, weight_bounds)
    unknown = set(objectives) - set(OBJECTIVE_NAMES)
    if unknown:
        raise ValidationError(f"unknown objectives: {sorted(unknown)}")
    return EvaluationContext(
        env=env,
        power=power,
        safety=safety,
        start=np.asarray(start, dtype=float),
        goal=np.asarray(goal, dtype=float),
        v_start=float(v_start),
        v_goal=float(v_goal),
        degree=degree,
        n_samples=n_samples,
        a_max=a_max,
        v_floor=v_floor,
        bounds=bounds,
        basis=basis,
        objectives=tuple(objectives),
    )


def _decode_batch(decisions: np.ndarray, ctx: EvaluationContext) -> tuple[np.ndarray, np.ndarray]:
    """Sampled positions (N, Q, 3) and speeds (N, Q) for a population."""
    n = len(decisions)
    n_interior = ctx.bounds.n_interior
    n_ctrl = n_interior + 2
    ctrl = np.empty((n, n_ctrl, 4))
    weights = np.empty((n, n_ctrl))
    ctrl[:, 0, :3] = ctx.start
    ctrl[:, 0, 3] = ctx.v_start
    ctrl[:, -1, :3] = ctx.goal
    ctrl[:, -1, 3] = ctx.v_goal
    weights[:, 0] = decisions[:, 0]
    weights[:, -1] = decisions[:, -1]
    interior = decisions[:, 1:-1].reshape(n, n_interior, 5)
    ctrl[:, 1:-1, :] = interior[:, :, :4]
    weights[:, 1:-1] = interior[:, :, 4]

    den = np.einsum("qc,nc->nq", ctx.basis, weights)
    num = np.einsum("qc,nc,ncd->nqd", ctx.basis, weights, ctrl)
    points = num / den[:, :, None]
    # Clamped ends interpolate the fixed control points; pin them exactly.
    points[:, 0, :] = ctrl[:, 0, :]
    points[:, -1, :] = ctrl[:, -1, :]
    return points[:, :, :3], points[:, :, 3]


def evaluate_batch(decisions: np.ndarray, ctx: EvaluationContext) -> tuple[np.ndarray, np.ndarray]:
    """Scores for a population: (costs (N,3), violations (N,2)).

    Evaluation never raises for individual candidates: world-model or
    power-model failures mark the candidate infeasible with sentinel
    costs and an added collision violation.
    """
    decisions = np.atleast_2d(np.asarray(decisions, dtype=float))
    positions, speeds = _decode_batch(decisions, ctx)
    segment_lengths = np.linalg.norm(np.diff(positions, axis=1), axis=2)

    time = costs_mod._time_batch(segment_lengths, speeds, ctx.v_floor)

    flat = positions.reshape(-1, 3)
    d_obs = ctx.env.clearance(flat, out_of_range="nan").reshape(speeds.shape)
    in_domain = np.all(np.isfinite(d_obs), axis=1)
    d_safe = np.nan_to_num(d_obs, nan=0.0)

    sdf_costs = costs_mod.sdf_point_cost(d_safe, ctx.safety)
    hull_costs = costs_mod._hull_cost_batch(positions, ctx.env.hulls, ctx.safety.r_ch_max)
    safety = costs_mod._safety_batch(sdf_costs, hull_costs, ctx.safety.k_a, ctx.safety.k_b)

    energy, power_ok = costs_mod._energy_batch(
        positions, segment_lengths, speeds, ctx.power, ctx.v_floor
    )

    accel_viol = costs_mod._accel_violation_batch(segment_lengths, speeds, ctx.a_max)
    coll_viol = costs_mod._collision_violation_batch(d_safe, ctx.safety.r_uav)

    bad = ~(in_domain & power_ok)
    cost_arr = np.column_stack([time, safety, np.nan_to_num(energy, nan=0.0)])
    cost_arr[bad] = ERROR_COST_SENTINEL
    coll_viol = coll_viol + np.where(bad, ERROR_VIOLATION_SENTINEL, 0.0)
    return cost_arr, np.column_stack([accel_viol, coll_viol])


def evaluate(decision: np.ndarray, ctx: EvaluationContext) -> EvaluatedIndividual:
    """Score one decision vector (thin wrapper over the batch path)."""
    decision = np.asarray(decision, dtype=float)
    cost_arr, viol = evaluate_batch(decision[None, :], ctx)
    return EvaluatedIndividual(
        decision=decision.copy(),
        costs=CostVector(*(float(v) for v in cost_arr[0])),
        constraints=ConstraintReport(
            max_accel_violation=float(viol[0, 0]), collision_violation=float(viol[0, 1])
        ),
    )


# --- non-dominated sorting and crowding -----------------------------------


def _dominance_matrix(objs: np.ndarray, violations: np.ndarray) -> np.ndarray:
    """dom[i, j] is True when i dominates j under feasibility-first rules."""
    feas = violations <= 0.0
    leq = np.all(objs[:, None, :] <= objs[None, :, :], axis=2)
    lt = np.any(objs[:, None, :] < objs[None, :, :], axis=2)
    pareto = leq & lt
    fi = feas[:, None]
    fj = feas[None, :]
    less_violation = violations[:, None] < violations[None, :]
    return (fi & ~fj) | (~fi & ~fj & less_violation) | (fi & fj & pareto)


def _fronts_from_arrays(objs: np.ndarray, violations: np.ndarray) -> list[np.ndarray]:
    n = len(objs)
    dom = _dominance_matrix(objs, violations)
    n_dominators = dom.sum(axis=0)
    fronts = []
    assigned = np.zeros(n, dtype=bool)
    while not assigned.all():
        current = np.flatnonzero((n_dominators == 0) & ~assigned)
        fronts.append(current)
        assigned[current] = True
        n_dominators = n_dominators - dom[current].sum(axis=0)
    return fronts


def _crowding_from_arrays(objs: np.ndarray) -> np.ndarray:
    """Cuboid crowding distance within one front."""
    m = len(objs)
    dist = np.zeros(m)
    if m <= 2:
        return np.full(m, np.inf)
    for col in range(objs.shape[1]):
        order = np.argsort(objs[:, col], kind="stable")
        values = objs[order, col]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        span = values[-1] - values[0]
        if span > 0:
            gaps = (values[2:] - values[:-2]) / span
            dist[order[1:-1]] += gaps
    return dist


def _total_violation(individual: EvaluatedIndividual) -> float:
    return individual.constraints.total_violation


def non_dominated_sort(population: Sequence[EvaluatedIndividual]) -> list[list[int]]:
    """Fast non-dominated sorting with feasibility-first dominance."""
    if not population:
        return []
    objs = np.array([ind.costs.as_array() for ind in population])
    viol = np.array([_total_violation(ind) for ind in population])
    return [front.tolist() for front in _fronts_from_arrays(objs, viol)]


def crowding_distance(front: Sequence[EvaluatedIndividual]) -> np.ndarray:
    if not front:
        raise ValidationError("crowding_distance needs a nonempty front")
    return _crowding_from_arrays(np.array([ind.costs.as_array() for ind in front]))


# --- variation operators ----------------------------------------------------


def _sbx_batch(
    parents_a: np.ndarray,
    parents_b: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    rate: float,
    eta: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulated binary crossover on paired parent rows."""
    n, d = parents_a.shape
    apply_pair = rng.random(n) < rate
    apply_var = rng.random((n, d)) < 0.5
    u = rng.random((n, d))
    swap = rng.random((n, d)) < 0.5

    x1 = np.minimum(parents_a, parents_b)
    x2 = np.maximum(parents_a, parents_b)
    diff = x2 - x1
    active = apply_pair[:, None] & apply_var & (diff > 1e-14)

    safe_diff = np.where(diff > 1e-14, diff, 1.0)
    exp = eta + 1.0

    def _betaq(beta):
        alpha = 2.0 - beta ** (-exp)
        return np.where(
            u <= 1.0 / alpha,
            (u * alpha) ** (1.0 / exp),
            (1.0 / (2.0 - u * alpha)) ** (1.0 / exp),
        )

    betaq1 = _betaq(1.0 + 2.0 * (x1 - lower) / safe_diff)
    betaq2 = _betaq(1.0 + 2.0 * (upper - x2) / safe_diff)
    c1 = 0.5 * ((x1 + x2) - betaq1 * diff)
    c2 = 0.5 * ((x1 + x2) + betaq2 * diff)
    c1 = np.clip(c1, lower, upper)
    c2 = np.clip(c2, lower, upper)
    c1_final = np.where(swap, c2, c1)
    c2_final = np.where(swap, c1, c2)

    child_a = np.where(active, c1_final, parents_a)
    child_b = np.where(active, c2_final, parents_b)
    return child_a, child_b


def sbx_crossover(
    a: np.ndarray,
    b: np.ndarray,
    bounds: Bounds,
    rate: float,
    eta: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValidationError("parents must have equal arity")
    child_a, child_b = _sbx_batch(a[None, :], b[None, :], bounds.lower, bounds.upper, rate, eta, rng)
    return child_a[0], child_b[0]


def _mutation_batch(
    pop: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    rate: float,
    eta: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Bounded polynomial mutation, applied per variable with probability rate."""
    n, d = pop.shape
    apply = rng.random((n, d)) < rate
    u = rng.random((n, d))
    span = upper - lower
    delta1 = (pop - lower) / span
    delta2 = (upper - pop) / span
    exp = eta + 1.0
    low_side = u < 0.5
    val_low = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - delta1) ** exp
    val_high = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - delta2) ** exp
    deltaq = np.where(low_side, val_low ** (1.0 / exp) - 1.0, 1.0 - val_high ** (1.0 / exp))
    mutated = np.clip(pop + deltaq * span, lower, upper)
    return np.where(apply, mutated, pop)


def polynomial_mutation(
    v: np.ndarray, bounds: Bounds, rate: float, eta: float, rng: np.random.Generator
) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return _mutation_batch(v[None, :], bounds.lower, bounds.upper, rate, eta, rng)[0]


# --- generational engine ----------------------------------------------------


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    front_size: int
    best: tuple


def _rank_and_crowding(objs: np.ndarray, violations: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    fronts = _fronts_from_arrays(objs, violations)
    ranks = np.empty(len(objs), dtype=int)
    crowd = np.empty(len(objs))
    for rank, front in enumerate(fronts):
        ranks[front] = rank
        crowd[front] = _crowding_from_arrays(objs[front])
    return ranks, crowd


def _tournament(ranks: np.ndarray, crowd: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = len(ranks)
    cand_a = rng.permutation(n)
    cand_b = rng.permutation(n)
    a_wins = (ranks[cand_a] < ranks[cand_b]) | (
        (ranks[cand_a] == ranks[cand_b]) & (crowd[cand_a] >= crowd[cand_b])
    )
    return np.where(a_wins, cand_a, cand_b)


def _select_survivors(
    objs: np.ndarray, violations: np.ndarray, n_survivors: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Environmental selection: whole fronts, last one trimmed by crowding."""
    fronts = _fronts_from_arrays(objs, violations)
    chosen = []
    ranks = np.empty(len(objs), dtype=int)
    crowd = np.empty(len(objs))
    for rank, front in enumerate(fronts):
        ranks[front] = rank
        crowd[front] = _crowding_from_arrays(objs[front])
        if len(chosen) + len(front) <= n_survivors:
            chosen.extend(front.tolist())
        else:
            remaining = n_survivors - len(chosen)
            order = np.argsort(-crowd[front], kind="stable")
            chosen.extend(front[order[:remaining]].tolist())
        if len(chosen) >= n_survivors:
            break
    idx = np.array(chosen, dtype=int)
    return idx, ranks[idx], crowd[idx]


def nsga2_minimize(
    batch_evaluate: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    lower: np.ndarray,
    upper: np.ndarray,
    params: MooParams,
    initial: np.ndarray,
    progress_sink: Optional[Callable[[GenerationStats], None]] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generic constrained NSGA-II loop on raw arrays.

    ``batch_evaluate`` maps decisions (N, D) to (objectives (N, E),
    total violation (N,)). Returns the final population with its scores.
    """
    pop = np.clip(np.asarray(initial, dtype=float), lower, upper)
    if len(pop) != params.pop_size:
        raise ValidationError(
            f"initial population size {len(pop)} does not match pop_size {params.pop_size}"
        )
    rng = np.random.default_rng(params.rng_seed)
    mutation_rate = params.mutation_rate
    if mutation_rate is None:
        mutation_rate = 1.0 / pop.shape[1]

    objs, viol = batch_evaluate(pop)
    ranks, crowd = _rank_and_crowding(objs, viol)

    for gen in range(1, params.n_gen + 1):
        parents_idx = _tournament(ranks, crowd, rng)
        parents = pop[parents_idx]
        child_a, child_b = _sbx_batch(
            parents[0::2], parents[1::2], lower, upper,
            params.crossover_rate, params.eta_crossover, rng,
        )
        offspring = np.empty_like(pop)
        offspring[0::2] = child_a
        offspring[1::2] = child_b
        offspring = _mutation_batch(offspring, lower, upper, mutation_rate, params.eta_mutation, rng)

        off_objs, off_viol = batch_evaluate(offspring)
        comb_pop = np.vstack([pop, offspring])
        comb_objs = np.vstack([objs, off_objs])
        comb_viol = np.concatenate([viol, off_viol])

        survivors, ranks, crowd = _select_survivors(comb_objs, comb_viol, params.pop_size)
        pop = comb_pop[survivors]
        objs = comb_objs[survivors]
        viol = comb_viol[survivors]

        if progress_sink is not None:
            feasible = viol <= 0.0
            front_size = int(np.sum((ranks == 0) & feasible))
            best = tuple(
                float(objs[feasible, col].min()) if feasible.any() else float("nan")
                for col in range(objs.shape[1])
            )
            progress_sink(GenerationStats(generation=gen, front_size=front_size, best=best))

    return pop, objs, viol


def _dedup_front(objs: np.ndarray) -> np.ndarray:
    """Indices of the first representative of each objective vector,
    compared at FRONT_DEDUP_TOL absolute tolerance."""
    keys = np.round(objs / FRONT_DEDUP_TOL).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return np.sort(first)


def run_nsga2(
    ctx: EvaluationContext,
    seed_population: np.ndarray,
    params: MooParams,
    progress_sink: Optional[Callable[[GenerationStats], None]] = None,
) -> list[EvaluatedIndividual]:
    """Full trajectory optimization; returns the feasible first front,
    deduplicated on objective vectors and sorted by (time, safety, energy).

    An empty result means no feasible individual survived, which can only
    happen when the seed itself was infeasible.
    """
    cols = [OBJECTIVE_NAMES.index(name) for name in ctx.objectives]

    def batch(decisions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cost_arr, viol = evaluate_batch(decisions, ctx)
        batch.last_costs = cost_arr
        batch.last_viol = viol
        return cost_arr[:, cols], viol.sum(axis=1)

    pop, objs_sub, viol_total = nsga2_minimize(
        batch, ctx.bounds.lower, ctx.bounds.upper, params, seed_population, progress_sink
    )

    cost_arr, viol = evaluate_batch(pop, ctx)
    feasible = viol.sum(axis=1) <= 0.0
    if not feasible.any():
        log.warning("optimization ended with no feasible individual (infeasible seed?)")
        return []
    fronts = _fronts_from_arrays(cost_arr[:, cols], viol.sum(axis=1))
    first = np.array([i for i in fronts[0] if feasible[i]], dtype=int)
    kept = first[_dedup_front(cost_arr[first])]
    order = np.lexsort((cost_arr[kept, 2], cost_arr[kept, 1], cost_arr[kept, 0]))
    result = []
    for i in kept[order]:
        result.append(
            EvaluatedIndividual(
                decision=pop[i].copy(),
                costs=CostVector(*(float(v) for v in cost_arr[i])),
                constraints=ConstraintReport(
                    max_accel_violation=float(viol[i, 0]),
                    collision_violation=float(viol[i, 1]),
                ),
            )
        )
    return result
