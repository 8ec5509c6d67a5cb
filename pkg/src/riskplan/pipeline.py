"""End-to-end orchestration: environment build, power fit, seeding,
optimization, voting, and machine-readable result emission.

Result files are pure functions of (scenario, rng_seed); wall-clock timings
live in a separate metadata file so the data products stay byte-identical
across reruns.
"""

from __future__ import annotations

import json
import time as time_mod
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import costs as costs_mod
from .environment import Environment, build_environment
from .errors import ValidationError
from .moo import (
    OBJECTIVE_NAMES,
    EvaluatedIndividual,
    EvaluationContext,
    MooParams,
    decode,
    evaluate,
    interior_count,
    make_context,
    run_nsga2,
)
from .nurbs import TrajectorySamples, sample_uniform
from .power import (
    PowerQuadricModel,
    _is_axis_aligned,
    fit_quadric,
    load_power_samples,
    power_for_directions,
)
from .scenario import Scenario
from .seeding import SeedingParams, build_feasible_seed, initial_population
from .voting import RiskState, VoteWeights, adjust_coefficients, vote
from .environment import SafetyParams

CONSTRAINT_EMIT_TOL = 1e-9


@dataclass(frozen=True)
class PlanResult:
    front: list
    selected_index: int
    weights: VoteWeights
    samples: TrajectorySamples
    sample_times: np.ndarray
    sample_powers: np.ndarray
    generation_log: list
    metadata: dict
    context: EvaluationContext


def _safety_params(scn: Scenario) -> SafetyParams:
    h = scn.hyper
    return SafetyParams(
        r_sdf_min=h.r_sdf_min,
        r_sdf_max=h.r_sdf_max,
        r_ch_max=h.r_ch_max,
        k_a=h.k_a,
        k_b=h.k_b,
        r_uav=h.r_uav,
    )


def build_scenario_environment(scn: Scenario) -> Environment:
    return build_environment(
        scn.domain,
        scn.obstacles,
        scn.hulls,
        resolution=scn.resolution,
        max_voxels=scn.max_voxels,
    )


def trajectory_timeline(samples: TrajectorySamples, v_floor: float) -> np.ndarray:
    """Cumulative time at each sample, starting at 0."""
    dt = samples.segment_lengths / np.maximum(samples.speeds[1:], v_floor)
    return np.concatenate([[0.0], np.cumsum(dt)])


def trajectory_powers(samples: TrajectorySamples, model: PowerQuadricModel) -> np.ndarray:
    """Per-sample power draw from the incoming segment direction.

    The first sample reuses the first segment's direction.
    """
    deltas = np.diff(samples.positions, axis=0)
    lengths = samples.segment_lengths
    dirs = np.zeros_like(deltas)
    nonzero = lengths > 1e-12
    np.divide(deltas, lengths[:, None], out=dirs, where=nonzero[:, None])
    powers, valid = power_for_directions(model, dirs)
    powers = np.where(valid, powers, model.hover_power)
    return np.concatenate([[powers[0]], powers])


def trajectory_metrics(samples: TrajectorySamples, env: Environment, v_floor: float) -> dict:
    """Summary metrics used by sweeps and experiment reports."""
    clearance = env.clearance(samples.positions)
    return {
        "duration_s": float(trajectory_timeline(samples, v_floor)[-1]),
        "length_m": float(samples.segment_lengths.sum()),
        "mean_obstacle_distance_m": float(np.mean(clearance)),
        "min_obstacle_distance_m": float(np.min(clearance)),
    }


def plan(
    scn: Scenario,
    out_dir: Optional[Path] = None,
    env: Optional[Environment] = None,
    power_model: Optional[PowerQuadricModel] = None,
) -> PlanResult:
    """Run the full pipeline for one scenario.

    ``env`` and ``power_model`` can be passed in to reuse expensive setup
    across repeated plans of the same world (sweeps, benchmarks).
    """
    h = scn.hyper
    timings = {}
    t0 = time_mod.perf_counter()

    if env is None:
        env = build_scenario_environment(scn)
    timings["environment_s"] = time_mod.perf_counter() - t0

    t1 = time_mod.perf_counter()
    if power_model is None:
        power_model = fit_quadric(load_power_samples(scn.power_calibration))
    timings["power_fit_s"] = time_mod.perf_counter() - t1

    t2 = time_mod.perf_counter()
    seeding_params = SeedingParams(
        delta_rope=h.delta_rope,
        sigma_pos=h.sigma_pos,
        sigma_speed=h.resolved_sigma_speed(),
        rrt_step=h.rrt_step,
        rrt_max_iters=h.rrt_max_iters,
        rng_seed=scn.rng_seed,
    )
    seed = build_feasible_seed(
        env,
        scn.start,
        scn.goal,
        scn.v_start,
        scn.v_goal,
        h.resolved_v_cruise(),
        h.degree,
        h.n_nurbs,
        h.a_max,
        h.r_uav,
        seeding_params,
        v_floor=h.v_floor,
    )
    timings["seeding_s"] = time_mod.perf_counter() - t2

    ctx = make_context(
        env=env,
        power=power_model,
        safety=_safety_params(scn),
        start=scn.start,
        goal=scn.goal,
        v_start=scn.v_start,
        v_goal=scn.v_goal,
        degree=h.degree,
        n_samples=h.n_nurbs,
        a_max=h.a_max,
        n_interior=interior_count(len(seed.decision)),
        v_floor=h.v_floor,
        weight_bounds=(h.weight_min, h.weight_max),
    )

    population = initial_population(
        seed.decision,
        h.n_pop,
        ctx.bounds,
        SeedingParams(
            delta_rope=seed.delta_rope_used,
            sigma_pos=h.sigma_pos,
            sigma_speed=h.resolved_sigma_speed(),
            rrt_step=h.rrt_step,
            rrt_max_iters=h.rrt_max_iters,
            rng_seed=scn.rng_seed + 1,
        ),
    )

    t3 = time_mod.perf_counter()
    generation_log = []
    moo_params = MooParams(
        n_gen=h.n_gen,
        pop_size=h.n_pop,
        crossover_rate=h.crossover_rate,
        eta_crossover=h.eta_crossover,
        mutation_rate=h.mutation_rate,
        eta_mutation=h.eta_mutation,
        rng_seed=scn.rng_seed + 2,
    )
    front = run_nsga2(ctx, population, moo_params, progress_sink=generation_log.append)
    timings["optimization_s"] = time_mod.perf_counter() - t3
    if not front:
        from .errors import PlanningFailureError

        raise PlanningFailureError("optimization returned no feasible trajectory")

    weights = adjust_coefficients(scn.risks)
    selected = vote(front, weights)

    curve = decode(front[selected].decision, scn.start, scn.goal, scn.v_start, scn.v_goal, h.degree)
    samples = sample_uniform(curve, h.n_nurbs)
    sample_times = trajectory_timeline(samples, h.v_floor)
    sample_powers = trajectory_powers(samples, power_model)
    timings["total_s"] = time_mod.perf_counter() - t0

    metadata = {
        "scenario": scn.name,
        "rng_seed": scn.rng_seed,
        "delta_rope_used": seed.delta_rope_used,
        "seed_halvings": seed.halvings,
        "front_size": len(front),
        "m_uav": h.m_uav,
        "timings": timings,
    }

    result = PlanResult(
        front=front,
        selected_index=selected,
        weights=weights,
        samples=samples,
        sample_times=sample_times,
        sample_powers=sample_powers,
        generation_log=generation_log,
        metadata=metadata,
        context=ctx,
    )
    if out_dir is not None:
        write_result(result, scn, Path(out_dir))
    return result


def _individual_to_dict(ind: EvaluatedIndividual) -> dict:
    return {
        "decision": [float(v) for v in ind.decision],
        "costs": {
            "time_s": ind.costs.time_s,
            "safety": ind.costs.safety,
            "energy_j": ind.costs.energy_j,
        },
        "constraints": {
            "max_accel_violation": ind.constraints.max_accel_violation,
            "collision_violation": ind.constraints.collision_violation,
            "feasible": ind.constraints.feasible,
        },
    }


def front_to_dict(result: PlanResult, scn: Scenario) -> dict:
    w = result.weights
    return {
        "front": [_individual_to_dict(ind) for ind in result.front],
        "selected_index": result.selected_index,
        "vote_weights": {
            "k_time": w.k_time,
            "k_safety": w.k_safety,
            "k_energy": w.k_energy,
            "gamma": w.gamma,
        },
        "context": {
            "start": scn.start.tolist(),
            "goal": scn.goal.tolist(),
            "v_start": scn.v_start,
            "v_goal": scn.v_goal,
            "degree": scn.hyper.degree,
            "n_nurbs": scn.hyper.n_nurbs,
            "rng_seed": scn.rng_seed,
        },
    }


def write_result(result: PlanResult, scn: Scenario, out_dir: Path) -> dict:
    """Emit pareto.json, trajectory.csv, generations.csv, metadata.json.

    Returns the paths written. Every emitted trajectory sample set is
    re-checked against the hard constraints.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    h = scn.hyper

    report = costs_mod.check_constraints(
        result.samples, result.context.env, h.a_max, h.r_uav, h.v_floor
    )
    if report.max_accel_violation > CONSTRAINT_EMIT_TOL or report.collision_violation > CONSTRAINT_EMIT_TOL:
        raise ValidationError(
            f"selected trajectory violates hard constraints on emission: {report}"
        )

    pareto_path = out_dir / "pareto.json"
    pareto_path.write_text(json.dumps(front_to_dict(result, scn), indent=2, sort_keys=True))

    traj_path = out_dir / "trajectory.csv"
    with traj_path.open("w") as fh:
        fh.write("t_s,x_m,y_m,z_m,speed_mps,power_w\n")
        for t, pos, speed, power in zip(
            result.sample_times, result.samples.positions, result.samples.speeds, result.sample_powers
        ):
            fh.write(
                f"{t:.10g},{pos[0]:.10g},{pos[1]:.10g},{pos[2]:.10g},{speed:.10g},{power:.10g}\n"
            )

    gen_path = out_dir / "generations.csv"
    with gen_path.open("w") as fh:
        fh.write("gen,front_size,best_time,best_safety,best_energy\n")
        for stats in result.generation_log:
            best = ",".join(f"{v:.10g}" for v in stats.best)
            fh.write(f"{stats.generation},{stats.front_size},{best}\n")

    meta_path = out_dir / "metadata.json"
    meta = dict(result.metadata)
    meta["files"] = {
        "pareto": pareto_path.name,
        "trajectory": traj_path.name,
        "generations": gen_path.name,
    }
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True))

    return {
        "pareto": pareto_path,
        "trajectory": traj_path,
        "generations": gen_path,
        "metadata": meta_path,
    }


def load_front(path) -> tuple[list, dict]:
    """Reload a pareto.json into EvaluatedIndividuals plus its context block."""
    from .costs import ConstraintReport, CostVector

    data = json.loads(Path(path).read_text())
    front = []
    for entry in data["front"]:
        front.append(
            EvaluatedIndividual(
                decision=np.asarray(entry["decision"], dtype=float),
                costs=CostVector(
                    time_s=entry["costs"]["time_s"],
                    safety=entry["costs"]["safety"],
                    energy_j=entry["costs"]["energy_j"],
                ),
                constraints=ConstraintReport(
                    max_accel_violation=entry["constraints"]["max_accel_violation"],
                    collision_violation=entry["constraints"]["collision_violation"],
                ),
            )
        )
    return front, data.get("context", {})


# --- sweeps -----------------------------------------------------------------


def _simplex_grid(spacing: float) -> list[tuple[float, float, float]]:
    """Lattice of (k_time, k_safety, k_energy) triples summing to 1."""
    m = round(1.0 / spacing)
    if abs(m * spacing - 1.0) > 1e-9:
        raise ValidationError(f"spacing {spacing} must divide 1 evenly")
    grid = []
    for i in range(m + 1):
        for j in range(m + 1 - i):
            k = m - i - j
            grid.append((i / m, j / m, k / m))
    return grid


def _selected_row(scn: Scenario, result_front, env, index: int, v_floor: float) -> dict:
    ind = result_front[index]
    curve = decode(ind.decision, scn.start, scn.goal, scn.v_start, scn.v_goal, scn.hyper.degree)
    samples = sample_uniform(curve, scn.hyper.n_nurbs)
    row = {"selected_index": index, "time_s": ind.costs.time_s, "energy_j": ind.costs.energy_j}
    row.update(trajectory_metrics(samples, env, v_floor))
    return row


def sweep(
    scn: Scenario,
    sweep_spec: dict,
    out_dir: Optional[Path] = None,
    replan: bool = False,
) -> list[dict]:
    """Vote-coefficient or single-risk-axis sweep.

    Risk sweeps re-vote on one cached Pareto front (risks only enter at
    voting); ``replan`` forces a full replan per grid point instead.
    """
    kind = sweep_spec.get("kind")
    if kind not in ("risk", "coefficients"):
        raise ValidationError(f"sweep.kind: must be 'risk' or 'coefficients', got {kind!r}")

    env = build_scenario_environment(scn)
    power_model = fit_quadric(load_power_samples(scn.power_calibration))
    base = None
    if not (kind == "risk" and replan):
        base = plan(scn, env=env, power_model=power_model)

    rows = []
    if kind == "risk":
        axis = sweep_spec.get("axis")
        if axis not in ("wind", "communication", "localization", "battery"):
            raise ValidationError(f"sweep.axis: unknown risk axis {axis!r}")
        start = float(sweep_spec.get("start", 0.0))
        stop = float(sweep_spec.get("stop", 1.0))
        step = float(sweep_spec.get("step", 0.1))
        if step <= 0 or stop < start:
            raise ValidationError("sweep.start/stop/step: need step > 0 and stop >= start")
        n_points = int(round((stop - start) / step)) + 1
        values = [start + i * step for i in range(n_points)]
        for value in values:
            risk_kwargs = {
                "wind": scn.risks.wind,
                "communication": scn.risks.communication,
                "localization": scn.risks.localization,
                "battery": scn.risks.battery,
            }
            risk_kwargs[axis] = value
            risks = RiskState(**risk_kwargs)
            if replan:
                from dataclasses import replace as dc_replace

                point_result = plan(dc_replace(scn, risks=risks), env=env, power_model=power_model)
                front = point_result.front
                weights = point_result.weights
                index = point_result.selected_index
            else:
                front = base.front
                weights = adjust_coefficients(risks)
                index = vote(front, weights)
            row = {"axis": axis, "value": value, "k_time": weights.k_time,
                   "k_safety": weights.k_safety, "k_energy": weights.k_energy}
            row.update(_selected_row(scn, front, env, index, scn.hyper.v_floor))
            rows.append(row)
    else:
        spacing = float(sweep_spec.get("spacing", 0.1))
        for k_time, k_safety, k_energy in _simplex_grid(spacing):
            weights = VoteWeights(
                k_time=k_time,
                k_safety=k_safety,
                k_energy=k_energy,
                baseline_time=k_time,
                baseline_safety=k_safety,
                baseline_energy=k_energy,
                gamma=1.0,
            )
            index = vote(base.front, weights)
            row = {"k_time": k_time, "k_safety": k_safety, "k_energy": k_energy}
            row.update(_selected_row(scn, base.front, env, index, scn.hyper.v_floor))
            rows.append(row)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "sweep.csv"
        columns = list(rows[0].keys())
        with path.open("w") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_format_cell(row[c]) for c in columns) + "\n")
    return rows


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


# --- single-objective benchmarking ------------------------------------------


def benchmark_single_objective(
    scn: Scenario,
    objective: str,
    n_runs: int,
    n_gen: int,
    pop_size: Optional[int] = None,
    base_seed: int = 10_000,
    env: Optional[Environment] = None,
    power_model: Optional[PowerQuadricModel] = None,
) -> dict:
    """Repeat single-objective runs and keep the best trajectory.

    Mirrors the multi-run benchmarking protocol used to bracket the
    planner's behavioral range: each run optimizes exactly one objective;
    the trajectory with the overall minimum wins.
    """
    if objective not in OBJECTIVE_NAMES:
        raise ValidationError(f"unknown objective {objective!r}")
    if env is None:
        env = build_scenario_environment(scn)
    if power_model is None:
        power_model = fit_quadric(load_power_samples(scn.power_calibration))
    h = scn.hyper
    pop_size = pop_size or h.n_pop

    from dataclasses import replace as dc_replace

    best = None
    best_value = np.inf
    col = OBJECTIVE_NAMES.index(objective)
    for run in range(n_runs):
        run_scn = dc_replace(
            scn,
            rng_seed=base_seed + run,
            hyper=dc_replace(h, n_gen=n_gen, n_pop=pop_size),
        )
        seeding_params = SeedingParams(
            delta_rope=h.delta_rope,
            sigma_pos=h.sigma_pos,
            sigma_speed=h.resolved_sigma_speed(),
            rrt_step=h.rrt_step,
            rrt_max_iters=h.rrt_max_iters,
            rng_seed=run_scn.rng_seed,
        )
        seed = build_feasible_seed(
            env, scn.start, scn.goal, scn.v_start, scn.v_goal,
            h.resolved_v_cruise(), h.degree, h.n_nurbs, h.a_max, h.r_uav,
            seeding_params, v_floor=h.v_floor,
        )
        ctx = make_context(
            env=env, power=power_model, safety=_safety_params(scn),
            start=scn.start, goal=scn.goal, v_start=scn.v_start, v_goal=scn.v_goal,
            degree=h.degree, n_samples=h.n_nurbs, a_max=h.a_max,
            n_interior=interior_count(len(seed.decision)), v_floor=h.v_floor,
            weight_bounds=(h.weight_min, h.weight_max),
            objectives=(objective,),
        )
        population = initial_population(
            seed.decision, pop_size, ctx.bounds,
            SeedingParams(
                delta_rope=seed.delta_rope_used, sigma_pos=h.sigma_pos,
                sigma_speed=h.resolved_sigma_speed(), rrt_step=h.rrt_step,
                rrt_max_iters=h.rrt_max_iters, rng_seed=run_scn.rng_seed + 1,
            ),
        )
        params = MooParams(
            n_gen=n_gen, pop_size=pop_size,
            crossover_rate=h.crossover_rate, eta_crossover=h.eta_crossover,
            mutation_rate=h.mutation_rate, eta_mutation=h.eta_mutation,
            rng_seed=run_scn.rng_seed + 2,
        )
        front = run_nsga2(ctx, population, params)
        for ind in front:
            value = ind.costs.as_array()[col]
            if value < best_value:
                best_value = value
                best = ind

    if best is None:
        raise ValidationError(f"no feasible benchmark trajectory found for {objective}")
    curve = decode(best.decision, scn.start, scn.goal, scn.v_start, scn.v_goal, h.degree)
    samples = sample_uniform(curve, h.n_nurbs)
    metrics = trajectory_metrics(samples, env, h.v_floor)
    metrics["objective"] = objective
    metrics["best_value"] = float(best_value)
    metrics["time_s"] = best.costs.time_s
    metrics["safety"] = best.costs.safety
    metrics["energy_j"] = best.costs.energy_j
    return metrics


# --- power model fitting report ---------------------------------------------


def fit_power_report(
    csv_path,
    holdout_fraction: float = 1.0,
    rng_seed: int = 0,
) -> tuple[PowerQuadricModel, dict]:
    """Fit on the six axis-aligned samples, validate on the rest.

    ``holdout_fraction`` deterministically subsamples the validation set
    (1.0 keeps everything). The report carries agreement statistics (mean
    error with 1.96-sigma limits) and per-sample residuals.
    """
    samples = load_power_samples(csv_path)
    axis_samples = [s for s in samples if _is_axis_aligned(s.direction)]
    rest = [s for s in samples if not _is_axis_aligned(s.direction)]
    if len(axis_samples) < 6:
        from .errors import FitError

        raise FitError(
            f"need the six axis-aligned calibration samples, found {len(axis_samples)}"
        )
    model = fit_quadric(axis_samples)

    if not 0.0 < holdout_fraction <= 1.0:
        raise ValidationError("holdout_fraction must be in (0, 1]")
    if holdout_fraction < 1.0 and rest:
        rng = np.random.default_rng(rng_seed)
        n_keep = max(1, int(round(holdout_fraction * len(rest))))
        keep_idx = rng.choice(len(rest), size=n_keep, replace=False)
        rest = [rest[i] for i in sorted(keep_idx)]

    residuals = []
    for s in rest:
        predicted, valid = power_for_directions(model, s.direction[None, :])
        predicted = float(predicted[0]) if valid[0] else float("nan")
        residuals.append(
            {
                "direction": s.direction.tolist(),
                "measured_w": s.power,
                "predicted_w": predicted,
                "error_w": predicted - s.power,
            }
        )
    errors = np.array([r["error_w"] for r in residuals]) if residuals else np.zeros(0)
    mean_error = float(np.mean(errors)) if len(errors) else 0.0
    sigma = float(np.std(errors, ddof=1)) if len(errors) > 1 else 0.0
    report = {
        "n_fit": len(axis_samples),
        "n_validation": len(rest),
        "mean_error_w": mean_error,
        "sigma_w": sigma,
        "limits_of_agreement_w": [mean_error - 1.96 * sigma, mean_error + 1.96 * sigma],
        "residuals": residuals,
    }
    return model, report
