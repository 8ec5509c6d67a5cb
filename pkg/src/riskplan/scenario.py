"""Scenario file ingestion and validation.

A scenario is one human-editable JSON document describing the world
(domain, obstacles, keep-out hulls), the mission (start/goal and their
speeds, current risks), every planner hyperparameter, and the path to the
power calibration CSV. Validation collects all problems before failing so
a bad file is reported once, completely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .environment import (
    BoxObstacle,
    CapsuleObstacle,
    DomainBox,
    OrientedHull,
    SphereObstacle,
)
from .errors import ValidationError
from .voting import RiskState


@dataclass(frozen=True)
class Hyperparams:
    v_max: float = 2.0
    a_max: float = 2.2
    degree: int = 3
    r_sdf_min: float = 1.0
    r_sdf_max: float = 5.0
    r_ch_max: float = 2.0
    delta_rope: float = 5.0
    n_gen: int = 1000
    n_pop: int = 40
    n_nurbs: int = 50
    m_uav: float = 4.2  # recorded in outputs; no implemented cost consumes it
    k_a: float = 0.5
    k_b: float = 0.5
    v_floor: float = 0.1
    r_uav: float = 0.5
    weight_min: float = 0.1
    weight_max: float = 10.0
    sigma_pos: float = 15.0
    sigma_speed: Optional[float] = None  # default v_max / 2
    rrt_step: float = 2.0
    rrt_max_iters: int = 5000
    crossover_rate: float = 0.95
    eta_crossover: float = 10.0
    mutation_rate: Optional[float] = None  # default 1 / D
    eta_mutation: float = 50.0
    v_cruise: Optional[float] = None  # default v_max / 2

    def resolved_sigma_speed(self) -> float:
        return self.v_max / 2.0 if self.sigma_speed is None else self.sigma_speed

    def resolved_v_cruise(self) -> float:
        return self.v_max / 2.0 if self.v_cruise is None else self.v_cruise


@dataclass(frozen=True)
class Scenario:
    domain: DomainBox
    obstacles: tuple
    hulls: tuple
    start: np.ndarray
    goal: np.ndarray
    v_start: float
    v_goal: float
    risks: RiskState
    hyper: Hyperparams
    power_calibration: Path
    rng_seed: int = 0
    resolution: float = 0.5
    max_voxels: int = 20_000_000
    name: str = "scenario"


def _check_hyper(hyper: Hyperparams, errors: list):
    def bad(cond, msg):
        if cond:
            errors.append(msg)

    bad(hyper.v_max <= 0, "hyperparams.v_max: must be > 0")
    bad(hyper.a_max <= 0, "hyperparams.a_max: must be > 0")
    bad(
        not (1 < hyper.degree <= 5) or int(hyper.degree) != hyper.degree,
        f"hyperparams.degree: must be a natural number with 1 < degree <= 5, got {hyper.degree}",
    )
    bad(
        not (0 < hyper.r_sdf_min < hyper.r_sdf_max),
        "hyperparams.r_sdf_min/r_sdf_max: need 0 < r_sdf_min < r_sdf_max",
    )
    bad(hyper.r_ch_max <= 0, "hyperparams.r_ch_max: must be > 0")
    bad(hyper.delta_rope <= 0, "hyperparams.delta_rope: must be > 0")
    bad(hyper.n_gen < 1, "hyperparams.n_gen: must be >= 1")
    bad(
        hyper.n_pop < 8 or hyper.n_pop % 4 != 0,
        "hyperparams.n_pop: must be >= 8 and divisible by 4",
    )
    bad(hyper.n_nurbs < 2, "hyperparams.n_nurbs: must be >= 2")
    bad(hyper.m_uav <= 0, "hyperparams.m_uav: must be > 0")
    bad(hyper.k_a < 0 or hyper.k_b < 0, "hyperparams.k_a/k_b: must be >= 0")
    bad(abs(hyper.k_a + hyper.k_b - 1.0) > 1e-9, "hyperparams.k_a/k_b: must sum to 1")
    bad(hyper.v_floor <= 0, "hyperparams.v_floor: must be > 0")
    bad(hyper.r_uav < 0, "hyperparams.r_uav: must be >= 0")
    bad(
        not (0 < hyper.weight_min < hyper.weight_max),
        "hyperparams.weight_min/weight_max: need 0 < min < max",
    )
    bad(hyper.v_floor >= hyper.v_max, "hyperparams.v_floor: must be < v_max")


def _parse_obstacle(entry: dict, path: str, errors: list):
    kind = entry.get("type")
    try:
        if kind == "box":
            return BoxObstacle(min_corner=entry["min"], max_corner=entry["max"])
        if kind == "sphere":
            return SphereObstacle(center=entry["center"], radius=entry["radius"])
        if kind == "capsule":
            return CapsuleObstacle(
                endpoint_a=entry["a"], endpoint_b=entry["b"], radius=entry["radius"]
            )
        errors.append(f"{path}.type: unknown obstacle type {kind!r} (box|sphere|capsule)")
    except KeyError as exc:
        errors.append(f"{path}: missing field {exc}")
    except ValidationError as exc:
        errors.extend(f"{path}: {v}" for v in exc.violations)
    return None


def _parse_hull(entry: dict, path: str, errors: list):
    try:
        rotation = entry.get("rotation", np.eye(3).tolist())
        return OrientedHull(
            center=entry["center"], half_extents=entry["half_extents"], rotation=rotation
        )
    except KeyError as exc:
        errors.append(f"{path}: missing field {exc}")
    except ValidationError as exc:
        errors.extend(f"{path}: {v}" for v in exc.violations)
    return None


def scenario_from_dict(data: dict, base_dir: Path | None = None, name: str = "scenario") -> Scenario:
    """Build and validate a Scenario from parsed JSON data.

    Raises ValidationError carrying every violation with its field path.
    """
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    errors: list[str] = []

    hyper_data = dict(data.get("hyperparams", {}))
    known = {f.name for f in fields(Hyperparams)}
    for key in sorted(set(hyper_data) - known):
        errors.append(f"hyperparams.{key}: unknown hyperparameter")
        hyper_data.pop(key)
    hyper = Hyperparams(**hyper_data)
    _check_hyper(hyper, errors)

    env_data = data.get("environment", {})
    domain = None
    try:
        dom = env_data["domain"]
        domain = DomainBox(min_corner=dom["min"], max_corner=dom["max"], v_max=hyper.v_max)
    except KeyError as exc:
        errors.append(f"environment.domain: missing field {exc}")
    except ValidationError as exc:
        errors.extend(f"environment.domain: {v}" for v in exc.violations)

    obstacles = []
    for i, entry in enumerate(env_data.get("obstacles", [])):
        obs = _parse_obstacle(entry, f"environment.obstacles[{i}]", errors)
        if obs is not None:
            obstacles.append(obs)
    hulls = []
    for i, entry in enumerate(env_data.get("hulls", [])):
        hull = _parse_hull(entry, f"environment.hulls[{i}]", errors)
        if hull is not None:
            hulls.append(hull)

    resolution = float(env_data.get("resolution", 0.5))
    if resolution <= 0:
        errors.append("environment.resolution: must be > 0")
    max_voxels = int(env_data.get("max_voxels", 20_000_000))

    mission = data.get("mission", {})
    start = np.asarray(mission.get("start", [np.nan] * 3), dtype=float)
    goal = np.asarray(mission.get("goal", [np.nan] * 3), dtype=float)
    if "start" not in mission:
        errors.append("mission.start: required")
    if "goal" not in mission:
        errors.append("mission.goal: required")
    if start.shape != (3,) or goal.shape != (3,):
        errors.append("mission.start/goal: must be 3-vectors")
    elif np.all(np.isfinite(start)) and np.all(np.isfinite(goal)):
        if np.allclose(start, goal):
            errors.append("mission.start/goal: must differ")
        if domain is not None:
            if not domain.contains(start):
                errors.append("mission.start: outside the domain box")
            if not domain.contains(goal):
                errors.append("mission.goal: outside the domain box")

    v_start = float(mission.get("v_start", hyper.v_max / 2.0))
    v_goal = float(mission.get("v_goal", hyper.v_max / 2.0))
    if not 0 <= v_start <= hyper.v_max:
        errors.append(f"mission.v_start: must be in [0, v_max], got {v_start}")
    if not 0 <= v_goal <= hyper.v_max:
        errors.append(f"mission.v_goal: must be in [0, v_max], got {v_goal}")

    risk_data = mission.get("risks", data.get("risks", {}))
    risks = RiskState()
    try:
        risks = RiskState(
            wind=float(risk_data.get("wind", 0.0)),
            communication=float(risk_data.get("communication", 0.0)),
            localization=float(risk_data.get("localization", 0.0)),
            battery=float(risk_data.get("battery", 0.0)),
        )
    except ValidationError as exc:
        errors.extend(f"mission.risks: {v}" for v in exc.violations)

    calibration = data.get("power_calibration")
    if not calibration:
        errors.append(
            "power_calibration: required (the energy objective needs a calibration CSV)"
        )
        calibration_path = Path("missing.csv")
    else:
        calibration_path = Path(calibration)
        if not calibration_path.is_absolute():
            calibration_path = base_dir / calibration_path
        if not calibration_path.exists():
            errors.append(f"power_calibration: file not found: {calibration_path}")

    rng_seed = int(data.get("rng_seed", 0))

    if errors:
        raise ValidationError(errors)

    return Scenario(
        domain=domain,
        obstacles=tuple(obstacles),
        hulls=tuple(hulls),
        start=start,
        goal=goal,
        v_start=v_start,
        v_goal=v_goal,
        risks=risks,
        hyper=hyper,
        power_calibration=calibration_path,
        rng_seed=rng_seed,
        resolution=resolution,
        max_voxels=max_voxels,
        name=name,
    )


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario JSON file."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"scenario file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    return scenario_from_dict(data, base_dir=path.parent, name=path.stem)
