from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest

from conftest import make_corridor_scenario, write_power_csv
from riskplan.costs import check_constraints
from riskplan.errors import FitError, ValidationError
from riskplan.moo import decode, evaluate
from riskplan.nurbs import sample_uniform
from riskplan.pipeline import (
    benchmark_single_objective,
    build_scenario_environment,
    fit_power_report,
    load_front,
    plan,
    sweep,
    trajectory_metrics,
)
from riskplan.power import PowerQuadricModel, power_for_directions
from riskplan.voting import RiskState, adjust_coefficients, vote


@pytest.fixture(scope="module")
def planned(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipeline")
    scn = make_corridor_scenario(tmp, n_gen=200)
    out = tmp / "out"
    result = plan(scn, out_dir=out)
    return scn, result, out


class TestPlanOutputs:
    def test_front_nonempty_and_files_written(self, planned):
        _, result, out = planned
        assert len(result.front) >= 2
        for name in ("pareto.json", "trajectory.csv", "generations.csv", "metadata.json"):
            assert (out / name).exists()

    def test_pareto_roundtrip_reevaluation(self, planned):
        # Reloading the stored decisions and re-evaluating reproduces the
        # stored cost vectors.
        scn, result, out = planned
        front, context = load_front(out / "pareto.json")
        assert context["rng_seed"] == scn.rng_seed
        ctx = result.context
        for stored in front:
            again = evaluate(stored.decision, ctx)
            assert again.costs.time_s == pytest.approx(stored.costs.time_s, abs=1e-9)
            assert again.costs.safety == pytest.approx(stored.costs.safety, abs=1e-9)
            assert again.costs.energy_j == pytest.approx(stored.costs.energy_j, abs=1e-9)

    def test_emitted_trajectory_satisfies_constraints(self, planned):
        scn, result, _ = planned
        env = result.context.env
        report = check_constraints(
            result.samples, env, scn.hyper.a_max, scn.hyper.r_uav, scn.hyper.v_floor
        )
        assert report.max_accel_violation <= 1e-9
        assert report.collision_violation <= 1e-9

    def test_trajectory_csv_shape(self, planned):
        scn, _, out = planned
        lines = (out / "trajectory.csv").read_text().strip().splitlines()
        assert lines[0] == "t_s,x_m,y_m,z_m,speed_mps,power_w"
        assert len(lines) == 1 + scn.hyper.n_nurbs
        first = [float(v) for v in lines[1].split(",")]
        assert first[0] == 0.0
        assert first[1:4] == pytest.approx(list(scn.start))

    def test_rerun_byte_identical_result_files(self, tmp_path):
        scn = make_corridor_scenario(tmp_path, n_gen=60)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        plan(scn, out_dir=out1)
        plan(scn, out_dir=out2)
        for name in ("pareto.json", "trajectory.csv", "generations.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_metadata_records_seed_and_m_uav(self, planned):
        scn, _, out = planned
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["rng_seed"] == scn.rng_seed
        assert meta["m_uav"] == scn.hyper.m_uav
        assert "timings" in meta

    def test_generation_log_matches_interface(self, planned):
        _, _, out = planned
        lines = (out / "generations.csv").read_text().strip().splitlines()
        assert lines[0] == "gen,front_size,best_time,best_safety,best_energy"
        assert len(lines) >= 2


class TestRiskEffect:
    def test_wind_risk_increases_obstacle_distance(self, tmp_path):
        # Statistical over seeds: re-voting the same fronts under high wind
        # risk must not pick trajectories closer to obstacles on average.
        distances = {"calm": [], "windy": []}
        for seed in range(6):
            scn = make_corridor_scenario(tmp_path, rng_seed=seed, n_gen=250)
            result = plan(scn)
            env = result.context.env
            for label, risks in (("calm", RiskState()), ("windy", RiskState(wind=1.0))):
                weights = adjust_coefficients(risks)
                idx = vote(result.front, weights)
                ind = result.front[idx]
                curve = decode(
                    ind.decision, scn.start, scn.goal, scn.v_start, scn.v_goal, scn.hyper.degree
                )
                metrics = trajectory_metrics(
                    sample_uniform(curve, scn.hyper.n_nurbs), env, scn.hyper.v_floor
                )
                distances[label].append(metrics["mean_obstacle_distance_m"])
        assert np.mean(distances["windy"]) >= np.mean(distances["calm"])


class TestSweep:
    def test_battery_axis_has_11_rows(self, tmp_path):
        scn = make_corridor_scenario(tmp_path, n_gen=100)
        rows = sweep(scn, {"kind": "risk", "axis": "battery", "start": 0, "stop": 1, "step": 0.1})
        assert len(rows) == 11
        assert rows[0]["value"] == 0.0
        assert rows[-1]["value"] == pytest.approx(1.0)

    def test_coefficient_simplex_66_rows(self, tmp_path):
        scn = make_corridor_scenario(tmp_path, n_gen=100)
        out = tmp_path / "sweep_out"
        rows = sweep(scn, {"kind": "coefficients", "spacing": 0.1}, out_dir=out)
        assert len(rows) == 66
        assert (out / "sweep.csv").exists()
        header = (out / "sweep.csv").read_text().splitlines()[0]
        assert "k_time" in header and "mean_obstacle_distance_m" in header

    def test_selections_are_front_members(self, tmp_path):
        scn = make_corridor_scenario(tmp_path, n_gen=100)
        result = plan(scn)
        rows = sweep(scn, {"kind": "risk", "axis": "wind", "step": 0.25})
        for row in rows:
            assert 0 <= row["selected_index"] < len(result.front)
            match = [
                ind
                for ind in result.front
                if ind.costs.time_s == pytest.approx(row["time_s"], abs=1e-9)
            ]
            assert match

    def test_invalid_spec(self, tmp_path):
        scn = make_corridor_scenario(tmp_path, n_gen=100)
        with pytest.raises(ValidationError):
            sweep(scn, {"kind": "nope"})
        with pytest.raises(ValidationError):
            sweep(scn, {"kind": "risk", "axis": "sunspots"})

    def test_sweep_deterministic(self, tmp_path):
        scn = make_corridor_scenario(tmp_path, n_gen=60)
        r1 = sweep(scn, {"kind": "risk", "axis": "battery", "step": 0.5})
        r2 = sweep(scn, {"kind": "risk", "axis": "battery", "step": 0.5})
        assert r1 == r2


def synthetic_dataset(rng, truth, n_extra=36, noise=0.0):
    from conftest import AXIS_DIRECTIONS

    dirs = [np.array(d, dtype=float) for d in AXIS_DIRECTIONS]
    extra = rng.standard_normal((n_extra, 3))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    dirs.extend(extra)
    rows = ["vx,vy,vz,power_w"]
    for d in dirs:
        p, ok = power_for_directions(truth, d[None, :])
        assert ok[0]
        power = float(p[0]) + (rng.normal(0.0, noise) if noise else 0.0)
        rows.append(f"{d[0]:.12g},{d[1]:.12g},{d[2]:.12g},{max(power, 1.0):.12g}")
    return "\n".join(rows) + "\n"


TRUTH = PowerQuadricModel(
    a=-1 / 600.0**2, b=-1 / 600.0**2, c=-1 / 640.0**2,
    g=0.0, h=0.0, k=3.0e-4, hover_power=600.0,
)


class TestFitPowerReport:
    def test_zero_noise_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        path = tmp_path / "cal.csv"
        path.write_text(synthetic_dataset(rng, TRUTH, noise=0.0))
        model, report = fit_power_report(path)
        assert report["n_fit"] == 6
        assert report["n_validation"] == 36
        assert report["mean_error_w"] == pytest.approx(0.0, abs=1e-6)
        assert report["sigma_w"] == pytest.approx(0.0, abs=1e-6)

    def test_noisy_sigma_recovered(self, tmp_path):
        # 20 trials at noise sigma=50 W: the average reported sigma lands
        # near the injected noise level.
        sigmas = []
        for trial in range(20):
            rng = np.random.default_rng(100 + trial)
            path = tmp_path / f"cal_{trial}.csv"
            path.write_text(synthetic_dataset(rng, TRUTH, noise=50.0))
            _, report = fit_power_report(path)
            sigmas.append(report["sigma_w"])
        assert 30.0 <= np.mean(sigmas) <= 80.0

    def test_missing_axis_samples(self, tmp_path):
        rng = np.random.default_rng(5)
        dirs = rng.standard_normal((10, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        rows = ["vx,vy,vz,power_w"] + [
            f"{d[0]:.6g},{d[1]:.6g},{d[2]:.6g},600" for d in dirs
        ]
        path = tmp_path / "cal.csv"
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(FitError, match="axis"):
            fit_power_report(path)

    def test_holdout_fraction_subsamples(self, tmp_path):
        rng = np.random.default_rng(1)
        path = tmp_path / "cal.csv"
        path.write_text(synthetic_dataset(rng, TRUTH, noise=10.0))
        _, full = fit_power_report(path, holdout_fraction=1.0)
        _, half = fit_power_report(path, holdout_fraction=0.5)
        assert half["n_validation"] == 18
        assert full["n_validation"] == 36

    def test_limits_of_agreement_bracket_mean(self, tmp_path):
        rng = np.random.default_rng(2)
        path = tmp_path / "cal.csv"
        path.write_text(synthetic_dataset(rng, TRUTH, noise=25.0))
        _, report = fit_power_report(path)
        lo, hi = report["limits_of_agreement_w"]
        assert lo <= report["mean_error_w"] <= hi
        assert hi - lo == pytest.approx(2 * 1.96 * report["sigma_w"])


class TestBenchmark:
    def test_single_objective_benchmark_runs(self, tmp_path):
        scn = make_corridor_scenario(tmp_path, n_gen=100)
        metrics = benchmark_single_objective(scn, "time", n_runs=3, n_gen=150, base_seed=50)
        assert metrics["objective"] == "time"
        assert metrics["best_value"] == pytest.approx(metrics["time_s"])
        assert metrics["best_value"] > 0

    def test_unknown_objective(self, tmp_path):
        scn = make_corridor_scenario(tmp_path, n_gen=50)
        with pytest.raises(ValidationError):
            benchmark_single_objective(scn, "smoothness", n_runs=1, n_gen=10)
