import json
from pathlib import Path

import numpy as np
import pytest

from conftest import unit_maxwellian
from errors import AcceptanceCheckError, ConfigValidationError
from models.spectral import CollisionKernel
from schemas.scenario import ScenarioKind
from utils.scenarios import (
    DISTRIBUTION_FILE,
    REPORT_FILE,
    SERIES_FILE,
    ScenarioRun,
    _relax,
    apply_overrides,
    bkw_provenance,
    load_scenario,
    run_scenario,
    validate_scenario,
)
from utils.velocity_grid import build_grid

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
SCENARIO_FILES = sorted(SCENARIO_DIR.glob("*.toml"))


def small_relaxation(**overrides):
    data = {
        "kind": "homogeneous-relaxation",
        "name": "small-relaxation",
        "grid": {"n_per_dim": 8, "half_width": 4.0},
        "kernel": {"operator": "dvm"},
        "time": {"stepper": "imex", "dt": 0.1, "t_final": 0.5},
        "acceptance": {"enabled": False},
    }
    for section, values in overrides.items():
        if isinstance(values, dict):
            data[section] = {**data.get(section, {}), **values}
        else:
            data[section] = values
    return validate_scenario(data)


def field_names(exc_info):
    return [field for field, _ in exc_info.value.errors]


class TestLoading:
    def test_shipped_scenarios_are_present(self):
        kinds = {load_scenario(path).kind for path in SCENARIO_FILES}
        assert kinds == set(ScenarioKind)

    @pytest.mark.parametrize("path", SCENARIO_FILES, ids=lambda p: p.stem)
    def test_shipped_scenario_validates(self, path):
        cfg = load_scenario(path)
        assert cfg.label

    def test_odd_grid_size_names_the_field(self):
        with pytest.raises(ConfigValidationError) as exc_info:
            validate_scenario({"kind": "ap-sweep", "grid": {"n_per_dim": 7}})
        assert "grid.n_per_dim" in field_names(exc_info)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigValidationError) as exc_info:
            validate_scenario({"kind": "ap-sweep", "time": {"dt": 0.1, "sub_steps": 2}})
        assert "time.sub_steps" in field_names(exc_info)

    def test_missing_kind(self):
        with pytest.raises(ConfigValidationError) as exc_info:
            validate_scenario({"grid": {"n_per_dim": 8}})
        assert "kind" in field_names(exc_info)

    def test_several_problems_reported_together(self):
        with pytest.raises(ConfigValidationError) as exc_info:
            validate_scenario({"kind": "ap-sweep", "grid": {"n_per_dim": 3}, "time": {"dt": -1.0}})
        assert {"grid.n_per_dim", "time.dt"} <= set(field_names(exc_info))

    def test_sod_gets_a_default_mesh(self):
        cfg = validate_scenario({"kind": "sod-kinetic"})
        assert cfg.space is not None and cfg.space.n_cells == 200

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigValidationError) as exc_info:
            load_scenario(tmp_path / "absent.toml")
        assert field_names(exc_info) == ["<file>"]

    def test_malformed_toml(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text('kind = "ap-sweep"\n[grid\n')
        with pytest.raises(ConfigValidationError):
            load_scenario(path)

    def test_overrides(self):
        cfg = small_relaxation()
        updated = apply_overrides(cfg, threads=3, seed=11)
        assert (updated.threads, updated.seed) == (3, 11)
        assert apply_overrides(cfg) is cfg
        with pytest.raises(ConfigValidationError):
            apply_overrides(cfg, threads=0)


class TestRuns:
    def test_relaxation_writes_outputs(self, tmp_path):
        report = run_scenario(small_relaxation(), tmp_path / "out")
        out = tmp_path / "out"
        assert (out / SERIES_FILE).exists() and (out / DISTRIBUTION_FILE).exists()
        written = json.loads((out / REPORT_FILE).read_text())
        assert written["scenario"] == "small-relaxation"
        assert written["passed"] == report.passed
        series = np.loadtxt(out / SERIES_FILE, delimiter=",", skiprows=1, ndmin=2)
        assert series.shape[0] == 6
        header = (out / SERIES_FILE).read_text().splitlines()[0].split(",")
        assert header[:2] == ["step", "t"]
        assert report.conservation_defects["mass"] <= 1e-10
        assert {c.name for c in report.checks} >= {"stable", "mass_conservation", "energy_conservation"}

    def test_default_output_directory(self):
        from config import settings

        run_scenario(small_relaxation())
        assert (Path(settings.output_dir) / "small-relaxation" / REPORT_FILE).exists()

    def test_same_seed_same_result(self, tmp_path):
        perturbed = {"initial": {"perturbation": 0.1}, "seed": 7}
        run_scenario(small_relaxation(**perturbed), tmp_path / "a")
        run_scenario(small_relaxation(**perturbed), tmp_path / "b")
        run_scenario(small_relaxation(initial={"perturbation": 0.1}, seed=8), tmp_path / "c")
        first = (tmp_path / "a" / DISTRIBUTION_FILE).read_bytes()
        assert first == (tmp_path / "b" / DISTRIBUTION_FILE).read_bytes()
        assert first != (tmp_path / "c" / DISTRIBUTION_FILE).read_bytes()

    def test_thread_count_does_not_change_result(self, tmp_path):
        run_scenario(small_relaxation(threads=1), tmp_path / "serial")
        run_scenario(small_relaxation(threads=3), tmp_path / "threaded")
        assert (tmp_path / "serial" / DISTRIBUTION_FILE).read_bytes() == (
            tmp_path / "threaded" / DISTRIBUTION_FILE
        ).read_bytes()

    def test_failed_gate_still_writes_report(self, tmp_path):
        cfg = small_relaxation(acceptance={"enabled": True, "relaxation_factor": 1e-12})
        with pytest.raises(AcceptanceCheckError) as exc_info:
            run_scenario(cfg, tmp_path)
        report = exc_info.value.report
        assert report is not None and not report.passed
        assert any(c.name == "relaxes_to_equilibrium" and not c.passed for c in report.checks)
        assert (tmp_path / REPORT_FILE).exists()

    def test_kernel_mode_build(self, tmp_path):
        cfg = validate_scenario(
            {
                "kind": "kernel-mode-build",
                "grid": {"n_per_dim": 8, "half_width": 6.0},
                "kernel": {"operator": "direct", "rank": 10},
            }
        )
        report = run_scenario(cfg, tmp_path)
        assert report.passed
        assert report.metrics["table_shape"] == [49, 49]
        assert report.metrics["rank"] == 10
        assert {c.name for c in report.checks} == {"quadrature_self_check", "beta_origin_closed_form"}
        assert any(path.endswith(".kmod") for path in report.outputs)

    def test_bkw_needs_spectral_maxwell(self, tmp_path):
        cfg = validate_scenario({"kind": "bkw-verification", "kernel": {"operator": "dvm"}})
        with pytest.raises(ConfigValidationError):
            run_scenario(cfg, tmp_path)

    def test_small_ap_sweep(self, tmp_path):
        cfg = validate_scenario(
            {
                "kind": "ap-sweep",
                "grid": {"n_per_dim": 8, "half_width": 6.0},
                "kernel": {"operator": "direct"},
                "time": {"stepper": "imex", "dt": 0.1},
                "ap": {"epsilons": [1.0, 1e-8], "stability_steps": 3},
            }
        )
        report = run_scenario(cfg, tmp_path)
        assert [row.stepper for row in report.ap_sweep] == ["imex", "imex", "explicit"]
        assert report.ap_sweep[-1].stable is False
        assert report.passed

    def test_small_transport_study(self, tmp_path):
        cfg = validate_scenario(
            {
                "kind": "convergence-study",
                "grid": {"n_per_dim": 8, "half_width": 4.0},
                "time": {"t_final": 0.1},
                "space": {"boundary": "periodic"},
                "convergence": {"study": "transport", "n_cells": [100, 200, 400]},
            }
        )
        report = run_scenario(cfg, tmp_path)
        assert [row.n for row in report.convergence.rows] == [100, 200, 400]
        assert report.passed


class TestEntropyGate:
    def test_single_step_increase_between_rows_is_caught(self, tmp_path):
        cfg = small_relaxation(time={"t_final": 0.5}, output={"every": 10})
        grid = build_grid(2, 8, 4.0)
        equilibrium = unit_maxwellian(grid)
        # narrower Maxwellian: higher H, gone again one step later
        sharper = unit_maxwellian(grid, temperature=0.8)
        calls = []

        def step(f, dt, problem):
            calls.append(dt)
            return sharper if len(calls) == 3 else equilibrium

        run = ScenarioRun(cfg, tmp_path)
        _relax(run, equilibrium, None, step)
        checks = {c.name: c for c in run.checks}
        assert len(calls) == 5
        assert len(run._rows) == 2
        assert checks["entropy_nonincreasing"].passed is False
        assert checks["entropy_nonincreasing"].value > 1e-2

    def test_constant_entropy_passes(self, tmp_path):
        cfg = small_relaxation(time={"t_final": 0.5}, output={"every": 10})
        equilibrium = unit_maxwellian(build_grid(2, 8, 4.0))
        run = ScenarioRun(cfg, tmp_path)
        _relax(run, equilibrium, None, lambda f, dt, problem: f)
        assert {c.name: c.passed for c in run.checks}["entropy_nonincreasing"] is True


class TestBKWProvenance:
    def test_shipped_parameters_pass(self):
        acceptance = load_scenario(SCENARIO_DIR / "bkw_verification.toml").acceptance
        residual = bkw_provenance(
            CollisionKernel.maxwell(),
            acceptance.provenance_n_per_dim,
            acceptance.provenance_half_width,
            acceptance.provenance_refine,
            acceptance.provenance_n_angle,
        )
        assert residual <= acceptance.provenance_tolerance

    def test_residual_shrinks_when_spacing_halves(self):
        coarse = bkw_provenance(CollisionKernel.maxwell(), n_per_dim=12, half_width=6.0)
        fine = bkw_provenance(CollisionKernel.maxwell(), n_per_dim=24, half_width=6.0)
        assert fine < 1e-3 * coarse

    def test_wrong_kernel_strength_is_caught(self):
        residual = bkw_provenance(CollisionKernel("vhs", 0.0, c_alpha=0.2))
        assert residual > 0.1


@pytest.mark.slow
@pytest.mark.parametrize("path", SCENARIO_FILES, ids=lambda p: p.stem)
def test_shipped_scenario_passes_acceptance(path, tmp_path):
    report = run_scenario(load_scenario(path), tmp_path)
    assert report.passed, [c for c in report.checks if not c.passed]
