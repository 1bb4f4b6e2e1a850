import math

import pytest

from schemas.report import ConvergenceRow, ConvergenceTable
from schemas.scenario import AcceptanceConfig, InitialConfig, KernelConfig, OperatorKind
from utils.convergence import (
    convergence_checks,
    dvm_vs_spectral_study,
    euler_riemann_study,
    observed_order,
    spectral_equilibrium_study,
    transport_study,
)
from utils.euler import SOD_LEFT, SOD_RIGHT


def table(study, errors, sizes=None):
    sizes = sizes or [8 * 2 ** i for i in range(len(errors))]
    orders = observed_order(errors, sizes)
    rows = [ConvergenceRow(n=n, error=e, observed_order=p) for n, e, p in zip(sizes, errors, orders)]
    return ConvergenceTable(study=study, reference="test", rows=rows)


def gates(study, errors, **acceptance):
    return {name: passed for name, passed, _, _ in convergence_checks(table(study, errors), AcceptanceConfig(**acceptance))}


class TestObservedOrder:
    def test_second_order(self):
        orders = observed_order([1.0, 0.25, 0.0625], [10, 20, 40])
        assert orders[0] is None
        assert orders[1] == pytest.approx(2.0)
        assert orders[2] == pytest.approx(2.0)

    def test_undefined_entries(self):
        assert observed_order([1.0, 0.0, 0.5], [1, 2, 4])[1:] == [None, None]
        assert observed_order([1.0, 0.5], [4, 4]) == [None, None]


class TestGates:
    def test_equilibrium_drop(self):
        assert gates("spectral-equilibrium", [1e-2, 1e-4, 1e-7]) == {
            "equilibrium_residual_decreasing": True,
            "equilibrium_residual_drop": True,
        }
        assert not gates("spectral-equilibrium", [1e-2, 1e-3])["equilibrium_residual_drop"]

    def test_self_convergence_order_must_grow(self):
        assert gates("spectral-self", [1e-1, 1e-2, 1e-5])["observed_order_increases"]
        assert not gates("spectral-self", [1e-1, 1e-3, 1e-4])["observed_order_increases"]

    def test_oracle_tolerance(self):
        assert gates("oracle-agreement", [0.2, 0.04])["oracle_discrepancy_finest"]
        assert not gates("oracle-agreement", [0.2, 0.1])["oracle_discrepancy_finest"]

    def test_transport_first_order(self):
        assert gates("transport", [0.08, 0.04, 0.02])["upwind_first_order"]
        assert not gates("transport", [0.08, 0.02, 0.005])["upwind_first_order"]

    def test_dvm_study_has_no_gate(self):
        assert gates("dvm-vs-spectral", [0.5, 0.4]) == {}


class TestStudies:
    def test_transport_is_first_order(self):
        result = transport_study([100, 200, 400], grid_n=8, half_width=4.0, t_final=0.1)
        errors = [row.error for row in result.rows]
        assert all(b < a for a, b in zip(errors, errors[1:]))
        assert result.rows[-1].observed_order == pytest.approx(1.0, abs=0.25)

    def test_euler_riemann_error_decreases(self):
        result = euler_riemann_study([50, 100, 200], SOD_LEFT, SOD_RIGHT, 0.1)
        errors = [row.error for row in result.rows]
        assert all(b < a for a, b in zip(errors, errors[1:]))
        assert 0.3 < result.rows[-1].observed_order < 1.2

    def test_spectral_equilibrium_residual_falls(self):
        result = spectral_equilibrium_study([8, 16], 8.0, KernelConfig(operator=OperatorKind.DIRECT))
        assert result.rows[1].error < result.rows[0].error
        assert result.rows[0].extra["max_f"] == pytest.approx(1.0 / (2.0 * math.pi))

    def test_dvm_vs_spectral_reports_scale(self):
        result = dvm_vs_spectral_study([8, 12], 4.0, KernelConfig(), InitialConfig())
        assert [row.n for row in result.rows] == [8, 12]
        assert all(row.extra["scale"] > 0 for row in result.rows)
        assert all(row.extra["n_classes"] > 0 for row in result.rows)
