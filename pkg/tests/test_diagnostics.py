"""
Diagnostics Tests

Error norms, the adapted negative norm, error profiles and convergence
table arithmetic and report files.
"""

import csv
import json
import math

import numpy as np
import pytest

from src.diagnostics.errors import (
    adapted_negative_norm,
    error_norms,
    error_quadrature_degree,
    relative_negative_norm_error,
    sample_error_profile,
)
from src.diagnostics.tables import (
    CSV_COLUMNS,
    convergence_table,
    format_table,
    group_reports,
    order_from_ratio,
    read_report,
    write_report,
)
from src.fem.assembly import build_space, interpolate
from src.fem.mesh import generate_interval_mesh, generate_square_mesh
from src.fem.reference_elements import build_reference_element
from src.models.element import ElementFamily, ElementShape
from src.models.fields import FieldVector
from src.models.reports import ErrorReport
from src.solvers.operators import lh_matvec, mass_inner, remove_mean


def _report(N, e0, eE, problem="periodic1d", p=1, q=1):
    return ErrorReport(
        problem=problem, p=p, q=q, N=N, n_dof=2 * N, n_dof_high=4 * N,
        n_steps=10 * N, dt=0.1 / N, e0=e0, eE=eE, wall_time=0.5,
    )


def _gll_space(N, p):
    element = build_reference_element(ElementShape.INTERVAL, ElementFamily.SPECTRAL_GLL, p)
    return build_space(generate_interval_mesh(N), element)


def _interpolated_exact(problem, space, T):
    u = interpolate(space, lambda x, hint: problem.u_exact(x, T, 0))
    v = interpolate(space, lambda x, hint: problem.u_exact(x, T, 1))
    return u, v


class TestErrorNorms:
    """Tests for the relative L2 and energy errors."""

    def test_quadrature_degree(self):
        """Errors are integrated with degree 4p rules."""
        assert [error_quadrature_degree(p) for p in (1, 2, 3)] == [4, 8, 12]

    def test_zero_fields_have_unit_error(self, periodic_problem):
        """A zero approximation is 100% wrong in both norms."""
        space = _gll_space(5, 2)
        zero = FieldVector(values=np.zeros(space.n_dof), space=space, time_stamp=0.3)
        e0, eE = error_norms(zero, zero, periodic_problem, 0.3, error_quadrature_degree(2))
        assert e0 == pytest.approx(1.0)
        assert eE == pytest.approx(1.0)

    def test_interpolant_converges(self, periodic_problem):
        """Interpolating the exact solution converges at orders p + 1 and p."""
        T = 0.3
        errors = []
        for N in (10, 20):
            space = _gll_space(N, 3)
            u, v = _interpolated_exact(periodic_problem, space, T)
            errors.append(error_norms(u, v, periodic_problem, T, error_quadrature_degree(3)))
        (e0_coarse, eE_coarse), (e0_fine, eE_fine) = errors
        assert e0_coarse < 1e-2
        assert e0_coarse / e0_fine > 12.0
        assert eE_coarse / eE_fine > 6.0

    def test_square_interpolant_is_accurate(self, square_problem):
        """The 2D path evaluates gradients through the element maps."""
        element = build_reference_element(ElementShape.TRIANGLE, ElementFamily.LUMPED_TRIANGLE, 3)
        space = build_space(generate_square_mesh(2), element)
        u, v = _interpolated_exact(square_problem, space, 0.2)
        e0, eE = error_norms(u, v, square_problem, 0.2, error_quadrature_degree(3))
        assert e0 < 0.05
        assert eE < 0.2


class TestNegativeNorm:
    """Tests for the adapted negative-order norm."""

    def test_zero_field(self, interval_ops):
        """The norm of zero is zero."""
        zero = FieldVector(values=np.zeros(interval_ops.n_dof), space=interval_ops.space, time_stamp=0.0)
        assert adapted_negative_norm(zero, 2, interval_ops) == 0.0

    def test_order_must_be_positive(self, interval_ops):
        """m = 0 is not a negative norm."""
        zero = FieldVector(values=np.zeros(interval_ops.n_dof), space=interval_ops.space, time_stamp=0.0)
        with pytest.raises(ValueError):
            adapted_negative_norm(zero, 0, interval_ops)

    def test_inverts_one_application(self, interval_ops):
        """||L^-1 L w||_0 = ||w||_0 and the odd order adds the energy."""
        w = remove_mean(interval_ops, np.random.default_rng(4).standard_normal(interval_ops.n_dof))
        e = FieldVector(values=lh_matvec(interval_ops, w), space=interval_ops.space, time_stamp=0.0)
        mass = mass_inner(interval_ops, w, w)
        energy = float(w @ (interval_ops.stiffness @ w))
        assert adapted_negative_norm(e, 2, interval_ops) == pytest.approx(math.sqrt(mass), rel=1e-7)
        assert adapted_negative_norm(e, 1, interval_ops) == pytest.approx(math.sqrt(mass + energy), rel=1e-7)

    def test_relative_error_of_interpolant_is_zero(self, interval_ops, periodic_problem):
        """The interpolant of the exact solution has no negative-norm error."""
        u = interpolate(interval_ops.space, lambda x, hint: periodic_problem.u_exact(x, 0.3, 0), 0.3)
        assert relative_negative_norm_error(u, periodic_problem, 0.3, 2, interval_ops) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_relative_error_of_zero_field_is_one(self, interval_ops, periodic_problem):
        """A zero approximation has relative error one in every order."""
        zero = FieldVector(values=np.zeros(interval_ops.n_dof), space=interval_ops.space, time_stamp=0.3)
        for m in (1, 2, 3):
            assert relative_negative_norm_error(zero, periodic_problem, 0.3, m, interval_ops) == pytest.approx(1.0)


class TestErrorProfile:
    """Tests for the sampled error profile."""

    def test_interval_rows(self, periodic_problem, tmp_path):
        """One row per sample point, with an x column first."""
        space = _gll_space(5, 2)
        u, _ = _interpolated_exact(periodic_problem, space, 0.0)
        path = tmp_path / "profile.csv"
        rows = sample_error_profile(periodic_problem, 0.0, u, u, path, points_per_element=8)
        assert rows == space.mesh.n_elements * 9
        lines = path.read_text().splitlines()
        assert lines[0] == "x,err_unprocessed,err_processed"
        assert len(lines) == rows + 1

    def test_triangle_rows(self, square_problem, tmp_path):
        """Triangles are sampled on a barycentric lattice."""
        element = build_reference_element(ElementShape.TRIANGLE, ElementFamily.LUMPED_TRIANGLE, 1)
        space = build_space(generate_square_mesh(1), element)
        u, _ = _interpolated_exact(square_problem, space, 0.0)
        rows = sample_error_profile(square_problem, 0.0, u, u, tmp_path / "p.csv", points_per_element=2)
        assert rows == 32 * 6


class TestConvergenceTables:
    """Tests for ratios, orders and report files."""

    def test_order_from_ratio(self):
        """Orders are base-2 logarithms for halved meshes."""
        assert order_from_ratio(4.0) == pytest.approx(2.0)
        assert order_from_ratio(8.0) == pytest.approx(3.0)
        assert order_from_ratio(9.0, h_ratio=3.0) == pytest.approx(2.0)

    def test_ratios_and_orders(self):
        """Each row compares against its predecessor."""
        table = convergence_table([
            _report(20, 1.0e-1, 1.6e-1), _report(40, 2.5e-2, 4.0e-2), _report(80, 6.25e-3, 1.0e-2),
        ])
        first, second, third = table.rows
        assert first.ratio_eE is None and first.order_eE is None
        assert second.ratio_eE == pytest.approx(4.0)
        assert third.order_eE == pytest.approx(2.0)
        assert third.order_e0 == pytest.approx(2.0)
        assert table.final_order() == pytest.approx(2.0)

    def test_negative_norm_orders(self):
        """Negative-norm orders appear only when both reports carry the norm."""
        reports = [
            _report(5, 1e-1, 1e-1).model_copy(update={"e_neg": 1.6e-2, "negative_norm_order": 2}),
            _report(10, 5e-2, 5e-2).model_copy(update={"e_neg": 1.0e-3, "negative_norm_order": 2}),
            _report(20, 2.5e-2, 2.5e-2),
        ]
        table = convergence_table(reports)
        assert table.rows[1].order_e_neg == pytest.approx(4.0)
        assert table.rows[2].order_e_neg is None
        assert table.final_order("e_neg") == pytest.approx(4.0)

    def test_zero_error_has_no_ratio(self):
        """A vanishing error leaves the ratio blank."""
        table = convergence_table([_report(5, 1e-3, 1e-3), _report(10, 0.0, 0.0)])
        assert table.rows[1].ratio_eE is None
        assert table.final_order() is None

    def test_mixed_blocks_rejected(self):
        """A table covers a single (problem, p, q) block."""
        with pytest.raises(ValueError):
            convergence_table([_report(20, 0.1, 0.1), _report(40, 0.05, 0.05, q=2)])

    def test_refinement_must_increase(self):
        """Rows are ordered from coarse to fine."""
        with pytest.raises(ValueError):
            convergence_table([_report(40, 0.1, 0.1), _report(20, 0.05, 0.05)])

    def test_group_reports(self):
        """Mixed reports split into sorted blocks."""
        tables = group_reports([
            _report(40, 0.05, 0.05), _report(20, 0.1, 0.1), _report(20, 0.2, 0.2, q=0),
        ])
        assert len(tables) == 2
        assert [r.N for r in tables[0].reports] == [20, 40]

    def test_error_report_rejects_nan(self):
        """Errors must be finite."""
        with pytest.raises(ValueError):
            _report(20, float("nan"), 0.1)

    def test_csv_report(self, tmp_path):
        """CSV files carry the fixed column set and one row per run."""
        table = convergence_table([_report(20, 0.1, 0.16), _report(40, 0.025, 0.04)])
        path = write_report(table, "csv", tmp_path / "out" / "report.csv")
        with path.open() as handle:
            rows = list(csv.reader(handle))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 3
        record = dict(zip(CSV_COLUMNS, rows[2]))
        assert record["problem"] == "periodic1d"
        assert record["N"] == "40"
        assert record["level"] == ""
        assert float(record["ratio_eE"]) == pytest.approx(4.0)

    def test_json_report(self, tmp_path):
        """JSON reports load back into tables."""
        table = convergence_table([_report(20, 0.1, 0.16), _report(40, 0.025, 0.04)])
        path = write_report([table], "json", tmp_path / "report.json")
        assert "tables" in json.loads(path.read_text())
        loaded = read_report(path)
        assert loaded[0].rows[1].order_e0 == pytest.approx(2.0)
        assert loaded[0].reports[1].n_steps == 400

    def test_unknown_format(self, tmp_path):
        """Only csv and json are written."""
        with pytest.raises(ValueError):
            write_report(convergence_table([_report(20, 0.1, 0.1)]), "xlsx", tmp_path / "r.xlsx")

    def test_format_table(self):
        """The text rendering has a header and one line per row."""
        text = format_table(convergence_table([_report(20, 0.1, 0.16), _report(40, 0.025, 0.04)]))
        lines = text.splitlines()
        assert "order" in lines[0]
        assert len(lines) == 3
        assert "2.00" in lines[2]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
