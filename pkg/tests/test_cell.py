"""Radial cell problem: closed form, numeric solve, fluxes, effective constant."""

import math

import numpy as np
import pytest

from memostrange.cell import (
    alpha_eps,
    analytic_fluxes,
    boundary_fluxes,
    effective_coefficient,
    solve_cell_radial,
    w_exact,
)
from memostrange.params import ParamError, derive_params, particle_radius
from memostrange.verification import cell_eps_study, cell_mesh_study, fit_order

CASES = [(n, C0, eps) for n in (3, 4) for C0 in (0.5, 1.0, 2.0) for eps in (0.1, 0.05)]


def _params(n, C0):
    return derive_params(n, C0, 1.0, 1.0, 1.0)


def test_w_exact_boundary_values_and_monotonicity():
    p = _params(3, 1.0)
    eps = 0.1
    a = particle_radius(p, eps)
    r = np.linspace(a, eps / 4, 500)
    w = w_exact(r, eps, p)
    assert w[0] == pytest.approx(1.0, abs=1e-14)
    assert w[-1] == pytest.approx(0.0, abs=1e-14)
    assert np.all(np.diff(w) < 0)
    assert np.all((w >= -1e-14) & (w <= 1 + 1e-14))


@pytest.mark.parametrize("n,C0,eps", CASES)
def test_numeric_profile_matches_closed_form(n, C0, eps):
    p = _params(n, C0)
    sol = solve_cell_radial(eps, p, n_points=2000)
    assert sol.w[0] == 1.0 and sol.w[-1] == 0.0
    err = np.max(np.abs(sol.w - w_exact(sol.r, eps, p)))
    assert err <= 1e-6, f"profile error {err:.3e} at n={n} C0={C0} eps={eps}"


def _flux_by_differentiation(r0, eps, p):
    # Richardson-extrapolated central difference of the closed form; the
    # algebraic formula extends smoothly past the endpoints so this is safe
    d = 1e-5 * r0

    def central(step):
        return float(w_exact(r0 + step, eps, p) - w_exact(r0 - step, eps, p)) / (2 * step)

    return (4 * central(d / 2) - central(d)) / 3


@pytest.mark.parametrize("n,C0,eps", CASES[:6])
def test_analytic_fluxes_against_numerical_differentiation(n, C0, eps):
    p = _params(n, C0)
    a = particle_radius(p, eps)
    flux_in, flux_out = analytic_fluxes(eps, p)
    assert flux_in == pytest.approx(_flux_by_differentiation(a, eps, p), rel=1e-8)
    assert flux_out == pytest.approx(_flux_by_differentiation(eps / 4, eps, p), rel=1e-8)
    assert flux_in < 0 and flux_out < 0  # w decreases outward on both shells


@pytest.mark.parametrize("n,C0,eps", CASES)
def test_numeric_fluxes_match_analytic(n, C0, eps):
    p = _params(n, C0)
    sol = solve_cell_radial(eps, p, n_points=2000)
    flux_in, flux_out = boundary_fluxes(sol)
    ref_in, ref_out = analytic_fluxes(eps, p)
    assert abs(flux_in - ref_in) / abs(ref_in) <= 1e-4
    assert abs(flux_out - ref_out) / abs(ref_out) <= 1e-4


@pytest.mark.parametrize("n,C0", [(3, 1.0), (4, 0.5), (5, 0.5)])
def test_mesh_refinement_order_two(n, C0):
    report = cell_mesh_study(0.1, _params(n, C0), levels=4, base_points=125)
    assert abs(report.fitted_order - 2.0) <= 0.2, report.errors


def test_effective_coefficient_identity_and_limit():
    for n, C0, eps in CASES:
        p = _params(n, C0)
        eff = effective_coefficient(eps, p)
        defect = abs(eff * (1 - alpha_eps(p, eps)) - p.A_strange) / p.A_strange
        assert defect <= 1e-12
    # canonical limit value
    p = _params(3, 1.0)
    assert p.A_strange == pytest.approx(4 * math.pi, rel=1e-12)


def test_effective_coefficient_second_order_in_eps():
    report = cell_eps_study(_params(3, 1.0))
    assert report.passed
    assert abs(report.fitted_order - 2.0) <= 0.1
    assert max(report.details["identity_defects"]) <= 1e-12


def test_effective_coefficient_approaches_constant_from_above():
    p = _params(3, 1.0)
    effs = [effective_coefficient(eps, p) for eps in (0.1, 0.05, 0.025)]
    assert all(e > p.A_strange for e in effs)
    assert effs[0] > effs[1] > effs[2]


def test_solver_rejects_degenerate_geometry():
    p = _params(3, 1.0)
    with pytest.raises(ParamError, match="geometry"):
        solve_cell_radial(3.0, p)  # a_eps = 27 overwhelms eps/4
    with pytest.raises(ValueError, match="n_points"):
        solve_cell_radial(0.1, p, n_points=3)


def test_fit_order_recovers_synthetic_slope():
    h = np.array([0.1, 0.05, 0.025, 0.0125])
    assert fit_order(h, 3.0 * h**2) == pytest.approx(2.0, abs=1e-12)
    assert fit_order(h, 0.7 * h**1.5) == pytest.approx(1.5, abs=1e-12)
    with pytest.raises(ValueError):
        fit_order([0.1], [1.0])
