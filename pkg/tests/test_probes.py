"""Interior inequality probes: ratios, fitted constants, and geometric
preconditions."""

import math

import numpy as np
import pytest

from qscope.forward import k1_problem, k2_problem, solve_forward
from qscope.grid import Grid, ScalarField, TensorField
from qscope.probes import (ProbeReport, alpha_beta, caccioppoli_ratio,
                           carleman_ratio, delta_star_probe, doubling_ratio,
                           interior_lattice, muckenhoupt, negpower_mass,
                           reverse_holder, three_spheres_fit,
                           ucp_lowerbound_fit, write_probe_csv)


@pytest.fixture(scope="module")
def k2_solution():
    p = k2_problem(129)
    u, rep = solve_forward(p)
    assert rep.converged
    return p, u


def test_caccioppoli_constant_field_has_zero_lhs():
    g = Grid(65, 65)
    lhs, rhs = caccioppoli_ratio(ScalarField.constant(g, 3.0), (0.5, 0.5), 0.1)
    assert lhs <= 1e-20 and rhs > 0.0


def test_caccioppoli_radius_precondition():
    g = Grid(33, 33)
    u = ScalarField.constant(g, 1.0)
    with pytest.raises(ValueError):
        caccioppoli_ratio(u, (0.5, 0.5), 0.3)  # 2r exceeds dist to boundary


def test_caccioppoli_ratio_scales_like_radius_squared():
    g = Grid(129, 129)
    u = ScalarField.from_function(g, lambda X, Y: np.cos(X) * np.cos(Y))
    ratios = {}
    for r in (0.05, 0.1, 0.15):
        lhs, rhs = caccioppoli_ratio(u, (0.5, 0.5), r)
        ratios[r] = lhs / rhs
    # lhs grows like r^2 * |grad u|^2, rhs is r-independent for smooth u
    assert ratios[0.1] / ratios[0.05] == pytest.approx(4.0, rel=0.15)
    assert ratios[0.15] / ratios[0.05] == pytest.approx(9.0, rel=0.15)


def test_caccioppoli_linear_field_closed_form():
    g = Grid(257, 257)
    u = ScalarField.from_function(g, lambda X, Y: X)
    r = 0.1
    lhs, rhs = caccioppoli_ratio(u, (0.5, 0.5), r)
    # lhs = |B_r|; rhs = r^-2 * int_{B_2r} x^2 = r^-2 (pi (2r)^2/4 (4 x0^2 + (2r)^2))
    assert lhs == pytest.approx(math.pi * r**2, rel=2e-2)
    exact_rhs = math.pi * (2 * r) ** 2 * (0.25 + (2 * r) ** 2 / 4.0) / r**2
    assert rhs == pytest.approx(exact_rhs, rel=2e-2)


def test_doubling_constant_field_gives_area_ratio():
    g = Grid(129, 129)
    ratio = doubling_ratio(ScalarField.constant(g, 1.0), (0.5, 0.5), 0.1)
    assert ratio == pytest.approx(4.0, rel=5e-2)


def test_doubling_bounded_over_radii(k2_solution):
    _, u = k2_solution
    ratios = [doubling_ratio(u, (0.5, 0.5), r) for r in (0.025, 0.05, 0.1, 0.2)]
    assert max(ratios) <= 50.0


def test_doubling_division_guard():
    g = Grid(65, 65)
    v = np.zeros(g.shape)
    X, Y = g.coords()
    v[(X - 0.5) ** 2 + (Y - 0.5) ** 2 > 0.04] = 1.0  # vanishes on the inner ball
    assert doubling_ratio(ScalarField(g, v), (0.5, 0.5), 0.1) == math.inf


def test_reverse_holder_equality_for_constants():
    g = Grid(65, 65)
    lhs, rhs = reverse_holder(ScalarField.constant(g, 2.0), (0.5, 0.5), 0.1, 1.0)
    assert lhs == pytest.approx(4.0, rel=1e-12)
    assert rhs == pytest.approx(4.0, rel=1e-12)


def test_reverse_holder_constant_stable_under_radius_halving():
    p = k1_problem(129)
    u, _ = solve_forward(p)
    c1 = np.divide(*reverse_holder(u, (0.5, 0.5), 0.1, 1.0))
    c2 = np.divide(*reverse_holder(u, (0.5, 0.5), 0.05, 1.0))
    assert 0.5 <= c1 / c2 <= 2.0


def test_muckenhoupt_product_is_one_for_constants():
    g = Grid(65, 65)
    lhs, rhs, excluded = muckenhoupt(ScalarField.constant(g, 3.0), (0.5, 0.5), 0.1, 3.0)
    assert lhs / rhs == pytest.approx(1.0, rel=1e-12)
    assert excluded == 0


def test_muckenhoupt_finite_across_nodal_line(k2_solution):
    _, u = k2_solution
    lhs, rhs, excluded = muckenhoupt(u, (math.pi / 4, 0.5), 0.1, 3.0)
    assert rhs > 0.0 and math.isfinite(lhs / rhs)
    assert excluded < 5


def test_muckenhoupt_kappa_precondition(k2_solution):
    _, u = k2_solution
    with pytest.raises(ValueError):
        muckenhoupt(u, (0.5, 0.5), 0.1, 1.0)


def test_negpower_mass_finite_for_simple_zero(k2_solution):
    _, u = k2_solution
    mass, excluded = negpower_mass(u, (math.pi / 4, 0.5), 0.1, 0.25)
    assert math.isfinite(mass) and mass > 0.0


def test_three_spheres_constant_field_closed_form():
    g = Grid(129, 129)
    I1, I2, I3, s = three_spheres_fit(ScalarField.constant(g, 1.0), (0.5, 0.5), 0.1)
    # ball H1 norms of a constant are sqrt(area): I_k proportional to k
    assert I2 / I1 == pytest.approx(2.0, rel=2e-2)
    assert I3 / I1 == pytest.approx(3.0, rel=2e-2)
    assert s == pytest.approx(math.log(1.5) / math.log(3.0), rel=2e-2)


def test_three_spheres_harmonic_exponent_in_unit_interval():
    g = Grid(129, 129)
    u = ScalarField.from_function(g, lambda X, Y: X**2 - Y**2)
    *_, s = three_spheres_fit(u, (0.5, 0.5), 0.1)
    assert 0.0 < s < 1.0


def test_three_spheres_lattice_sweep(k2_solution):
    _, u = k2_solution
    svals = [three_spheres_fit(u, c, 0.04)[3] for c in interior_lattice(5)]
    assert len(svals) == 25
    assert all(0.0 < s < 1.0 for s in svals)


def test_three_spheres_geometry_precondition():
    g = Grid(33, 33)
    with pytest.raises(ValueError):
        three_spheres_fit(ScalarField.constant(g, 1.0), (0.9, 0.5), 0.1)


def test_ucp_fit_positive_solution():
    p = k1_problem(65)
    u, _ = solve_forward(p)
    samples = [(c, r) for c in interior_lattice(3) for r in (0.05, 0.1)]
    c, slacks = ucp_lowerbound_fit(u, samples)
    assert math.isfinite(c) and c >= 0.0
    assert all(s >= 0.0 for s in slacks)


def test_ucp_fitted_constant_decreases_for_larger_solutions():
    p = k1_problem(65)
    u, _ = solve_forward(p)
    big = ScalarField(u.grid, 10.0 * u.values)
    samples = [((0.5, 0.5), 0.05)]
    c_small, _ = ucp_lowerbound_fit(u, samples)
    c_big, _ = ucp_lowerbound_fit(big, samples)
    assert c_big <= c_small


def test_ucp_slack_ordering_invariant_under_scaling():
    p = k2_problem(65)
    u, _ = solve_forward(p)
    samples = [(c, 0.05) for c in interior_lattice(3)]
    samples.append(((math.pi / 4, math.pi / 4), 0.05))
    _, s1 = ucp_lowerbound_fit(u, samples)
    _, s2 = ucp_lowerbound_fit(ScalarField(u.grid, 2.0 * u.values), samples)
    assert np.argmin(s1) == np.argmin(s2)


def test_ucp_rejects_vanishing_function():
    g = Grid(33, 33)
    with pytest.raises(ValueError):
        ucp_lowerbound_fit(ScalarField.constant(g, 0.0), [((0.5, 0.5), 0.1)])


def test_alpha_beta_values_and_limits():
    a, b = alpha_beta(1.0)
    assert a == pytest.approx(1.0 - math.exp(-2.0), rel=1e-12)
    assert b == pytest.approx(2.0 * (math.exp(-2.0) - math.exp(-2.5)), rel=1e-12)
    a_inf, b_inf = alpha_beta(50.0)
    assert a_inf == pytest.approx(1.0, abs=1e-12)
    assert b_inf == pytest.approx(0.0, abs=1e-12)
    for lam in (0.1, 1.0, 5.0):
        a, b = alpha_beta(lam)
        assert a > 0.0 and b > 0.0


def _interior_bump(X, Y):
    # C-infinity bump supported in the ball of radius 0.4 around the center;
    # compact interior support keeps the weighted integrals resolved as the
    # Carleman weight concentrates with growing tau
    r2 = ((X - 0.5) ** 2 + (Y - 0.5) ** 2) / 0.16
    out = np.zeros_like(X)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


@pytest.fixture(scope="module")
def carleman_setup():
    g = Grid(129, 129)
    v = ScalarField.from_function(g, _interior_bump)
    return g, v, TensorField.identity(g)


def test_carleman_ratio_bounded_and_monotone_in_tau(carleman_setup):
    g, v, A = carleman_setup
    psi = ScalarField.from_function(g, lambda X, Y: X)
    ratios = []
    for tau in (4.0, 8.0, 16.0, 32.0):
        lhs, rhs, flagged = carleman_ratio(v, A, psi, 2.0, tau)
        assert math.isfinite(lhs) and math.isfinite(rhs) and rhs > 0.0
        ratios.append(lhs / rhs)
    assert all(b <= a for a, b in zip(ratios, ratios[1:]))
    assert max(ratios) <= 1.0


def test_carleman_quadratic_weight_without_critical_point(carleman_setup):
    g, v, A = carleman_setup
    psi = ScalarField.from_function(g, lambda X, Y: -((X + 2.0) ** 2 + (Y + 2.0) ** 2))
    lhs, rhs, _ = carleman_ratio(v, A, psi, 1.0, 8.0)
    assert math.isfinite(lhs / rhs)


def test_carleman_rejects_weight_with_critical_point(carleman_setup):
    g, v, A = carleman_setup
    psi = ScalarField.from_function(g, lambda X, Y: (X - 0.5) ** 2 + (Y - 0.5) ** 2)
    with pytest.raises(ValueError):
        carleman_ratio(v, A, psi, 1.0, 4.0)


def test_carleman_overflow_is_shifted_and_flagged(carleman_setup):
    g, v, A = carleman_setup
    psi = ScalarField.from_function(g, lambda X, Y: X)
    lhs, rhs, flagged = carleman_ratio(v, A, psi, 2.0, 100.0)
    assert flagged
    assert math.isfinite(lhs) and math.isfinite(rhs)


def test_delta_star_positive_for_separated_balls(k2_solution):
    _, u = k2_solution
    assert delta_star_probe(u, 0.3) > 0.0


def test_delta_star_lower_bound_for_bounded_away_field():
    g = Grid(65, 65)
    u = ScalarField.constant(g, 0.7)
    assert delta_star_probe(u, 0.2) >= 0.49 - 1e-12


def test_probe_report_and_csv(tmp_path):
    rep = ProbeReport("demo")
    rep.add({"center_x": 0.5, "center_y": 0.5, "r": 0.1, "delta": 1.0}, 2.0, 4.0)
    rep.add({"center_x": 0.25, "center_y": 0.5, "r": 0.1, "delta": 1.0}, 3.0, 4.0)
    assert rep.fitted_constant == pytest.approx(0.75)
    assert rep.passed
    path = tmp_path / "probes_demo.csv"
    write_probe_csv(rep, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "center_x,center_y,r,delta,lhs,rhs,ratio"
    assert len(lines) == 3
