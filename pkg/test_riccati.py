#!/usr/bin/env python3
"""
Tests for the reversionary Riccati system, its closed form and the eps -> 0 limits
"""
import os
import sys

import mpmath
import numpy as np
import pytest

sys.path.append(os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

from core import ParameterError, PiecewiseFunctional, ReversionaryParams, days_to_years, make_finite_dim_functional
from riccati import (
    Regime,
    explicit_phi_psi,
    explicit_terms,
    limit_functions,
    limit_psi0,
    riccati_coeffs,
    riccati_roots,
    solve_riccati,
)

BASE = dict(v0=0.3, theta=0.3, xi=0.8, rho=-0.7)
EPS_DAYS = (21.0, 1.0, 1e-2, 1e-5)
HURSTS = (0.1, -0.5, -0.9)


def make_params(eps, H, **overrides):
    values = dict(BASE, eps=eps, H=H)
    values.update(overrides)
    return ReversionaryParams(**values)


@pytest.mark.parametrize("H", HURSTS)
@pytest.mark.parametrize("eps_days", EPS_DAYS)
def test_solver_matches_closed_form(eps_days, H):
    params = make_params(days_to_years(eps_days), H)
    T = 1.0
    fg = PiecewiseFunctional.constant(1j, 100j, T)
    sol = solve_riccati(params, fg, T, n_steps=2 ** 14)

    scale_psi = max(1.0, float(np.max(np.abs(sol.psi))))
    for s, psi, phi in zip(sol.grid[1:], sol.psi[1:], sol.phi[1:]):
        phi_ref, psi_ref = explicit_phi_psi(1.0, 100.0, params, s)
        assert abs(psi - psi_ref) <= 1e-8 * scale_psi
        assert abs(phi - phi_ref) <= 1e-8 * max(1.0, abs(phi_ref))


@pytest.mark.parametrize("eps_days", (21.0, 1.0, 1e-2))
def test_exponential_integrator_refines(eps_days):
    params = make_params(days_to_years(eps_days), -0.5)
    fg = PiecewiseFunctional.constant(1j, 100j, 1.0)
    phi_ref, psi_ref = explicit_phi_psi(1.0, 100.0, params, 1.0)
    errors = []
    for n in (2 ** 13, 2 ** 14):
        sol = solve_riccati(params, fg, 1.0, n)
        errors.append(abs(sol.psi[-1] - psi_ref) + abs(sol.phi[-1] - phi_ref))
    assert errors[1] <= max(errors[0] / 2.0, 1e-10 * max(1.0, abs(phi_ref)))
    assert errors[1] <= 1e-8 * max(1.0, abs(phi_ref))


def test_methods_agree_on_piecewise_functional():
    fg = make_finite_dim_functional([0.3, 0.55, 1.0], [(4.0, -3.0), (-2.0, 20.0), (1.0, 1.0)], 1.0)
    for eps_days, H in ((21.0, 0.1), (1e-2, -0.5), (1e-5, -0.9)):
        params = make_params(days_to_years(eps_days), H)
        stepped = solve_riccati(params, fg, 1.0, 256)
        exact = solve_riccati(params, fg, 1.0, 256, method="exact")
        assert np.allclose(stepped.psi, exact.psi, rtol=1e-10, atol=1e-12)
        assert np.allclose(stepped.phi, exact.phi, rtol=1e-10, atol=1e-12)


def test_initial_values_are_zero():
    params = make_params(0.05, 0.1)
    sol = solve_riccati(params, PiecewiseFunctional.constant(2j, -1j, 1.0), 1.0, 8)
    assert sol.psi[0] == 0 and sol.phi[0] == 0


def test_random_functionals_respect_sign_and_bound():
    rng = np.random.default_rng(7)
    T = 1.0
    for _ in range(200):
        d = int(rng.integers(1, 5))
        times = np.sort(rng.uniform(0.05, T, size=d))
        if np.any(np.diff(times) < 1e-3):
            continue
        coeffs = [tuple(pair) for pair in rng.uniform(-5.0, 5.0, size=(d, 2))]
        fg = make_finite_dim_functional(times, coeffs, T)
        params = make_params(float(10 ** rng.uniform(-3, 0)), float(rng.uniform(-0.9, 0.4)))
        sol = solve_riccati(params, fg, T, n_steps=64)

        assert np.all(sol.psi.real <= 1e-9 * np.maximum(1.0, np.abs(sol.psi)))
        assert np.all(sol.phi.real <= 1e-9 * np.maximum(1.0, np.abs(sol.phi)))

        C = float(np.max(np.abs(fg.h_values)))
        bound = C * params.eps ** (params.H + 0.5) * -np.expm1(-sol.grid / params.eps)
        assert np.all(np.abs(sol.psi) <= bound * (1.0 + 1e-8) + 1e-12)


def test_perturbed_initial_value_stays_close():
    params = make_params(0.05, 0.1)
    fg = make_finite_dim_functional([0.4, 1.0], [(2.0, 3.0), (-1.0, 0.5)], 1.0)
    base = solve_riccati(params, fg, 1.0, 128)
    perturbed = solve_riccati(params, fg, 1.0, 128, psi0=-1e-12)
    assert np.max(np.abs(base.psi - perturbed.psi)) < 1e-9
    assert np.max(np.abs(base.phi - perturbed.phi)) < 1e-9


@pytest.mark.parametrize("H", HURSTS)
def test_scaled_psi_vanishes_as_eps_shrinks(H):
    fg = PiecewiseFunctional.constant(1j, 1j, 1.0)
    scaled = []
    for k in range(1, 11):
        eps = 2.0 ** -k
        sol = solve_riccati(make_params(eps, H), fg, 1.0, 64)
        scaled.append(eps ** (0.5 - H) * np.max(np.abs(sol.psi)))
    assert np.all(np.diff(scaled) < 0)


def test_breakpoints_lie_on_grid():
    fg = make_finite_dim_functional([1.0 / 3.0, 1.0], [(1.0, 0.0), (1.0, 1.0)], 1.0)
    sol = solve_riccati(make_params(0.1, 0.0), fg, 1.0, 4)
    assert np.any(np.isclose(sol.grid, 2.0 / 3.0, rtol=0, atol=1e-14))
    assert sol.grid[-1] == 1.0


def test_solver_validation():
    params = make_params(0.1, 0.0)
    fg = PiecewiseFunctional.constant(1j, 1j, 1.0)
    with pytest.raises(ParameterError):
        solve_riccati(params, fg, 1.0, 1)
    with pytest.raises(ParameterError):
        solve_riccati(params, fg, 2.0, 16)
    with pytest.raises(ParameterError):
        solve_riccati(params, fg, 1.0, 16, method="rk4")
    bad = PiecewiseFunctional(np.array([0.0, 1.0]), np.array([0j]), np.array([1.0 + 0j]), purely_imaginary=False)
    with pytest.raises(ParameterError):
        solve_riccati(params, bad, 1.0, 16)


def test_coefficients_satisfy_assumptions():
    fg = make_finite_dim_functional([0.5, 1.0], [(3.0, -2.0), (1.0, 4.0)], 1.0)
    for H in HURSTS:
        assert riccati_coeffs(make_params(0.01, H), fg).satisfies_assumptions()


def test_explicit_terms_against_high_precision():
    params = make_params(1.0 / 252.0, 0.1)
    u, v = 5.0, 100.0
    mpmath.mp.dps = 50
    kappa = mpmath.mpf(params.eps) ** (mpmath.mpf(params.H) + mpmath.mpf("0.5")) * mpmath.mpf(params.xi)
    h = 1j * mpmath.mpf(v) - (mpmath.mpf(u) ** 2 + 1j * mpmath.mpf(u)) / 2
    beta = 1 - 1j * mpmath.mpf(params.rho) * kappa * u
    d = mpmath.sqrt(beta ** 2 - 2 * kappa ** 2 * h)
    g = (beta - d) / (beta + d)

    terms = explicit_terms(u, v, params)
    assert abs(complex(terms.d_term) - complex(d)) <= 1e-12 * abs(complex(d))
    assert abs(complex(terms.g_term) - complex(g)) <= 1e-12 * abs(complex(g))


def test_closed_form_signs_on_grid():
    params = make_params(1.0 / 252.0, 0.1)
    u, v = np.meshgrid(np.linspace(-50, 50, 100), np.linspace(-50, 50, 100))
    phi, psi = explicit_phi_psi(u, v, params, 1.0)
    assert np.all(np.isfinite(phi)) and np.all(np.isfinite(psi))
    assert np.all(psi.real <= 1e-12 * np.maximum(1.0, np.abs(psi)))
    assert np.all(phi.real <= 1e-12 * np.maximum(1.0, np.abs(phi)))


def test_closed_form_reaches_stationary_value():
    params = make_params(0.01, -0.5)
    u, v = 2.0, 3.0
    d = complex(explicit_terms(u, v, params).d_term)
    kappa = params.eps ** (params.H + 0.5) * params.xi
    beta = 1.0 - 1j * params.rho * kappa * u
    stationary = params.eps ** (-params.H - 0.5) / params.xi ** 2 * (beta - d)
    _, psi = explicit_phi_psi(u, v, params, 50.0 * params.eps)
    assert abs(psi - stationary) <= 1e-10 * abs(stationary)


def test_explicit_phi_psi_rejects_negative_time():
    with pytest.raises(ParameterError):
        explicit_phi_psi(1.0, 0.0, make_params(0.1, 0.0), -1.0)


def _p(x, f, g, rho, xi):
    h = g + 0.5 * (f * f - f)
    return 0.5 * xi ** 2 * x * x - (1.0 - rho * xi * f) * x + h


def _q(x, f, g, rho, xi):
    h = g + 0.5 * (f * f - f)
    return 0.5 * xi ** 2 * x * x + rho * xi * f * x + h


def test_limit_psi0_solves_root_equations():
    rho, xi = -0.7, 0.8
    fg = make_finite_dim_functional([0.5, 1.0], [(3.0, 2.0), (-1.0, 0.5)], 1.0)
    for t in (0.1, 0.7):
        f, g = (complex(x) for x in fg.evaluate(t))
        at = limit_psi0(fg, Regime.AT_HALF, rho, xi, t)
        below = limit_psi0(fg, Regime.BELOW_HALF, rho, xi, t)
        assert abs(_p(at, f, g, rho, xi)) < 1e-12 * max(1.0, abs(at) ** 2)
        assert abs(_q(below, f, g, rho, xi)) < 1e-12 * max(1.0, abs(below) ** 2)
        assert below.real <= 0
        assert limit_psi0(fg, Regime.ABOVE_HALF, rho, xi, t) == 0


def test_limit_psi0_of_zero_functional():
    fg = PiecewiseFunctional.constant(0j, 0j, 1.0)
    for regime in Regime:
        assert limit_psi0(fg, regime, -0.7, 0.8, 0.5) == 0


def test_limit_functions_pick_regime_from_hurst():
    fg = PiecewiseFunctional.constant(1j, 1j, 1.0)
    assert limit_functions(fg, make_params(0.1, 0.1), 1.0).regime == Regime.ABOVE_HALF
    assert limit_functions(fg, make_params(0.1, -0.5), 1.0).regime == Regime.AT_HALF
    assert limit_functions(fg, make_params(0.1, -0.9), 1.0).regime == Regime.BELOW_HALF
    above = limit_functions(fg, make_params(0.1, 0.1), 1.0)
    assert above.phi0 == pytest.approx(0.3 * (1j + 0.5 * (-1.0 - 1j)))
    with pytest.raises(ParameterError):
        limit_functions(fg, make_params(0.1, 0.1, rescaled_reversion=False), 1.0)


def test_riccati_roots_of_zero():
    xi = 0.8
    p_roots, q_roots = riccati_roots(0j, 0j, -0.7, xi)
    assert p_roots[0] == pytest.approx(0.0, abs=1e-15)
    assert p_roots[1] == pytest.approx(2.0 / xi ** 2)
    assert q_roots[0] == pytest.approx(0.0, abs=1e-15)
    assert q_roots[1] == pytest.approx(0.0, abs=1e-15)


def test_riccati_roots_have_opposite_signs():
    p_roots, q_roots = riccati_roots(1j, 1j, -0.7, 0.8)
    assert p_roots[0].real < 0 < p_roots[1].real
    assert q_roots[0].real < 0 < q_roots[1].real


def test_riccati_roots_random():
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        f, g = 1j * rng.uniform(-10.0, 10.0), 1j * rng.uniform(-10.0, 10.0)
        rho, xi = rng.uniform(-1.0, 1.0), rng.uniform(0.1, 2.0)
        p_roots, q_roots = riccati_roots(f, g, rho, xi)
        assert p_roots[0].real < 0 < p_roots[1].real
        assert q_roots[0].real < 0 < q_roots[1].real
        h = abs(g + 0.5 * (f * f - f))
        for r in p_roots:
            scale = 1.0 + 0.5 * xi ** 2 * abs(r) ** 2 + abs(1.0 - rho * xi * f) * abs(r) + h
            assert abs(_p(r, f, g, rho, xi)) < 1e-10 * scale
        for r in q_roots:
            scale = 1.0 + 0.5 * xi ** 2 * abs(r) ** 2 + abs(rho * xi * f) * abs(r) + h
            assert abs(_q(r, f, g, rho, xi)) < 1e-10 * scale


def test_solution_frame():
    sol = solve_riccati(make_params(0.1, 0.0), PiecewiseFunctional.constant(1j, 0j, 1.0), 1.0, 4)
    frame = sol.to_frame()
    assert list(frame.columns) == ["s", "re_psi", "im_psi", "re_phi", "im_phi"]
    assert len(frame) == 5


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
