#!/usr/bin/env python3
"""
Tests for the fractional Adams scheme and the rough Heston transform
"""
import os
import sys

import numpy as np
import pytest
from scipy.special import gamma

sys.path.append(os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

from charfn import classical_heston_cf
from core import NonIntegrableKernelError, ParameterError, RoughParams
from model_factory import ModelFactory
from rough import adams_weights, cf_rough, solve_volterra_riccati


def rough_params(H: float) -> RoughParams:
    return RoughParams(H=H, rho=-0.7, xi=0.3, theta=0.02, u0=0.02)


def test_zero_argument_gives_one():
    for H in (0.1, -0.2):
        assert cf_rough(0j, rough_params(H), 1.0, 64) == pytest.approx(1.0, abs=1e-15)
        sol = solve_volterra_riccati(0j, 0j, rough_params(H), 1.0, 16)
        assert np.all(sol.psi == 0)


def test_smooth_case_matches_classical_heston():
    rp = rough_params(0.5)
    u = np.array([-5.0, -1.0, 0.5, 2.0, 5.0])
    cf = cf_rough(1j * u, rp, 1.0, 2 ** 12)
    heston = classical_heston_cf(u, 1.0, rp.p0, rp.u0, kappa=0.0, drift=rp.theta, xi=rp.xi, rho=rp.rho)
    assert np.all(np.abs(cf - heston) < 1e-6)


@pytest.mark.parametrize("H", [0.1, 0.0, -0.05])
def test_rough_cf_is_bounded(H):
    u = np.linspace(-100, 100, 41)
    cf = cf_rough(1j * u, rough_params(H), 1.0, 1024, implicit_corrector=True)
    assert np.all(np.isfinite(cf))
    assert np.all(np.abs(cf) <= 1.0 + 1e-9)


@pytest.mark.parametrize("H", [0.1, -0.05])
def test_volterra_solution_has_nonpositive_real_part(H):
    u = np.linspace(-30, 30, 13)
    for u2 in (0.0, -1.0):
        sol = solve_volterra_riccati(1j * u, u2, rough_params(H), 1.0, 256, implicit_corrector=True)
        assert sol.psi.shape == (257, 13)
        assert np.all(sol.psi[0] == 0)
        assert np.all(sol.psi.real <= 1e-10 * np.maximum(1.0, np.abs(sol.psi)))


@pytest.mark.parametrize("H", [-0.45, -0.05, 0.1, 0.5])
def test_adams_weights_are_nonnegative(H):
    weights = adams_weights(H, 200, 1.0)
    assert np.all(weights.predictor >= 0)
    assert np.all(weights.corrector >= 0)
    assert np.all(weights.first >= 0)
    assert weights.diagonal > 0


def test_predictor_weights_integrate_kernel():
    weights = adams_weights(0.1, 100, 2.0)
    # rectangle weights over all lags integrate t^(alpha-1) exactly on [0, T]
    assert weights.predictor.sum() == pytest.approx(2.0 ** 0.6 / 0.6, rel=1e-12)


@pytest.mark.parametrize("H", [0.1, -0.05])
def test_adams_scheme_convergence_order(H):
    rp = rough_params(H)
    u = np.array([1j, 3j])
    steps = (64, 128, 256)
    finals = [solve_volterra_riccati(u, 0j, rp, 1.0, n, implicit_corrector=True).psi[-1] for n in steps]
    fine = solve_volterra_riccati(u, 0j, rp, 1.0, 4 * steps[-1], implicit_corrector=True).psi[-1]
    errors = [np.max(np.abs(value - fine)) for value in finals]
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders >= min(1.0 + H, 2.0) - 0.2)


def test_gamma_normalized_kernel():
    u = np.array([-3.0, 1.0, 4.0])
    smooth = RoughParams(H=0.5, rho=-0.7, xi=0.3, theta=0.02, u0=0.02)
    normalized = smooth.model_copy(update={"gamma_normalized": True})
    assert np.allclose(cf_rough(1j * u, normalized, 1.0, 256), cf_rough(1j * u, smooth, 1.0, 256), rtol=0, atol=1e-14)

    rp = rough_params(0.1).model_copy(update={"gamma_normalized": True})
    weights = adams_weights(rp.H, 100, 2.0, rp.kernel_scale)
    assert weights.predictor.sum() == pytest.approx(2.0 ** 0.6 / gamma(1.6), rel=1e-12)
    assert rp.kernel_scale == pytest.approx(1.0 / gamma(0.6)) and rp.kernel_scale < 1.0


def test_transform_is_continuous_through_zero_hurst():
    u = np.linspace(-20, 20, 9)
    above = cf_rough(1j * u, rough_params(0.001), 1.0, 512)
    below = cf_rough(1j * u, rough_params(-0.001), 1.0, 512)
    assert np.max(np.abs(above - below)) < 1e-2


def test_laplace_transform_of_integrated_variance():
    value = cf_rough(0j, rough_params(0.1), 1.0, 256, u2=-1.0)
    assert abs(value.imag) < 1e-14
    assert 0.0 < value.real < 1.0


def test_solver_validation():
    rp = rough_params(0.1)
    with pytest.raises(ParameterError):
        solve_volterra_riccati(0.5 + 1j, 0j, rp, 1.0, 64)
    with pytest.raises(ParameterError):
        solve_volterra_riccati(1j, 0.5, rp, 1.0, 64)
    with pytest.raises(ParameterError):
        solve_volterra_riccati(1j, 0j, rp, 1.0, 3)
    with pytest.raises(NonIntegrableKernelError):
        adams_weights(-0.5, 64, 1.0)


def test_rough_model_from_factory():
    ModelFactory.clear_instances()
    rp = rough_params(0.1)
    model = ModelFactory.get_model("rough", rp, n_steps=128)
    assert ModelFactory.get_model("rough", rp, n_steps=128) is model
    assert ModelFactory.get_model("rough", rp, n_steps=256) is not model
    assert model.cf(0.0, 0.5) == pytest.approx(1.0)
    assert len(ModelFactory.list_instances()) == 2
    ModelFactory.clear_instances()
    assert ModelFactory.list_instances() == {}


def test_factory_cache_is_bounded(monkeypatch):
    ModelFactory.clear_instances()
    monkeypatch.setattr(ModelFactory, "max_instances", 2)
    first, second = (ModelFactory.get_model("rough", rough_params(H), n_steps=64) for H in (0.1, 0.2))
    assert ModelFactory.get_model("rough", rough_params(0.1), n_steps=64) is first
    ModelFactory.get_model("rough", rough_params(0.3), n_steps=64)
    assert len(ModelFactory.list_instances()) == 2
    assert ModelFactory.get_model("rough", rough_params(0.1), n_steps=64) is first
    assert ModelFactory.get_model("rough", rough_params(0.2), n_steps=64) is not second
    ModelFactory.clear_instances()


def test_solution_frame():
    sol = solve_volterra_riccati(np.array([1j, 2j]), 0j, rough_params(0.1), 1.0, 8)
    frame = sol.to_frame(column=1)
    assert list(frame.columns) == ["s", "re_psi", "im_psi"]
    assert len(frame) == 9


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
