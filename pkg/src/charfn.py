"""
Characteristic functions: reversionary Heston (explicit and functional), the NIG-IG Levy
exponent, the eps -> 0 limit laws and the classical Heston transform.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from core import (
    ParameterError,
    PiecewiseFunctional,
    ReversionaryParams,
    UnsupportedCorrelationError,
    days_to_years,
    principal_sqrt,
)
from riccati import Regime, explicit_phi_psi, solve_riccati

# default H used for each regime when building convergence tables
REGIME_DEFAULT_H = {
    Regime.ABOVE_HALF: 0.1,
    Regime.AT_HALF: -0.5,
    Regime.BELOW_HALF: -0.9,
}


@dataclass(frozen=True)
class FourierArg:
    """Fourier arguments (u, v); numpy arrays broadcast"""
    u: Union[float, np.ndarray]
    v: Union[float, np.ndarray] = 0.0

    def __post_init__(self):
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise ParameterError("Fourier arguments must be finite")


@dataclass(frozen=True)
class NigIgParams:
    alpha: float
    beta: float
    delta: float
    mu: float
    lam: float

    def __post_init__(self):
        if self.alpha < abs(self.beta) or self.delta <= 0 or self.lam <= 0:
            raise ParameterError(
                f"NIG-IG parameters need alpha >= |beta|, delta > 0, lambda > 0 "
                f"(got alpha={self.alpha}, beta={self.beta}, delta={self.delta}, lambda={self.lam})"
            )

    @property
    def gamma(self) -> float:
        """sqrt(alpha^2 - beta^2); zero for the Levy-subordinated case"""
        return float(np.sqrt(max(self.alpha ** 2 - self.beta ** 2, 0.0)))


@dataclass(frozen=True)
class GaussianLimitParams:
    sigma2: float
    mu: float

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ParameterError("sigma2 must be positive")


LimitLaw = Union[NigIgParams, GaussianLimitParams]


def nigig_exponent(arg: FourierArg, p: LimitLaw):
    """Levy exponent eta(u, v) of the NIG-IG process (per unit time)"""
    u = np.asarray(arg.u, dtype=float)
    v = np.asarray(arg.v, dtype=float)
    if isinstance(p, GaussianLimitParams):
        value = 1j * p.mu * u - 0.5 * p.sigma2 * u * u + 1j * p.sigma2 * v
    else:
        inner = p.alpha ** 2 - 2j * p.lam * v - (p.beta + 1j * u) ** 2
        value = 1j * p.mu * u + p.delta * (p.gamma - principal_sqrt(inner))
    if np.ndim(value) == 0:
        return complex(value)
    return value


def nig_exponent(u, alpha: float, beta: float, delta: float, mu: float):
    """Log-CF of NIG(alpha, beta, mu, delta) at u"""
    u = np.asarray(u, dtype=float)
    value = 1j * mu * u + delta * (np.sqrt(alpha ** 2 - beta ** 2) - principal_sqrt(alpha ** 2 - (beta + 1j * u) ** 2))
    return complex(value) if np.ndim(value) == 0 else value


def ig_exponent(z, mean: float, shape: float):
    """log E[exp(z X)] for X ~ IG(mean, shape) and Re z <= 0"""
    z = np.asarray(z, dtype=complex)
    value = shape / mean * (1.0 - principal_sqrt(1.0 - 2.0 * mean ** 2 * z / shape))
    return complex(value) if np.ndim(value) == 0 else value


def nigig_fdd_exponent(times: Sequence[float], coeffs: Sequence[Tuple[float, float]], p: LimitLaw) -> complex:
    """Sum over k of (t_k - t_{k-1}) eta(u_k + ... + u_d, v_k + ... + v_d)"""
    times = np.asarray(times, dtype=float)
    u = np.array([c[0] for c in coeffs], dtype=float)
    v = np.array([c[1] for c in coeffs], dtype=float)
    u_tail = np.cumsum(u[::-1])[::-1]
    v_tail = np.cumsum(v[::-1])[::-1]
    widths = np.diff(np.concatenate([[0.0], times]))
    return complex(np.sum(widths * nigig_exponent(FourierArg(u_tail, v_tail), p)))


def limit_params(params: ReversionaryParams, regime: Regime) -> LimitLaw:
    """Parameters of the limit NIG-IG law for the given regime"""
    regime = Regime.parse(regime)
    if regime == Regime.ABOVE_HALF:
        return GaussianLimitParams(sigma2=params.v0, mu=-0.5 * params.v0)
    rho, xi, theta, v0 = params.rho, params.xi, params.theta, params.v0
    if abs(rho) >= 1.0:
        raise UnsupportedCorrelationError(f"limit law for regime '{regime.value}' needs |rho| < 1")
    one_m_rho2 = 1.0 - rho ** 2
    if regime == Regime.AT_HALF:
        level = theta + v0
        return NigIgParams(
            alpha=0.5 * np.sqrt((xi - 2.0 * rho) ** 2 + 4.0 * one_m_rho2) / (xi * one_m_rho2),
            beta=-0.5 * (xi - 2.0 * rho) / (xi * one_m_rho2),
            delta=np.sqrt(one_m_rho2) * level / xi,
            mu=-rho * level / xi,
            lam=1.0 / one_m_rho2,
        )
    alpha = 1.0 / (2.0 * one_m_rho2)
    return NigIgParams(
        alpha=alpha,
        beta=-alpha,
        delta=np.sqrt(one_m_rho2) * theta / xi,
        mu=-rho * theta / xi,
        lam=1.0 / one_m_rho2,
    )


def limit_exponent_closed_form(arg: FourierArg, params: ReversionaryParams, regime: Regime):
    """The three asymptotic exponents per unit time, coded directly from the model parameters"""
    regime = Regime.parse(regime)
    u = np.asarray(arg.u, dtype=float)
    v = np.asarray(arg.v, dtype=float)
    rho, xi, theta, v0 = params.rho, params.xi, params.theta, params.v0
    if regime == Regime.ABOVE_HALF:
        value = -0.5 * v0 * (u * u - 2j * (v - 0.5 * u))
    elif regime == Regime.AT_HALF:
        lin = 1.0 - 1j * rho * xi * u
        value = (theta + v0) / xi ** 2 * (lin - principal_sqrt(lin * lin - 2.0 * xi ** 2 * (1j * v - 0.5 * (u * u + 1j * u))))
    else:
        value = -theta / xi * (1j * rho * u + principal_sqrt((1.0 - rho ** 2) * u * u - 2j * (v - 0.5 * u)))
    return complex(value) if np.ndim(value) == 0 else value


def cf_limit(arg: FourierArg, T: float, params: ReversionaryParams, regime: Regime):
    """Joint CF of (log S_T/S0, Vbar_T) under the limit law"""
    if not params.rescaled_reversion:
        raise ParameterError("limit laws describe the rescaled mean-reversion convention")
    value = np.exp(nigig_exponent(arg, limit_params(params, regime)) * T)
    return complex(value) if np.ndim(value) == 0 else value


def cf_reversionary(arg: FourierArg, t: float, T: float, state: Tuple[float, float], params: ReversionaryParams):
    """
    Conditional joint CF E[exp(iu log S_T + iv (Vbar_T - Vbar_t)) | F_t] of the reversionary model.

    state is (log S_t, V_t).
    """
    if not 0.0 <= t <= T:
        raise ParameterError("need 0 <= t <= T")
    log_spot, variance = state
    if variance <= 0:
        raise ParameterError("instantaneous variance must be positive")
    phi, psi = explicit_phi_psi(arg.u, arg.v, params, T - t)
    u = np.asarray(arg.u, dtype=float)
    value = np.exp(1j * u * log_spot + phi + params.eps ** (0.5 - params.H) * psi * variance)
    return complex(value) if np.ndim(value) == 0 else value


def cf_functional(fg: PiecewiseFunctional, T: float, params: ReversionaryParams, n_steps: int,
                  method: str = "exponential") -> complex:
    """E[exp(int f(T-s) dlog S_s + int g(T-s) dVbar_s)] via the numerical Riccati solution"""
    solution = solve_riccati(params, fg, T, n_steps, method=method)
    return complex(np.exp(solution.phi[-1] + params.eps ** (0.5 - params.H) * solution.psi[-1] * params.v0))


def classical_heston_cf(u, T: float, s0: float, v0: float, kappa: float, drift: float, xi: float, rho: float):
    """
    CF of log S_T in the Heston model dV = (drift - kappa V) dt + xi sqrt(V) dW, kappa >= 0.

    drift is kappa times the long-run variance when kappa > 0 and the constant variance
    drift otherwise.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    beta = kappa - 1j * rho * xi * u
    quad = u * u + 1j * u
    d = principal_sqrt(beta * beta + xi ** 2 * quad)
    zero = (u == 0)
    safe_sum = np.where(zero, 1.0, beta + d)
    beta_minus_d = np.where(zero, 0.0, -xi ** 2 * quad / safe_sum)
    g = beta_minus_d / safe_sum
    decay = np.exp(-d * T)
    denom = 1.0 - g * decay
    c_term = drift / xi ** 2 * (beta_minus_d * T - 2.0 * np.log(denom / (1.0 - g)))
    d_term = beta_minus_d / xi ** 2 * (1.0 - decay) / denom
    value = np.exp(1j * u * np.log(s0) + c_term + d_term * v0)
    return complex(value[0]) if value.size == 1 else value


def convergence_table(
    params: ReversionaryParams,
    regime: Regime,
    eps_days: Sequence[float],
    us: Sequence[float],
    v: float,
    T: float = 1.0,
    H: Optional[float] = None,
) -> pd.DataFrame:
    """Absolute error between cf_reversionary at t=0 and cf_limit across eps (in days) and u"""
    regime = Regime.parse(regime)
    H = REGIME_DEFAULT_H[regime] if H is None else H
    us = np.asarray(us, dtype=float)
    limit = cf_limit(FourierArg(us, v), T, params, regime)
    frames = []
    for eps_day in eps_days:
        eps_params = params.with_eps_h(days_to_years(eps_day), H)
        cf = cf_reversionary(FourierArg(us, v), 0.0, T, (0.0, eps_params.v0), eps_params)
        cf = np.atleast_1d(cf)
        frames.append(pd.DataFrame({
            "u": us,
            "v": v,
            "eps_days": eps_day,
            "re_cf": cf.real,
            "im_cf": cf.imag,
            "re_limit": np.atleast_1d(limit).real,
            "im_limit": np.atleast_1d(limit).imag,
            "abs_err": np.abs(cf - limit),
        }))
        logger.debug(f"convergence_table: regime={regime.value}, eps={eps_day} days, max err={np.max(np.abs(cf - limit)):.3e}")
    return pd.concat(frames, ignore_index=True)
