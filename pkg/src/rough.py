"""
Rough / hyper-rough Heston transform via the fractional Adams scheme.

psi solves psi(t) = int_0^t K_H(t-s) R(psi(s)) ds with K_H(t) = t^(H-1/2), or
t^(H-1/2) / Gamma(H+1/2) for gamma-normalized parameters, and
R(x) = (u1^2 - u1)/2 + u2 + rho xi u1 x + xi^2/2 x^2.
"""
from dataclasses import dataclass
from typing import Union

import numpy as np
import pandas as pd
from loguru import logger

from core import NonIntegrableKernelError, NumericFailure, ParameterError, RoughParams, principal_sqrt

BLOW_UP_LEVEL = 1e12


@dataclass(frozen=True)
class AdamsWeights:
    """
    Product-integration weights of the kernel t^(alpha-1), alpha = H + 1/2, on a uniform grid.

    predictor[m] = int over a cell at lag m of the kernel (rectangle rule);
    corrector[m], first[K] are the product-trapezoid weights; diagonal is the weight of
    the new node.
    """
    predictor: np.ndarray
    corrector: np.ndarray
    first: np.ndarray
    diagonal: float


def adams_weights(H: float, n_steps: int, T: float, kernel_scale: float = 1.0) -> AdamsWeights:
    """Weights of kernel_scale * t^(H-1/2)"""
    if H <= -0.5:
        raise NonIntegrableKernelError(f"fractional kernel with H={H} is not integrable at 0")
    alpha = H + 0.5
    dt = T / n_steps
    scale_p = kernel_scale * dt ** alpha / alpha
    scale_c = kernel_scale * dt ** alpha / (alpha * (alpha + 1.0))
    m = np.arange(n_steps + 1, dtype=float)

    predictor = np.zeros(n_steps + 1)
    predictor[1:] = scale_p * (m[1:] ** alpha - m[:-1] ** alpha)

    corrector = np.zeros(n_steps + 1)
    corrector[1:-1] = scale_c * ((m[1:-1] + 1) ** (alpha + 1) + (m[1:-1] - 1) ** (alpha + 1) - 2.0 * m[1:-1] ** (alpha + 1))

    first = np.zeros(n_steps + 1)
    first[1:] = scale_c * ((m[1:] - 1) ** (alpha + 1) - (m[1:] - 1 - alpha) * m[1:] ** alpha)
    return AdamsWeights(predictor=predictor, corrector=corrector, first=first, diagonal=scale_c)


@dataclass(frozen=True)
class VolterraSolution:
    grid: np.ndarray
    psi: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    H: float

    def to_frame(self, column: int = 0) -> pd.DataFrame:
        psi = self.psi if self.psi.ndim == 1 else self.psi[:, column]
        return pd.DataFrame({"s": self.grid, "re_psi": psi.real, "im_psi": psi.imag})


def _as_complex_vector(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=complex))


def solve_volterra_riccati(
    u1,
    u2,
    rp: RoughParams,
    T: float,
    n_steps: int,
    corrector_iterations: int = 1,
    implicit_corrector: bool = False,
) -> VolterraSolution:
    """
    Fractional Adams predictor-corrector for the Riccati-Volterra equation.

    u1 and u2 broadcast to vectors; psi has shape (n_steps + 1, len(u)).
    implicit_corrector solves the quadratic corrector equation exactly instead of
    iterating it.
    """
    if rp.H <= -0.5:
        raise NonIntegrableKernelError(f"fractional kernel with H={rp.H} is not integrable at 0")
    if n_steps < 4:
        raise ParameterError("n_steps must be at least 4")
    if corrector_iterations < 1:
        raise ParameterError("corrector_iterations must be at least 1")
    u1, u2 = np.broadcast_arrays(_as_complex_vector(u1), _as_complex_vector(u2))
    if np.any(u1.real != 0) or np.any(u2.real > 0):
        raise ParameterError("need Re u1 = 0 and Re u2 <= 0")

    weights = adams_weights(rp.H, n_steps, T, rp.kernel_scale)
    source = 0.5 * (u1 * u1 - u1) + u2
    linear = rp.rho * rp.xi * u1
    quad = 0.5 * rp.xi ** 2

    def rate(x):
        return source + linear * x + quad * x * x

    psi = np.zeros((n_steps + 1, len(u1)), dtype=complex)
    rates = np.zeros_like(psi)
    rates[0] = rate(psi[0])
    c = weights.diagonal

    for k in range(1, n_steps + 1):
        predicted = weights.predictor[k:0:-1] @ rates[:k]
        history = weights.first[k] * rates[0]
        if k > 1:
            history = history + weights.corrector[k - 1:0:-1] @ rates[1:k]
        if implicit_corrector:
            lin = 1.0 - c * linear
            const = history + c * source
            root = principal_sqrt(lin * lin - 4.0 * c * quad * const)
            root = np.where((root * np.conj(lin)).real < 0, -root, root)
            value = 2.0 * const / (lin + root)
        else:
            value = predicted
            for _ in range(corrector_iterations):
                value = history + c * rate(value)
        if not np.all(np.isfinite(value)) or np.any(np.abs(value) > BLOW_UP_LEVEL):
            raise NumericFailure(f"Adams scheme blew up at step {k} (t={k * T / n_steps:.6g})")
        psi[k] = value
        rates[k] = rate(value)

    grid = np.linspace(0.0, T, n_steps + 1)
    logger.debug(f"solve_volterra_riccati: H={rp.H}, n_steps={n_steps}, n_args={len(u1)}")
    return VolterraSolution(grid=grid, psi=psi, u1=u1, u2=u2, H=rp.H)


def cf_rough(
    u1,
    rp: RoughParams,
    T: float,
    n_steps: int,
    u2=0.0,
    corrector_iterations: int = 1,
    implicit_corrector: bool = False,
) -> Union[complex, np.ndarray]:
    """
    Joint transform E[exp(u1 log P_T + u2 Ubar_T)] = exp(u1 log P0 + int_0^T R(psi(T-s)) g0(s) ds)

    with g0(s) = U0 + theta int_0^s K, K the kernel of rp; the integral uses the trapezoid rule
    on the Adams grid.
    """
    solution = solve_volterra_riccati(u1, u2, rp, T, n_steps, corrector_iterations, implicit_corrector)
    grid = solution.grid
    g0 = rp.u0 + rp.kernel_scale * rp.theta * grid ** rp.alpha / rp.alpha
    psi_reflected = solution.psi[::-1]
    rates = 0.5 * (solution.u1 ** 2 - solution.u1) + solution.u2 + rp.rho * rp.xi * solution.u1 * psi_reflected \
        + 0.5 * rp.xi ** 2 * psi_reflected ** 2
    integrand = rates * g0[:, None]
    dt = T / n_steps
    integral = dt * (integrand.sum(axis=0) - 0.5 * (integrand[0] + integrand[-1]))
    value = np.exp(solution.u1 * np.log(rp.p0) + integral)
    return complex(value[0]) if value.size == 1 else value
