"""
Time-dependent complex Riccati system of the reversionary Heston model

    psi' = a psi^2 + b(s) psi + c(s),   phi' = (theta + m eps^(-H-1/2) V0) psi,

with a = eps^(H-1/2) xi^2 / 2, b = rho xi eps^(H-1/2) f - m/eps, c = eps^(H-1/2) h and
h = g + (f^2 - f)/2, plus the explicit constant-coefficient solution and the eps -> 0 limits.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from core import (
    NumericFailure,
    ParameterError,
    PiecewiseFunctional,
    ReversionaryParams,
    principal_sqrt,
)

# relative tolerance used to merge breakpoints into the uniform grid
_GRID_MERGE_TOL = 1e-12

_METHODS = ("exponential", "exact")


class Regime(Enum):
    """Limit regime of the reversionary exponent H"""
    ABOVE_HALF = "above"
    AT_HALF = "at"
    BELOW_HALF = "below"

    @classmethod
    def from_hurst(cls, H: float, tol: float = 1e-12) -> "Regime":
        if abs(H + 0.5) <= tol:
            return cls.AT_HALF
        return cls.ABOVE_HALF if H > -0.5 else cls.BELOW_HALF

    @classmethod
    def parse(cls, value) -> "Regime":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class RiccatiCoeffs:
    a: float
    b: np.ndarray
    c: np.ndarray

    def satisfies_assumptions(self, tol: float = 1e-9) -> bool:
        """Re c + (Im b)^2 / (4a) <= 0 on every segment"""
        lhs = self.c.real + self.b.imag ** 2 / (4.0 * self.a)
        scale = np.maximum(1.0, np.abs(self.c.real))
        return bool(np.all(lhs <= tol * scale))


def riccati_coeffs(params: ReversionaryParams, fg: PiecewiseFunctional) -> RiccatiCoeffs:
    scale = params.vol_scale
    a = 0.5 * scale * params.xi ** 2
    b = params.rho * params.xi * scale * fg.f_values - params.mean_reversion
    c = scale * fg.h_values
    return RiccatiCoeffs(a=a, b=b, c=c)


@dataclass(frozen=True)
class RiccatiSolution:
    grid: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    eps: float
    H: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "s": self.grid,
            "re_psi": self.psi.real,
            "im_psi": self.psi.imag,
            "re_phi": self.phi.real,
            "im_phi": self.phi.imag,
        })

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False)


def _time_grid(T: float, n_steps: int, breakpoints: np.ndarray) -> np.ndarray:
    base = np.linspace(0.0, T, n_steps + 1)
    inner = breakpoints[(breakpoints > 0) & (breakpoints < T)]
    grid = np.union1d(base, inner)
    keep = np.concatenate([[True], np.diff(grid) > _GRID_MERGE_TOL * T])
    grid = grid[keep]
    grid[-1] = T
    return grid


def _attracting_root(a: float, b: complex, c: complex) -> Tuple[complex, complex]:
    """Root of a x^2 + b x + c with non-positive real part and the discriminant root D"""
    disc = complex(principal_sqrt(b * b - 4.0 * a * c))
    denom = disc - b
    r1 = 2.0 * c / denom if denom != 0 else (-b - disc) / (2.0 * a)
    return r1, disc


def _continued_log(k, lam: complex, tau):
    """log(1 + k (1 - exp(lam s))) continued along s in [0, tau]; k and tau broadcast"""
    k = np.asarray(k, dtype=complex)
    tau = np.asarray(tau, dtype=float)
    E = np.exp(lam * tau)
    one_plus_k = 1.0 + k
    degenerate = one_plus_k == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(degenerate, 0.0, k / np.where(degenerate, 1.0, one_plus_k))
        log_q = np.log(1.0 - ratio * E) - np.log(1.0 - ratio)
        modulus = np.abs(ratio)
        crossing = modulus > 1.0
        # count crossings of ratio * exp(lam s) over the ray (1, inf)
        if lam.real < 0:
            s_max = np.log(np.where(crossing, modulus, 1.0)) / -lam.real
            s_end = np.minimum(tau, s_max)
        else:
            s_end = tau
        angle0 = np.angle(ratio)
        turns = np.floor((angle0 + lam.imag * s_end) / (2 * np.pi)) - np.floor(angle0 / (2 * np.pi))
    log_q = log_q + 2j * np.pi * np.where(crossing, turns, 0.0)
    return np.where(degenerate, lam * tau, log_q)


def _riccati_flow(a: float, b: complex, c: complex, psi0: complex, tau: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact flow of psi' = a psi^2 + b psi + c with constant coefficients.

    Returns psi(tau) and the integral of psi over [0, tau] for psi(0) = psi0.
    Writing r1 for the attracting root, w = psi - r1 solves a Bernoulli equation:
    w(tau) = w0 E / q with E = exp(lam tau), q = 1 + k (1 - E), k = a w0 / lam, lam = -D.
    The integral is r1 tau - log q / a, with the logarithm continued along the path.
    """
    r1, disc = _attracting_root(a, b, c)
    w0 = psi0 - r1

    if w0 == 0:
        return np.full(tau.shape, r1, dtype=complex), r1 * tau.astype(complex)

    if abs(disc) * float(np.max(tau)) < 1e-12:
        # double root
        q = 1.0 - a * w0 * tau
        if np.any(q == 0):
            raise NumericFailure("Riccati flow blows up inside a step")
        return r1 + w0 / q, r1 * tau - np.log(q) / a

    lam = -disc
    k = a * w0 / lam
    E = np.exp(lam * tau)
    q = 1.0 + k * (1.0 - E)
    if np.any(q == 0):
        raise NumericFailure("Riccati flow blows up inside a step")
    return r1 + w0 * E / q, r1 * tau - _continued_log(k, lam, tau) / a


def _phi1(z: np.ndarray) -> np.ndarray:
    """(exp(z) - 1) / z for complex z"""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-2
    safe = np.where(small, 1.0, z)
    series = 1.0 + z / 2.0 + z * z / 6.0 + z ** 3 / 24.0 + z ** 4 / 120.0
    return np.where(small, series, (np.exp(safe) - 1.0) / safe)


def _exponential_run(a: float, b: complex, c: complex, psi0: complex, widths: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exponential Euler over cells of constant coefficients.

    The linear part is the Jacobian lam = b + 2 a r1 at the frozen equilibrium r1, which
    carries -m/eps exactly. The deviation w = psi - r1 obeys w' = lam w + a w^2; with the
    quadratic frozen as a w_n w_{n+1} the step reads

        w_{n+1} = exp(z) w_n + h phi1(z) a w_n w_{n+1},   z = lam h,

    i.e. exponential Euler for the linear equation of 1/w. Chaining the cells gives
    w_n = P_n w_0 / (1 + w_0 S_n) with P_n the product of exp(z_j) and
    S_n = sum_j beta_j P_j, beta_j = -a h_j phi1(z_j). phi takes the exact integral of the
    step interpolant, r1 h - log(1 + beta_j w_j) / a.

    Returns psi at the n + 1 cell edges and the integral of psi over each cell.
    """
    r1, disc = _attracting_root(a, b, c)
    w0 = psi0 - r1
    if w0 == 0:
        return np.full(len(widths) + 1, r1, dtype=complex), r1 * widths.astype(complex)

    lam = -disc
    z = lam * widths
    beta = -a * widths * _phi1(z)
    products = np.concatenate([[1.0 + 0j], np.cumprod(np.exp(z))])
    sums = np.concatenate([[0j], np.cumsum(beta * products[:-1])])
    denom = 1.0 + w0 * sums
    if np.any(denom == 0):
        raise NumericFailure("Riccati step blows up inside a cell")
    w = products * w0 / denom

    if abs(disc) * float(np.max(widths)) < 1e-12:
        log_q = np.log(1.0 + beta * w[:-1])
    else:
        log_q = _continued_log(a * w[:-1] / lam, lam, widths)
    return r1 + w, r1 * widths - log_q / a


def solve_riccati(
    params: ReversionaryParams,
    fg: PiecewiseFunctional,
    T: float,
    n_steps: int,
    psi0: complex = 0j,
    method: str = "exponential",
) -> RiccatiSolution:
    """
    Solve the Riccati system on [0, T] for a piecewise-constant functional.

    The uniform grid of n_steps cells is refined to contain every breakpoint of fg.
    method="exponential" runs the exponential integrator of _exponential_run cell by cell;
    method="exact" evaluates the closed-form constant-coefficient flow from the start of
    each segment. Both integrate the stiff -m/eps term exactly, so the step size need not
    scale with eps.
    """
    if n_steps < 2:
        raise ParameterError("n_steps must be at least 2")
    if T <= 0:
        raise ParameterError("T must be positive")
    if T > fg.horizon * (1 + 1e-12):
        raise ParameterError(f"functional is defined up to {fg.horizon}, solver horizon is {T}")
    if not fg.satisfies_condfg():
        raise ParameterError("functional violates Re g + ((Re f)^2 - Re f)/2 <= 0")
    if method not in _METHODS:
        raise ParameterError(f"unknown Riccati method '{method}'")

    coeffs = riccati_coeffs(params, fg)
    drift = params.theta + params.reversion_factor * params.eps ** (-params.H - 0.5) * params.v0
    grid = _time_grid(T, n_steps, fg.edges)
    cell_segment = fg.segment_index(0.5 * (grid[:-1] + grid[1:]))

    psi = np.empty(len(grid), dtype=complex)
    phi = np.empty(len(grid), dtype=complex)
    psi[0] = psi0
    phi[0] = 0.0

    logger.debug(f"solve_riccati: method={method}, eps={params.eps:.3e}, H={params.H}, nodes={len(grid)}")

    changes = np.flatnonzero(np.diff(cell_segment)) + 1
    run_starts = np.concatenate([[0], changes])
    run_ends = np.concatenate([changes, [len(cell_segment)]])
    for start, end in zip(run_starts, run_ends):
        seg = cell_segment[start]
        a, b, c = coeffs.a, coeffs.b[seg], coeffs.c[seg]
        if method == "exact":
            tau = grid[start + 1:end + 1] - grid[start]
            values, integral = _riccati_flow(a, b, c, psi[start], tau)
            psi[start + 1:end + 1] = values
            phi[start + 1:end + 1] = phi[start] + drift * integral
        else:
            values, cell_integrals = _exponential_run(a, b, c, psi[start], np.diff(grid[start:end + 1]))
            psi[start + 1:end + 1] = values[1:]
            phi[start + 1:end + 1] = phi[start] + drift * np.cumsum(cell_integrals)
        finite = np.isfinite(psi[start + 1:end + 1]) & np.isfinite(phi[start + 1:end + 1])
        if not np.all(finite):
            bad = start + 1 + int(np.flatnonzero(~finite)[0])
            raise NumericFailure(f"non-finite Riccati value at step {bad} (s={grid[bad]:.6g})")

    return RiccatiSolution(grid=grid, psi=psi, phi=phi, eps=params.eps, H=params.H)


@dataclass(frozen=True)
class CfTerms:
    g_term: complex
    d_term: complex


def _explicit_parts(u, v, params: ReversionaryParams):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    kappa = params.eps ** (params.H + 0.5) * params.xi
    h = 1j * v - 0.5 * (u * u + 1j * u)
    beta = params.reversion_factor - 1j * params.rho * kappa * u
    d = principal_sqrt(beta * beta - 2.0 * kappa * kappa * h)
    beta_minus_d = 2.0 * kappa * kappa * h / (beta + d)
    g = beta_minus_d / (beta + d)
    return d, g, beta_minus_d


def explicit_terms(u, v, params: ReversionaryParams) -> CfTerms:
    """d and g of the explicit solution; arrays are accepted for u and v"""
    d, g, _ = _explicit_parts(u, v, params)
    return CfTerms(g_term=g, d_term=d)


def explicit_phi_psi(u, v, params: ReversionaryParams, t: float):
    """Closed-form (phi_eps(t), psi_eps(t)) for constant f = iu, g = iv"""
    if t < 0:
        raise ParameterError("t must be nonnegative")
    d, g, beta_minus_d = _explicit_parts(u, v, params)
    eps, H, xi = params.eps, params.H, params.xi
    decay = np.exp(-t * d / eps)
    denom = 1.0 - g * decay
    if np.any(denom == 0):
        raise NumericFailure("singular argument 1 - g exp(-t d / eps) = 0")
    psi = eps ** (-H - 0.5) / xi ** 2 * beta_minus_d * -np.expm1(-t * d / eps) / denom
    prefactor = (eps ** (-0.5 - H) * params.theta + params.reversion_factor * eps ** (-1.0 - 2.0 * H) * params.v0) / xi ** 2
    phi = prefactor * (beta_minus_d * t - 2.0 * eps * np.log(denom / (1.0 - g)))
    if np.ndim(phi) == 0:
        return complex(phi), complex(psi)
    return phi, psi


def _h_of(f, g):
    return g + 0.5 * (f * f - f)


def _psi0_values(f, g, regime: Regime, rho: float, xi: float):
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    if regime == Regime.ABOVE_HALF:
        return np.zeros(np.broadcast(f, g).shape, dtype=complex)
    if regime == Regime.AT_HALF:
        lin = 1.0 - rho * xi * f
        return (lin - principal_sqrt(lin * lin - 2.0 * xi ** 2 * _h_of(f, g))) / xi ** 2
    return -(rho * f + principal_sqrt(f * (1.0 - (1.0 - rho ** 2) * f) - 2.0 * g)) / xi


def limit_psi0(fg: PiecewiseFunctional, regime: Regime, rho: float, xi: float, t):
    f, g = fg.evaluate(t)
    values = _psi0_values(f, g, Regime.parse(regime), rho, xi)
    if np.ndim(values) == 0:
        return complex(values)
    return values


def _require_rescaled(params: ReversionaryParams) -> None:
    if not params.rescaled_reversion:
        raise ParameterError("limit formulas describe the rescaled mean-reversion convention")


def limit_phi0(fg: PiecewiseFunctional, regime: Regime, params: ReversionaryParams, T: float) -> complex:
    """phi_0(T) as an exact sum over the segments of fg clipped to [0, T]"""
    _require_rescaled(params)
    regime = Regime.parse(regime)
    lengths = np.clip(np.minimum(fg.edges[1:], T) - fg.edges[:-1], 0.0, None)
    if regime == Regime.ABOVE_HALF:
        return complex(params.v0 * np.sum(lengths * fg.h_values))
    psi0 = _psi0_values(fg.f_values, fg.g_values, regime, params.rho, params.xi)
    level = params.theta + params.v0 if regime == Regime.AT_HALF else params.theta
    return complex(level * np.sum(lengths * psi0))


@dataclass(frozen=True)
class LimitFunctions:
    regime: Regime
    psi0: Callable[[float], complex]
    phi0: complex


def limit_functions(fg: PiecewiseFunctional, params: ReversionaryParams, T: float,
                    regime: Optional[Regime] = None) -> LimitFunctions:
    regime = Regime.from_hurst(params.H) if regime is None else Regime.parse(regime)
    return LimitFunctions(
        regime=regime,
        psi0=lambda t: limit_psi0(fg, regime, params.rho, params.xi, t),
        phi0=limit_phi0(fg, regime, params, T),
    )


def riccati_roots(f_val: complex, g_val: complex, rho: float, xi: float):
    """
    Roots of P(X) = xi^2/2 X^2 - (1 - rho xi f) X + h and Q(X) = xi^2/2 X^2 + rho xi f X + h,
    each pair ordered by increasing real part.
    """
    f = complex(f_val)
    g = complex(g_val)
    h = _h_of(f, g)
    lin = 1.0 - rho * xi * f
    s_p = complex(principal_sqrt(lin * lin - 2.0 * xi ** 2 * h))
    p_roots = sorted([(lin - s_p) / xi ** 2, (lin + s_p) / xi ** 2], key=lambda z: z.real)
    s_q = complex(principal_sqrt(rho ** 2 * f * f - 2.0 * h))
    q_roots = sorted([-(rho * f + s_q) / xi, (-rho * f + s_q) / xi], key=lambda z: z.real)
    return tuple(p_roots), tuple(q_roots)
