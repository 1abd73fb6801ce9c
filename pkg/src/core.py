"""
Core types shared by every module: model parameters, kernels, piecewise functionals,
and the exception hierarchy.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import gamma as gamma_function

TRADING_DAYS_PER_YEAR = 252.0


class RevHestonError(Exception):
    """Base class for all toolkit errors"""


class ParameterError(RevHestonError, ValueError):
    """Invalid parameters or violated preconditions"""


class DomainError(ParameterError):
    """Argument outside the domain of a function"""


class NonIntegrableKernelError(DomainError):
    """Kernel is not locally integrable at zero"""


class UnsupportedCorrelationError(ParameterError):
    """Correlation at the boundary |rho| = 1"""


class GridMismatchError(ParameterError):
    """Two surfaces or a surface and its weights live on different grids"""


class MissingCellError(ParameterError):
    """Requested smile cell is missing"""


class NoSolutionError(ParameterError):
    """Inversion problem has no solution"""


class NumericFailure(RevHestonError, ArithmeticError):
    """Non-finite intermediate value, blow-up or singular argument"""


class ConfigError(RevHestonError):
    """Malformed run configuration"""


def days_to_years(days: float) -> float:
    return days / TRADING_DAYS_PER_YEAR


def principal_sqrt(z):
    """
    Principal complex square root with the Im >= 0 tie-break on the imaginary axis.

    numpy follows signed zeros on the branch cut, so -4-0j maps to -2j; the tie-break
    flips such results to +2j.
    """
    root = np.sqrt(np.asarray(z, dtype=complex))
    flip = (root.real == 0.0) & (root.imag < 0.0)
    root = np.where(flip, -root, root)
    if root.ndim == 0:
        return complex(root)
    return root


class ReversionaryParams(BaseModel):
    """Parameters (S0, V0, theta, xi, rho, eps, H) of the reversionary Heston model"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    s0: float = Field(default=1.0, gt=0.0)
    v0: float = Field(gt=0.0)
    theta: float = Field(ge=0.0)
    xi: float = Field(gt=0.0)
    rho: float = Field(ge=-1.0, le=1.0)
    eps: float = Field(gt=0.0)
    H: float
    rescaled_reversion: bool = True

    @model_validator(mode="after")
    def _check_reversion(self) -> "ReversionaryParams":
        if not np.isfinite(self.H):
            raise ValueError("H must be finite")
        if not self.rescaled_reversion and self.H >= 0.5:
            raise ValueError("un-rescaled mean reversion (1/2 - H)/eps requires H < 1/2")
        return self

    @property
    def reversion_factor(self) -> float:
        """Mean-reversion speed times eps: 1 or (1/2 - H)"""
        return 1.0 if self.rescaled_reversion else 0.5 - self.H

    @property
    def mean_reversion(self) -> float:
        return self.reversion_factor / self.eps

    @property
    def vol_scale(self) -> float:
        """eps^(H - 1/2), the factor in front of theta and xi in the variance dynamics"""
        return self.eps ** (self.H - 0.5)

    def with_eps_h(self, eps: float, H: float) -> "ReversionaryParams":
        return self.model_copy(update={"eps": eps, "H": H})


class RoughParams(BaseModel):
    """Parameters of the rough / hyper-rough Heston model"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    H: float = Field(gt=-0.5, le=0.5)
    rho: float = Field(ge=-1.0, le=1.0)
    xi: float = Field(gt=0.0)
    theta: float = Field(ge=0.0)
    u0: float = Field(gt=0.0)
    p0: float = Field(default=1.0, gt=0.0)
    gamma_normalized: bool = False

    @property
    def alpha(self) -> float:
        return self.H + 0.5

    @property
    def kernel_scale(self) -> float:
        """1 for K(t) = t^(H-1/2), 1/Gamma(H+1/2) for the fractional-integral kernel"""
        return 1.0 / gamma_function(self.alpha) if self.gamma_normalized else 1.0


class KernelKind(Enum):
    FRACTIONAL = "fractional"
    SHIFTED_FRACTIONAL = "shifted_fractional"
    EXPONENTIAL = "exponential"
    PROXY_EXPONENTIAL = "proxy_exponential"


@dataclass(frozen=True)
class Kernel:
    kind: KernelKind
    H: Optional[float] = None
    eps: Optional[float] = None

    def __post_init__(self):
        if self.kind in (KernelKind.FRACTIONAL, KernelKind.SHIFTED_FRACTIONAL, KernelKind.PROXY_EXPONENTIAL):
            if self.H is None:
                raise ParameterError(f"{self.kind.value} kernel needs H")
        if self.kind != KernelKind.FRACTIONAL:
            if self.eps is None or self.eps <= 0:
                raise ParameterError(f"{self.kind.value} kernel needs eps > 0")
        if self.kind == KernelKind.FRACTIONAL and self.H <= -0.5:
            raise NonIntegrableKernelError(f"fractional kernel with H={self.H} is not integrable at 0")

    @classmethod
    def fractional(cls, H: float) -> "Kernel":
        return cls(KernelKind.FRACTIONAL, H=H)

    @classmethod
    def shifted_fractional(cls, H: float, eps: float) -> "Kernel":
        return cls(KernelKind.SHIFTED_FRACTIONAL, H=H, eps=eps)

    @classmethod
    def exponential(cls, eps: float) -> "Kernel":
        return cls(KernelKind.EXPONENTIAL, eps=eps)

    @classmethod
    def proxy_exponential(cls, H: float, eps: float) -> "Kernel":
        return cls(KernelKind.PROXY_EXPONENTIAL, H=H, eps=eps)


def kernel_eval(kernel: Kernel, t):
    """Evaluate a kernel at t (scalar or array)"""
    t_arr = np.asarray(t, dtype=float)
    if kernel.kind == KernelKind.FRACTIONAL:
        if np.any(t_arr <= 0):
            raise DomainError("fractional kernel is only defined for t > 0")
        values = t_arr ** (kernel.H - 0.5)
    else:
        if np.any(t_arr < 0):
            raise DomainError(f"{kernel.kind.value} kernel is only defined for t >= 0")
        if kernel.kind == KernelKind.SHIFTED_FRACTIONAL:
            values = (t_arr + kernel.eps) ** (kernel.H - 0.5)
        elif kernel.kind == KernelKind.EXPONENTIAL:
            values = np.exp(-t_arr / kernel.eps) / kernel.eps
        else:
            values = kernel.eps ** (kernel.H - 0.5) * np.exp(-t_arr / kernel.eps)
    if values.ndim == 0:
        return float(values)
    return values


def kernel_integral(kernel: Kernel, t):
    """Closed-form integral of the kernel over [0, t]"""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("integration horizon must be nonnegative")
    if kernel.kind == KernelKind.FRACTIONAL:
        a = kernel.H + 0.5
        values = t_arr ** a / a
    elif kernel.kind == KernelKind.SHIFTED_FRACTIONAL:
        a = kernel.H + 0.5
        if a == 0.0:
            values = np.log((t_arr + kernel.eps) / kernel.eps)
        else:
            values = ((t_arr + kernel.eps) ** a - kernel.eps ** a) / a
    elif kernel.kind == KernelKind.EXPONENTIAL:
        values = -np.expm1(-t_arr / kernel.eps)
    else:
        values = kernel.eps ** (kernel.H + 0.5) * -np.expm1(-t_arr / kernel.eps)
    if values.ndim == 0:
        return float(values)
    return values


# 3-point Gauss-Legendre nodes and weights on [-1, 1]
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(3)
_GRADING_LEVELS = 40


def kernel_distance(kernel_a: Kernel, kernel_b: Kernel, T: float, n: int) -> float:
    """
    L1 distance between two kernels on [0, T].

    The interval is graded geometrically toward 0 with ratio 1/2. The innermost cell
    [0, T 2^-L] is integrated exactly (signed integral of the difference); every other cell
    is split into uniform sub-cells with 3-point Gauss-Legendre on each.
    """
    if T <= 0:
        raise DomainError("T must be positive")
    if n < 2:
        raise ParameterError("kernel distance needs n >= 2 nodes")
    if kernel_a == kernel_b:
        return 0.0

    levels = _GRADING_LEVELS
    innermost = T * 0.5 ** levels
    total = abs(kernel_integral(kernel_a, innermost) - kernel_integral(kernel_b, innermost))

    per_level = max(1, int(np.ceil(n / levels)))
    upper = T * 0.5 ** np.arange(levels)
    lower = upper * 0.5
    # sub-cell edges per level: shape (levels, per_level + 1)
    frac = np.linspace(0.0, 1.0, per_level + 1)
    edges = lower[:, None] + (upper - lower)[:, None] * frac[None, :]
    left = edges[:, :-1]
    half = 0.5 * (edges[:, 1:] - left)
    mid = left + half
    nodes = mid[..., None] + half[..., None] * _GAUSS_NODES
    diff = np.abs(kernel_eval(kernel_a, nodes) - kernel_eval(kernel_b, nodes))
    total += float(np.sum(half[..., None] * _GAUSS_WEIGHTS * diff))
    return total


def kernel_l1_distance(H: float, H_hat: float, eps: float, T: float, n: int) -> float:
    """Distance between the fractional kernel K_H and the proxy eps^(H_hat-1/2) e^(-s/eps)"""
    if H <= -0.5:
        raise NonIntegrableKernelError(f"fractional kernel with H={H} is not integrable at 0")
    return kernel_distance(Kernel.fractional(H), Kernel.proxy_exponential(H_hat, eps), T, n)


@dataclass(frozen=True)
class PiecewiseFunctional:
    """
    Right-continuous step functions f, g on [0, horizon].

    edges has one more entry than f_values/g_values; segment k covers [edges[k], edges[k+1]).
    """
    edges: np.ndarray
    f_values: np.ndarray
    g_values: np.ndarray
    purely_imaginary: bool = True

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        f_values = np.asarray(self.f_values, dtype=complex)
        g_values = np.asarray(self.g_values, dtype=complex)
        if edges.ndim != 1 or len(edges) < 2:
            raise ParameterError("need at least one segment")
        if edges[0] != 0.0:
            raise ParameterError("first breakpoint must be 0")
        if np.any(np.diff(edges) <= 0):
            raise ParameterError("breakpoints must be strictly increasing")
        if f_values.shape != (len(edges) - 1,) or g_values.shape != f_values.shape:
            raise ParameterError("one (f, g) value per segment is required")
        if self.purely_imaginary and (np.any(f_values.real != 0) or np.any(g_values.real != 0)):
            raise ParameterError("purely imaginary functional has nonzero real parts")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "f_values", f_values)
        object.__setattr__(self, "g_values", g_values)

    @classmethod
    def constant(cls, f: complex, g: complex, T: float) -> "PiecewiseFunctional":
        f, g = complex(f), complex(g)
        return cls(np.array([0.0, T]), np.array([f]), np.array([g]), purely_imaginary=(f.real == 0 and g.real == 0))

    @property
    def horizon(self) -> float:
        return float(self.edges[-1])

    @property
    def n_segments(self) -> int:
        return len(self.f_values)

    @property
    def h_values(self) -> np.ndarray:
        """h = g + (f^2 - f)/2 on each segment"""
        return self.g_values + 0.5 * (self.f_values ** 2 - self.f_values)

    def segment_index(self, s):
        idx = np.searchsorted(self.edges, np.asarray(s, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_segments - 1)

    def evaluate(self, s) -> Tuple[np.ndarray, np.ndarray]:
        idx = self.segment_index(s)
        return self.f_values[idx], self.g_values[idx]

    def segments(self) -> Iterator[Tuple[float, float, complex, complex]]:
        for k in range(self.n_segments):
            yield float(self.edges[k]), float(self.edges[k + 1]), self.f_values[k], self.g_values[k]

    def satisfies_condfg(self) -> bool:
        """Re g + ((Re f)^2 - Re f)/2 <= 0 on every segment"""
        re_f = self.f_values.real
        return bool(np.all(self.g_values.real + 0.5 * (re_f ** 2 - re_f) <= 0))


def make_finite_dim_functional(times: Sequence[float], coeffs: Sequence[Tuple[float, float]], T: float) -> PiecewiseFunctional:
    """
    Step functional encoding the joint law at times t_1 < ... < t_d.

    f(s) = i (u_k + ... + u_d) for T - s in [t_{k-1}, t_k), likewise g with the v's.
    After the reflection the block k occupies s in [T - t_k, T - t_{k-1}); when t_d < T the
    leading segment [0, T - t_d) carries zero.
    """
    times = np.asarray(times, dtype=float)
    if len(times) == 0 or len(coeffs) != len(times):
        raise ParameterError("one (u, v) pair per time is required")
    if times[0] <= 0 or np.any(np.diff(times) <= 0):
        raise ParameterError("times must satisfy 0 < t_1 < ... < t_d")
    if times[-1] > T * (1 + 1e-14):
        raise ParameterError("last time exceeds the horizon T")
    u = np.array([c[0] for c in coeffs], dtype=float)
    v = np.array([c[1] for c in coeffs], dtype=float)
    u_tail = np.cumsum(u[::-1])[::-1]
    v_tail = np.cumsum(v[::-1])[::-1]

    starts = np.concatenate([[0.0], times[:-1]])
    # reversed order: block d first in s
    edges = list(T - times[::-1])
    f_vals = list(1j * u_tail[::-1])
    g_vals = list(1j * v_tail[::-1])
    edges.append(T - starts[0])
    if edges[0] > 0:
        edges.insert(0, 0.0)
        f_vals.insert(0, 0j)
        g_vals.insert(0, 0j)
    else:
        edges[0] = 0.0
    return PiecewiseFunctional(np.array(edges), np.array(f_vals), np.array(g_vals), purely_imaginary=True)
