"""
Monte Carlo engines: NIG-IG increments by subordination, full-truncation Euler for the
reversionary model, and empirical characteristic functions.

Paths are generated in fixed-size chunks, each with its own stream spawned from
np.random.SeedSequence(seed); results do not depend on the number of worker threads.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Literal, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator

from charfn import FourierArg, GaussianLimitParams, LimitLaw
from core import ConfigError, ParameterError, ReversionaryParams

STIFFNESS_RATIO = 0.25
DIFFUSION_RATIO = 0.1


class SampleConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_paths: int = Field(ge=1)
    times: Tuple[float, ...]
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    scheme: Literal["full_truncation_euler"] = "full_truncation_euler"
    substeps: int = Field(default=1, ge=1)
    chunk_size: int = Field(default=8192, ge=1)
    threads: int = Field(default=1, ge=1)

    @field_validator("times")
    @classmethod
    def _increasing(cls, times):
        grid = np.asarray(times, dtype=float)
        if len(grid) == 0 or grid[0] <= 0 or np.any(np.diff(grid) <= 0):
            raise ValueError("time grid must be positive and strictly increasing")
        return times

    def chunks(self) -> List[int]:
        full, rest = divmod(self.n_paths, self.chunk_size)
        return [self.chunk_size] * full + ([rest] if rest else [])


def _generators(seed: int, n_streams: int) -> List[np.random.Generator]:
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(n_streams)]


def _run_chunks(cfg: SampleConfig, worker) -> list:
    sizes = cfg.chunks()
    rngs = _generators(cfg.seed, len(sizes))
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(worker, sizes, rngs))


def ig_moments(mean: float, shape: float) -> Tuple[float, float]:
    """Mean and variance of IG(mean, shape)"""
    return mean, mean ** 3 / shape


def sample_ig(mean: float, shape: float, rng: np.random.Generator, size=None):
    """IG(mean, shape) draws by the transform method with a uniform acceptance branch"""
    if mean <= 0 or shape <= 0:
        raise ParameterError("IG mean and shape must be positive")
    y = rng.standard_normal(size) ** 2
    r = mean * y / (2.0 * shape)
    # root mean * (1 + r - sqrt(r^2 + 2r)) written without cancellation
    x = mean / (1.0 + r + np.sqrt(r * r + 2.0 * r))
    accept = rng.uniform(size=size) <= mean / (mean + x)
    return np.where(accept, x, mean * mean / x)


def sample_levy(scale: float, rng: np.random.Generator, size=None):
    """Levy(0, scale) draws: first passage of a driftless Brownian motion"""
    z = rng.standard_normal(size)
    return scale / (z * z)


def sample_nigig_increment(p: LimitLaw, dt: float, rng: np.random.Generator, size=None):
    """
    One increment (x, y) of the NIG-IG process over dt.

    Lambda ~ IG(delta dt / gamma, delta^2 dt^2), or Levy(0, delta^2 dt^2) when gamma = 0;
    x = mu dt + beta Lambda + sqrt(Lambda) N and y = lambda Lambda.
    """
    if dt <= 0:
        raise ParameterError("dt must be positive")
    if isinstance(p, GaussianLimitParams):
        x = p.mu * dt + np.sqrt(p.sigma2 * dt) * rng.standard_normal(size)
        return x, np.full_like(x, p.sigma2 * dt, dtype=float)
    level = p.delta * dt
    if p.gamma > 0:
        clock = sample_ig(level / p.gamma, level * level, rng, size)
    else:
        clock = sample_levy(level * level, rng, size)
    x = p.mu * dt + p.beta * clock + np.sqrt(clock) * rng.standard_normal(size)
    return x, p.lam * clock


@dataclass
class HittingTimeSample:
    """Lambda_t per path (rows) and grid time (columns)"""
    times: np.ndarray
    values: np.ndarray


@dataclass
class NigIgPaths:
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    hitting: HittingTimeSample


def simulate_nigig(p: LimitLaw, cfg: SampleConfig) -> NigIgPaths:
    """Cumulative NIG-IG paths on the grid, built from independent increments"""
    times = np.asarray(cfg.times, dtype=float)
    widths = np.diff(np.concatenate([[0.0], times]))

    def worker(n, rng):
        x = np.empty((n, len(times)))
        y = np.empty_like(x)
        for k, dt in enumerate(widths):
            x[:, k], y[:, k] = sample_nigig_increment(p, dt, rng, n)
        return np.cumsum(x, axis=1), np.cumsum(y, axis=1)

    parts = _run_chunks(cfg, worker)
    x = np.vstack([part[0] for part in parts])
    y = np.vstack([part[1] for part in parts])
    if isinstance(p, GaussianLimitParams):
        clock = np.broadcast_to(times, x.shape).copy()
    else:
        clock = y / p.lam
    return NigIgPaths(times=times, x=x, y=y, hitting=HittingTimeSample(times=times, values=clock))


@dataclass
class ReversionaryPaths:
    times: np.ndarray
    log_s: np.ndarray
    vbar: np.ndarray
    variance: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        """Sample dump with columns path_id, t, log_s, vbar"""
        n_paths, n_times = self.log_s.shape
        return pd.DataFrame({
            "path_id": np.repeat(np.arange(n_paths), n_times),
            "t": np.tile(self.times, n_paths),
            "log_s": self.log_s.ravel(),
            "vbar": self.vbar.ravel(),
        })


def max_substep(params: ReversionaryParams) -> float:
    """
    Longest Euler substep for the variance: a quarter of eps, and a tenth of the time the
    vol of vol eps^(H-1/2) xi needs to move V by its stationary mean.
    """
    level = params.v0 + params.vol_scale * params.theta / params.mean_reversion
    vol = params.vol_scale * params.xi
    return min(STIFFNESS_RATIO * params.eps, DIFFUSION_RATIO * level / vol ** 2)


def required_substeps(params: ReversionaryParams, width: float) -> int:
    return max(1, int(np.ceil(width / max_substep(params))))


def simulate_reversionary(params: ReversionaryParams, cfg: SampleConfig) -> ReversionaryPaths:
    """
    Full-truncation Euler for V with the log-spot update driven by V+ on each substep.

    Vbar accumulates left-endpoint sums of V+. Substeps longer than max_substep are rejected.
    """
    times = np.asarray(cfg.times, dtype=float)
    widths = np.diff(np.concatenate([[0.0], times]))
    substep = widths.max() / cfg.substeps
    limit = max_substep(params)
    if substep > limit * (1.0 + 1e-12):
        raise ConfigError(
            f"substeps: substep {substep:.3g} exceeds {limit:.3g}; "
            f"use at least {required_substeps(params, widths.max())} substeps"
        )
    scale = params.vol_scale
    drift_level = scale * params.theta
    reversion = params.mean_reversion
    vol = scale * params.xi
    rho = params.rho
    rho_perp = np.sqrt(1.0 - rho * rho)
    log_s0 = np.log(params.s0)

    def worker(n, rng):
        log_s = np.full(n, log_s0)
        vbar = np.zeros(n)
        v = np.full(n, params.v0)
        out = np.empty((3, n, len(times)))
        for k, width in enumerate(widths):
            dt = width / cfg.substeps
            sq_dt = np.sqrt(dt)
            for _ in range(cfg.substeps):
                z = rng.standard_normal((2, n))
                v_pos = np.maximum(v, 0.0)
                sq_v = np.sqrt(v_pos)
                log_s += -0.5 * v_pos * dt + sq_v * sq_dt * (rho * z[0] + rho_perp * z[1])
                vbar += v_pos * dt
                v = v + (drift_level - reversion * (v_pos - params.v0)) * dt + vol * sq_v * sq_dt * z[0]
            out[0, :, k], out[1, :, k], out[2, :, k] = log_s, vbar, v
        return out

    parts = _run_chunks(cfg, worker)
    stacked = np.concatenate(parts, axis=1)
    logger.debug(f"simulate_reversionary: {cfg.n_paths} paths, {len(times)} times, "
                 f"{cfg.substeps} substeps, {len(parts)} chunks")
    return ReversionaryPaths(times=times, log_s=stacked[0], vbar=stacked[1], variance=stacked[2])


@dataclass(frozen=True)
class EmpiricalCf:
    """Sample mean of exp(iux + ivy) and its componentwise standard error (re + i im)"""
    value: complex
    std_error: complex


def empirical_cf(samples, arg: FourierArg) -> EmpiricalCf:
    """samples is an (n, 2) array-like of (x, y) pairs or a tuple of two equal-length arrays"""
    if isinstance(samples, tuple) and len(samples) == 2:
        x, y = (np.asarray(s, dtype=float).ravel() for s in samples)
    else:
        pairs = np.asarray(samples, dtype=float)
        if pairs.size == 0:
            raise ParameterError("empirical_cf needs at least one sample")
        pairs = pairs.reshape(-1, 2)
        x, y = pairs[:, 0], pairs[:, 1]
    if x.size == 0 or x.size != y.size:
        raise ParameterError("empirical_cf needs a nonempty set of (x, y) pairs")
    terms = np.exp(1j * (float(arg.u) * x + float(arg.v) * y))
    n = terms.size
    if n > 1:
        se = complex(terms.real.std(ddof=1), terms.imag.std(ddof=1)) / np.sqrt(n)
    else:
        se = 0j
    return EmpiricalCf(value=complex(terms.mean()), std_error=se)
