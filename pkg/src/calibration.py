"""
Calibration of the reversionary pair (eps, H) to a target call-price surface.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import minimize

from core import GridMismatchError, MissingCellError, NumericFailure, ParameterError, ReversionaryParams
from model_factory import ReversionaryModel
from pricing import DEFAULT_N_TERMS, DEFAULT_RANGE_WIDTH, VolSurface, black_scholes_vega, cos_prices

TARGET_MATURITIES = (1.0 / 52, 2.0 / 52, 1.0 / 12, 3.0 / 12, 6.0 / 12, 1.0)
TARGET_LOG_MONEYNESS = (-0.2, 0.1, 13)
FAILED_LOSS = 1e10


def target_grid() -> Tuple[np.ndarray, np.ndarray]:
    """Default calibration grid: one week to one year, k in [-0.2, 0.1]"""
    lo, hi, n = TARGET_LOG_MONEYNESS
    return np.array(TARGET_MATURITIES), np.linspace(lo, hi, n)


class CalibrationConfig(BaseModel):
    """Weights, starting point, bounds, optimizer tolerances and the fixed model parameters"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    weights: Union[Literal["uniform", "inverse_vega"], List[List[float]]] = "uniform"
    eps0: float = Field(default=0.1, gt=0.0)
    H0: float = 0.0
    eps_bounds: Tuple[float, float] = (1e-6, 10.0)
    H_bounds: Tuple[float, float] = (-3.0, 1.0)
    xatol: float = Field(default=1e-6, gt=0.0)
    fatol: float = Field(default=1e-15, gt=0.0)
    maxiter: int = Field(default=400, ge=1)
    restarts: int = Field(default=3, ge=0)
    loss_threshold: Optional[float] = Field(default=None, ge=0.0)
    s0: float = Field(default=1.0, gt=0.0)
    v0: float = Field(gt=0.0)
    theta: float = Field(ge=0.0)
    xi: float = Field(gt=0.0)
    rho: float = Field(ge=-1.0, le=1.0)
    n_terms: int = Field(default=DEFAULT_N_TERMS, ge=16)
    range_width: float = Field(default=DEFAULT_RANGE_WIDTH, ge=6.0)
    threads: int = Field(default=1, ge=1)
    rescaled_reversion: bool = True

    @model_validator(mode="after")
    def _check(self) -> "CalibrationConfig":
        if not 0.0 < self.eps_bounds[0] < self.eps_bounds[1]:
            raise ValueError("eps_bounds must satisfy 0 < lower < upper")
        if not self.H_bounds[0] < self.H_bounds[1]:
            raise ValueError("H_bounds must satisfy lower < upper")
        if not self.rescaled_reversion and self.H_bounds[1] >= 0.5:
            raise ValueError("un-rescaled reversion needs H_bounds below 1/2")
        if not self.eps_bounds[0] <= self.eps0 <= self.eps_bounds[1]:
            raise ValueError("eps0 outside eps_bounds")
        if not self.H_bounds[0] <= self.H0 <= self.H_bounds[1]:
            raise ValueError("H0 outside H_bounds")
        if isinstance(self.weights, list) and np.any(np.asarray(self.weights, dtype=float) < 0):
            raise ValueError("weights must be nonnegative")
        return self

    def candidate(self, eps: float, H: float) -> ReversionaryParams:
        return ReversionaryParams(s0=self.s0, v0=self.v0, theta=self.theta, xi=self.xi, rho=self.rho, eps=eps, H=H,
                                  rescaled_reversion=self.rescaled_reversion)


@dataclass
class CalibrationResult:
    eps_hat: float
    H_hat: float
    loss: float
    iterations: int
    trace: pd.DataFrame
    converged: bool

    def summary(self) -> dict:
        return {
            "eps_hat": self.eps_hat,
            "H_hat": self.H_hat,
            "loss": self.loss,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def price_grid(model, maturities, ks, n_terms: int = DEFAULT_N_TERMS, range_width: float = DEFAULT_RANGE_WIDTH,
               threads: int = 1) -> VolSurface:
    """Call prices on a grid, without implied vols"""
    maturities = np.asarray(maturities, dtype=float)
    ks = np.asarray(ks, dtype=float)
    strikes = model.s0 * np.exp(ks)

    def row(T):
        return cos_prices(lambda u: model.cf(u, T), model.s0, strikes, T, n_terms, range_width)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        prices = np.vstack(list(pool.map(row, maturities)))
    return VolSurface(s0=model.s0, maturities=maturities, log_moneyness=ks, call_prices=prices)


def weight_matrix(target: VolSurface, cfg: CalibrationConfig) -> np.ndarray:
    shape = target.call_prices.shape
    if cfg.weights == "uniform":
        return np.ones(shape)
    if cfg.weights == "inverse_vega":
        if target.implied_vols is None or not np.all(np.isfinite(target.implied_vols)):
            raise MissingCellError("inverse-vega weights need implied vols on every target cell")
        vegas = np.vstack([
            black_scholes_vega(target.s0, target.strikes, T, target.implied_vols[i])
            for i, T in enumerate(target.maturities)
        ])
        return 1.0 / np.maximum(vegas, 1e-12)
    weights = np.asarray(cfg.weights, dtype=float)
    if weights.shape != shape:
        raise GridMismatchError(f"weights have shape {weights.shape}, surface has {shape}")
    return weights


def surface_loss(target: VolSurface, candidate: VolSurface, weights: np.ndarray) -> float:
    """Weighted sum of squared call-price differences"""
    if not target.same_grid(candidate):
        raise GridMismatchError("target and candidate surfaces live on different grids")
    if weights.shape != target.call_prices.shape:
        raise GridMismatchError("weights do not match the surface grid")
    return float(np.sum(weights * (target.call_prices - candidate.call_prices) ** 2))


def loss(target: VolSurface, candidate: ReversionaryParams, cfg: CalibrationConfig) -> float:
    surface = price_grid(ReversionaryModel(candidate), target.maturities, target.log_moneyness,
                         cfg.n_terms, cfg.range_width, cfg.threads)
    return surface_loss(target, surface, weight_matrix(target, cfg))


def calibrate(target: VolSurface, cfg: CalibrationConfig) -> CalibrationResult:
    """
    Nelder-Mead over (log eps, H) within the configured bounds, restarted from the best point.

    Candidates whose pricing fails are assigned a large loss instead of stopping the search.
    """
    if not target.is_complete:
        raise MissingCellError(f"target surface has {len(target.missing)} missing cells")
    weights = weight_matrix(target, cfg)
    bounds = [tuple(np.log(cfg.eps_bounds)), cfg.H_bounds]
    records = []

    def objective(x):
        eps, H = float(np.exp(x[0])), float(x[1])
        try:
            candidate = price_grid(ReversionaryModel(cfg.candidate(eps, H)), target.maturities,
                                   target.log_moneyness, cfg.n_terms, cfg.range_width, cfg.threads)
            value = surface_loss(target, candidate, weights)
        except (NumericFailure, ParameterError, ValueError) as e:
            logger.debug(f"calibrate: candidate eps={eps:.6g}, H={H:.6g} failed: {e}")
            value = FAILED_LOSS
        if not np.isfinite(value):
            value = FAILED_LOSS
        records.append({"evaluation": len(records), "eps": eps, "H": H, "loss": value})
        return value

    start = np.array([np.log(cfg.eps0), cfg.H0])
    best_x, best_loss = start, objective(start)
    iterations = 0
    success = False
    for attempt in range(cfg.restarts + 1):
        result = minimize(
            objective,
            best_x,
            method="Nelder-Mead",
            bounds=bounds,
            options={"xatol": cfg.xatol, "fatol": cfg.fatol, "maxiter": cfg.maxiter},
        )
        iterations += int(result.nit)
        improved = best_loss - result.fun
        if result.fun <= best_loss:
            best_x, best_loss = np.asarray(result.x), float(result.fun)
        success = bool(result.success)
        logger.info(f"calibrate: pass {attempt} eps={np.exp(best_x[0]):.8f} H={best_x[1]:.8f} "
                    f"loss={best_loss:.6e} ({result.nit} iterations)")
        if attempt > 0 and improved <= cfg.fatol:
            break

    trace = pd.DataFrame(records, columns=["evaluation", "eps", "H", "loss"])
    trace["best_loss"] = trace["loss"].cummin()
    converged = success and (cfg.loss_threshold is None or best_loss <= cfg.loss_threshold)
    if not converged:
        logger.warning(f"calibrate: not converged, returning best point with loss {best_loss:.6e}")
    return CalibrationResult(
        eps_hat=float(np.exp(best_x[0])),
        H_hat=float(best_x[1]),
        loss=best_loss,
        iterations=iterations,
        trace=trace,
        converged=converged,
    )
