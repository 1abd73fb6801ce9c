"""
European option pricing by Fourier-cosine expansion, Black-Scholes utilities,
implied volatility and at-the-money skew.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.optimize import brentq
from scipy.stats import norm

from core import GridMismatchError, MissingCellError, NoSolutionError, NumericFailure, ParameterError

DEFAULT_N_TERMS = 256
DEFAULT_RANGE_WIDTH = 12.0
VOL_BRACKET = (1e-8, 5.0)

CharacteristicFunction = Callable[[np.ndarray], np.ndarray]


def black_scholes_call(s0: float, strike, T: float, sigma):
    strike = np.asarray(strike, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    total = sigma * np.sqrt(T)
    d1 = (np.log(s0 / strike) + 0.5 * total ** 2) / total
    d2 = d1 - total
    value = s0 * norm.cdf(d1) - strike * norm.cdf(d2)
    return float(value) if np.ndim(value) == 0 else value


def black_scholes_put(s0: float, strike, T: float, sigma):
    return black_scholes_call(s0, strike, T, sigma) - s0 + np.asarray(strike, dtype=float)


def black_scholes_vega(s0: float, strike, T: float, sigma):
    strike = np.asarray(strike, dtype=float)
    total = np.asarray(sigma, dtype=float) * np.sqrt(T)
    d1 = (np.log(s0 / strike) + 0.5 * total ** 2) / total
    value = s0 * np.sqrt(T) * norm.pdf(d1)
    return float(value) if np.ndim(value) == 0 else value


def _log_cf(cf_x: CharacteristicFunction, u: np.ndarray) -> np.ndarray:
    values = np.asarray(cf_x(u), dtype=complex)
    if not np.all(np.isfinite(values)) or np.any(values == 0):
        raise NumericFailure("characteristic function is not usable near u = 0 for cumulant estimation")
    return np.log(values)


def cumulants(cf_x: CharacteristicFunction) -> Tuple[float, float, float]:
    """First, second and fourth cumulants from central differences of log cf at 0"""
    h = 1e-3
    lp, lm = _log_cf(cf_x, np.array([h, -h]))
    c1 = ((lp - lm) / (2.0 * h)).imag
    c2 = max(-((lp + lm) / h ** 2).real, 0.0)
    # must stay well inside the analyticity strip of log cf (NIG: alpha - |beta|)
    h4 = 2e-2
    l2p, l1p, l1m, l2m = _log_cf(cf_x, np.array([2 * h4, h4, -h4, -2 * h4]))
    c4 = max(((l2p - 4.0 * l1p - 4.0 * l1m + l2m) / h4 ** 4).real, 0.0)
    return float(c1), float(c2), float(c4)


def _chi_psi(u: np.ndarray, a: np.ndarray, c: np.ndarray, d: np.ndarray):
    """Cosine coefficients of e^y and 1 over [c, d] relative to the interval start a"""
    ud = u[:, None] * (d - a)[None, :]
    uc = u[:, None] * (c - a)[None, :]
    ed = np.exp(d)[None, :]
    ec = np.exp(c)[None, :]
    uu = u[:, None]
    chi = (np.cos(ud) * ed - np.cos(uc) * ec + uu * np.sin(ud) * ed - uu * np.sin(uc) * ec) / (1.0 + uu ** 2)
    psi = np.empty_like(chi)
    psi[0] = d - c
    psi[1:] = (np.sin(ud[1:]) - np.sin(uc[1:])) / uu[1:]
    return chi, psi


def cos_prices(
    cf: CharacteristicFunction,
    s0: float,
    strikes,
    T: float,
    n_terms: int = DEFAULT_N_TERMS,
    range_width: float = DEFAULT_RANGE_WIDTH,
    option: str = "call",
    via_parity: bool = True,
) -> np.ndarray:
    """
    COS prices for a vector of strikes, zero rates.

    cf is the CF of log S_T. The expansion runs on y = log(S_T / K) over
    [x0 + c1 - w, x0 + c1 + w] with x0 = log(S0/K) and w = L sqrt(c2 + sqrt(c4)).
    Calls default to the put expansion plus parity.
    """
    if n_terms < 16:
        raise ParameterError("n_terms must be at least 16")
    if range_width < 6:
        raise ParameterError("range_width must be at least 6")
    if option not in ("call", "put"):
        raise ParameterError(f"unknown option type '{option}'")
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    if np.any(strikes < 0):
        raise ParameterError("strikes must be nonnegative")

    log_s0 = np.log(s0)

    def cf_x(u):
        return np.asarray(cf(u), dtype=complex) * np.exp(-1j * u * log_s0)

    c1, c2, c4 = cumulants(cf_x)
    half_width = range_width * np.sqrt(c2 + np.sqrt(c4))
    if half_width <= 0:
        raise NumericFailure("degenerate truncation range (zero variance)")
    length = 2.0 * half_width
    k = np.arange(n_terms)
    u = k * np.pi / length
    cf_values = cf_x(u)
    bad = np.flatnonzero(~np.isfinite(cf_values))
    if len(bad):
        raise NumericFailure(f"non-finite characteristic function at frequency u={u[bad[0]]:.6g} (term {bad[0]})")
    weights = np.ones(n_terms)
    weights[0] = 0.5
    # phase exp(i u (x0 - a)) is strike independent since x0 - a = w - c1
    coefficients = weights * (cf_values * np.exp(1j * u * (half_width - c1))).real

    positive = strikes > 0
    result = np.zeros(len(strikes))
    if np.any(positive):
        ks = strikes[positive]
        x0 = np.log(s0 / ks)
        a = x0 + c1 - half_width
        b = x0 + c1 + half_width
        if option == "put" or via_parity:
            c_lo, d_hi = a, np.minimum(b, 0.0)
            chi, psi = _chi_psi(u, a, c_lo, d_hi)
            payoff = np.where((d_hi > c_lo)[None, :], psi - chi, 0.0)
        else:
            c_lo, d_hi = np.maximum(a, 0.0), b
            chi, psi = _chi_psi(u, a, c_lo, d_hi)
            payoff = np.where((d_hi > c_lo)[None, :], chi - psi, 0.0)
        values = ks * (2.0 / length) * (coefficients @ payoff)
        if option == "call" and via_parity:
            values = values + s0 - ks
        result[positive] = values
    if np.any(~positive) and option == "call":
        result[~positive] = s0
    return result


def cos_price(cf: CharacteristicFunction, s0: float, strike: float, T: float,
              n_terms: int = DEFAULT_N_TERMS, range_width: float = DEFAULT_RANGE_WIDTH,
              option: str = "call", via_parity: bool = True) -> float:
    return float(cos_prices(cf, s0, [strike], T, n_terms, range_width, option, via_parity)[0])


def implied_vol(price: float, s0: float, strike: float, T: float) -> float:
    """Black-Scholes implied volatility of a call price by bracketed root finding"""
    lower = max(s0 - strike, 0.0)
    if not (lower < price < s0):
        raise NoSolutionError(f"call price {price} outside the no-arbitrage band ({lower}, {s0})")
    lo, hi = VOL_BRACKET

    def excess(sigma):
        return black_scholes_call(s0, strike, T, sigma) - price

    if excess(lo) >= 0:
        return lo
    if excess(hi) <= 0:
        raise NoSolutionError(f"implied volatility above {hi}")
    return float(brentq(excess, lo, hi, xtol=1e-16, rtol=1e-14, maxiter=500))


@dataclass
class VolSurface:
    """Call prices and implied vols on a maturity x log-moneyness grid"""
    s0: float
    maturities: np.ndarray
    log_moneyness: np.ndarray
    call_prices: np.ndarray
    implied_vols: Optional[np.ndarray] = None
    missing: List[Tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.maturities = np.asarray(self.maturities, dtype=float)
        self.log_moneyness = np.asarray(self.log_moneyness, dtype=float)
        self.call_prices = np.asarray(self.call_prices, dtype=float)
        shape = (len(self.maturities), len(self.log_moneyness))
        if self.call_prices.shape != shape:
            raise ParameterError(f"price grid has shape {self.call_prices.shape}, expected {shape}")
        if self.implied_vols is not None:
            self.implied_vols = np.asarray(self.implied_vols, dtype=float)

    @property
    def strikes(self) -> np.ndarray:
        return self.s0 * np.exp(self.log_moneyness)

    @property
    def is_complete(self) -> bool:
        return not self.missing and bool(np.all(np.isfinite(self.call_prices)))

    def same_grid(self, other: "VolSurface") -> bool:
        return (
            self.maturities.shape == other.maturities.shape
            and self.log_moneyness.shape == other.log_moneyness.shape
            and np.allclose(self.maturities, other.maturities, rtol=0, atol=1e-14)
            and np.allclose(self.log_moneyness, other.log_moneyness, rtol=0, atol=1e-14)
        )

    def maturity_index(self, T: float) -> int:
        hits = np.flatnonzero(np.isclose(self.maturities, T, rtol=1e-12, atol=1e-14))
        if not len(hits):
            raise MissingCellError(f"maturity {T} not on the surface")
        return int(hits[0])

    def vol_at(self, T: float, k: float) -> float:
        i = self.maturity_index(T)
        hits = np.flatnonzero(np.isclose(self.log_moneyness, k, rtol=1e-12, atol=1e-14))
        if not len(hits) or self.implied_vols is None or not np.isfinite(self.implied_vols[i, hits[0]]):
            raise MissingCellError(f"no implied vol at (T={T}, k={k})")
        return float(self.implied_vols[i, hits[0]])

    def to_frame(self) -> pd.DataFrame:
        n_t, n_k = self.call_prices.shape
        vols = self.implied_vols if self.implied_vols is not None else np.full((n_t, n_k), np.nan)
        return pd.DataFrame({
            "maturity_years": np.repeat(self.maturities, n_k),
            "log_moneyness": np.tile(self.log_moneyness, n_t),
            "call_price": self.call_prices.ravel(),
            "implied_vol": vols.ravel(),
        })

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, s0: float) -> "VolSurface":
        required = {"maturity_years", "log_moneyness", "call_price"}
        if not required.issubset(frame.columns):
            raise ParameterError(f"surface table needs columns {sorted(required)}")
        maturities = np.unique(frame["maturity_years"].to_numpy(dtype=float))
        ks = np.unique(frame["log_moneyness"].to_numpy(dtype=float))
        wide = frame.pivot(index="maturity_years", columns="log_moneyness", values="call_price")
        wide = wide.reindex(index=maturities, columns=ks)
        vols = None
        if "implied_vol" in frame.columns:
            vols = frame.pivot(index="maturity_years", columns="log_moneyness", values="implied_vol")
            vols = vols.reindex(index=maturities, columns=ks).to_numpy(dtype=float)
        prices = wide.to_numpy(dtype=float)
        missing = [tuple(ix) for ix in np.argwhere(~np.isfinite(prices))]
        return cls(s0=s0, maturities=maturities, log_moneyness=ks, call_prices=prices,
                   implied_vols=vols, missing=missing)

    @classmethod
    def read_csv(cls, path: str, s0: float) -> "VolSurface":
        return cls.from_frame(pd.read_csv(path), s0)


def _smile_row(model, T: float, ks: np.ndarray, n_terms: int, range_width: float):
    strikes = model.s0 * np.exp(ks)
    prices = cos_prices(lambda u: model.cf(u, T), model.s0, strikes, T, n_terms, range_width)
    vols = np.full(len(ks), np.nan)
    failed = []
    for j, (strike, price) in enumerate(zip(strikes, prices)):
        try:
            vols[j] = implied_vol(price, model.s0, strike, T)
        except NoSolutionError as e:
            failed.append(j)
            logger.warning(f"smile: missing implied vol at T={T:.6g}, k={ks[j]:.4g}: {e}")
    return prices, vols, failed


def smile(model, maturities: Sequence[float], ks: Sequence[float], n_terms: int = DEFAULT_N_TERMS,
          range_width: float = DEFAULT_RANGE_WIDTH, threads: int = 1) -> VolSurface:
    """
    Price a full (T, k) grid with a CF provider exposing s0 and cf(u, T).

    Failed cells are recorded in VolSurface.missing; a failing maturity loses its row only.
    """
    maturities = np.asarray(maturities, dtype=float)
    ks = np.asarray(ks, dtype=float)
    prices = np.full((len(maturities), len(ks)), np.nan)
    vols = np.full_like(prices, np.nan)
    missing: List[Tuple[int, int]] = []

    def run(T):
        try:
            return _smile_row(model, T, ks, n_terms, range_width)
        except NumericFailure as e:
            logger.warning(f"smile: maturity {T:.6g} failed: {e}")
            return None

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(run, maturities))

    for i, row in enumerate(rows):
        if row is None:
            missing.extend((i, j) for j in range(len(ks)))
            continue
        prices[i], vols[i], failed = row
        missing.extend((i, j) for j in failed)
    logger.debug(f"smile: {len(maturities)}x{len(ks)} grid, {len(missing)} missing cells")
    return VolSurface(s0=model.s0, maturities=maturities, log_moneyness=ks,
                      call_prices=prices, implied_vols=vols, missing=missing)


def atm_skew(source, T: float, dk: float = 1e-3, n_terms: int = DEFAULT_N_TERMS,
             range_width: float = DEFAULT_RANGE_WIDTH) -> float:
    """|sigma(dk, T) - sigma(-dk, T)| / (2 dk) from a surface or a CF provider"""
    if dk <= 0:
        raise ParameterError("dk must be positive")
    if isinstance(source, VolSurface):
        up, down = source.vol_at(T, dk), source.vol_at(T, -dk)
    else:
        strikes = source.s0 * np.exp(np.array([dk, -dk]))
        prices = cos_prices(lambda u: source.cf(u, T), source.s0, strikes, T, n_terms, range_width)
        try:
            up = implied_vol(prices[0], source.s0, strikes[0], T)
            down = implied_vol(prices[1], source.s0, strikes[1], T)
        except NoSolutionError as e:
            raise MissingCellError(f"ATM skew at T={T}: {e}") from e
    return abs(up - down) / (2.0 * dk)


def skew_term_structure(source, maturities: Sequence[float], dk: float = 1e-3,
                        n_terms: int = DEFAULT_N_TERMS, range_width: float = DEFAULT_RANGE_WIDTH) -> pd.DataFrame:
    maturities = np.asarray(maturities, dtype=float)
    skews = [atm_skew(source, T, dk, n_terms, range_width) for T in maturities]
    return pd.DataFrame({"maturity_years": maturities, "atm_skew": skews})


def max_vol_gap(surface_a: VolSurface, surface_b: VolSurface) -> float:
    """Largest absolute implied-vol difference over cells present in both surfaces"""
    if not surface_a.same_grid(surface_b):
        raise GridMismatchError("surfaces live on different grids")
    if surface_a.implied_vols is None or surface_b.implied_vols is None:
        raise MissingCellError("implied vols are missing")
    gap = np.abs(surface_a.implied_vols - surface_b.implied_vols)
    return float(np.nanmax(gap))
