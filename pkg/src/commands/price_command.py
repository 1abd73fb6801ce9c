"""
Price Command - European calls for a list of (maturity, strike) quotes
"""
from typing import Any, Dict

import numpy as np
import pandas as pd

from commands import RunContext, cos_settings, rough_solver, write_csv
from core import NoSolutionError
from pricing import cos_prices, implied_vol
from settings import PriceRunConfig


def price_command(cfg: PriceRunConfig, ctx: RunContext) -> Dict[str, Any]:
    """
    Price every quote and write prices.csv

    Returns:
        Dictionary with status, output paths and the number of priced quotes
    """
    model = cfg.model.build(rough_solver(cfg, ctx))
    n_terms, range_width = cos_settings(cfg, ctx)
    s0 = model.s0

    strikes = np.array([q.strike if q.strike is not None else s0 * np.exp(q.log_moneyness) for q in cfg.quotes])
    maturities = np.array([q.maturity for q in cfg.quotes])
    prices = np.empty(len(strikes))
    for T in np.unique(maturities):
        rows = np.flatnonzero(maturities == T)
        prices[rows] = cos_prices(lambda u: model.cf(u, T), s0, strikes[rows], T, n_terms, range_width)

    vols = np.full(len(strikes), np.nan)
    for i, (T, strike, price) in enumerate(zip(maturities, strikes, prices)):
        if strike <= 0:
            continue
        try:
            vols[i] = implied_vol(price, s0, strike, T)
        except NoSolutionError:
            pass

    with np.errstate(divide="ignore"):
        log_moneyness = np.log(strikes / s0)
    frame = pd.DataFrame({
        "maturity_years": maturities,
        "strike": strikes,
        "log_moneyness": log_moneyness,
        "call_price": prices,
        "implied_vol": vols,
    })
    return {
        "status": "success",
        "outputs": [write_csv(frame, ctx, "prices.csv")],
        "n_quotes": len(frame),
    }


COMMAND_METADATA = {
    "name": "price",
    "description": "Price European calls by COS for a list of quotes",
    "config_schema": PriceRunConfig,
    "handler": price_command,
    "outputs": ["prices.csv"],
}
