"""
Smile Command - call prices and implied vols on a (maturity, log-moneyness) grid
"""
from typing import Any, Dict

from commands import RunContext, cos_settings, rough_solver, write_csv
from pricing import smile
from settings import SmileRunConfig


def smile_command(cfg: SmileRunConfig, ctx: RunContext) -> Dict[str, Any]:
    model = cfg.model.build(rough_solver(cfg, ctx))
    n_terms, range_width = cos_settings(cfg, ctx)
    surface = smile(model, cfg.maturities, cfg.log_moneyness, n_terms, range_width, ctx.threads)
    return {
        "status": "success",
        "outputs": [write_csv(surface.to_frame(), ctx, "smile.csv")],
        "missing_cells": len(surface.missing),
    }


COMMAND_METADATA = {
    "name": "smile",
    "description": "Implied-volatility surface of a model on a maturity x log-moneyness grid",
    "config_schema": SmileRunConfig,
    "handler": smile_command,
    "outputs": ["smile.csv"],
}
