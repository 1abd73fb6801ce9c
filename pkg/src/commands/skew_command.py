"""
Skew Command - at-the-money skew term structure
"""
from typing import Any, Dict

from commands import RunContext, cos_settings, rough_solver, write_csv
from pricing import skew_term_structure
from settings import SkewRunConfig


def skew_command(cfg: SkewRunConfig, ctx: RunContext) -> Dict[str, Any]:
    model = cfg.model.build(rough_solver(cfg, ctx))
    n_terms, range_width = cos_settings(cfg, ctx)
    frame = skew_term_structure(model, cfg.maturities, cfg.dk, n_terms, range_width)
    return {
        "status": "success",
        "outputs": [write_csv(frame, ctx, "skew.csv")],
    }


COMMAND_METADATA = {
    "name": "skew",
    "description": "ATM skew |sigma(dk) - sigma(-dk)| / (2 dk) per maturity",
    "config_schema": SkewRunConfig,
    "handler": skew_command,
    "outputs": ["skew.csv"],
}
