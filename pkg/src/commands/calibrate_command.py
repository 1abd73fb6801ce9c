"""
Calibrate Command - fit (eps, H) of the reversionary model to a target surface
"""
import json
from typing import Any, Dict

from calibration import calibrate, target_grid
from commands import RunContext, cos_settings, rough_solver, write_csv
from pricing import VolSurface, smile
from settings import CalibrateRunConfig


def _target_surface(cfg: CalibrateRunConfig, ctx: RunContext) -> VolSurface:
    if cfg.target_csv is not None:
        return VolSurface.read_csv(cfg.target_csv, cfg.calibration.s0)
    maturities, ks = target_grid()
    if cfg.maturities is not None:
        maturities = cfg.maturities
    if cfg.log_moneyness is not None:
        ks = cfg.log_moneyness
    model = cfg.target_model.build(rough_solver(cfg, ctx))
    n_terms, range_width = cos_settings(cfg, ctx)
    return smile(model, maturities, ks, n_terms, range_width, ctx.threads)


def calibrate_command(cfg: CalibrateRunConfig, ctx: RunContext) -> Dict[str, Any]:
    """
    Calibrate and write calibration.json plus calibration_trace.csv

    A generated target is also written as target_surface.csv.
    """
    outputs = []
    target = _target_surface(cfg, ctx)
    if cfg.target_model is not None:
        outputs.append(write_csv(target.to_frame(), ctx, "target_surface.csv"))

    calibration_cfg = cfg.calibration.model_copy(update={"threads": ctx.threads})
    result = calibrate(target, calibration_cfg)

    summary = result.summary()
    summary_path = ctx.path("calibration.json")
    with open(summary_path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    outputs.append(summary_path)
    outputs.append(write_csv(result.trace, ctx, "calibration_trace.csv"))
    return {
        "status": "success",
        "outputs": outputs,
        **summary,
    }


COMMAND_METADATA = {
    "name": "calibrate",
    "description": "Nelder-Mead calibration of (eps, H) against a target call-price surface",
    "config_schema": CalibrateRunConfig,
    "handler": calibrate_command,
    "outputs": ["calibration.json", "calibration_trace.csv"],
}
