"""
Command wrappers behind the CLI; each module exposes one command function and COMMAND_METADATA
"""
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from settings import RoughSolverConfig


@dataclass
class RunContext:
    """Where and how a command runs"""
    output_dir: str
    seed: Optional[int] = None
    threads: int = 1
    settings: Dict[str, Any] = field(default_factory=dict)

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)


def cos_settings(cfg, ctx: RunContext) -> Tuple[int, float]:
    """COS settings from the run config, else from the environment"""
    if "cos" in cfg.model_fields_set or not ctx.settings:
        return cfg.cos.n_terms, cfg.cos.range_width
    return ctx.settings["cos_terms"], ctx.settings["cos_range"]


def rough_solver(cfg, ctx: RunContext) -> RoughSolverConfig:
    if "rough_solver" in cfg.model_fields_set or not ctx.settings:
        return cfg.rough_solver
    return RoughSolverConfig(n_steps=ctx.settings["rough_steps"])


def write_csv(frame, ctx: RunContext, name: str) -> str:
    path = ctx.path(name)
    frame.to_csv(path, index=False)
    return path
