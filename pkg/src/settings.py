"""
Runtime settings from the environment and pydantic schemas for JSON run configurations
"""
import json
import os
from typing import Any, Dict, List, Literal, Optional, Tuple, Type, TypeVar

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from calibration import CalibrationConfig
from charfn import REGIME_DEFAULT_H
from core import ConfigError, ReversionaryParams, RoughParams, days_to_years
from model_factory import LIMIT_KINDS, CharacteristicModel, ModelFactory
from pricing import DEFAULT_N_TERMS, DEFAULT_RANGE_WIDTH

load_dotenv()

__version__ = "0.1.0"

ModelKind = Literal["reversionary", "rough", "nig-limit", "bs-limit", "nl-limit"]


def load_runtime_settings() -> Dict[str, Any]:
    """Load runtime settings from environment variables"""
    try:
        return {
            "threads": int(os.getenv("REVHESTON_THREADS", "0")),
            "log_level": os.getenv("REVHESTON_LOG_LEVEL", "INFO").upper(),
            "output_dir": os.getenv("REVHESTON_OUTPUT_DIR", "output"),
            "cos_terms": int(os.getenv("REVHESTON_COS_TERMS", str(DEFAULT_N_TERMS))),
            "cos_range": float(os.getenv("REVHESTON_COS_RANGE", str(DEFAULT_RANGE_WIDTH))),
            "rough_steps": int(os.getenv("REVHESTON_ROUGH_STEPS", "256")),
        }
    except ValueError as e:
        raise ConfigError(f"invalid REVHESTON_* environment variable: {e}") from e


def resolve_threads(threads: Optional[int], settings: Optional[Dict[str, Any]] = None) -> int:
    """--threads wins over REVHESTON_THREADS; 0 means one worker per CPU"""
    if threads is None:
        threads = (settings or load_runtime_settings())["threads"]
    if threads < 0:
        raise ConfigError("threads: must be nonnegative")
    return threads or (os.cpu_count() or 1)


class _Strict(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class CosConfig(_Strict):
    n_terms: int = Field(default=DEFAULT_N_TERMS, ge=16)
    range_width: float = Field(default=DEFAULT_RANGE_WIDTH, ge=6.0)


class RoughSolverConfig(_Strict):
    n_steps: int = Field(default=256, ge=4)
    corrector_iterations: int = Field(default=1, ge=1)
    implicit_corrector: bool = True


class ModelConfig(_Strict):
    """Flat model description; which fields are required depends on kind"""

    kind: ModelKind
    s0: float = 1.0
    v0: Optional[float] = None
    u0: Optional[float] = None
    theta: float
    xi: float
    rho: float
    eps: Optional[float] = None
    eps_unit: Literal["days", "years"] = "years"
    H: Optional[float] = None
    rescaled_reversion: bool = True
    gamma_normalized: bool = False

    @model_validator(mode="after")
    def _required_fields(self) -> "ModelConfig":
        if self.kind == "rough":
            missing = [name for name in ("u0", "H") if getattr(self, name) is None]
        elif self.kind == "reversionary":
            missing = [name for name in ("v0", "eps", "H") if getattr(self, name) is None]
        else:
            missing = [name for name in ("v0",) if getattr(self, name) is None]
        if missing:
            raise ValueError(f"model kind '{self.kind}' requires {', '.join(missing)}")
        return self

    @property
    def eps_years(self) -> Optional[float]:
        if self.eps is None:
            return None
        return days_to_years(self.eps) if self.eps_unit == "days" else self.eps

    def reversionary_params(self) -> ReversionaryParams:
        H = self.H
        eps = self.eps_years
        if self.kind in LIMIT_KINDS:
            # limit laws do not depend on (eps, H); fill them for the parameter model
            H = REGIME_DEFAULT_H[LIMIT_KINDS[self.kind]] if H is None else H
            eps = 1.0 if eps is None else eps
        return ReversionaryParams(s0=self.s0, v0=self.v0, theta=self.theta, xi=self.xi, rho=self.rho,
                                  eps=eps, H=H, rescaled_reversion=self.rescaled_reversion)

    def rough_params(self) -> RoughParams:
        return RoughParams(H=self.H, rho=self.rho, xi=self.xi, theta=self.theta, u0=self.u0, p0=self.s0,
                           gamma_normalized=self.gamma_normalized)

    def build(self, solver: Optional[RoughSolverConfig] = None) -> CharacteristicModel:
        if self.kind == "rough":
            solver = solver or RoughSolverConfig()
            return ModelFactory.get_model("rough", self.rough_params(), **solver.model_dump())
        return ModelFactory.get_model(self.kind, self.reversionary_params())


class _ModelRun(_Strict):
    model: ModelConfig
    cos: CosConfig = CosConfig()
    rough_solver: RoughSolverConfig = RoughSolverConfig()


class Quote(_Strict):
    maturity: float = Field(gt=0.0)
    strike: Optional[float] = Field(default=None, ge=0.0)
    log_moneyness: Optional[float] = None

    @model_validator(mode="after")
    def _one_of(self) -> "Quote":
        if (self.strike is None) == (self.log_moneyness is None):
            raise ValueError("give exactly one of strike and log_moneyness")
        return self


class PriceRunConfig(_ModelRun):
    quotes: List[Quote] = Field(min_length=1)


class SmileRunConfig(_ModelRun):
    maturities: List[float] = Field(min_length=1)
    log_moneyness: List[float] = Field(min_length=1)


class SkewRunConfig(_ModelRun):
    maturities: List[float] = Field(min_length=1)
    dk: float = Field(default=1e-3, gt=0.0)


class ConvergeRunConfig(_Strict):
    model: ModelConfig
    regimes: List[Literal["above", "at", "below"]] = ["above", "at", "below"]
    eps_days: List[float] = Field(min_length=1)
    us: List[float] = Field(min_length=1)
    v: float = 0.0
    T: float = Field(default=1.0, gt=0.0)
    H: Dict[str, float] = {}


class CalibrateRunConfig(_Strict):
    target_csv: Optional[str] = None
    target_model: Optional[ModelConfig] = None
    maturities: Optional[List[float]] = None
    log_moneyness: Optional[List[float]] = None
    calibration: CalibrationConfig
    cos: CosConfig = CosConfig()
    rough_solver: RoughSolverConfig = RoughSolverConfig()

    @model_validator(mode="after")
    def _one_target(self) -> "CalibrateRunConfig":
        if (self.target_csv is None) == (self.target_model is None):
            raise ValueError("give exactly one of target_csv and target_model")
        return self


class SimulateRunConfig(_Strict):
    model: ModelConfig
    n_paths: int = Field(ge=1)
    times: List[float] = Field(min_length=1)
    seed: int = Field(default=0, ge=0)
    substeps: int = Field(default=1, ge=1)
    chunk_size: int = Field(default=8192, ge=1)
    cf_args: List[Tuple[float, float]] = [(1.0, 0.0), (0.0, 1.0)]
    dump_samples: bool = False


ConfigT = TypeVar("ConfigT", bound=BaseModel)


def _field_name(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ())) or "<root>"


def parse_run_config(data: Dict[str, Any], schema: Type[ConfigT]) -> ConfigT:
    try:
        return schema.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"{_field_name(first)}: {first['msg']}") from e


def load_run_config(path: str, schema: Type[ConfigT]) -> ConfigT:
    """Read a JSON run configuration; malformed files raise ConfigError naming the field"""
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return parse_run_config(data, schema)
