"""
Experiment orchestrator: routes a command name to its wrapper, maps failures to exit
codes and writes the run manifest next to the outputs
"""
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional

from loguru import logger
from pydantic import ValidationError

# Add current directory to Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from commands import RunContext
from commands.calibrate_command import COMMAND_METADATA as CALIBRATE
from commands.converge_command import COMMAND_METADATA as CONVERGE
from commands.price_command import COMMAND_METADATA as PRICE
from commands.simulate_command import COMMAND_METADATA as SIMULATE
from commands.skew_command import COMMAND_METADATA as SKEW
from commands.smile_command import COMMAND_METADATA as SMILE
from core import ConfigError, NumericFailure, ParameterError
from settings import __version__, load_run_config, load_runtime_settings, resolve_threads

EXIT_SUCCESS = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_NOT_CONVERGED = 4


@dataclass
class RunManifest:
    command: str
    config_path: str
    output_dir: str
    seed: Optional[int]
    version: str
    wall_time_seconds: float
    status: str
    exit_code: int
    outputs: List[str]


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, (ConfigError, ParameterError, ValidationError)):
        return EXIT_CONFIG
    if isinstance(error, NumericFailure):
        return EXIT_NUMERIC
    return EXIT_UNEXPECTED


class ExperimentOrchestrator:
    """Runs one command per call and always leaves a manifest behind"""

    def __init__(self):
        self.commands = {meta["name"]: meta for meta in (PRICE, CONVERGE, SMILE, SKEW, CALIBRATE, SIMULATE)}

    def list_commands(self) -> Dict[str, str]:
        return {name: meta["description"] for name, meta in self.commands.items()}

    def run(
        self,
        command: str,
        config_path: str,
        output_dir: Optional[str] = None,
        seed: Optional[int] = None,
        threads: Optional[int] = None,
    ) -> Dict[str, Any]:
        """
        Execute a command and return its status dict, extended with exit_code.

        Errors never propagate: they are logged and reported with the exit code of
        their class.
        """
        started = time.perf_counter()
        result: Dict[str, Any]
        try:
            if command not in self.commands:
                raise ConfigError(f"command: unknown command '{command}'")
            settings = load_runtime_settings()
            output_dir = output_dir if output_dir is not None else settings["output_dir"]
            meta = self.commands[command]
            cfg = load_run_config(config_path, meta["config_schema"])
            os.makedirs(output_dir, exist_ok=True)
            ctx = RunContext(output_dir=output_dir, seed=seed, threads=resolve_threads(threads, settings),
                             settings=settings)
            logger.info(f"{command}: config={config_path}, out={output_dir}, threads={ctx.threads}")
            result = meta["handler"](cfg, ctx)
            if result.get("converged") is False:
                result["exit_code"] = EXIT_NOT_CONVERGED
            else:
                result["exit_code"] = EXIT_SUCCESS
        except Exception as e:
            code = exit_code_for(e)
            if code == EXIT_UNEXPECTED:
                logger.exception(f"{command}: unexpected failure")
            else:
                logger.error(f"{command}: {e}")
            result = {"status": "error", "error": str(e), "exit_code": code, "outputs": []}

        manifest = RunManifest(
            command=command,
            config_path=config_path,
            output_dir=output_dir or "output",
            seed=result.get("seed", seed),
            version=__version__,
            wall_time_seconds=time.perf_counter() - started,
            status=result["status"],
            exit_code=result["exit_code"],
            outputs=[os.path.basename(path) for path in result.get("outputs", [])],
        )
        self._write_manifest(manifest)
        return result

    def _write_manifest(self, manifest: RunManifest) -> None:
        try:
            os.makedirs(manifest.output_dir, exist_ok=True)
            with open(os.path.join(manifest.output_dir, "manifest.json"), "w") as f:
                json.dump(asdict(manifest), f, indent=2, sort_keys=True)
        except OSError as e:
            logger.error(f"could not write manifest: {e}")


# Global orchestrator instance
_orchestrator_instance = None


def get_orchestrator() -> ExperimentOrchestrator:
    """Get singleton orchestrator instance"""
    global _orchestrator_instance
    if _orchestrator_instance is None:
        _orchestrator_instance = ExperimentOrchestrator()
    return _orchestrator_instance
