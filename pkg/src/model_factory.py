"""
Characteristic-function providers with a singleton cache per (kind, parameters) pair
"""
from abc import ABC, abstractmethod
from collections import OrderedDict
from typing import Dict, Tuple

import numpy as np

from charfn import FourierArg, cf_limit, cf_reversionary
from core import ParameterError, ReversionaryParams, RoughParams
from riccati import Regime
from rough import cf_rough

LIMIT_KINDS = {
    "bs-limit": Regime.ABOVE_HALF,
    "nig-limit": Regime.AT_HALF,
    "nl-limit": Regime.BELOW_HALF,
}


class CharacteristicModel(ABC):
    """A model that can price through the CF of log S_T"""

    def __init__(self, s0: float):
        self.s0 = s0

    @abstractmethod
    def cf(self, u, T: float):
        """CF of log S_T at real frequencies u"""
        pass


class ReversionaryModel(CharacteristicModel):
    """Reversionary Heston with the explicit closed form"""

    def __init__(self, params: ReversionaryParams):
        super().__init__(params.s0)
        self.params = params

    def cf(self, u, T: float):
        return cf_reversionary(FourierArg(np.asarray(u, dtype=float)), 0.0, T,
                               (np.log(self.s0), self.params.v0), self.params)


class RoughHestonModel(CharacteristicModel):
    """Rough Heston via the fractional Adams scheme"""

    def __init__(self, params: RoughParams, n_steps: int = 256, corrector_iterations: int = 1,
                 implicit_corrector: bool = True):
        super().__init__(params.p0)
        self.params = params
        self.n_steps = n_steps
        self.corrector_iterations = corrector_iterations
        self.implicit_corrector = implicit_corrector

    def cf(self, u, T: float):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return cf_rough(1j * u, self.params, T, self.n_steps,
                        corrector_iterations=self.corrector_iterations,
                        implicit_corrector=self.implicit_corrector)


class LimitModel(CharacteristicModel):
    """Exponential NIG-IG (or Gaussian) limit law of the reversionary model"""

    def __init__(self, params: ReversionaryParams, regime: Regime):
        super().__init__(params.s0)
        self.params = params
        self.regime = Regime.parse(regime)

    def cf(self, u, T: float):
        u = np.asarray(u, dtype=float)
        return cf_limit(FourierArg(u), T, self.params, self.regime) * np.exp(1j * u * np.log(self.s0))


class ModelFactory:
    """
    Factory for CF providers, one instance per (kind, parameters) pair.

    The cache keeps the max_instances most recently requested models.
    """

    max_instances = 64
    _instances: "OrderedDict[Tuple, CharacteristicModel]" = OrderedDict()

    @classmethod
    def get_model(cls, kind: str, params, **solver_options) -> CharacteristicModel:
        key = (kind.lower(), params, tuple(sorted(solver_options.items())))
        if key in cls._instances:
            cls._instances.move_to_end(key)
            return cls._instances[key]
        model = cls._create_model(kind, params, **solver_options)
        cls._instances[key] = model
        while len(cls._instances) > cls.max_instances:
            cls._instances.popitem(last=False)
        return model

    @classmethod
    def _create_model(cls, kind: str, params, **solver_options) -> CharacteristicModel:
        kind = kind.lower()
        if kind == "reversionary":
            return ReversionaryModel(params)
        if kind == "rough":
            return RoughHestonModel(params, **solver_options)
        if kind in LIMIT_KINDS:
            return LimitModel(params, LIMIT_KINDS[kind])
        raise ParameterError(f"Unsupported model kind: {kind}")

    @classmethod
    def list_instances(cls) -> Dict[Tuple, CharacteristicModel]:
        return dict(cls._instances)

    @classmethod
    def clear_instances(cls):
        """Clear all instances (for testing)"""
        cls._instances.clear()
