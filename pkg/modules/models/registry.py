"""
Model Registry - Zentrale Registrierung der Systemmodelle.

Szenarien referenzieren Modelle per Name; die Registry löst den Namen in eine
Factory auf, die mit Horizont und Parametern ein FeedbackModel erzeugt.
"Custom"-Modelle werden als "paket.modul:funktion" importiert.
"""

import importlib
from typing import Any, Callable, Dict, List, Optional

from ..core.model import FeedbackModel
from ..exceptions import ModelError
from ..utils.logger import logger

ModelFactory = Callable[..., FeedbackModel]


class ModelRegistry:
    """
    Zentrale Registry für alle verfügbaren Systemmodelle.

    Funktioniert als Factory Pattern: create(name, horizon, **params).
    """

    _factories: Dict[str, ModelFactory] = {}
    _descriptions: Dict[str, str] = {}

    @classmethod
    def register(cls, name: str, factory: ModelFactory, description: str = "") -> None:
        """
        Registriert eine Modell-Factory.

        Args:
            name: Eindeutiger Modellname (wie im Szenario)
            factory: Aufrufbar als factory(horizon=N, **params)
            description: Kurzbeschreibung
        """
        if not callable(factory):
            raise ModelError(f"Factory for model '{name}' is not callable")
        cls._factories[name] = factory
        cls._descriptions[name] = description
        logger.debug(f"Model registered: {name}")

    @classmethod
    def create(cls, name: str, horizon: int, params: Optional[Dict[str, Any]] = None) -> FeedbackModel:
        """
        Erstellt ein Modell.

        Raises:
            ModelError: Name unbekannt oder Factory schlägt fehl
        """
        params = dict(params or {})
        if name == 'custom':
            factory = cls.resolve_custom(params.pop('factory', ''))
        elif name in cls._factories:
            factory = cls._factories[name]
        else:
            available = ', '.join(sorted(cls._factories)) or 'none'
            raise ModelError(f"Model '{name}' not found in registry (available: {available}, custom)")

        try:
            model = factory(horizon=horizon, **params)
        except TypeError as e:
            raise ModelError(f"Invalid parameters for model '{name}': {e}") from e

        if not isinstance(model, FeedbackModel):
            raise ModelError(f"Factory for model '{name}' returned {type(model).__name__}, expected FeedbackModel")
        logger.info(f"Model created: {name} (N={horizon}, n={model.n}, m={model.m}, p={model.p})")
        return model

    @staticmethod
    def resolve_custom(target: str) -> ModelFactory:
        """Importiert eine Factory aus 'paket.modul:funktion'."""
        if ':' not in target:
            raise ModelError(f"Custom model needs params.factory of the form 'package.module:function' (got '{target}')")
        module_name, func_name = target.split(':', 1)
        try:
            module = importlib.import_module(module_name)
        except ImportError as e:
            raise ModelError(f"Cannot import custom model module '{module_name}': {e}") from e
        factory = getattr(module, func_name, None)
        if factory is None or not callable(factory):
            raise ModelError(f"Module '{module_name}' has no callable '{func_name}'")
        return factory

    @classmethod
    def list_models(cls) -> List[Dict[str, str]]:
        """Name und Beschreibung aller registrierten Modelle."""
        return [{'name': name, 'description': cls._descriptions.get(name, '')}
                for name in sorted(cls._factories)]

    @classmethod
    def is_registered(cls, name: str) -> bool:
        return name == 'custom' or name in cls._factories

    @classmethod
    def clear(cls) -> None:
        """Leert die Registry (hauptsächlich für Tests)."""
        cls._factories.clear()
        cls._descriptions.clear()

    @classmethod
    def auto_discover(cls) -> int:
        """Registriert die mitgelieferten Modelle."""
        from .ground_vehicle import ground_vehicle_model
        from .linear import linear_model

        cls.register('ground_vehicle', ground_vehicle_model,
                     "Ground vehicle (x1, x2, v, theta), Euler discretisation")
        cls.register('linear', linear_model, "Linear time-invariant system x+ = A x + B u + Bw w")
        return len(cls._factories)


def create_model(name: str, horizon: int, params: Optional[Dict[str, Any]] = None) -> FeedbackModel:
    """Convenience-Funktion: Registry bei Bedarf initialisieren und Modell erzeugen."""
    if not ModelRegistry.is_registered(name):
        ModelRegistry.auto_discover()
    return ModelRegistry.create(name, horizon, params)


__all__ = ['ModelRegistry', 'create_model']
