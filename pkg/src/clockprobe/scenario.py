from __future__ import annotations

import inspect
import logging
import re
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, ClassVar

logger = logging.getLogger(__name__)


class ScenarioValidationError(Exception):
    """Raised when scenario parameters fail validation."""

    pass


def _camel_to_kebab(name: str) -> str:
    """Convert CamelCase to kebab-case."""
    s1 = re.sub(r"(.)([A-Z][a-z]+)", r"\1-\2", name)
    return re.sub(r"([a-z0-9])([A-Z])", r"\1-\2", s1).lower()


def _is_union(expected_type: Any) -> bool:
    origin = typing.get_origin(expected_type)
    return origin is typing.Union or origin is types.UnionType


def _validate_type(
    value: Any, expected_type: Any, param_name: str, scenario_name: str | None = None
) -> Any:
    """
    Validate ``value`` against ``expected_type`` and return it, widened where
    allowed (int -> float, list -> tuple).
    """
    if expected_type is Any:
        return value

    context = f" in '{scenario_name}' scenario" if scenario_name else ""
    if value is None:
        if expected_type is type(None) or (
            _is_union(expected_type) and type(None) in typing.get_args(expected_type)
        ):
            return None
        raise ScenarioValidationError(
            f"parameter '{param_name}'{context} received None but is not optional"
        )

    if _is_union(expected_type):
        for arg in typing.get_args(expected_type):
            if arg is type(None):
                continue
            try:
                return _validate_type(value, arg, param_name)
            except ScenarioValidationError:
                continue
        raise ScenarioValidationError(
            f"parameter '{param_name}'{context} expected {expected_type}, got {type(value).__name__}"
        )

    origin = typing.get_origin(expected_type)
    if origin in (list, tuple):
        if not isinstance(value, (list, tuple)):
            raise ScenarioValidationError(
                f"parameter '{param_name}'{context} expected {expected_type}, got {type(value).__name__}"
            )
        args = [a for a in typing.get_args(expected_type) if a is not Ellipsis]
        items = [_validate_type(item, args[0], param_name, scenario_name) for item in value] if args else list(value)
        return origin(items)
    if origin is not None:
        if not isinstance(value, origin):
            raise ScenarioValidationError(
                f"parameter '{param_name}'{context} expected {expected_type}, got {type(value).__name__}"
            )
        return value

    if expected_type is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if expected_type is int and isinstance(value, bool):
        raise ScenarioValidationError(
            f"parameter '{param_name}'{context} expected int, got bool"
        )
    if not isinstance(value, expected_type):
        raise ScenarioValidationError(
            f"parameter '{param_name}'{context} expected {expected_type.__name__}, got {type(value).__name__}"
        )
    return value


class ScenarioMeta(type):
    """Metaclass for Scenario that collects parameter definitions."""

    def __new__(mcs, name: str, bases: tuple, namespace: dict, **kwargs: Any) -> ScenarioMeta:
        cls = super().__new__(mcs, name, bases, namespace)

        hints: dict[str, Any] = {}
        defaults: dict[str, Any] = {}

        # Collect from parent classes first so subclasses can override defaults
        for base in reversed(cls.__mro__):
            own = inspect.get_annotations(base)
            if not own:
                continue
            resolved = typing.get_type_hints(base)
            for param_name in own:
                if param_name.startswith("_"):
                    continue
                param_type = resolved.get(param_name, Any)
                if typing.get_origin(param_type) is ClassVar:
                    continue
                hints[param_name] = param_type
            for param_name in hints:
                if param_name in base.__dict__:
                    defaults[param_name] = base.__dict__[param_name]

        cls.__scenario_params__ = hints
        cls.__scenario_defaults__ = defaults
        return cls


class Scenario(metaclass=ScenarioMeta):
    """
    Base class for named experiment runners.

    Usage:
        @register
        class RabiFig3(SimulationScenario):
            command = "simulate"
            reps: int = 50
            total_atoms: float = 1e5

            def run(self, out):
                ...

    Parameters are the annotated class attributes; those without a default
    are required. ``command`` names the CLI subcommand that runs it.
    """

    scenario_name: ClassVar[str | None] = None
    command: ClassVar[str] = "simulate"

    # Set by metaclass
    __scenario_params__: ClassVar[dict[str, Any]]
    __scenario_defaults__: ClassVar[dict[str, Any]]

    def __init__(self, **params: Any) -> None:
        self._validate_and_set_params(params)

    def _validate_and_set_params(self, params: dict[str, Any]) -> None:
        """Validate params against the declared parameters and set them as attributes."""
        declared = self.__scenario_params__
        defaults = self.__scenario_defaults__
        name = self.get_scenario_name()

        unknown = sorted(set(params) - set(declared))
        if unknown:
            raise ScenarioValidationError(
                f"unknown parameter(s) {', '.join(unknown)} for scenario '{name}'"
            )
        for param_name in declared:
            if param_name not in params and param_name not in defaults:
                raise ScenarioValidationError(
                    f"missing required parameter '{param_name}' for scenario '{name}'"
                )

        for param_name, expected_type in declared.items():
            value = params[param_name] if param_name in params else defaults[param_name]
            if isinstance(value, list):
                value = list(value)
            setattr(self, param_name, _validate_type(value, expected_type, param_name, name))

    @classmethod
    def get_scenario_name(cls) -> str:
        """Get the registered name for this scenario."""
        if cls.scenario_name:
            return cls.scenario_name
        return _camel_to_kebab(cls.__name__)

    @classmethod
    def parameter_names(cls) -> list[str]:
        return list(cls.__scenario_params__)

    def params(self) -> dict[str, Any]:
        """Resolved parameters, ready for a run manifest."""
        values = {}
        for param_name in self.__scenario_params__:
            value = getattr(self, param_name)
            values[param_name] = list(value) if isinstance(value, tuple) else value
        return values

    def validate(self) -> list[str]:
        """Model-validity warnings for these parameters; empty when all is well."""
        return []

    def run(self, out: Path | None = None) -> ScenarioResult:
        raise NotImplementedError


class SimulationScenario(Scenario):
    """A scenario with random draws: the seed is mandatory."""

    seed: int
    reps: int = 1


@dataclass
class ScenarioResult:
    """Lines for the terminal and files written by one run."""

    lines: list[str] = field(default_factory=list)
    outputs: list[Path] = field(default_factory=list)
