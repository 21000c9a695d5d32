"""
Scenario registry.

Scenarios are looked up by the name typed after their CLI subcommand, so a
name is a kebab-case word and belongs to exactly one class, whichever
subcommand that class is run by.
"""

from __future__ import annotations

import logging
import re
from typing import TYPE_CHECKING, Callable, TypeVar, overload

if TYPE_CHECKING:
    from .scenario import Scenario

logger = logging.getLogger(__name__)

S = TypeVar("S", bound="Scenario")

SCENARIO_NAME = re.compile(r"[a-z0-9]+(?:-[a-z0-9]+)*")

_registry: dict[str, type[Scenario]] = {}


def get_registry() -> dict[str, type[Scenario]]:
    return _registry


def get_scenario(name: str) -> type[Scenario] | None:
    """The scenario registered under ``name``, whatever its subcommand."""
    return _registry.get(name)


def scenarios_for(command: str) -> dict[str, type[Scenario]]:
    """Scenarios run by one subcommand (``simulate``, ``balance``, ...), sorted by name."""
    return {name: cls for name, cls in sorted(_registry.items()) if cls.command == command}


def clear_registry() -> None:
    _registry.clear()


@overload
def register(cls: type[S]) -> type[S]: ...


@overload
def register(
    cls: None = None, *, name: str | None = None
) -> Callable[[type[S]], type[S]]: ...


def register(
    cls: type[S] | None = None, *, name: str | None = None
) -> type[S] | Callable[[type[S]], type[S]]:
    """
    Make a scenario runnable from the command line.

        @register
        class RabiFig3(SimulationScenario):  # clockprobe simulate rabi-fig3
            ...

        @register(name="rabi-purified")
        class RabiFig3(SimulationScenario):  # clockprobe simulate rabi-purified
            ...

    Names share one namespace across subcommands: ``balance`` cannot be both
    a ``simulate`` scenario and the ``balance`` command.

    Raises:
        TypeError: ``cls`` is not a Scenario subclass.
        ValueError: the name is not kebab-case or is taken by another class.
    """

    def decorator(scenario_cls: type[S]) -> type[S]:
        from .scenario import Scenario

        if not (isinstance(scenario_cls, type) and issubclass(scenario_cls, Scenario)):
            raise TypeError(f"only Scenario subclasses can be registered, got {scenario_cls!r}")
        if name:
            scenario_cls.scenario_name = name
        scenario_name = scenario_cls.get_scenario_name()
        if not SCENARIO_NAME.fullmatch(scenario_name):
            raise ValueError(
                f"scenario name '{scenario_name}' must be kebab-case, e.g. 'rabi-fig3'"
            )

        existing = _registry.get(scenario_name)
        if existing is not None and existing is not scenario_cls:
            raise ValueError(
                f"Scenario name '{scenario_name}' is already registered for "
                f"'clockprobe {existing.command}' by {existing.__module__}.{existing.__name__}"
            )

        _registry[scenario_name] = scenario_cls
        logger.debug(f"registered scenario '{scenario_name}' for '{scenario_cls.command}'")
        return scenario_cls

    if cls is not None:
        return decorator(cls)
    return decorator
