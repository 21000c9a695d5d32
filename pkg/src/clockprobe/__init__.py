"""
clockprobe - Dispersive probing of a cesium clock transition
"""

__version__ = "0.1.0"

from .angular_momentum import ExactRadical, HalfInt, QuantumNumberError, clebsch_gordan, wigner_3j, wigner_6j
from .cesium_model import (
    CESIUM_D2,
    BalanceError,
    ProbeColor,
    ProbeGeometry,
    ZeemanPopulations,
    coupling_coefficient,
    phase_shift,
    solve_balance,
    two_color_phase,
)
from .registry import register
from .scenario import Scenario, ScenarioValidationError, SimulationScenario

__all__ = [
    "CESIUM_D2",
    "BalanceError",
    "ExactRadical",
    "HalfInt",
    "ProbeColor",
    "ProbeGeometry",
    "QuantumNumberError",
    "Scenario",
    "ScenarioValidationError",
    "SimulationScenario",
    "ZeemanPopulations",
    "clebsch_gordan",
    "coupling_coefficient",
    "phase_shift",
    "register",
    "solve_balance",
    "two_color_phase",
    "wigner_3j",
    "wigner_6j",
]
