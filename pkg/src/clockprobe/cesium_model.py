"""
Cesium D2 level scheme and the dispersive phase shift of a probe beam.

The phase shift follows the standard far-detuned two-level sum over all
hyperfine components::

    dphi = phi0 * sum_{F, mF, F'} N_{F,mF} (2F'+1)(2F+1) (3j)^2 {6j}^2 L(D_{F,F'})

with ``L(D) = (g/2) D / (D^2 + (g/2)^2)`` and
``phi0 = 3 l lambda^2 (2J'+1) / (4 pi V)``.
"""

from __future__ import annotations

import functools
import logging
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Any

import numpy as np
from scipy import constants, optimize

from .angular_momentum import HalfInt, HalfIntLike, triangle_ok, wigner_3j, wigner_6j

logger = logging.getLogger(__name__)

#: |up> and |down> clock states as (F, m_F).
CLOCK_UP = (4, 0)
CLOCK_DOWN = (3, 0)

#: Color-B operating point quoted for the two-color scheme, MHz.
OPERATING_POINT_DETUNING = -135.0


class BalanceError(RuntimeError):
    """Raised when no balance detuning exists inside the search window."""

    def __init__(self, message: str, detunings: np.ndarray, residuals: np.ndarray) -> None:
        super().__init__(message)
        self.detunings = detunings
        self.residuals = residuals


@dataclass(frozen=True)
class LevelScheme:
    """
    Hyperfine structure of one alkali D line.

    Level energies are offsets in MHz; ``linewidth`` is gamma / 2pi in MHz.
    """

    nuclear_spin: HalfInt
    ground_j: HalfInt
    excited_j: HalfInt
    ground_levels: tuple[tuple[int, float], ...]
    excited_levels: tuple[tuple[int, float], ...]
    linewidth: float
    wavelength: float

    def __post_init__(self) -> None:
        for label, j, levels in (
            ("ground", self.ground_j, self.ground_levels),
            ("excited", self.excited_j, self.excited_levels),
        ):
            for f, _ in levels:
                if not triangle_ok(j, self.nuclear_spin, f):
                    raise ValueError(
                        f"{label} F={f} is not reachable from J={j} and I={self.nuclear_spin}"
                    )
        energies = [energy for _, energy in sorted(self.excited_levels)]
        if any(upper <= lower for lower, upper in zip(energies, energies[1:])):
            raise ValueError("excited hyperfine intervals must be positive and ordered in F'")
        if self.linewidth <= 0:
            raise ValueError("linewidth must be positive")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")

    @property
    def ground_f(self) -> tuple[int, ...]:
        return tuple(sorted(f for f, _ in self.ground_levels))

    @property
    def excited_f(self) -> tuple[int, ...]:
        return tuple(sorted(f for f, _ in self.excited_levels))

    @property
    def ground_splitting(self) -> float:
        energies = [energy for _, energy in self.ground_levels]
        return max(energies) - min(energies)

    def ground_energy(self, f: int) -> float:
        return dict(self.ground_levels)[f]

    def excited_energy(self, f_excited: int) -> float:
        return dict(self.excited_levels)[f_excited]

    def allowed_excited(self, f: int) -> tuple[int, ...]:
        """Excited levels reachable from ground ``F`` by a dipole transition."""
        return tuple(fe for fe in self.excited_f if triangle_ok(f, 1, fe))

    def transition_frequency(self, f: int, f_excited: int) -> float:
        """F -> F' line position relative to the F=F_max -> F'=F'_max line, MHz."""
        return self.excited_energy(f_excited) - self.ground_energy(f)

    def detuning(self, color: ProbeColor, f: int, f_excited: int) -> float:
        """Detuning D_{F,F'} of ``color`` from the F -> F' line, MHz."""
        laser = color.detuning + self.transition_frequency(*color.reference_transition)
        return laser - self.transition_frequency(f, f_excited)


def load_level_scheme(name: str = "cesium_d2.toml") -> LevelScheme:
    """Read a level scheme from the packaged constants file."""
    text = resources.files("clockprobe").joinpath("data", name).read_text(encoding="utf-8")
    data = tomllib.loads(text)
    atom = data["atom"]
    return LevelScheme(
        nuclear_spin=HalfInt.parse(atom["nuclear_spin"]),
        ground_j=HalfInt.parse(atom["ground_j"]),
        excited_j=HalfInt.parse(atom["excited_j"]),
        ground_levels=tuple(sorted((int(f), float(e)) for f, e in data["ground_levels"].items())),
        excited_levels=tuple(sorted((int(f), float(e)) for f, e in data["excited_levels"].items())),
        linewidth=float(data["d2"]["linewidth_mhz"]),
        wavelength=float(data["d2"]["wavelength_m"]),
    )


CESIUM_D2 = load_level_scheme()


@dataclass(frozen=True)
class ProbeGeometry:
    """
    Cylindrical sample in the probe arm.

    ``sample_length`` defaults to the diameter. The phase scale ``phi0``
    depends on the cross-section only, since l/V = 1/area.
    """

    sample_diameter: float = 60e-6
    sample_length: float | None = None
    wavelength: float = field(default_factory=lambda: CESIUM_D2.wavelength)

    def __post_init__(self) -> None:
        if self.sample_diameter <= 0 or self.wavelength <= 0:
            raise ValueError("sample diameter and wavelength must be positive")
        if self.sample_length is not None and self.sample_length <= 0:
            raise ValueError("sample length must be positive")

    @property
    def length(self) -> float:
        return self.sample_length if self.sample_length is not None else self.sample_diameter

    @property
    def volume(self) -> float:
        return math.pi * (self.sample_diameter / 2) ** 2 * self.length

    def phi0(self, scheme: LevelScheme | None = None) -> float:
        """Phase scale ``3 l lambda^2 (2J'+1) / (4 pi V)`` in radians per atom."""
        scheme = scheme or CESIUM_D2
        multiplicity = scheme.excited_j.twice_value + 1
        return 3 * self.length * self.wavelength**2 * multiplicity / (4 * math.pi * self.volume)

    def optical_depth(self, n_atoms: float, scheme: LevelScheme | None = None) -> float:
        """
        Resonant optical depth for ``n_atoms`` in |up> probed with q=0 on F=4 -> F'=5.

        For a Lorentzian line the peak dispersive phase is half the resonant
        optical depth, so OD = 2 phi0 * coefficient * N.
        """
        scheme = scheme or CESIUM_D2
        coefficient = coupling_coefficient(4, 0, 5, 0, scheme)
        return 2 * self.phi0(scheme) * float(coefficient) * n_atoms


@dataclass(frozen=True)
class ProbeColor:
    """One probe laser, referenced to a ground -> excited line."""

    detuning: float
    reference_transition: tuple[int, int] = (4, 5)
    polarization: int = 0
    photon_number: float = 0.0
    sign: int = 1

    def __post_init__(self) -> None:
        if self.polarization not in (-1, 0, 1):
            raise ValueError("polarization q must be -1, 0 or +1")
        if self.photon_number < 0:
            raise ValueError("photon number must be non-negative")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        object.__setattr__(self, "reference_transition", tuple(self.reference_transition))


class ZeemanPopulations(Mapping[tuple[int, int], float]):
    """Mean atom count in each hyperfine sub-state (F, m_F)."""

    def __init__(
        self,
        counts: Mapping[tuple[int, int], float]
        | Iterable[tuple[tuple[int, int], float]] = (),
    ) -> None:
        items = counts.items() if isinstance(counts, Mapping) else counts
        self._counts: dict[tuple[int, int], float] = {}
        for (f, m), n in items:
            if n < 0:
                raise ValueError(f"population of ({f}, {m}) is negative: {n}")
            if abs(m) > f:
                raise ValueError(f"m_F={m} is outside F={f}")
            key = (int(f), int(m))
            self._counts[key] = self._counts.get(key, 0.0) + float(n)

    @classmethod
    def single(cls, f: int, m: int, n: float) -> ZeemanPopulations:
        return cls({(f, m): n})

    def __getitem__(self, key: tuple[int, int]) -> float:
        return self._counts[key]

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self._counts)

    def __len__(self) -> int:
        return len(self._counts)

    def __add__(self, other: Mapping[tuple[int, int], float]) -> ZeemanPopulations:
        return ZeemanPopulations(list(self.items()) + list(other.items()))

    def __repr__(self) -> str:
        return f"ZeemanPopulations({self._counts!r})"

    @property
    def total(self) -> float:
        return sum(self._counts.values())

    def scaled(self, factor: float) -> ZeemanPopulations:
        return ZeemanPopulations({key: n * factor for key, n in self._counts.items()})


def coupling_coefficient(
    f: HalfIntLike,
    m_f: HalfIntLike,
    f_excited: HalfIntLike,
    q: int,
    scheme: LevelScheme | None = None,
) -> Fraction:
    """
    Exact factor ``(2F'+1)(2F+1) (3j)^2 {6j}^2`` for F, m_F -> F', m_F + q.

    The 3j symbol is ``(F' 1 F; m'_F -q -m_F)`` so that ``m'_F = m_F + q``
    satisfies the projection rule; the 6j symbol is ``{J J' 1; F' F I}``.
    """
    scheme = scheme or CESIUM_D2
    return _coupling(
        HalfInt.coerce(f),
        HalfInt.coerce(m_f),
        HalfInt.coerce(f_excited),
        int(q),
        scheme.ground_j,
        scheme.excited_j,
        scheme.nuclear_spin,
    )


@functools.lru_cache(maxsize=None)
def _coupling(
    f: HalfInt, m_f: HalfInt, f_excited: HalfInt, q: int, j: HalfInt, j_excited: HalfInt, spin: HalfInt
) -> Fraction:
    m_excited = m_f + q
    if abs(m_excited.twice_value) > f_excited.twice_value:
        return Fraction(0)
    three_j = wigner_3j(f_excited, 1, f, m_excited, -q, -m_f)
    if not three_j:
        return Fraction(0)
    six_j = wigner_6j(j, j_excited, 1, f_excited, f, spin)
    return (
        (f_excited.twice_value + 1)
        * (f.twice_value + 1)
        * three_j.value_squared
        * six_j.value_squared
    )


def dispersive_lineshape(detuning: Any, linewidth: float) -> Any:
    """``(g/2) D / (D^2 + (g/2)^2)``; accepts scalars or arrays."""
    if linewidth <= 0:
        raise ValueError("linewidth must be positive")
    half = linewidth / 2
    return half * detuning / (detuning * detuning + half * half)


@functools.lru_cache(maxsize=256)
def _phase_response(
    color: ProbeColor, geometry: ProbeGeometry, scheme: LevelScheme
) -> tuple[tuple[tuple[int, int], float], ...]:
    phi0 = geometry.phi0(scheme)
    response = []
    for f in scheme.ground_f:
        for m in range(-f, f + 1):
            total = 0.0
            for fe in scheme.allowed_excited(f):
                coefficient = coupling_coefficient(f, m, fe, color.polarization, scheme)
                if coefficient:
                    total += float(coefficient) * dispersive_lineshape(
                        scheme.detuning(color, f, fe), scheme.linewidth
                    )
            response.append(((f, m), phi0 * total))
    return tuple(response)


def phase_response(
    color: ProbeColor, geometry: ProbeGeometry | None = None, scheme: LevelScheme | None = None
) -> dict[tuple[int, int], float]:
    """Phase shift per atom in each (F, m_F) for one color, radians."""
    return dict(_phase_response(color, geometry or ProbeGeometry(), scheme or CESIUM_D2))


def phase_shift(
    populations: Mapping[tuple[int, int], float],
    color: ProbeColor,
    geometry: ProbeGeometry | None = None,
    scheme: LevelScheme | None = None,
) -> float:
    """Dispersive phase shift of one color, summed over every allowed F'."""
    response = phase_response(color, geometry, scheme)
    return math.fsum(n * response[key] for key, n in populations.items() if n)


def phase_shift_f4(
    n_up: float,
    color: ProbeColor,
    geometry: ProbeGeometry | None = None,
    scheme: LevelScheme | None = None,
) -> float:
    """Clock-state term alone: the (4, 0) -> F'=5 contribution (coefficient 5/36 for q=0)."""
    geometry = geometry or ProbeGeometry()
    scheme = scheme or CESIUM_D2
    coefficient = coupling_coefficient(4, 0, 5, color.polarization, scheme)
    lineshape = dispersive_lineshape(scheme.detuning(color, 4, 5), scheme.linewidth)
    return float(coefficient) * geometry.phi0(scheme) * n_up * lineshape


def color_weights(colors: Sequence[ProbeColor]) -> list[float]:
    """Photon-number fractions of each color; equal when no photons are given."""
    total = sum(color.photon_number for color in colors)
    if total == 0:
        return [1.0 / len(colors)] * len(colors)
    return [color.photon_number / total for color in colors]


def combined_response(
    colors: Sequence[ProbeColor],
    geometry: ProbeGeometry | None = None,
    scheme: LevelScheme | None = None,
) -> dict[tuple[int, int], float]:
    """Photon-weighted, signed phase per atom in each (F, m_F) for simultaneous colors."""
    if not colors:
        raise ValueError("at least one probe color is required")
    combined: dict[tuple[int, int], float] = {}
    for weight, color in zip(color_weights(colors), colors):
        for key, value in phase_response(color, geometry, scheme).items():
            combined[key] = combined.get(key, 0.0) + weight * color.sign * value
    return combined


def multi_color_phase(
    populations: Mapping[tuple[int, int], float],
    colors: Sequence[ProbeColor],
    geometry: ProbeGeometry | None = None,
    scheme: LevelScheme | None = None,
) -> float:
    """Photon-weighted phase of several simultaneous colors."""
    if not colors:
        raise ValueError("at least one probe color is required")
    return math.fsum(
        weight * color.sign * phase_shift(populations, color, geometry, scheme)
        for weight, color in zip(color_weights(colors), colors)
    )


def two_color_phase(
    populations: Mapping[tuple[int, int], float],
    color_a: ProbeColor,
    color_b: ProbeColor,
    geometry: ProbeGeometry | None = None,
    scheme: LevelScheme | None = None,
) -> float:
    """Combined phase of two simultaneous colors (population-difference signal)."""
    return multi_color_phase(populations, (color_a, color_b), geometry, scheme)


def pole_phase(
    n_atoms: float,
    color: ProbeColor,
    geometry: ProbeGeometry | None = None,
    scheme: LevelScheme | None = None,
) -> float:
    """Single-color phase with all ``n_atoms`` in |up>."""
    return phase_shift(ZeemanPopulations.single(*CLOCK_UP, n_atoms), color, geometry, scheme)


def photons_from_power(power: float, duration: float, wavelength: float | None = None) -> float:
    """Photon number ``P tau lambda / (h c)`` of a rectangular pulse."""
    wavelength = CESIUM_D2.wavelength if wavelength is None else wavelength
    if power < 0 or duration < 0 or wavelength <= 0:
        raise ValueError("power and duration must be non-negative, wavelength positive")
    return power * duration * wavelength / (constants.h * constants.c)


def _balance_color(color_a: ProbeColor, detuning: float) -> ProbeColor:
    return ProbeColor(
        detuning=detuning,
        reference_transition=(3, 2),
        polarization=color_a.polarization,
        photon_number=color_a.photon_number,
    )


def _balance_residual(
    detuning: float, color_a: ProbeColor, geometry: ProbeGeometry, scheme: LevelScheme
) -> float:
    equal = ZeemanPopulations({CLOCK_UP: 1.0, CLOCK_DOWN: 1.0})
    return two_color_phase(equal, color_a, _balance_color(color_a, detuning), geometry, scheme)


def balance_scan(
    color_a: ProbeColor,
    detunings: np.ndarray,
    scheme: LevelScheme | None = None,
    geometry: ProbeGeometry | None = None,
) -> np.ndarray:
    """
    Two-color phase for one atom in each clock state versus color-B detuning,
    relative to the single-color phase of one |up> atom.
    """
    geometry = geometry or ProbeGeometry()
    scheme = scheme or CESIUM_D2
    reference = pole_phase(1.0, color_a, geometry, scheme)
    return np.array(
        [_balance_residual(float(d), color_a, geometry, scheme) for d in detunings]
    ) / reference


def solve_balance(
    color_a: ProbeColor,
    scheme: LevelScheme | None = None,
    geometry: ProbeGeometry | None = None,
    *,
    window: tuple[float, float] = (-1000.0, 1000.0),
    step: float = 1.0,
    operating_point: float = OPERATING_POINT_DETUNING,
) -> float:
    """
    Color-B detuning from F=3 -> F'=2 that zeroes the two-color phase for
    equal clock-state populations, with equal photon numbers in both colors.

    The window is scanned on a ``step`` grid, every sign change is refined
    with Brent's method and the root closest to ``operating_point`` is
    returned.
    """
    geometry = geometry or ProbeGeometry()
    scheme = scheme or CESIUM_D2
    if pole_phase(1.0, color_a, geometry, scheme) == 0:
        raise ValueError("color A has no response to |up> atoms")

    grid = np.arange(window[0], window[1] + step / 2, step)
    residuals = balance_scan(color_a, grid, scheme, geometry)
    crossings = np.flatnonzero(np.sign(residuals[:-1]) * np.sign(residuals[1:]) <= 0)
    if crossings.size == 0:
        raise BalanceError(
            f"no sign change of the two-color phase for color-B detunings in "
            f"[{window[0]}, {window[1]}] MHz (relative residual ranges "
            f"{residuals.min():.3e} .. {residuals.max():.3e})",
            grid,
            residuals,
        )

    roots = []
    for index in crossings:
        lo, hi = float(grid[index]), float(grid[index + 1])
        if residuals[index] == 0:
            roots.append(lo)
            continue
        roots.append(
            optimize.brentq(
                _balance_residual, lo, hi, args=(color_a, geometry, scheme), xtol=1e-12
            )
        )
    logger.debug(f"balance roots for color A at {color_a.detuning} MHz: {roots}")
    return min(roots, key=lambda root: abs(root - operating_point))


def balanced_color(color_a: ProbeColor, detuning: float) -> ProbeColor:
    """Color B at ``detuning`` from F=3 -> F'=2 with color A's photon number."""
    return _balance_color(color_a, detuning)
