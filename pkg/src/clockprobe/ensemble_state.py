"""
Atomic ensemble: spectator Zeeman populations plus coherent pseudo-spin classes.

The coherent part is a set of atom classes, each a Bloch vector ``(u, v, w)``
with a weight in atoms. Classes are the outer product of radial bins across
the probe beam and Gaussian quantiles of the trap-induced static detuning.
``w = +1`` is all atoms in (F=4, m_F=0), ``w = -1`` all atoms in (F=3, m_F=0).
"""

from __future__ import annotations

import dataclasses
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .cesium_model import (
    CESIUM_D2,
    CLOCK_DOWN,
    CLOCK_UP,
    LevelScheme,
    ProbeColor,
    ProbeGeometry,
    ZeemanPopulations,
    phase_response,
)

logger = logging.getLogger(__name__)

#: Static detuning spread (rad/s) giving a probe-free 1/e contrast time of 10 ms.
DEFAULT_TRAP_SPREAD = math.sqrt(2) / 10e-3


@dataclass(frozen=True)
class AtomClass:
    """One group of atoms that share beam intensity and static detuning."""

    radial_bin_center: float
    relative_intensity: float
    weight: float
    bloch: tuple[float, float, float]
    static_detuning: float = 0.0


@dataclass(frozen=True)
class PreparationConfig:
    """How the ensemble is loaded, pumped and binned."""

    total_atoms: float = 1e5
    pumping_efficiency: float = 0.8
    purify: bool = False
    n_classes: int = 16
    beam_waist: float | None = None
    sample_diameter: float = 60e-6
    n_detuning_classes: int = 1
    trap_spread: float = DEFAULT_TRAP_SPREAD

    def __post_init__(self) -> None:
        if self.total_atoms < 0:
            raise ValueError("total_atoms must be non-negative")
        if not 0 <= self.pumping_efficiency <= 1:
            raise ValueError("pumping_efficiency must lie in [0, 1]")
        if self.n_classes < 1 or self.n_detuning_classes < 1:
            raise ValueError("at least one radial and one detuning class is required")
        if self.beam_waist is not None and self.beam_waist <= 0:
            raise ValueError("beam_waist must be positive")
        if self.sample_diameter <= 0:
            raise ValueError("sample_diameter must be positive")
        if self.trap_spread < 0:
            raise ValueError("trap_spread must be non-negative")

    @property
    def waist(self) -> float:
        return self.beam_waist if self.beam_waist is not None else self.sample_diameter


@dataclass
class EnsembleState:
    """
    Mean-field state of the sample.

    ``zeeman`` holds atoms outside the coherent classes (spectators). Class
    data is kept as parallel arrays; :attr:`classes` gives the per-class view.
    The static detuning of a class is ``detuning_quantile * trap_spread``.
    """

    zeeman: ZeemanPopulations
    radius: np.ndarray
    intensity: np.ndarray
    weight: np.ndarray
    bloch: np.ndarray
    detuning_quantile: np.ndarray
    total_atoms: float
    trap_spread: float = 0.0
    lost: float = 0.0

    def __post_init__(self) -> None:
        self.bloch = np.asarray(self.bloch, dtype=float).reshape(-1, 3)
        n = len(self.bloch)
        for name in ("radius", "intensity", "weight", "detuning_quantile"):
            array = np.asarray(getattr(self, name), dtype=float)
            if array.shape != (n,):
                raise ValueError(f"{name} must have one entry per class")
            setattr(self, name, array)

    @classmethod
    def from_classes(
        cls,
        classes: Sequence[AtomClass],
        zeeman: ZeemanPopulations | None = None,
        lost: float = 0.0,
        total_atoms: float | None = None,
    ) -> EnsembleState:
        """
        Build a state from explicit classes.

        The static detunings are split into unit-rms quantiles and their
        weighted rms, which becomes ``trap_spread``.
        """
        zeeman = zeeman or ZeemanPopulations()
        weight = np.array([c.weight for c in classes], dtype=float)
        detuning = np.array([c.static_detuning for c in classes], dtype=float)
        if total_atoms is None:
            total_atoms = float(weight.sum()) + zeeman.total + lost
        if len(detuning) == 0:
            rms = 0.0
        elif weight.sum() > 0:
            rms = float(np.sqrt(np.dot(weight, detuning**2) / weight.sum()))
        else:
            rms = float(np.sqrt(np.mean(detuning**2)))
        quantile = detuning / rms if rms > 0 else np.zeros_like(detuning)
        return cls(
            zeeman=zeeman,
            radius=np.array([c.radial_bin_center for c in classes], dtype=float),
            intensity=np.array([c.relative_intensity for c in classes], dtype=float),
            weight=weight,
            bloch=np.array([c.bloch for c in classes], dtype=float).reshape(-1, 3),
            detuning_quantile=quantile,
            total_atoms=total_atoms,
            trap_spread=rms,
            lost=lost,
        )

    @property
    def classes(self) -> list[AtomClass]:
        return [
            AtomClass(
                radial_bin_center=float(r),
                relative_intensity=float(i),
                weight=float(n),
                bloch=(float(b[0]), float(b[1]), float(b[2])),
                static_detuning=float(d),
            )
            for r, i, n, b, d in zip(
                self.radius, self.intensity, self.weight, self.bloch, self.static_detuning
            )
        ]

    @property
    def static_detuning(self) -> np.ndarray:
        return self.detuning_quantile * self.trap_spread

    @property
    def coherent_atoms(self) -> float:
        return float(self.weight.sum())

    @property
    def mean_intensity(self) -> float:
        """Atom-weighted mean relative intensity; 1 for an empty ensemble."""
        total = self.weight.sum()
        if total <= 0:
            return 1.0
        return float(np.dot(self.weight, self.intensity) / total)

    def accounted_atoms(self) -> float:
        """Coherent + spectator + lost atoms; equals ``total_atoms`` at all times."""
        return self.coherent_atoms + self.zeeman.total + self.lost

    def clock_populations(self) -> tuple[float, float]:
        """Coherent atoms in (|up>, |down>)."""
        w = self.bloch[:, 2]
        up = float(np.dot(self.weight, (1 + w) / 2))
        return up, self.coherent_atoms - up

    def populations(self) -> ZeemanPopulations:
        """Zeeman populations of the whole sample, coherent classes included."""
        up, down = self.clock_populations()
        return self.zeeman + {CLOCK_UP: max(up, 0.0), CLOCK_DOWN: max(down, 0.0)}

    def coherence(self) -> float:
        """Weighted transverse length ``|sum n (u + iv)| / sum n``."""
        total = self.weight.sum()
        if total <= 0:
            return 0.0
        transverse = np.dot(self.weight, self.bloch[:, 0] + 1j * self.bloch[:, 1])
        return float(abs(transverse) / total)

    def copy(self, **changes: object) -> EnsembleState:
        """Copy with fresh arrays, optionally replacing fields."""
        fresh = {
            "radius": self.radius.copy(),
            "intensity": self.intensity.copy(),
            "weight": self.weight.copy(),
            "bloch": self.bloch.copy(),
            "detuning_quantile": self.detuning_quantile.copy(),
        }
        fresh.update(changes)
        return dataclasses.replace(self, **fresh)  # type: ignore[arg-type]


def discretize_beam(
    n_classes: int, beam_waist: float, sample_diameter: float
) -> list[tuple[float, float, float]]:
    """
    Equal-atom-number radial bins over a uniform disk of ``sample_diameter``.

    Returns ``(radial_bin_center, relative_intensity, weight_fraction)`` with
    intensity ``exp(-2 r^2 / w^2)`` at the bin centre. Bins are equal-area
    annuli, so the centre of bin k sits at ``R sqrt((k + 1/2) / n)``.
    """
    if n_classes < 1:
        raise ValueError("n_classes must be at least 1")
    if n_classes == 1:
        return [(0.0, 1.0, 1.0)]
    radius = sample_diameter / 2
    bins = []
    for k in range(n_classes):
        center = radius * math.sqrt((k + 0.5) / n_classes)
        if math.isinf(beam_waist):
            intensity = 1.0
        else:
            intensity = math.exp(-2 * center**2 / beam_waist**2)
        bins.append((center, intensity, 1.0 / n_classes))
    return bins


def detuning_quantiles(n: int) -> np.ndarray:
    """Equal-weight Gaussian quantiles rescaled to unit variance."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n == 1:
        return np.zeros(1)
    q = stats.norm.ppf((np.arange(n) + 0.5) / n)
    return q / np.sqrt(np.mean(q**2))


def _coherent_state(
    cfg: PreparationConfig, n_coherent: float, w: float, zeeman: ZeemanPopulations
) -> EnsembleState:
    beam = discretize_beam(cfg.n_classes, cfg.waist, cfg.sample_diameter)
    quantiles = detuning_quantiles(cfg.n_detuning_classes)
    radius, intensity, weight, detuning = [], [], [], []
    for center, relative_intensity, fraction in beam:
        for q in quantiles:
            radius.append(center)
            intensity.append(relative_intensity)
            weight.append(n_coherent * fraction / len(quantiles))
            detuning.append(q)
    bloch = np.zeros((len(weight), 3))
    bloch[:, 2] = w
    return EnsembleState(
        zeeman=zeeman,
        radius=np.array(radius),
        intensity=np.array(intensity),
        weight=np.array(weight),
        bloch=bloch,
        detuning_quantile=np.array(detuning),
        total_atoms=cfg.total_atoms,
        trap_spread=cfg.trap_spread,
    )


def prepare_pumped(cfg: PreparationConfig) -> EnsembleState:
    """
    Optically pumped sample: ``efficiency * N`` coherent atoms in |up>, the
    rest spread evenly over the eight (F=4, m_F != 0) sub-levels. F=3 is empty.
    If ``cfg.purify`` is set the sample is purified straight away.
    """
    n_coherent = cfg.pumping_efficiency * cfg.total_atoms
    spectator = (cfg.total_atoms - n_coherent) / 8
    zeeman = ZeemanPopulations(
        {(4, m): spectator for m in range(-4, 5) if m != 0 and spectator > 0}
    )
    state = _coherent_state(cfg, n_coherent, 1.0, zeeman)
    logger.debug(
        f"pumped {n_coherent:g} of {cfg.total_atoms:g} atoms into |up> "
        f"over {len(state.weight)} classes"
    )
    return purify(state) if cfg.purify else state


def purify(state: EnsembleState) -> EnsembleState:
    """
    Ideal microwave pi pulse followed by a blow-away of everything left in F=4.

    The pi pulse maps ``(u, v, w) -> (u, -v, -w)``. Whatever ends up in |up>
    afterwards is blown away with the (F=4, m_F != 0) spectators; the survivors
    sit in |down> with ``w = -1``. Spectators already in F=3 are kept.
    """
    w_after = -state.bloch[:, 2]
    down_weight = state.weight * (1 - w_after) / 2
    blown_away = float(np.sum(state.weight - down_weight))
    kept = ZeemanPopulations({key: n for key, n in state.zeeman.items() if key[0] != 4})
    blown_away += state.zeeman.total - kept.total
    bloch = np.zeros_like(state.bloch)
    bloch[:, 2] = -1.0
    logger.debug(f"purification removed {blown_away:g} atoms")
    return state.copy(
        zeeman=kept, weight=down_weight, bloch=bloch, lost=state.lost + blown_away
    )


def rabi_contrast(
    state: EnsembleState,
    color: ProbeColor | None = None,
    geometry: ProbeGeometry | None = None,
    scheme: LevelScheme | None = None,
) -> float:
    """
    Fringe contrast of the normalized phase over a full Rabi cycle.

    The coherent atoms swing between all-|up> and all-|down>; spectators add a
    constant pedestal. Contrast is ``swing / (swing + pedestal)``.
    """
    color = color or ProbeColor(detuning=160.0)
    response = phase_response(color, geometry, scheme or CESIUM_D2)
    n = state.coherent_atoms
    swing = abs(n * (response[CLOCK_UP] - response[CLOCK_DOWN]))
    pedestal = abs(sum(count * response[key] for key, count in state.zeeman.items()))
    if swing + pedestal == 0:
        return 0.0
    return swing / (swing + pedestal)


def sample_css(
    n_coherent: int | float,
    rng: np.random.Generator | int | None = None,
    size: int | tuple[int, ...] | None = None,
) -> np.ndarray | int:
    """Binomial ``N_up ~ B(N, 1/2)`` draw(s) for an equatorial coherent spin state."""
    n = int(round(n_coherent))
    if n < 0:
        raise ValueError("atom number must be non-negative")
    generator = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    draw = generator.binomial(n, 0.5, size=size)
    return int(draw) if size is None else draw


@dataclass(frozen=True)
class EnsembleSummary:
    """Numbers reported alongside a prepared sample."""

    total_atoms: float
    coherent_atoms: float
    spectators: float
    lost: float
    mean_intensity: float
    contrast: float


def summarize(state: EnsembleState, color: ProbeColor | None = None) -> EnsembleSummary:
    return EnsembleSummary(
        total_atoms=state.total_atoms,
        coherent_atoms=state.coherent_atoms,
        spectators=state.zeeman.total,
        lost=state.lost,
        mean_intensity=state.mean_intensity,
        contrast=rabi_contrast(state, color),
    )
