"""
Time evolution of the pseudo-spin classes.

Microwave segments are exact rotations about ``(Omega cos phi, Omega sin phi,
delta + static detuning)``; probes are instantaneous events at the pulse
midpoint that read out the dispersive phase and then apply back-action.
Time not covered by a drive segment is free evolution under the trap-induced
static detunings.
"""

from __future__ import annotations

import bisect
import dataclasses
import json
import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, ClassVar, Union

import numpy as np

from .cesium_model import (
    CESIUM_D2,
    LevelScheme,
    ProbeColor,
    ProbeGeometry,
    multi_color_phase,
)
from .ensemble_state import EnsembleState

logger = logging.getLogger(__name__)

#: Ensemble-average differential Stark phase per probe photon, rad.
DEFAULT_STARK_PHASE = 4e-7
#: Color-A detuning the default scattering is tied to, MHz.
DEFAULT_PROBE_DETUNING = 160.0
#: Per-class Stark kick above which the instantaneous-kick picture is questionable.
KICK_WARNING = 0.1
#: Per-pulse scattering probability above which the mean-field loss model is questionable.
SCATTER_WARNING = 0.1
#: Two times closer than this are the same instant, s.
TIME_TOLERANCE = 1e-12

Readout = Callable[[float, float, Union[np.random.Generator, None]], float]


class ScheduleError(ValueError):
    """Raised for overlapping, unordered or malformed schedules."""

    pass


@dataclass(frozen=True)
class MicrowavePulse:
    """Resonant-ish drive on the clock transition; frequencies in rad/s."""

    rabi_frequency: float
    duration: float
    detuning: float = 0.0
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.rabi_frequency < 0:
            raise ValueError("rabi_frequency must be non-negative")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")

    @property
    def generalized_frequency(self) -> float:
        return math.hypot(self.rabi_frequency, self.detuning)

    def with_duration(self, duration: float) -> MicrowavePulse:
        return dataclasses.replace(self, duration=duration)


@dataclass(frozen=True)
class ProbePulse:
    """
    One probe pulse made of one or more simultaneous colors.

    ``photon_number`` defaults to the sum over the colors.
    """

    colors: tuple[ProbeColor, ...]
    duration: float
    photon_number: float | None = None

    def __post_init__(self) -> None:
        colors = tuple(self.colors)
        if not colors:
            raise ValueError("a probe pulse needs at least one color")
        object.__setattr__(self, "colors", colors)
        if self.photon_number is None:
            object.__setattr__(
                self, "photon_number", float(sum(c.photon_number for c in colors))
            )
        if self.photon_number < 0:  # type: ignore[operator]
            raise ValueError("photon_number must be non-negative")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")

    @property
    def photons(self) -> float:
        return float(self.photon_number or 0.0)

    def with_photons(self, photon_number: float) -> ProbePulse:
        """Same colors and duration, every color scaled to the new total."""
        current = sum(c.photon_number for c in self.colors)
        if current > 0:
            scale = photon_number / current
            colors = tuple(
                dataclasses.replace(c, photon_number=c.photon_number * scale)
                for c in self.colors
            )
        else:
            colors = self.colors
        return ProbePulse(colors=colors, duration=self.duration, photon_number=photon_number)


@dataclass(frozen=True)
class BackActionModel:
    """Stark kicks and spontaneous scattering caused by each probe photon."""

    stark_phase_per_photon: float = DEFAULT_STARK_PHASE
    raman_prob_per_photon: float = (
        DEFAULT_STARK_PHASE * CESIUM_D2.linewidth / DEFAULT_PROBE_DETUNING / 2
    )
    rayleigh_prob_per_photon: float = (
        DEFAULT_STARK_PHASE * CESIUM_D2.linewidth / DEFAULT_PROBE_DETUNING / 2
    )
    stochastic: bool = False

    def __post_init__(self) -> None:
        for name in ("stark_phase_per_photon", "raman_prob_per_photon", "rayleigh_prob_per_photon"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def from_detuning(
        cls,
        detuning: float,
        stark_phase_per_photon: float = DEFAULT_STARK_PHASE,
        raman_fraction: float = 0.5,
        linewidth: float | None = None,
        stochastic: bool = False,
    ) -> BackActionModel:
        """
        Scattering tied to the Stark phase: ``phi_bar * gamma / |detuning|``
        per photon in total, split between Raman and Rayleigh.
        """
        if detuning == 0:
            raise ValueError("scattering model needs a non-zero detuning")
        if not 0 <= raman_fraction <= 1:
            raise ValueError("raman_fraction must lie in [0, 1]")
        linewidth = CESIUM_D2.linewidth if linewidth is None else linewidth
        total = stark_phase_per_photon * linewidth / abs(detuning)
        return cls(
            stark_phase_per_photon=stark_phase_per_photon,
            raman_prob_per_photon=total * raman_fraction,
            rayleigh_prob_per_photon=total * (1 - raman_fraction),
            stochastic=stochastic,
        )

    @classmethod
    def disabled(cls) -> BackActionModel:
        return cls(0.0, 0.0, 0.0)

    @property
    def scattering_per_photon(self) -> float:
        return self.raman_prob_per_photon + self.rayleigh_prob_per_photon


@dataclass(frozen=True)
class DriveEvent:
    start: float
    pulse: MicrowavePulse
    kind: ClassVar[str] = "drive"

    @property
    def end(self) -> float:
        return self.start + self.pulse.duration


@dataclass(frozen=True)
class GapEvent:
    start: float
    duration: float
    kind: ClassVar[str] = "gap"

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class ProbeEvent:
    """Probe pulse centred on ``time``."""

    time: float
    pulse: ProbePulse
    kind: ClassVar[str] = "probe"

    @property
    def start(self) -> float:
        return self.time


Event = Union[DriveEvent, GapEvent, ProbeEvent]
Interval = Union[DriveEvent, GapEvent]


@dataclass(frozen=True)
class Schedule:
    """Time-ordered, non-overlapping drive segments, gaps and probes."""

    events: tuple[Event, ...]

    def __post_init__(self) -> None:
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        previous = -math.inf
        for event in events:
            if event.start < -TIME_TOLERANCE:
                raise ScheduleError(f"{event.kind} event starts before t=0: {event.start}")
            if event.start < previous - TIME_TOLERANCE:
                raise ScheduleError(
                    f"events are not time ordered: {event.kind} at {event.start} "
                    f"follows an event at {previous}"
                )
            previous = event.start
        intervals = self.intervals
        for first, second in zip(intervals, intervals[1:]):
            if second.start < first.end - TIME_TOLERANCE:
                raise ScheduleError(
                    f"{first.kind} [{first.start}, {first.end}] overlaps "
                    f"{second.kind} starting at {second.start}"
                )
        starts = [interval.start for interval in intervals]
        for probe in self.probes:
            i = bisect.bisect_right(starts, probe.time) - 1
            if i >= 0 and intervals[i].start + TIME_TOLERANCE < probe.time < intervals[i].end - TIME_TOLERANCE:
                raise ScheduleError(
                    f"probe at {probe.time} lies inside {intervals[i].kind} "
                    f"[{intervals[i].start}, {intervals[i].end}]"
                )

    @property
    def intervals(self) -> list[Interval]:
        return [e for e in self.events if not isinstance(e, ProbeEvent)]

    @property
    def probes(self) -> list[ProbeEvent]:
        return [e for e in self.events if isinstance(e, ProbeEvent)]

    @property
    def end(self) -> float:
        ends = [e.end for e in self.intervals] + [p.time for p in self.probes]
        return max(ends, default=0.0)

    @property
    def total_photons(self) -> float:
        return sum(p.pulse.photons for p in self.probes)

    def to_dict(self) -> dict[str, Any]:
        return {"version": 1, "events": [_event_to_dict(e) for e in self.events]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Schedule:
        try:
            return cls(tuple(_event_from_dict(item) for item in data["events"]))
        except (KeyError, TypeError) as exc:
            raise ScheduleError(f"malformed schedule: {exc!r}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> Schedule:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScheduleError(f"schedule is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Schedule:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _color_to_dict(color: ProbeColor) -> dict[str, Any]:
    return {
        "detuning": color.detuning,
        "reference_transition": list(color.reference_transition),
        "polarization": color.polarization,
        "photon_number": color.photon_number,
        "sign": color.sign,
    }


def _event_to_dict(event: Event) -> dict[str, Any]:
    if isinstance(event, DriveEvent):
        return {
            "type": "drive",
            "start": event.start,
            "duration": event.pulse.duration,
            "rabi_frequency": event.pulse.rabi_frequency,
            "detuning": event.pulse.detuning,
            "phase": event.pulse.phase,
        }
    if isinstance(event, GapEvent):
        return {"type": "gap", "start": event.start, "duration": event.duration}
    return {
        "type": "probe",
        "time": event.time,
        "duration": event.pulse.duration,
        "photon_number": event.pulse.photons,
        "colors": [_color_to_dict(c) for c in event.pulse.colors],
    }


def _event_from_dict(item: dict[str, Any]) -> Event:
    kind = item["type"]
    if kind == "drive":
        return DriveEvent(
            start=float(item["start"]),
            pulse=MicrowavePulse(
                rabi_frequency=float(item["rabi_frequency"]),
                duration=float(item["duration"]),
                detuning=float(item.get("detuning", 0.0)),
                phase=float(item.get("phase", 0.0)),
            ),
        )
    if kind == "gap":
        return GapEvent(start=float(item["start"]), duration=float(item["duration"]))
    if kind == "probe":
        colors = tuple(
            ProbeColor(
                detuning=float(c["detuning"]),
                reference_transition=tuple(c.get("reference_transition", (4, 5))),  # type: ignore[arg-type]
                polarization=int(c.get("polarization", 0)),
                photon_number=float(c.get("photon_number", 0.0)),
                sign=int(c.get("sign", 1)),
            )
            for c in item["colors"]
        )
        return ProbeEvent(
            time=float(item["time"]),
            pulse=ProbePulse(
                colors=colors,
                duration=float(item.get("duration", 0.0)),
                photon_number=float(item["photon_number"]),
            ),
        )
    raise ScheduleError(f"unknown event type '{kind}'")


@dataclass
class TimeSeries:
    """
    Rows recorded by :func:`run_schedule`.

    Probe rows carry the dispersive phase seen by the probe; snapshot rows
    (``is_probe`` False) record the state at requested sample times, the
    phase the schedule's first probe would see there, and a NaN measured
    phase. Populations are taken before the probe's back-action.
    """

    time: np.ndarray
    true_phase: np.ndarray
    measured_phase: np.ndarray
    photon_number: np.ndarray
    n_up: np.ndarray
    n_down: np.ndarray
    lost: np.ndarray
    is_probe: np.ndarray
    final_state: EnsembleState | None = None

    def __len__(self) -> int:
        return len(self.time)

    def select(self, mask: np.ndarray) -> TimeSeries:
        return TimeSeries(
            time=self.time[mask],
            true_phase=self.true_phase[mask],
            measured_phase=self.measured_phase[mask],
            photon_number=self.photon_number[mask],
            n_up=self.n_up[mask],
            n_down=self.n_down[mask],
            lost=self.lost[mask],
            is_probe=self.is_probe[mask],
            final_state=self.final_state,
        )

    def probes(self) -> TimeSeries:
        return self.select(self.is_probe)

    def snapshots(self) -> TimeSeries:
        return self.select(~self.is_probe)

    def with_measured(self, measured_phase: np.ndarray) -> TimeSeries:
        return dataclasses.replace(self, measured_phase=np.asarray(measured_phase, dtype=float))

    @property
    def up_fraction(self) -> np.ndarray:
        total = self.n_up + self.n_down
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(total > 0, self.n_up / total, np.nan)


def _rotate(bloch: np.ndarray, axis: np.ndarray, dt: float) -> np.ndarray:
    """Rodrigues rotation of each row of ``bloch`` about ``axis`` (rad/s) for ``dt``."""
    rate = np.linalg.norm(axis, axis=1)
    unit = axis / np.where(rate > 0, rate, 1.0)[:, None]
    angle = (rate * dt)[:, None]
    cos, sin = np.cos(angle), np.sin(angle)
    dot = np.sum(unit * bloch, axis=1, keepdims=True)
    return bloch * cos + np.cross(unit, bloch) * sin + unit * dot * (1 - cos)


def _rotate_w(bloch: np.ndarray, angle: np.ndarray) -> np.ndarray:
    cos, sin = np.cos(angle), np.sin(angle)
    rotated = bloch.copy()
    rotated[:, 0] = bloch[:, 0] * cos - bloch[:, 1] * sin
    rotated[:, 1] = bloch[:, 0] * sin + bloch[:, 1] * cos
    return rotated


def evolve_rabi(state: EnsembleState, pulse: MicrowavePulse) -> EnsembleState:
    """Rotate every class for ``pulse.duration`` under the drive plus its static detuning."""
    n = len(state.weight)
    axis = np.empty((n, 3))
    axis[:, 0] = pulse.rabi_frequency * math.cos(pulse.phase)
    axis[:, 1] = pulse.rabi_frequency * math.sin(pulse.phase)
    axis[:, 2] = pulse.detuning + state.static_detuning
    return state.copy(bloch=_rotate(state.bloch, axis, pulse.duration))


def apply_trap_dephasing(
    state: EnsembleState, dt: float, trap_spread: float | None = None
) -> EnsembleState:
    """
    Free precession of each class at its static detuning for ``dt``.

    Passing ``trap_spread`` rescales the static detunings of the state to that
    width from then on.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if trap_spread is not None:
        if trap_spread < 0:
            raise ValueError("trap_spread must be non-negative")
        state = state.copy(trap_spread=trap_spread)
    return state.copy(bloch=_rotate_w(state.bloch, state.static_detuning * dt))


def probe_phase(
    state: EnsembleState,
    pulse: ProbePulse,
    geometry: ProbeGeometry | None = None,
    scheme: LevelScheme | None = None,
) -> float:
    """Dispersive phase the probe picks up from the current populations."""
    return multi_color_phase(state.populations(), pulse.colors, geometry, scheme)


def max_stark_kick(state: EnsembleState, photon_number: float, model: BackActionModel) -> float:
    if len(state.weight) == 0:
        return 0.0
    relative = state.intensity / state.mean_intensity
    return float(model.stark_phase_per_photon * photon_number * relative.max())


def _check_pulse(state: EnsembleState, photon_number: float, model: BackActionModel) -> None:
    kick = max_stark_kick(state, photon_number, model)
    if kick > KICK_WARNING:
        logger.warning(
            f"Stark kick of {kick:.3g} rad per pulse exceeds {KICK_WARNING} rad; "
            f"the instantaneous-kick model is stretched"
        )
    scatter = model.scattering_per_photon * photon_number
    if scatter > SCATTER_WARNING:
        logger.warning(
            f"scattering probability {scatter:.3g} per pulse exceeds {SCATTER_WARNING}"
        )


def apply_probe_backaction(
    state: EnsembleState,
    pulse: ProbePulse,
    model: BackActionModel,
    rng: np.random.Generator | None = None,
    *,
    geometry: ProbeGeometry | None = None,
    scheme: LevelScheme | None = None,
    warn: bool = True,
) -> tuple[EnsembleState, float]:
    """
    Read out the dispersive phase, then apply the probe's back-action.

    Each class is kicked about the w axis by ``phi_bar * n * I / <I>``, loses
    a Raman fraction ``p_raman * n * I / <I>`` of its atoms to ``lost`` and has
    its coherence shrunk by ``1 - p_rayleigh * n * I / <I> * (1 - |w|)``.
    Raman losses are Poisson draws when the model is stochastic and ``rng``
    is given.
    """
    phase = probe_phase(state, pulse, geometry, scheme)
    n = pulse.photons
    if n == 0 or len(state.weight) == 0:
        return state.copy(), phase
    if warn:
        _check_pulse(state, n, model)

    relative = state.intensity / state.mean_intensity
    bloch = _rotate_w(state.bloch, model.stark_phase_per_photon * n * relative)

    raman = np.clip(model.raman_prob_per_photon * n * relative, 0.0, 1.0)
    if model.stochastic and rng is not None:
        scattered = np.minimum(rng.poisson(state.weight * raman).astype(float), state.weight)
    else:
        scattered = state.weight * raman
    weight = state.weight - scattered

    rayleigh = model.rayleigh_prob_per_photon * n * relative
    shrink = np.clip(1 - rayleigh * (1 - np.abs(bloch[:, 2])), 0.0, 1.0)
    bloch[:, :2] *= shrink[:, None]

    return state.copy(bloch=bloch, weight=weight, lost=state.lost + float(scattered.sum())), phase


def _advance(
    state: EnsembleState, intervals: Sequence[Interval], starts: Sequence[float], t0: float, t1: float
) -> EnsembleState:
    t = t0
    while t1 - t > TIME_TOLERANCE:
        i = bisect.bisect_right(starts, t + TIME_TOLERANCE) - 1
        if i >= 0 and intervals[i].end - t > TIME_TOLERANCE:
            interval = intervals[i]
            stop = min(interval.end, t1)
            if isinstance(interval, DriveEvent):
                state = evolve_rabi(state, interval.pulse.with_duration(stop - t))
            else:
                state = apply_trap_dephasing(state, stop - t)
        else:
            upcoming = starts[i + 1] if i + 1 < len(starts) else math.inf
            stop = min(upcoming, t1)
            state = apply_trap_dephasing(state, stop - t)
        t = stop
    return state


def run_schedule(
    state: EnsembleState,
    schedule: Schedule,
    backaction: BackActionModel | None = None,
    rng: np.random.Generator | None = None,
    *,
    geometry: ProbeGeometry | None = None,
    scheme: LevelScheme | None = None,
    sample_times: Iterable[float] = (),
    readout: Readout | None = None,
) -> TimeSeries:
    """
    Execute ``schedule`` on ``state``.

    Every probe records its dispersive phase before its back-action is
    applied. ``readout(true_phase, photons, rng)`` turns the true phase into
    a measured one; without it the measured phase equals the true phase.
    Snapshots at ``sample_times`` are taken before a probe at the same instant.
    """
    backaction = backaction or BackActionModel.disabled()
    intervals = schedule.intervals
    starts = [interval.start for interval in intervals]

    probes = schedule.probes
    snapshot_pulse = probes[0].pulse if probes else None
    photon_levels = [p.pulse.photons for p in probes]
    if photon_levels:
        _check_pulse(state, max(photon_levels), backaction)

    points: list[tuple[float, int, ProbeEvent | None]] = [(float(t), 0, None) for t in sample_times]
    points += [(p.time, 1, p) for p in probes]
    points.sort(key=lambda point: (point[0], point[1]))

    rows: list[tuple[float, float, float, float, float, float, float, bool]] = []
    t = 0.0
    for time, _, probe in points:
        if time < t - TIME_TOLERANCE:
            raise ScheduleError(f"sample time {time} is negative")
        state = _advance(state, intervals, starts, t, time)
        t = max(t, time)
        up, down = state.clock_populations()
        lost = state.lost
        if probe is None:
            if snapshot_pulse is None:
                phase = math.nan
            else:
                phase = probe_phase(state, snapshot_pulse, geometry, scheme)
            rows.append((time, phase, math.nan, 0.0, up, down, lost, False))
            continue
        n = probe.pulse.photons
        state, phase = apply_probe_backaction(
            state, probe.pulse, backaction, rng, geometry=geometry, scheme=scheme, warn=False
        )
        measured = readout(phase, n, rng) if readout is not None and n > 0 else phase
        rows.append((time, phase, measured, n, up, down, lost, True))

    state = _advance(state, intervals, starts, t, max(t, schedule.end))
    columns = list(zip(*rows)) if rows else [()] * 8
    return TimeSeries(
        time=np.array(columns[0], dtype=float),
        true_phase=np.array(columns[1], dtype=float),
        measured_phase=np.array(columns[2], dtype=float),
        photon_number=np.array(columns[3], dtype=float),
        n_up=np.array(columns[4], dtype=float),
        n_down=np.array(columns[5], dtype=float),
        lost=np.array(columns[6], dtype=float),
        is_probe=np.array(columns[7], dtype=bool),
        final_state=state,
    )


def _driven_schedule(
    probe_times: Sequence[float],
    total_duration: float,
    drive: MicrowavePulse,
    probe_template: ProbePulse,
) -> Schedule:
    events: list[Event] = []
    boundaries = [0.0, *probe_times, total_duration]
    for index, (start, stop) in enumerate(zip(boundaries, boundaries[1:])):
        if stop - start > TIME_TOLERANCE:
            events.append(DriveEvent(start=start, pulse=drive.with_duration(stop - start)))
        if index < len(probe_times):
            events.append(ProbeEvent(time=probe_times[index], pulse=probe_template))
    return Schedule(tuple(events))


def uniform_schedule(
    rabi_frequency: float,
    total_duration: float,
    cadence: float,
    probe_template: ProbePulse,
    *,
    detuning: float = 0.0,
    phase: float = 0.0,
) -> Schedule:
    """
    Continuous drive probed every ``cadence``; probe ``i`` is centred on
    ``i * cadence + duration / 2``.
    """
    if cadence <= 0:
        raise ValueError("cadence must be positive")
    if total_duration < 0:
        raise ValueError("total_duration must be non-negative")
    offset = probe_template.duration / 2
    if total_duration < offset:
        count = 0
    else:
        count = int(math.floor((total_duration - offset) / cadence + 1e-9)) + 1
    times = [i * cadence + offset for i in range(count)]
    drive = MicrowavePulse(rabi_frequency=rabi_frequency, duration=0.0, detuning=detuning, phase=phase)
    return _driven_schedule(times, total_duration, drive, probe_template)


def echo_schedule(
    rabi_frequency: float,
    total_duration: float,
    probe_template: ProbePulse,
    *,
    at_both_poles: bool = False,
    detuning: float = 0.0,
    phase: float = 0.0,
) -> Schedule:
    """
    Continuous drive probed only at the poles of the Rabi trajectory.

    Probes sit at odd multiples of the half Rabi period ``pi / Omega``; with
    ``at_both_poles`` they sit at every multiple, i.e. every half period.
    """
    if rabi_frequency <= 0:
        raise ValueError("rabi_frequency must be positive")
    half_period = math.pi / rabi_frequency
    count = int(math.floor(total_duration / half_period + 1e-9))
    multiples = range(1, count + 1) if at_both_poles else range(1, count + 1, 2)
    times = [k * half_period for k in multiples]
    drive = MicrowavePulse(rabi_frequency=rabi_frequency, duration=0.0, detuning=detuning, phase=phase)
    return _driven_schedule(times, total_duration, drive, probe_template)
