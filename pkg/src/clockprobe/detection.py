"""
Interferometric read-out: shot noise, two-color classical noise, the
projection-noise Monte Carlo with its variance decomposition, Rabi traces
with damped-sinusoid fits, and the CSV/report writers.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import ndimage, optimize

from .cesium_model import (
    CESIUM_D2,
    CLOCK_DOWN,
    CLOCK_UP,
    LevelScheme,
    ProbeColor,
    ProbeGeometry,
    balanced_color,
    combined_response,
    pole_phase,
    solve_balance,
)
from .dynamics import BackActionModel, Schedule, TimeSeries, run_schedule
from .ensemble_state import PreparationConfig, prepare_pumped, rabi_contrast, sample_css
from .seeding import stream

logger = logging.getLogger(__name__)

#: Photons in the single projection-noise probe pulse.
NOISE_PROBE_PHOTONS = 3.6e7
#: Relative imbalance of the two colors above which a noise scan is refused.
BALANCE_TOLERANCE = 1e-2
#: Fewer samples per point than this make the variance estimates unreliable.
MIN_SAMPLES = 100


class MeasurementError(ValueError):
    """Raised for impossible read-outs or under-determined noise fits."""

    pass


class UnbalancedProbeError(RuntimeError):
    """Raised when the two colors do not cancel for equal clock populations."""

    pass


@dataclass(frozen=True)
class InterferometerModel:
    """Mach-Zehnder read-out noise; variances in rad^2."""

    shot_noise_enabled: bool = True
    electronic_noise_variance: float = 0.0
    visibility: float = 1.0
    relative_amplitude_rms: float = 0.0
    relative_phase_rms: float = 0.0

    def __post_init__(self) -> None:
        if self.electronic_noise_variance < 0:
            raise ValueError("electronic_noise_variance must be non-negative")
        if not 0 < self.visibility <= 1:
            raise ValueError("visibility must lie in (0, 1]")
        if self.relative_amplitude_rms < 0 or self.relative_phase_rms < 0:
            raise ValueError("classical noise rms values must be non-negative")

    def shot_noise_variance(self, n_photons: float) -> float:
        if not self.shot_noise_enabled:
            return 0.0
        return 1.0 / (self.visibility**2 * n_photons)

    def readout_variance(self, n_photons: float) -> float:
        return self.shot_noise_variance(n_photons) + self.electronic_noise_variance

    @property
    def classical_coefficient(self) -> float:
        """Variance of the two-color jitter per squared pole phase."""
        return self.relative_amplitude_rms**2 + self.relative_phase_rms**2


@dataclass(frozen=True)
class PulseRecord:
    time: float
    true_phase: float
    measured_phase: float
    photon_number: float


def measure_phase(
    true_phase: Any,
    n_photons: float,
    model: InterferometerModel | None = None,
    rng: np.random.Generator | None = None,
) -> Any:
    """
    Homodyne read-out of ``true_phase`` (scalar or array) with ``n_photons``.

    Adds Gaussian noise of variance ``1 / (V^2 n) + electronic``.
    """
    if n_photons <= 0:
        raise MeasurementError(f"cannot measure a phase with {n_photons} photons")
    model = model or InterferometerModel()
    variance = model.readout_variance(n_photons)
    if variance == 0:
        return true_phase
    rng = rng if rng is not None else np.random.default_rng()
    noise = rng.normal(0.0, math.sqrt(variance), size=np.shape(true_phase))
    if np.ndim(true_phase) == 0:
        return float(true_phase + noise)
    return np.asarray(true_phase, dtype=float) + noise


def pulse_records(series: TimeSeries) -> list[PulseRecord]:
    probes = series.probes()
    return [
        PulseRecord(float(t), float(true), float(measured), float(n))
        for t, true, measured, n in zip(
            probes.time, probes.true_phase, probes.measured_phase, probes.photon_number
        )
    ]


# -- damped sinusoid -------------------------------------------------------


def damped_sine(
    t: np.ndarray,
    amplitude: float,
    decay_rate: float,
    frequency: float,
    phase: float,
    offset: float,
    drift: float = 0.0,
) -> np.ndarray:
    """``A exp(-G t) cos(2 pi f t + theta) + B + D t``."""
    return (
        amplitude * np.exp(-decay_rate * t) * np.cos(2 * np.pi * frequency * t + phase)
        + offset
        + drift * t
    )


@dataclass(frozen=True)
class DampedSineFit:
    amplitude: float
    decay_rate: float
    frequency: float
    phase: float
    offset: float
    drift: float
    residual_rms: float
    ok: bool
    message: str = ""
    errors: dict[str, float] = field(default_factory=dict)

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        return damped_sine(
            np.asarray(t, dtype=float),
            self.amplitude,
            self.decay_rate,
            self.frequency,
            self.phase,
            self.offset,
            self.drift,
        )

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


def _failed_fit(message: str) -> DampedSineFit:
    logger.warning(f"damped sinusoid fit failed: {message}")
    nan = math.nan
    return DampedSineFit(nan, nan, nan, nan, nan, nan, nan, ok=False, message=message)


def _estimate_sine(
    t: np.ndarray, y: np.ndarray, drift: bool, frequency_guess: float | None
) -> list[float]:
    """Starting values from a zero-padded FFT and a coarse phase grid."""
    if drift:
        slope, intercept = np.polyfit(t, y, 1)
    else:
        slope, intercept = 0.0, float(np.mean(y))
    residual = y - intercept - slope * t

    span = t[-1] - t[0]
    if frequency_guess is None:
        grid = np.linspace(t[0], t[-1], len(t))
        uniform = np.interp(grid, t, residual)
        padded = 8 * len(grid)
        spectrum = np.abs(np.fft.rfft(uniform - uniform.mean(), n=padded))
        freqs = np.fft.rfftfreq(padded, d=grid[1] - grid[0])
        frequency_guess = float(freqs[1 + np.argmax(spectrum[1:])])

    amplitude = float(np.max(np.abs(residual))) or 1e-12
    decay = 1.0 / span
    envelope = amplitude * np.exp(-decay * t)
    phases = np.linspace(-np.pi, np.pi, 24, endpoint=False)
    costs = [
        np.sum((residual - envelope * np.cos(2 * np.pi * frequency_guess * t + p)) ** 2)
        for p in phases
    ]
    start = [amplitude, decay, frequency_guess, float(phases[int(np.argmin(costs))]), intercept]
    if drift:
        start.append(float(slope))
    return start


def fit_damped_sinusoid(
    t: Sequence[float] | np.ndarray,
    y: Sequence[float] | np.ndarray,
    *,
    drift: bool = False,
    frequency_guess: float | None = None,
) -> DampedSineFit:
    """
    Least-squares fit of ``A exp(-G t) cos(2 pi f t + theta) + B`` (plus ``D t``
    when ``drift`` is set). Failures return a fit with ``ok=False``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    finite = np.isfinite(t) & np.isfinite(y)
    t, y = t[finite], y[finite]
    order = np.argsort(t)
    t, y = t[order], y[order]
    if len(t) < 7 or t[-1] <= t[0]:
        return _failed_fit(f"need at least 7 distinct samples, got {len(t)}")

    try:
        start = _estimate_sine(t, y, drift, frequency_guess)
        n_params = len(start)
        lower = [0.0, 0.0, 0.0] + [-np.inf] * (n_params - 3)
        upper = [np.inf] * n_params
        params, covariance = optimize.curve_fit(
            damped_sine, t, y, p0=start, bounds=(lower, upper), maxfev=20000
        )
    except (RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        return _failed_fit(str(exc))

    if not np.all(np.isfinite(params)):
        return _failed_fit("non-finite parameters")
    names = ["amplitude", "decay_rate", "frequency", "phase", "offset", "drift"][:n_params]
    with np.errstate(invalid="ignore"):
        errors = dict(zip(names, np.sqrt(np.diag(covariance)).tolist()))
    amplitude, decay_rate, frequency, phase, offset = params[:5]
    slope = params[5] if drift else 0.0
    model = damped_sine(t, amplitude, decay_rate, frequency, phase, offset, slope)
    return DampedSineFit(
        amplitude=float(amplitude),
        decay_rate=float(decay_rate),
        frequency=float(frequency),
        phase=float(math.remainder(phase, 2 * math.pi)),
        offset=float(offset),
        drift=float(slope),
        residual_rms=float(np.sqrt(np.mean((y - model) ** 2))),
        ok=True,
        errors=errors,
    )


def running_average(values: Sequence[float] | np.ndarray, window: int) -> np.ndarray:
    """Centred moving average over ``window`` samples, edges held."""
    if window < 1:
        raise ValueError("window must be at least 1")
    return ndimage.uniform_filter1d(np.asarray(values, dtype=float), size=window, mode="nearest")


# -- Rabi experiment -------------------------------------------------------


@dataclass(frozen=True)
class RabiExperiment:
    """Everything one Rabi-trace run needs besides the seed."""

    preparation: PreparationConfig
    schedule: Schedule
    backaction: BackActionModel = field(default_factory=BackActionModel)
    interferometer: InterferometerModel = field(default_factory=InterferometerModel)
    geometry: ProbeGeometry = field(default_factory=ProbeGeometry)
    cycles: int = 1
    sample_times: tuple[float, ...] = ()
    fit_drift: bool = False

    def __post_init__(self) -> None:
        if self.cycles < 1:
            raise ValueError("cycles must be at least 1")


@dataclass
class RabiResult:
    """
    Cycle-averaged series, the first cycle's measured trace and the fit.

    ``series.measured_phase`` holds the cycle average on probe rows.
    """

    series: TimeSeries
    single: np.ndarray
    fit: DampedSineFit
    cycles: int
    contrast: float

    def residual_rms(self, averaged: bool = True) -> float:
        """Rms of measured minus true phase over the probe rows."""
        probes = self.series.probes()
        measured = probes.measured_phase if averaged else self.single
        return float(np.sqrt(np.mean((measured - probes.true_phase) ** 2)))


def _readout_trace(
    true_phase: np.ndarray,
    photons: np.ndarray,
    model: InterferometerModel,
    rng: np.random.Generator,
) -> np.ndarray:
    measured = np.array(true_phase, dtype=float)
    lit = photons > 0
    if not lit.any():
        return measured
    variance = np.array([model.readout_variance(n) for n in photons[lit]])
    measured[lit] += rng.normal(0.0, 1.0, size=int(lit.sum())) * np.sqrt(variance)
    return measured


def run_rabi_experiment(experiment: RabiExperiment, seed: int) -> RabiResult:
    """
    Run ``experiment.cycles`` realizations and fit the averaged probe trace.

    With deterministic back-action the dynamics are run once and only the
    read-out noise differs between cycles; stochastic back-action reruns the
    dynamics per cycle on its own stream.
    """
    initial = prepare_pumped(experiment.preparation)
    model = experiment.interferometer

    def readout(phase: float, n: float, rng: np.random.Generator | None) -> float:
        return float(measure_phase(phase, n, model, rng))

    if experiment.backaction.stochastic:
        runs = [
            run_schedule(
                initial,
                experiment.schedule,
                experiment.backaction,
                stream(seed, "backaction", cycle),
                geometry=experiment.geometry,
                sample_times=experiment.sample_times,
                readout=readout,
            )
            for cycle in range(experiment.cycles)
        ]
        base = runs[0]
        probe_rows = base.is_probe
        single = base.measured_phase[probe_rows].copy()
        series = TimeSeries(
            time=base.time,
            true_phase=np.mean([r.true_phase for r in runs], axis=0),
            measured_phase=np.mean([r.measured_phase for r in runs], axis=0),
            photon_number=base.photon_number,
            n_up=np.mean([r.n_up for r in runs], axis=0),
            n_down=np.mean([r.n_down for r in runs], axis=0),
            lost=np.mean([r.lost for r in runs], axis=0),
            is_probe=probe_rows,
            final_state=base.final_state,
        )
    else:
        base = run_schedule(
            initial,
            experiment.schedule,
            experiment.backaction,
            geometry=experiment.geometry,
            sample_times=experiment.sample_times,
        )
        probe_rows = base.is_probe
        true = base.true_phase[probe_rows]
        photons = base.photon_number[probe_rows]
        total = np.zeros_like(true)
        single = true
        for cycle in range(experiment.cycles):
            trace = _readout_trace(true, photons, model, stream(seed, "readout", cycle))
            if cycle == 0:
                single = trace
            total += trace
        measured = np.full(len(base), np.nan)
        measured[probe_rows] = total / experiment.cycles
        series = base.with_measured(measured)

    probes = series.probes()
    fit = fit_damped_sinusoid(probes.time, probes.measured_phase, drift=experiment.fit_drift)
    first_probe = experiment.schedule.probes[0].pulse.colors[0] if experiment.schedule.probes else None
    contrast = rabi_contrast(initial, first_probe, experiment.geometry)
    logger.info(
        f"Rabi run: {len(probes)} probes x {experiment.cycles} cycles, "
        f"f={fit.frequency:.6g} Hz, decay={fit.decay_rate:.4g} 1/s, contrast={contrast:.3f}"
    )
    return RabiResult(series=series, single=single, fit=fit, cycles=experiment.cycles, contrast=contrast)


# -- projection noise ------------------------------------------------------


@dataclass(frozen=True)
class NoiseProbeConfig:
    """Two simultaneous colors read out in one pulse of ``photon_number`` photons."""

    color_a: ProbeColor
    color_b: ProbeColor
    photon_number: float = NOISE_PROBE_PHOTONS
    geometry: ProbeGeometry = field(default_factory=ProbeGeometry)
    scheme: LevelScheme = CESIUM_D2

    def __post_init__(self) -> None:
        if self.photon_number <= 0:
            raise MeasurementError("the noise probe needs a positive photon number")

    @classmethod
    def balanced(
        cls,
        delta45: float = 160.0,
        photon_number: float = NOISE_PROBE_PHOTONS,
        geometry: ProbeGeometry | None = None,
        scheme: LevelScheme | None = None,
    ) -> NoiseProbeConfig:
        """Color A at ``delta45`` from F=4 -> F'=5, color B solved for balance."""
        geometry = geometry or ProbeGeometry()
        scheme = scheme or CESIUM_D2
        color_a = ProbeColor(detuning=delta45, photon_number=photon_number / 2)
        color_b = balanced_color(color_a, solve_balance(color_a, scheme, geometry))
        return cls(color_a, color_b, photon_number, geometry, scheme)

    @property
    def response(self) -> tuple[float, float]:
        """Two-color phase per atom in (|up>, |down>)."""
        combined = combined_response((self.color_a, self.color_b), self.geometry, self.scheme)
        return combined[CLOCK_UP], combined[CLOCK_DOWN]

    @property
    def pole_phase_per_atom(self) -> float:
        """Single-color (A) phase per atom with everything in |up>."""
        return pole_phase(1.0, self.color_a, self.geometry, self.scheme)

    @property
    def imbalance(self) -> float:
        """Two-color phase for equal clock populations relative to the pole phase."""
        up, down = self.response
        return abs(up + down) / 2 / abs(self.pole_phase_per_atom)


@dataclass(frozen=True)
class NoiseDecomposition:
    """Weighted fit ``variance = a + b x + c x^2`` over pole phase ``x``."""

    a: float
    b: float
    c: float
    a_err: float
    b_err: float
    c_err: float
    r_squared: float
    linear_a: float
    linear_b: float
    linear_a_err: float
    linear_b_err: float
    linear_r_squared: float
    b_negative: bool

    def predict(self, pole_phase: Any) -> Any:
        x = np.asarray(pole_phase, dtype=float)
        return self.a + self.b * x + self.c * x**2

    @property
    def classical_resolved(self) -> bool:
        """``c`` is positive by more than two standard errors."""
        return bool(self.c > 2 * self.c_err)

    def classical_to_atomic(self, pole_phase: float) -> float:
        """``c x^2 / (b x)`` at one pole phase; inf when ``b`` is not positive."""
        if self.b <= 0:
            return math.inf
        return self.c * pole_phase / self.b

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class NoiseScan:
    """
    Measured phases per atom number.

    ``pole_phases`` is the single-color phase with all atoms in |up>.
    """

    atom_numbers: np.ndarray
    pole_phases: np.ndarray
    samples: list[np.ndarray]
    photon_number: float
    response: tuple[float, float]
    fit: NoiseDecomposition | None = None

    def __post_init__(self) -> None:
        self.atom_numbers = np.asarray(self.atom_numbers, dtype=float)
        self.pole_phases = np.asarray(self.pole_phases, dtype=float)
        self.samples = [np.asarray(s, dtype=float) for s in self.samples]
        if not (len(self.atom_numbers) == len(self.pole_phases) == len(self.samples)):
            raise ValueError("one pole phase and one sample set per atom number")
        if np.any(self.pole_phases < 0) or np.any(np.diff(self.pole_phases) < 0):
            raise ValueError("pole phases must be non-negative and ascending")
        if any(len(s) < 2 for s in self.samples):
            raise MeasurementError("each point needs at least two samples")
        fewest = min((len(s) for s in self.samples), default=0)
        if fewest < MIN_SAMPLES:
            logger.warning(
                f"only {fewest} samples per point; variance estimates below "
                f"{MIN_SAMPLES} samples are unreliable"
            )

    @property
    def reps(self) -> np.ndarray:
        return np.array([len(s) for s in self.samples])

    @property
    def variances(self) -> np.ndarray:
        return np.array([np.var(s, ddof=1) for s in self.samples])

    @property
    def variance_errors(self) -> np.ndarray:
        """Normal-approximation standard error ``sqrt(2 s^4 / (n - 1))``."""
        return np.sqrt(2 * self.variances**2 / (self.reps - 1))

    def spin_projection(self, index: int) -> np.ndarray:
        """Inferred ``N_up - N_down`` for every sample of one point."""
        up, down = self.response
        if up == down:
            raise MeasurementError("the probe does not distinguish the clock states")
        n = self.atom_numbers[index]
        return 2 * (self.samples[index] - (up + down) * n / 2) / (up - down)


def _noise_block(
    seed: int,
    point: int,
    block: int,
    size: int,
    n_atoms: int,
    response: tuple[float, float],
    pole: float,
    photon_number: float,
    model: InterferometerModel,
) -> np.ndarray:
    rng = stream(seed, "projection-noise", point, block)
    up, down = response
    n_up = sample_css(n_atoms, rng, size=size)
    phase = up * n_up + down * (n_atoms - n_up)
    jitter = rng.standard_normal((2, size))
    phase = phase + pole * (
        model.relative_amplitude_rms * jitter[0] + model.relative_phase_rms * jitter[1]
    )
    return measure_phase(phase, photon_number, model, rng)


def run_projection_noise_scan(
    atom_numbers: Iterable[float],
    reps: int,
    probe: NoiseProbeConfig,
    model: InterferometerModel | None = None,
    seed: int = 0,
    *,
    workers: int | None = None,
    block_size: int = 1000,
) -> NoiseScan:
    """
    Repeat prepare / pi-2 / single two-color pulse ``reps`` times per atom number.

    Each repetition draws ``N_up ~ B(N, 1/2)``, adds the two-color jitter
    proportional to the single-color pole phase and reads out with shot noise.
    Replicates run in blocks on their own streams, so ``workers`` never
    changes the result.
    """
    model = model or InterferometerModel()
    if probe.imbalance >= BALANCE_TOLERANCE:
        raise UnbalancedProbeError(
            f"two-color phase for equal populations is {probe.imbalance:.3%} of the "
            f"pole phase (tolerance {BALANCE_TOLERANCE:.0%}); color B at "
            f"{probe.color_b.detuning} MHz is not balanced against color A at "
            f"{probe.color_a.detuning} MHz"
        )
    if reps < 2:
        raise MeasurementError("at least two repetitions per point are required")

    numbers = sorted(int(round(n)) for n in atom_numbers)
    pole_per_atom = probe.pole_phase_per_atom
    response = probe.response

    tasks = []
    for point, n_atoms in enumerate(numbers):
        for block, start in enumerate(range(0, reps, block_size)):
            size = min(block_size, reps - start)
            tasks.append(
                (seed, point, block, size, n_atoms, response, pole_per_atom * n_atoms, probe.photon_number, model)
            )

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            blocks = list(executor.map(lambda task: _noise_block(*task), tasks))
    else:
        blocks = [_noise_block(*task) for task in tasks]

    samples: list[list[np.ndarray]] = [[] for _ in numbers]
    for task, values in zip(tasks, blocks):
        samples[task[1]].append(values)
    logger.info(f"projection-noise scan: {len(numbers)} points x {reps} reps")
    return NoiseScan(
        atom_numbers=np.array(numbers, dtype=float),
        pole_phases=np.abs(pole_per_atom) * np.array(numbers, dtype=float),
        samples=[np.concatenate(parts) for parts in samples],
        photon_number=probe.photon_number,
        response=response,
    )


def _weighted_polyfit(
    x: np.ndarray, y: np.ndarray, variance: np.ndarray, degree: int
) -> tuple[np.ndarray, np.ndarray, float]:
    """Coefficients (ascending powers), covariance and weighted R^2."""
    scale = float(np.max(np.abs(x))) or 1.0
    design = np.vander(x / scale, degree + 1, increasing=True)
    weights = 1.0 / variance
    normal = design.T @ (weights[:, None] * design)
    covariance = np.linalg.inv(normal)
    coefficients = covariance @ (design.T @ (weights * y))
    unscale = scale ** -np.arange(degree + 1)
    coefficients = coefficients * unscale
    covariance = covariance * np.outer(unscale, unscale)

    fitted = np.vander(x, degree + 1, increasing=True) @ coefficients
    mean = np.sum(weights * y) / np.sum(weights)
    total = np.sum(weights * (y - mean) ** 2)
    r_squared = 1.0 - np.sum(weights * (y - fitted) ** 2) / total if total > 0 else 1.0
    return coefficients, covariance, float(r_squared)


def decompose_noise(scan: NoiseScan) -> NoiseDecomposition:
    """
    Split the measured variance into read-out floor ``a``, atomic term ``b x``
    and classical term ``c x^2`` by weighted least squares.

    Weights use the variance-of-variance ``2 s^4 / (n - 1)``. A linear-only fit
    is reported alongside. A negative ``b`` beyond two standard errors is
    flagged and logged.
    """
    if len(np.unique(scan.atom_numbers)) < 4:
        raise MeasurementError("the decomposition needs at least four distinct atom numbers")
    x = scan.pole_phases
    y = scan.variances
    variance = scan.variance_errors**2
    if np.any(variance <= 0):
        raise MeasurementError("a scan point has zero sample variance")

    quadratic, covariance, r_squared = _weighted_polyfit(x, y, variance, 2)
    linear, linear_covariance, linear_r_squared = _weighted_polyfit(x, y, variance, 1)
    errors = np.sqrt(np.diag(covariance))
    linear_errors = np.sqrt(np.diag(linear_covariance))
    b_negative = bool(quadratic[1] < -2 * errors[1])
    if b_negative:
        logger.warning(
            f"fitted atomic noise coefficient b={quadratic[1]:.3e} is negative "
            f"beyond two standard errors ({errors[1]:.3e})"
        )
    decomposition = NoiseDecomposition(
        a=float(quadratic[0]),
        b=float(quadratic[1]),
        c=float(quadratic[2]),
        a_err=float(errors[0]),
        b_err=float(errors[1]),
        c_err=float(errors[2]),
        r_squared=r_squared,
        linear_a=float(linear[0]),
        linear_b=float(linear[1]),
        linear_a_err=float(linear_errors[0]),
        linear_b_err=float(linear_errors[1]),
        linear_r_squared=linear_r_squared,
        b_negative=b_negative,
    )
    scan.fit = decomposition
    return decomposition


def predicted_projection_noise(
    pole_phases: Any,
    probe: NoiseProbeConfig,
    model: InterferometerModel | None = None,
    include_classical: bool = False,
) -> np.ndarray:
    """
    Analytic variance versus pole phase: read-out floor plus projection noise
    ``(r_up - r_down)^2 / (4 a) * x`` with ``a`` the pole phase per atom.
    """
    model = model or InterferometerModel()
    x = np.asarray(pole_phases, dtype=float)
    up, down = probe.response
    slope = (up - down) ** 2 / (4 * abs(probe.pole_phase_per_atom))
    variance = model.readout_variance(probe.photon_number) + slope * x
    if include_classical:
        variance = variance + model.classical_coefficient * x**2
    return variance


def projection_histogram(
    scan: NoiseScan, index: int, bins: int | Sequence[float] = 30
) -> tuple[np.ndarray, np.ndarray]:
    """Histogram of the inferred ``N_up - N_down`` at one scan point."""
    return np.histogram(scan.spin_projection(index), bins=bins)


# -- output ----------------------------------------------------------------


def _number(value: float) -> str:
    return repr(float(value))


def _write_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_number(v) for v in row])
    logger.debug(f"wrote {path}")
    return path


def write_trace_csv(
    path: str | Path, time: Sequence[float], true_phase: Sequence[float], measured_phase: Sequence[float]
) -> Path:
    """Rabi trace: ``t_s, true_phase_rad, measured_phase_rad``."""
    return _write_rows(
        path, ("t_s", "true_phase_rad", "measured_phase_rad"), zip(time, true_phase, measured_phase)
    )


def write_noise_scan_csv(path: str | Path, scan: NoiseScan) -> Path:
    """Noise scan: ``pole_phase_rad, n_atoms, variance_rad2, variance_err_rad2``."""
    return _write_rows(
        path,
        ("pole_phase_rad", "n_atoms", "variance_rad2", "variance_err_rad2"),
        zip(scan.pole_phases, scan.atom_numbers, scan.variances, scan.variance_errors),
    )


def write_prediction_csv(path: str | Path, pole_phases: Sequence[float], variance: Sequence[float]) -> Path:
    return _write_rows(path, ("pole_phase_rad", "predicted_variance_rad2"), zip(pole_phases, variance))


def write_histogram_csv(path: str | Path, scan: NoiseScan, bins: int = 30) -> Path:
    """Spin-projection histograms: ``n_atoms, bin_low, bin_high, count`` per point."""
    rows = []
    for index, n_atoms in enumerate(scan.atom_numbers):
        counts, edges = projection_histogram(scan, index, bins)
        rows.extend((n_atoms, lo, hi, count) for lo, hi, count in zip(edges[:-1], edges[1:], counts))
    return _write_rows(path, ("n_atoms", "bin_low", "bin_high", "count"), rows)


def write_report(path: str | Path, report: dict[str, Any]) -> Path:
    """Structured fit report as sorted, indented JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug(f"wrote {path}")
    return path
