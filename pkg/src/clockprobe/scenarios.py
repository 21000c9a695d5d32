"""
Built-in scenarios: the two Rabi traces, the projection-noise scan, the
two-color balance and Wigner-symbol evaluation.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any

import numpy as np

from .angular_momentum import HalfInt, wigner_3j, wigner_6j
from .cesium_model import (
    CESIUM_D2,
    OPERATING_POINT_DETUNING,
    ProbeColor,
    ProbeGeometry,
    balance_scan,
    photons_from_power,
    solve_balance,
)
from .detection import (
    MIN_SAMPLES,
    InterferometerModel,
    NoiseProbeConfig,
    RabiExperiment,
    RabiResult,
    decompose_noise,
    predicted_projection_noise,
    run_projection_noise_scan,
    run_rabi_experiment,
    running_average,
    write_histogram_csv,
    write_noise_scan_csv,
    write_prediction_csv,
    write_report,
    write_trace_csv,
)
from .dynamics import (
    KICK_WARNING,
    SCATTER_WARNING,
    BackActionModel,
    ProbePulse,
    Schedule,
    max_stark_kick,
    uniform_schedule,
)
from .ensemble_state import DEFAULT_TRAP_SPREAD, PreparationConfig, prepare_pumped, summarize
from .registry import register
from .scenario import Scenario, ScenarioResult, ScenarioValidationError, SimulationScenario

logger = logging.getLogger(__name__)

#: Probe detunings closer than this many linewidths leave the dispersive regime.
MIN_DETUNING_LINEWIDTHS = 10.0


def _out_dir(out: Path | None) -> Path:
    path = Path(out) if out is not None else Path(".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _check_detuning(detuning: float) -> list[str]:
    if abs(detuning) < MIN_DETUNING_LINEWIDTHS * CESIUM_D2.linewidth:
        return [
            f"probe detuning {detuning} MHz is within {MIN_DETUNING_LINEWIDTHS:g} "
            f"linewidths of resonance; absorption is not modelled"
        ]
    return []


class RabiScenario(SimulationScenario):
    """Shared parameters of the Rabi-trace scenarios (SI units unless suffixed)."""

    total_atoms: float = 1e5
    pumping_efficiency: float = 0.8
    purify: bool = False
    rabi_frequency_hz: float = 10e3
    total_duration_s: float = 1.5e-3
    cadence_s: float = 6e-6
    probe_detuning_mhz: float = 160.0
    stark_phase_per_photon: float = 4e-7
    raman_fraction: float = 0.5
    stochastic: bool = False
    trap_spread: float = DEFAULT_TRAP_SPREAD
    radial_classes: int = 16
    detuning_classes: int = 8
    sample_diameter_m: float = 60e-6
    beam_waist_m: float | None = None
    shot_noise: bool = True
    electronic_noise_variance: float = 0.0
    visibility: float = 1.0
    fit_drift: bool = True

    def preparation(self) -> PreparationConfig:
        return PreparationConfig(
            total_atoms=self.total_atoms,
            pumping_efficiency=self.pumping_efficiency,
            purify=self.purify,
            n_classes=self.radial_classes,
            beam_waist=self.beam_waist_m,
            sample_diameter=self.sample_diameter_m,
            n_detuning_classes=self.detuning_classes,
            trap_spread=self.trap_spread,
        )

    def backaction(self) -> BackActionModel:
        return BackActionModel.from_detuning(
            self.probe_detuning_mhz,
            stark_phase_per_photon=self.stark_phase_per_photon,
            raman_fraction=self.raman_fraction,
            stochastic=self.stochastic,
        )

    def interferometer(self) -> InterferometerModel:
        return InterferometerModel(
            shot_noise_enabled=self.shot_noise,
            electronic_noise_variance=self.electronic_noise_variance,
            visibility=self.visibility,
        )

    def geometry(self) -> ProbeGeometry:
        return ProbeGeometry(sample_diameter=self.sample_diameter_m)

    def probe_pulse(self, photon_number: float, duration: float) -> ProbePulse:
        color = ProbeColor(detuning=self.probe_detuning_mhz, photon_number=photon_number)
        return ProbePulse(colors=(color,), duration=duration)

    def schedule(self, pulse: ProbePulse) -> Schedule:
        return uniform_schedule(
            2 * math.pi * self.rabi_frequency_hz, self.total_duration_s, self.cadence_s, pulse
        )

    def experiment(self, photon_number: float, duration: float) -> RabiExperiment:
        return RabiExperiment(
            preparation=self.preparation(),
            schedule=self.schedule(self.probe_pulse(photon_number, duration)),
            backaction=self.backaction(),
            interferometer=self.interferometer(),
            geometry=self.geometry(),
            cycles=self.reps,
            fit_drift=self.fit_drift,
        )

    def pulses(self) -> list[tuple[float, float]]:
        """(photon number, duration) of every trace this scenario records."""
        raise NotImplementedError

    def validate(self) -> list[str]:
        try:
            state = prepare_pumped(self.preparation())
            model = self.backaction()
        except ValueError as exc:
            raise ScenarioValidationError(str(exc)) from exc
        warnings = _check_detuning(self.probe_detuning_mhz)
        for photons, _ in self.pulses():
            kick = max_stark_kick(state, photons, model)
            if kick > KICK_WARNING:
                warnings.append(
                    f"Stark kick {kick:.3g} rad per pulse at {photons:.4g} photons "
                    f"exceeds {KICK_WARNING} rad"
                )
            scatter = model.scattering_per_photon * photons
            if scatter > SCATTER_WARNING:
                warnings.append(
                    f"scattering probability {scatter:.3g} per pulse at {photons:.4g} "
                    f"photons exceeds {SCATTER_WARNING}"
                )
        # reps counts averaged cycles here, not variance samples; no MIN_SAMPLES floor
        if self.reps < 1:
            warnings.append("reps must be at least 1")
        return warnings

    def _trace_report(self, result: RabiResult, photons: float) -> dict[str, Any]:
        return {
            "photons_per_pulse": photons,
            "probes": int(result.series.is_probe.sum()),
            "cycles": result.cycles,
            "fit": result.fit.as_dict(),
            "contrast": result.contrast,
            "residual_rms_rad": result.residual_rms(),
            "single_residual_rms_rad": result.residual_rms(averaged=False),
        }

    def _ensemble_report(self) -> dict[str, Any]:
        color = ProbeColor(detuning=self.probe_detuning_mhz)
        return vars(summarize(prepare_pumped(self.preparation()), color))


@register
class RabiFig2(RabiScenario):
    """Pumped sample probed every 6 us with 0.5 us and 1.0 us pulses of 140 nW."""

    reps: int = 10
    probe_power_w: float = 140e-9
    probe_durations_s: list[float] = [0.5e-6, 1.0e-6]

    def pulses(self) -> list[tuple[float, float]]:
        return [
            (photons_from_power(self.probe_power_w, duration), duration)
            for duration in self.probe_durations_s
        ]

    def run(self, out: Path | None = None) -> ScenarioResult:
        out = _out_dir(out)
        result = ScenarioResult()
        traces = []
        for photons, duration in self.pulses():
            rabi = run_rabi_experiment(self.experiment(photons, duration), self.seed)
            probes = rabi.series.probes()
            path = out / f"rabi_fig2_{duration * 1e9:.0f}ns.csv"
            result.outputs.append(
                write_trace_csv(path, probes.time, probes.true_phase, probes.measured_phase)
            )
            traces.append({"duration_s": duration, **self._trace_report(rabi, photons)})
            result.lines.append(
                f"{duration * 1e6:g} us pulses ({photons:.4g} photons): "
                f"f = {rabi.fit.frequency:.1f} Hz, decay = {rabi.fit.decay_rate:.1f} 1/s"
            )
        report = {"scenario": self.get_scenario_name(), "ensemble": self._ensemble_report(), "traces": traces}
        result.outputs.append(write_report(out / "rabi_fig2_report.json", report))
        result.lines.append(f"fringe contrast {report['ensemble']['contrast']:.3f} (pumped sample)")
        return result


@register
class RabiFig3(RabiScenario):
    """Purified sample probed 50 times per Rabi cycle for 3500 pulses."""

    reps: int = 50
    purify: bool = True
    rabi_frequency_hz: float = 1 / (50 * 2.3e-6)
    total_duration_s: float = 3500 * 2.3e-6
    cadence_s: float = 2.3e-6
    probe_duration_s: float = 0.2e-6
    photon_number: float = 1e5
    running_window: int = 8

    def pulses(self) -> list[tuple[float, float]]:
        return [(self.photon_number, self.probe_duration_s)]

    def run(self, out: Path | None = None) -> ScenarioResult:
        out = _out_dir(out)
        rabi = run_rabi_experiment(
            self.experiment(self.photon_number, self.probe_duration_s), self.seed
        )
        probes = rabi.series.probes()
        smoothed = running_average(probes.measured_phase, self.running_window)
        result = ScenarioResult()
        result.outputs += [
            write_trace_csv(out / "rabi_fig3_trace.csv", probes.time, probes.true_phase, probes.measured_phase),
            write_trace_csv(out / "rabi_fig3_running.csv", probes.time, probes.true_phase, smoothed),
            write_trace_csv(out / "rabi_fig3_single.csv", probes.time, probes.true_phase, rabi.single),
        ]
        report = {
            "scenario": self.get_scenario_name(),
            "ensemble": self._ensemble_report(),
            "trace": self._trace_report(rabi, self.photon_number),
            "running_window": self.running_window,
        }
        result.outputs.append(write_report(out / "rabi_fig3_report.json", report))
        fit = rabi.fit
        result.lines.append(
            f"{len(probes)} pulses x {rabi.cycles} cycles: f = {fit.frequency:.1f} Hz, "
            f"amplitude {fit.amplitude:.3e} rad vs residual rms {fit.residual_rms:.3e} rad"
        )
        return result


@register
class NoiseFig4(SimulationScenario):
    """Projection-noise scan with a single balanced two-color pulse per cycle."""

    reps: int = 3000
    atom_numbers: list[float] = [1e3, 3e3, 1e4, 3e4, 1e5]
    delta45_mhz: float = 160.0
    photon_number: float = 3.6e7
    relative_amplitude_rms: float = 1e-3
    relative_phase_rms: float = 0.0
    shot_noise: bool = True
    electronic_noise_variance: float = 0.0
    visibility: float = 1.0
    sample_diameter_m: float = 60e-6
    workers: int = 1
    histogram_bins: int = 30

    def interferometer(self) -> InterferometerModel:
        return InterferometerModel(
            shot_noise_enabled=self.shot_noise,
            electronic_noise_variance=self.electronic_noise_variance,
            visibility=self.visibility,
            relative_amplitude_rms=self.relative_amplitude_rms,
            relative_phase_rms=self.relative_phase_rms,
        )

    def validate(self) -> list[str]:
        warnings = _check_detuning(self.delta45_mhz)
        if self.reps < MIN_SAMPLES:
            warnings.append(
                f"reps={self.reps} is below {MIN_SAMPLES}; variance estimates will be unreliable"
            )
        if len(set(self.atom_numbers)) < 4:
            warnings.append("fewer than four distinct atom numbers; the noise cannot be decomposed")
        return warnings

    def run(self, out: Path | None = None) -> ScenarioResult:
        out = _out_dir(out)
        probe = NoiseProbeConfig.balanced(
            self.delta45_mhz, self.photon_number, ProbeGeometry(sample_diameter=self.sample_diameter_m)
        )
        model = self.interferometer()
        scan = run_projection_noise_scan(
            self.atom_numbers, self.reps, probe, model, self.seed, workers=self.workers
        )
        fit = decompose_noise(scan)
        top = float(scan.pole_phases.max())
        classical_share = fit.classical_to_atomic(top)
        grid = np.linspace(0.0, top, 101)
        result = ScenarioResult()
        result.outputs += [
            write_noise_scan_csv(out / "noise_scan.csv", scan),
            write_prediction_csv(
                out / "noise_prediction.csv", grid, predicted_projection_noise(grid, probe, model)
            ),
            write_histogram_csv(out / "noise_histogram.csv", scan, self.histogram_bins),
        ]
        report = {
            "scenario": self.get_scenario_name(),
            "color_b_detuning_mhz": probe.color_b.detuning,
            "imbalance": probe.imbalance,
            "photon_number": self.photon_number,
            "shot_noise_variance_rad2": model.readout_variance(self.photon_number),
            "decomposition": fit.as_dict(),
            "classical_resolved": fit.classical_resolved,
            "classical_to_atomic_at_max": classical_share,
        }
        result.outputs.append(write_report(out / "noise_report.json", report))
        result.lines.append(
            f"a = {fit.a:.4e} +- {fit.a_err:.1e}, b = {fit.b:.4e} +- {fit.b_err:.1e}, "
            f"c = {fit.c:.4e} +- {fit.c_err:.1e}"
        )
        if not fit.classical_resolved or classical_share < 1:
            n_max = float(scan.atom_numbers.max())
            note = (
                f"classical term c x^2 is {classical_share:.2g} of the atomic term b x at "
                f"{n_max:g} atoms"
            )
            if not fit.classical_resolved:
                note += "; c is not resolved from zero (raise reps, photon_number or relative_amplitude_rms)"
            result.lines.append(note)
            logger.info(note)
        return result


@register
class Balance(Scenario):
    """Color-B detuning that cancels the two-color phase for equal populations."""

    command = "balance"
    delta45: float = 160.0
    window_mhz: list[float] = [-1000.0, 1000.0]
    step_mhz: float = 1.0
    sample_diameter_m: float = 60e-6

    def validate(self) -> list[str]:
        if len(self.window_mhz) != 2 or self.window_mhz[0] >= self.window_mhz[1]:
            raise ScenarioValidationError("window_mhz must be two ascending detunings")
        if self.step_mhz <= 0:
            raise ScenarioValidationError("step_mhz must be positive")
        return _check_detuning(self.delta45)

    def run(self, out: Path | None = None) -> ScenarioResult:
        self.validate()
        geometry = ProbeGeometry(sample_diameter=self.sample_diameter_m)
        color_a = ProbeColor(detuning=self.delta45)
        lo, hi = self.window_mhz
        root = solve_balance(color_a, CESIUM_D2, geometry, window=(lo, hi), step=self.step_mhz)
        residual = float(balance_scan(color_a, np.array([root]), CESIUM_D2, geometry)[0])
        result = ScenarioResult(
            lines=[
                f"color B detuning: {root:.6f} MHz from F=3 -> F'=2",
                f"relative residual: {residual:.3e}",
                f"difference from {OPERATING_POINT_DETUNING:g} MHz operating point: "
                f"{root - OPERATING_POINT_DETUNING:+.3f} MHz",
            ]
        )
        if out is not None:
            report = {"delta45_mhz": self.delta45, "color_b_detuning_mhz": root, "relative_residual": residual}
            result.outputs.append(write_report(_out_dir(out) / "balance_report.json", report))
        return result


@register
class Wigner(Scenario):
    """Exact 3j or 6j symbol of six (half-)integers."""

    command = "wigner"
    kind: str = "3j"
    arguments: list[str] = []

    def validate(self) -> list[str]:
        if self.kind not in ("3j", "6j"):
            raise ScenarioValidationError(f"unknown symbol '{self.kind}'; use 3j or 6j")
        if len(self.arguments) != 6:
            raise ScenarioValidationError(f"a {self.kind} symbol takes six arguments")
        return []

    def run(self, out: Path | None = None) -> ScenarioResult:
        self.validate()
        values = [HalfInt.parse(text) for text in self.arguments]
        symbol = wigner_3j(*values) if self.kind == "3j" else wigner_6j(*values)
        return ScenarioResult(lines=[str(symbol), f"{float(symbol):.15g}"])
