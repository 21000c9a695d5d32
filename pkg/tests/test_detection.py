import dataclasses
import json
import logging
import math

import numpy as np
import pytest

from clockprobe.cesium_model import ProbeColor, ProbeGeometry
from clockprobe.detection import (
    InterferometerModel,
    MeasurementError,
    NoiseProbeConfig,
    NoiseScan,
    RabiExperiment,
    UnbalancedProbeError,
    damped_sine,
    decompose_noise,
    fit_damped_sinusoid,
    measure_phase,
    predicted_projection_noise,
    projection_histogram,
    pulse_records,
    run_projection_noise_scan,
    run_rabi_experiment,
    running_average,
    write_noise_scan_csv,
    write_report,
    write_trace_csv,
)
from clockprobe.dynamics import BackActionModel, ProbePulse, uniform_schedule
from clockprobe.ensemble_state import PreparationConfig, sample_css
from clockprobe.scenarios import RabiFig3

OMEGA = 2 * math.pi * 10e3
ATOM_NUMBERS = [1e3, 3e3, 1e4, 3e4, 1e5]


@pytest.fixture(scope="module")
def balanced_probe():
    return NoiseProbeConfig.balanced(160.0, 3.6e7)


def small_experiment(cycles=1, photons=2e4, stochastic=False, interferometer=None):
    pulse = ProbePulse(colors=(ProbeColor(detuning=160.0, photon_number=photons),), duration=0.5e-6)
    return RabiExperiment(
        preparation=PreparationConfig(n_classes=4, n_detuning_classes=2),
        schedule=uniform_schedule(OMEGA, 0.5e-3, 5e-6, pulse),
        backaction=BackActionModel.from_detuning(160.0, stochastic=stochastic),
        interferometer=interferometer or InterferometerModel(),
        cycles=cycles,
        fit_drift=True,
    )


def standardized(n, variance, rng):
    """n samples whose sample variance is exactly ``variance``."""
    x = rng.standard_normal(n)
    x = (x - x.mean()) / x.std(ddof=1)
    return x * math.sqrt(variance)


class TestReadout:
    """Tests for the interferometer read-out."""

    @pytest.mark.parametrize("photons", [1e5, 3.6e7])
    def test_shot_noise_variance(self, photons, rng):
        """Read-out noise has variance 1 / n."""
        values = measure_phase(np.zeros(100_000), photons, rng=rng)
        assert np.var(values) == pytest.approx(1 / photons, rel=0.02)

    def test_visibility(self):
        """Reduced visibility raises the shot-noise floor by 1 / V^2."""
        model = InterferometerModel(visibility=0.5)
        assert model.shot_noise_variance(1e6) == pytest.approx(4e-6)

    def test_electronic_noise_adds(self):
        """Electronic noise adds to the shot noise."""
        model = InterferometerModel(electronic_noise_variance=1e-7)
        assert model.readout_variance(1e7) == pytest.approx(2e-7)

    def test_noise_free(self):
        """Without any noise the true phase comes back unchanged."""
        model = InterferometerModel(shot_noise_enabled=False)
        assert measure_phase(0.25, 1e6, model) == 0.25

    def test_zero_photons_rejected(self):
        """A phase cannot be measured with no photons."""
        with pytest.raises(MeasurementError):
            measure_phase(0.0, 0)

    def test_invalid_visibility(self):
        """Visibility must lie in (0, 1]."""
        with pytest.raises(ValueError):
            InterferometerModel(visibility=0.0)


class TestDampedSineFit:
    """Tests for the damped-sinusoid fit."""

    def test_recovers_parameters(self, rng):
        """A noisy damped sine is fitted back to its parameters."""
        t = np.linspace(0, 1.5e-3, 250)
        y = damped_sine(t, 0.02, 800.0, 10e3, 0.3, 0.05) + rng.normal(0, 1e-4, t.size)
        fit = fit_damped_sinusoid(t, y)
        assert fit.ok
        assert fit.frequency == pytest.approx(10e3, rel=1e-3)
        assert fit.decay_rate == pytest.approx(800.0, rel=0.05)
        assert fit.amplitude == pytest.approx(0.02, rel=0.02)
        assert fit.offset == pytest.approx(0.05, abs=1e-4)
        assert fit.residual_rms == pytest.approx(1e-4, rel=0.2)

    def test_recovers_drift(self, rng):
        """With drift=True a linear baseline is fitted too."""
        t = np.linspace(0, 8e-3, 800)
        y = damped_sine(t, 0.01, 100.0, 8.7e3, -1.0, 0.02, -1.5) + rng.normal(0, 1e-4, t.size)
        fit = fit_damped_sinusoid(t, y, drift=True)
        assert fit.ok
        assert fit.drift == pytest.approx(-1.5, rel=0.05)
        assert fit.frequency == pytest.approx(8.7e3, rel=1e-3)

    def test_too_few_points(self, caplog):
        """Fewer than seven points give a failed fit and a warning."""
        with caplog.at_level(logging.WARNING, logger="clockprobe.detection"):
            fit = fit_damped_sinusoid([0, 1, 2], [0, 1, 0])
        assert not fit.ok
        assert math.isnan(fit.frequency)
        assert "fit failed" in caplog.text

    def test_evaluate(self):
        """evaluate() reproduces the model curve."""
        t = np.linspace(0, 1e-3, 200)
        y = damped_sine(t, 1.0, 500.0, 5e3, 0.0, 0.0)
        fit = fit_damped_sinusoid(t, y)
        assert np.allclose(fit.evaluate(t), y, atol=1e-6)


class TestRunningAverage:
    """Tests for the moving average."""

    def test_constant_unchanged(self):
        """A constant trace is unchanged."""
        assert np.allclose(running_average(np.full(20, 3.0), 8), 3.0)

    def test_window_one_is_identity(self):
        """A one-sample window changes nothing."""
        values = np.arange(10.0)
        assert np.array_equal(running_average(values, 1), values)

    def test_reduces_noise(self, rng):
        """Averaging eight samples cuts white noise by about sqrt(8)."""
        noise = rng.standard_normal(20_000)
        assert np.std(running_average(noise, 8)) == pytest.approx(1 / math.sqrt(8), rel=0.05)

    def test_invalid_window(self):
        """The window must hold at least one sample."""
        with pytest.raises(ValueError):
            running_average([1.0, 2.0], 0)


class TestRabiExperiment:
    """Tests for Rabi-trace runs."""

    def test_fit_recovers_rabi_frequency(self):
        """The fitted frequency is the drive's Rabi frequency."""
        result = run_rabi_experiment(small_experiment(cycles=4), seed=1)
        assert result.fit.ok
        assert result.fit.frequency == pytest.approx(10e3, rel=0.01)

    def test_same_seed_same_trace(self):
        """Runs are reproducible from the seed."""
        first = run_rabi_experiment(small_experiment(cycles=2), seed=7)
        second = run_rabi_experiment(small_experiment(cycles=2), seed=7)
        assert np.array_equal(first.series.measured_phase, second.series.measured_phase, equal_nan=True)

    def test_different_seed_different_trace(self):
        """A different seed gives different read-out noise."""
        first = run_rabi_experiment(small_experiment(), seed=1)
        second = run_rabi_experiment(small_experiment(), seed=2)
        assert not np.array_equal(first.single, second.single)

    def test_averaging_reduces_noise(self):
        """Averaging M cycles reduces the read-out residual by sqrt(M)."""
        result = run_rabi_experiment(small_experiment(cycles=16), seed=3)
        single = result.residual_rms(averaged=False)
        averaged = result.residual_rms()
        assert averaged == pytest.approx(single / 4, rel=0.25)

    def test_stochastic_backaction_runs_per_cycle(self):
        """Stochastic back-action gives cycle-to-cycle loss differences."""
        result = run_rabi_experiment(small_experiment(cycles=3, stochastic=True), seed=5)
        assert result.series.lost[-1] > 0
        assert len(result.single) == len(result.series.probes())

    def test_pulse_records(self):
        """Per-pulse records mirror the probe rows."""
        result = run_rabi_experiment(small_experiment(), seed=1)
        records = pulse_records(result.series)
        assert len(records) == len(result.series.probes())
        assert records[0].photon_number == 2e4

    def test_contrast_reported(self):
        """The run reports the fringe contrast of the prepared sample."""
        result = run_rabi_experiment(small_experiment(), seed=1)
        assert 0 < result.contrast < 1

    def test_more_photons_faster_and_more_damped(self):
        """Doubling the photons per pulse raises the fitted frequency and decay rate."""
        fits = []
        for photons in (3e5, 6e5):
            pulse = ProbePulse(colors=(ProbeColor(detuning=160.0, photon_number=photons),), duration=0.5e-6)
            experiment = RabiExperiment(
                preparation=PreparationConfig(n_classes=16),
                schedule=uniform_schedule(OMEGA, 1.5e-3, 6e-6, pulse),
                backaction=BackActionModel.from_detuning(160.0),
                interferometer=InterferometerModel(shot_noise_enabled=False),
                fit_drift=True,
            )
            fits.append(run_rabi_experiment(experiment, seed=1).fit)
        low, high = fits
        assert low.ok and high.ok
        assert high.frequency > low.frequency > 10e3
        assert high.decay_rate > low.decay_rate

    @pytest.mark.slow
    def test_photon_sweep_monotonic(self):
        """Across five photon levels the fitted frequency and decay rate only grow."""
        fits = []
        for photons in (1e5, 2e5, 3e5, 4.5e5, 6e5):
            pulse = ProbePulse(colors=(ProbeColor(detuning=160.0, photon_number=photons),), duration=0.5e-6)
            experiment = RabiExperiment(
                preparation=PreparationConfig(n_classes=16),
                schedule=uniform_schedule(OMEGA, 1.5e-3, 6e-6, pulse),
                backaction=BackActionModel.from_detuning(160.0),
                interferometer=InterferometerModel(shot_noise_enabled=False),
                fit_drift=True,
            )
            fits.append(run_rabi_experiment(experiment, seed=1).fit)
        assert all(fit.ok for fit in fits)
        frequencies = [fit.frequency for fit in fits]
        decay_rates = [fit.decay_rate for fit in fits]
        assert frequencies == sorted(frequencies)
        assert decay_rates == sorted(decay_rates)

    @pytest.mark.slow
    def test_purified_fringe_survives_3500_pulses(self):
        """At 2.3 us cadence the averaged fringe stands well above the residual."""
        scenario = RabiFig3(seed=1)
        result = run_rabi_experiment(scenario.experiment(scenario.photon_number, scenario.probe_duration_s), seed=1)
        assert len(result.series.probes()) == 3500
        assert result.cycles == 50
        assert result.fit.ok
        assert abs(result.fit.amplitude) > 3 * result.fit.residual_rms


class TestNoiseProbe:
    """Tests for the balanced two-color probe."""

    def test_balanced_probe(self, balanced_probe):
        """Equal clock populations give no net phase."""
        assert balanced_probe.imbalance < 1e-9
        assert balanced_probe.color_b.detuning == pytest.approx(-135.0, abs=2.0)
        assert balanced_probe.color_a.photon_number == pytest.approx(1.8e7)

    def test_responses_opposite(self, balanced_probe):
        """|up> and |down> shift the phase in opposite directions."""
        up, down = balanced_probe.response
        assert up == pytest.approx(-down)

    def test_unbalanced_probe_refused(self):
        """A scan with a badly detuned color B is refused."""
        probe = NoiseProbeConfig(
            ProbeColor(detuning=160.0, photon_number=1.8e7),
            ProbeColor(detuning=-60.0, reference_transition=(3, 2), photon_number=1.8e7),
        )
        assert probe.imbalance > 0.01
        with pytest.raises(UnbalancedProbeError):
            run_projection_noise_scan(ATOM_NUMBERS, 200, probe)

    def test_too_few_reps(self, balanced_probe):
        """At least two repetitions per point are needed."""
        with pytest.raises(MeasurementError):
            run_projection_noise_scan(ATOM_NUMBERS, 1, balanced_probe)


class TestProjectionNoiseScan:
    """Tests for the projection-noise Monte Carlo."""

    def test_reproducible_and_worker_independent(self, balanced_probe):
        """The seed fixes the scan; thread count does not change it."""
        serial = run_projection_noise_scan(ATOM_NUMBERS, 500, balanced_probe, seed=9, block_size=128)
        threaded = run_projection_noise_scan(ATOM_NUMBERS, 500, balanced_probe, seed=9, block_size=128, workers=4)
        for a, b in zip(serial.samples, threaded.samples):
            assert np.array_equal(a, b)

    def test_pole_phases_ascend(self, balanced_probe):
        """Pole phases are proportional to the atom number."""
        scan = run_projection_noise_scan(ATOM_NUMBERS, 200, balanced_probe)
        ratio = scan.pole_phases / scan.atom_numbers
        assert np.allclose(ratio, ratio[0])
        assert scan.reps.tolist() == [200] * len(ATOM_NUMBERS)

    def test_few_samples_warn(self, balanced_probe, caplog):
        """Fewer than 100 samples per point are flagged."""
        with caplog.at_level(logging.WARNING, logger="clockprobe.detection"):
            run_projection_noise_scan(ATOM_NUMBERS, 10, balanced_probe)
        assert "unreliable" in caplog.text

    def test_shot_noise_floor(self, balanced_probe):
        """With no atoms the variance is the shot-noise floor 1 / n."""
        scan = run_projection_noise_scan([0, 0, 0, 0], 20_000, balanced_probe, seed=4)
        assert scan.variances == pytest.approx(np.full(4, 1 / 3.6e7), rel=0.05)

    @pytest.mark.slow
    def test_projection_noise_linear(self):
        """Without classical noise the variance grows linearly with the pole phase."""
        probe = NoiseProbeConfig.balanced(160.0, 3.6e8)
        model = InterferometerModel()
        scan = run_projection_noise_scan(ATOM_NUMBERS, 30_000, probe, model, seed=11)
        fit = decompose_noise(scan)
        slope = predicted_projection_noise(1.0, probe, model) - predicted_projection_noise(0.0, probe, model)
        assert fit.b == pytest.approx(slope, rel=0.15)
        assert abs(fit.c) < 3 * fit.c_err
        assert fit.a == pytest.approx(1 / 3.6e8, rel=0.15)
        assert not fit.b_negative

    @pytest.mark.slow
    def test_classical_noise_quadratic(self):
        """Amplitude jitter adds a term quadratic in the pole phase."""
        probe = NoiseProbeConfig.balanced(160.0, 3.6e8)
        model = InterferometerModel(relative_amplitude_rms=3e-3)
        scan = run_projection_noise_scan(ATOM_NUMBERS, 30_000, probe, model, seed=12)
        fit = decompose_noise(scan)
        assert fit.c == pytest.approx(model.classical_coefficient, rel=0.15)
        assert fit.c > 5 * fit.c_err
        top = scan.pole_phases[-1]
        assert fit.c * top**2 > fit.b * top

    def test_spin_projection_histogram(self, balanced_probe):
        """The inferred N_up - N_down is centred on zero with variance N."""
        model = InterferometerModel(shot_noise_enabled=False)
        scan = run_projection_noise_scan(ATOM_NUMBERS, 20_000, balanced_probe, model, seed=2)
        projection = scan.spin_projection(4)
        assert np.mean(projection) == pytest.approx(0.0, abs=10.0)
        assert np.var(projection) == pytest.approx(1e5, rel=0.05)
        counts, edges = projection_histogram(scan, 4, bins=20)
        assert counts.sum() == 20_000
        assert len(edges) == 21

    def test_spin_projection_drawn_from_css(self, balanced_probe, monkeypatch):
        """Every block draws its N_up from the coherent-spin-state sampler."""
        calls = []

        def counting(n_atoms, rng, size=None):
            calls.append((n_atoms, size))
            return sample_css(n_atoms, rng, size=size)

        monkeypatch.setattr("clockprobe.detection.sample_css", counting)
        run_projection_noise_scan([1e3, 1e4], 250, balanced_probe, block_size=100)
        assert sorted(calls) == [(1000, 50), (1000, 100), (1000, 100), (10000, 50), (10000, 100), (10000, 100)]


class TestNoiseDecomposition:
    """Tests for the weighted polynomial decomposition."""

    def _scan(self, rng, a, b, c, n=2000):
        x = np.array([0.01, 0.03, 0.1, 0.3, 1.0])
        samples = [standardized(n, a + b * xi + c * xi**2, rng) for xi in x]
        return NoiseScan(x * 1e5, x, samples, 3.6e7, (1.0, -1.0))

    def test_linear_variance(self, rng):
        """Exact linear variances give b and a back with c near zero."""
        fit = decompose_noise(self._scan(rng, 2e-8, 5e-8, 0.0))
        assert fit.a == pytest.approx(2e-8, rel=1e-6)
        assert fit.b == pytest.approx(5e-8, rel=1e-6)
        assert fit.c == pytest.approx(0.0, abs=1e-12)
        assert fit.linear_b == pytest.approx(5e-8, rel=1e-6)

    def test_quadratic_variance(self, rng):
        """Exact quadratic variances are decomposed exactly."""
        fit = decompose_noise(self._scan(rng, 2e-8, 5e-8, 3e-8))
        assert fit.c == pytest.approx(3e-8, rel=1e-6)
        assert fit.r_squared == pytest.approx(1.0)

    def test_negative_b_flagged(self, rng, caplog):
        """A clearly negative atomic term is flagged."""
        x = np.array([0.01, 0.03, 0.1, 0.3, 1.0])
        variances = 1e-6 - 5e-7 * x + 4e-7 * x**2
        samples = [standardized(20_000, v, rng) for v in variances]
        scan = NoiseScan(x * 1e5, x, samples, 3.6e7, (1.0, -1.0))
        with caplog.at_level(logging.WARNING, logger="clockprobe.detection"):
            fit = decompose_noise(scan)
        assert fit.b_negative
        assert "negative" in caplog.text

    def test_needs_four_points(self, rng):
        """Three atom numbers cannot be decomposed."""
        x = np.array([0.1, 0.2, 0.3])
        scan = NoiseScan(x * 1e5, x, [standardized(200, 1e-8, rng) for _ in x], 3.6e7, (1.0, -1.0))
        with pytest.raises(MeasurementError):
            decompose_noise(scan)

    def test_fit_attached_to_scan(self, rng):
        """decompose_noise stores its result on the scan."""
        scan = self._scan(rng, 2e-8, 5e-8, 0.0)
        fit = decompose_noise(scan)
        assert scan.fit is fit
        assert fit.predict(0.0) == pytest.approx(fit.a)

    @pytest.mark.parametrize("scale", [1e-3, 1e3])
    def test_pole_phase_units(self, rng, scale):
        """Rescaling the pole-phase axis rescales b and c and leaves a and R^2 alone."""
        scan = self._scan(rng, 2e-8, 5e-8, 3e-8)
        fit = decompose_noise(scan)
        rescaled = NoiseScan(
            scan.atom_numbers, scan.pole_phases * scale, scan.samples, scan.photon_number, scan.response
        )
        other = decompose_noise(rescaled)
        assert other.a == pytest.approx(fit.a, rel=1e-9)
        assert other.b == pytest.approx(fit.b / scale, rel=1e-9)
        assert other.c == pytest.approx(fit.c / scale**2, rel=1e-9)
        assert other.c_err == pytest.approx(fit.c_err / scale**2, rel=1e-9)
        assert other.r_squared == pytest.approx(fit.r_squared)

    def test_classical_resolved(self, rng):
        """A clear quadratic term is resolved; a zero one is not."""
        assert decompose_noise(self._scan(rng, 2e-8, 5e-8, 3e-8)).classical_resolved
        assert not decompose_noise(self._scan(rng, 2e-8, 5e-8, 0.0)).classical_resolved

    def test_classical_to_atomic(self, rng):
        """The ratio c x^2 / (b x) grows with the pole phase; it is inf without an atomic term."""
        fit = decompose_noise(self._scan(rng, 2e-8, 5e-8, 3e-8))
        assert fit.classical_to_atomic(1.0) == pytest.approx(0.6, rel=1e-6)
        assert fit.classical_to_atomic(0.5) == pytest.approx(0.3, rel=1e-6)
        assert dataclasses.replace(fit, b=0.0).classical_to_atomic(1.0) == math.inf


class TestWriters:
    """Tests for the CSV and report writers."""

    def test_trace_csv(self, tmp_path):
        """Trace files have a header and one row per probe."""
        path = write_trace_csv(tmp_path / "trace.csv", [0.0, 1e-6], [0.1, 0.2], [0.11, 0.19])
        lines = path.read_text().splitlines()
        assert lines[0] == "t_s,true_phase_rad,measured_phase_rad"
        assert lines[1] == "0.0,0.1,0.11"
        assert len(lines) == 3

    def test_noise_scan_csv(self, tmp_path, rng):
        """Noise-scan files carry pole phase, atoms, variance and its error."""
        x = np.array([0.01, 0.1])
        scan = NoiseScan(x * 1e5, x, [standardized(200, 1e-8, rng) for _ in x], 3.6e7, (1.0, -1.0))
        lines = write_noise_scan_csv(tmp_path / "scan.csv", scan).read_text().splitlines()
        assert lines[0] == "pole_phase_rad,n_atoms,variance_rad2,variance_err_rad2"
        assert len(lines) == 3

    def test_report_sorted_json(self, tmp_path):
        """Reports are sorted JSON."""
        path = write_report(tmp_path / "report.json", {"b": 1, "a": [1.5]})
        assert json.loads(path.read_text()) == {"a": [1.5], "b": 1}
        assert path.read_text().index('"a"') < path.read_text().index('"b"')

    def test_probe_geometry_in_config(self):
        """A noise probe keeps the geometry it was balanced for."""
        geometry = ProbeGeometry(sample_diameter=80e-6)
        probe = NoiseProbeConfig.balanced(160.0, 3.6e7, geometry)
        assert probe.geometry is geometry
