import json
from pathlib import Path

import pytest

from clockprobe.cli import (
    EXIT_OK,
    EXIT_REFUSED,
    EXIT_USAGE,
    MANIFEST_NAME,
    coerce_value,
    load_config,
    main,
    parse_overrides,
)
from clockprobe.scenario import ScenarioValidationError

EXAMPLE_CONFIGS = sorted((Path(__file__).parent.parent / "example").glob("*.toml"))

SMALL_FIG3 = [
    "--reps",
    "3",
    "--set",
    "total_duration_s=2.3e-4",
    "--set",
    "radial_classes=4",
    "--set",
    "detuning_classes=2",
]


def read_outputs(directory):
    return {path.name: path.read_bytes() for path in sorted(directory.iterdir())}


class TestCoerceValue:
    """Tests for --set value coercion."""

    def test_scalars(self):
        """Booleans, None, ints and floats are recognized."""
        assert coerce_value("True") is True
        assert coerce_value("False") is False
        assert coerce_value("None") is None
        assert coerce_value("42") == 42
        assert coerce_value("-7") == -7
        assert coerce_value("1e5") == 1e5

    def test_string(self):
        """Anything else stays a string."""
        assert coerce_value("3j") == "3j"

    def test_list(self):
        """Commas make lists of coerced items."""
        assert coerce_value("1e3,3e3, 1e4") == [1e3, 3e3, 1e4]
        assert coerce_value("-1000,-800") == [-1000, -800]


class TestParseOverrides:
    """Tests for key=value overrides."""

    def test_dashes_become_underscores(self):
        """Keys may be written with dashes."""
        assert parse_overrides(["photon-number=1e6", "purify=True"]) == {
            "photon_number": 1e6,
            "purify": True,
        }

    def test_missing_equals(self):
        """An override without '=' is rejected."""
        with pytest.raises(ScenarioValidationError):
            parse_overrides(["photon_number"])


class TestLoadConfig:
    """Tests for TOML configs and JSON manifests."""

    def test_toml(self, tmp_path):
        """A TOML config gives its scenario and top-level parameters."""
        path = tmp_path / "fig3.toml"
        path.write_text('scenario = "rabi-fig3"\nseed = 4\nreps = 2\natom_numbers = [1.0, 2.0]\n')
        scenario, params = load_config(path)
        assert scenario == "rabi-fig3"
        assert params == {"seed": 4, "reps": 2, "atom_numbers": [1.0, 2.0]}

    def test_manifest_layout(self, tmp_path):
        """A manifest's parameters sit under 'config'."""
        path = tmp_path / MANIFEST_NAME
        path.write_text(json.dumps({"scenario": "noise-fig4", "version": "0.1.0", "seed": 9, "config": {"reps": 200}}))
        scenario, params = load_config(path)
        assert scenario == "noise-fig4"
        assert params == {"reps": 200, "seed": 9}

    def test_unreadable(self, tmp_path):
        """A missing file is a validation error."""
        with pytest.raises(ScenarioValidationError):
            load_config(tmp_path / "missing.toml")


class TestWignerCommand:
    """Tests for the wigner subcommand."""

    def test_6j(self, capsys):
        """{1 1 1; 1 1 1} prints as 1/6."""
        assert main(["wigner", "6j", "1", "1", "1", "1", "1", "1"]) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "1/6"
        assert float(out[1]) == pytest.approx(1 / 6)

    def test_3j(self, capsys):
        """(1 1 0; 0 0 0) prints as a signed radical."""
        assert main(["wigner", "3j", "1", "1", "0", "0", "0", "0"]) == EXIT_OK
        assert capsys.readouterr().out.splitlines()[0] == "-√(1/3)"

    def test_negative_arguments_after_separator(self, capsys):
        """Negative projections follow '--'."""
        assert main(["wigner", "3j", "--", "1/2", "1/2", "1", "1/2", "-1/2", "0"]) == EXIT_OK
        assert capsys.readouterr().out.splitlines()[0] == "√(1/6)"

    def test_parity_error(self, capsys):
        """Mixing integer j with half-integer m is a usage error."""
        assert main(["wigner", "3j", "1", "1", "1", "1/2", "0", "0"]) == EXIT_USAGE
        assert "error:" in capsys.readouterr().err

    def test_wrong_argument_count(self):
        """argparse rejects anything but six values."""
        assert main(["wigner", "6j", "1", "1"]) == EXIT_USAGE


class TestBalanceCommand:
    """Tests for the balance subcommand."""

    def test_operating_point(self, capsys):
        """At +160 MHz the root lies near -135 MHz."""
        assert main(["balance", "--delta45", "160"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "color B detuning: -135" in out
        assert "relative residual" in out

    def test_no_files_without_out(self, tmp_path, monkeypatch):
        """Without --out nothing is written."""
        monkeypatch.chdir(tmp_path)
        assert main(["balance"]) == EXIT_OK
        assert list(tmp_path.iterdir()) == []

    def test_report_with_out(self, tmp_path):
        """With --out a report and manifest are written."""
        assert main(["balance", "--out", str(tmp_path)]) == EXIT_OK
        report = json.loads((tmp_path / "balance_report.json").read_text())
        assert report["color_b_detuning_mhz"] == pytest.approx(-135.0, abs=2.0)
        assert (tmp_path / MANIFEST_NAME).exists()

    def test_no_root_refused(self, capsys):
        """A window without a sign change refuses with exit code 3."""
        assert main(["balance", "--set", "window_mhz=-1000,-800"]) == EXIT_REFUSED
        assert "refused:" in capsys.readouterr().err

    def test_bad_window(self):
        """A descending window is a usage error."""
        assert main(["balance", "--set", "window_mhz=100,-100"]) == EXIT_USAGE


class TestSimulateCommand:
    """Tests for the simulate subcommand."""

    def test_unknown_scenario(self, capsys):
        """An unknown scenario name is a usage error."""
        assert main(["simulate", "rabi-fig9", "--seed", "1"]) == EXIT_USAGE
        assert "unknown scenario" in capsys.readouterr().err

    def test_missing_seed(self, capsys, tmp_path):
        """Simulations refuse to run without a seed."""
        assert main(["simulate", "rabi-fig3", "--out", str(tmp_path)]) == EXIT_USAGE
        assert "seed" in capsys.readouterr().err

    def test_unknown_parameter(self, tmp_path):
        """A --set key the scenario does not declare is a usage error."""
        assert main(["simulate", "rabi-fig3", "--seed", "1", "--set", "colour=red", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_balance_is_not_a_simulation(self):
        """Scenarios are looked up under their own subcommand."""
        assert main(["simulate", "balance", "--seed", "1"]) == EXIT_USAGE

    def test_rabi_fig3_outputs(self, tmp_path):
        """A short fig3 run writes its traces, report and manifest."""
        assert main(["simulate", "rabi-fig3", "--seed", "5", "--out", str(tmp_path), *SMALL_FIG3]) == EXIT_OK
        names = {path.name for path in tmp_path.iterdir()}
        assert names == {
            "rabi_fig3_trace.csv",
            "rabi_fig3_running.csv",
            "rabi_fig3_single.csv",
            "rabi_fig3_report.json",
            MANIFEST_NAME,
        }
        header = (tmp_path / "rabi_fig3_trace.csv").read_text().splitlines()[0]
        assert header == "t_s,true_phase_rad,measured_phase_rad"

    def test_same_seed_same_bytes(self, tmp_path):
        """Two runs with one seed write byte-identical files."""
        first, second = tmp_path / "a", tmp_path / "b"
        for out in (first, second):
            assert main(["simulate", "rabi-fig3", "--seed", "11", "--out", str(out), *SMALL_FIG3]) == EXIT_OK
        assert read_outputs(first) == read_outputs(second)

    def test_manifest_reproduces_run(self, tmp_path):
        """Re-running from a manifest reproduces every output."""
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "rabi-fig3", "--seed", "11", "--out", str(first), *SMALL_FIG3]) == EXIT_OK
        manifest = json.loads((first / MANIFEST_NAME).read_text())
        assert manifest["scenario"] == "rabi-fig3"
        assert manifest["seed"] == 11
        assert manifest["config"]["reps"] == 3
        assert main(["simulate", "--config", str(first / MANIFEST_NAME), "--out", str(second)]) == EXIT_OK
        assert read_outputs(first) == read_outputs(second)

    def test_config_name_mismatch(self, tmp_path):
        """A config for another scenario is refused."""
        path = tmp_path / "noise.toml"
        path.write_text('scenario = "noise-fig4"\nseed = 1\n')
        assert main(["simulate", "rabi-fig3", "--config", str(path), "--out", str(tmp_path)]) == EXIT_USAGE

    def test_small_noise_scan(self, tmp_path, capsys):
        """A small noise scan prints its decomposition."""
        args = ["simulate", "noise-fig4", "--seed", "2", "--reps", "200", "--out", str(tmp_path)]
        args += ["--set", "atom_numbers=1e3,1e4,3e4,1e5"]
        assert main(args) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("a = ")
        report = json.loads((tmp_path / "noise_report.json").read_text())
        assert report["color_b_detuning_mhz"] == pytest.approx(-135.0, abs=2.0)
        flagged = not report["classical_resolved"] or report["classical_to_atomic_at_max"] < 1
        assert ("classical term c x^2 is" in out) == flagged


class TestValidateCommand:
    """Tests for the validate subcommand."""

    @pytest.mark.parametrize("name", ["rabi-fig3", "noise-fig4"])
    def test_defaults_clean(self, name, capsys):
        """Default parameters raise no warnings."""
        assert main(["validate", name, "--seed", "1"]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "no warnings"

    def test_stark_kick_warning(self, capsys):
        """Too many photons per pulse are flagged."""
        assert main(["validate", "rabi-fig3", "--seed", "1", "--set", "photon_number=1e9"]) == EXIT_OK
        assert "Stark kick" in capsys.readouterr().out

    def test_low_reps_warning(self, capsys):
        """A noise scan with few repetitions is flagged."""
        assert main(["validate", "noise-fig4", "--seed", "1", "--reps", "10"]) == EXIT_OK
        assert "reps=10" in capsys.readouterr().out

    def test_validate_from_config(self, tmp_path, capsys):
        """The scenario name may come from the config."""
        path = tmp_path / "fig3.toml"
        path.write_text('scenario = "rabi-fig3"\nseed = 3\nphoton_number = 1e9\n')
        assert main(["validate", "--config", str(path)]) == EXIT_OK
        assert "scattering probability" in capsys.readouterr().out

    def test_validate_writes_nothing(self, tmp_path, monkeypatch):
        """validate never runs the scenario."""
        monkeypatch.chdir(tmp_path)
        assert main(["validate", "noise-fig4", "--seed", "1"]) == EXIT_OK
        assert list(tmp_path.iterdir()) == []

    @pytest.mark.parametrize("path", EXAMPLE_CONFIGS, ids=lambda path: path.stem)
    def test_example_configs_resolve(self, path, capsys):
        """Every shipped example config names a scenario and resolves."""
        assert main(["validate", "--config", str(path)]) == EXIT_OK
        assert capsys.readouterr().out.strip()
