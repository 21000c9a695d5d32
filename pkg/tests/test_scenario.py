import pytest

from clockprobe import Scenario, ScenarioValidationError, SimulationScenario
from clockprobe.scenarios import Balance, NoiseFig4, RabiFig2, RabiFig3, Wigner


class TestScenarioParams:
    """Tests for parameter parsing and defaults."""

    def test_required_param(self):
        """Required parameters must be provided."""

        class Sweep(Scenario):
            detuning: float

        with pytest.raises(ScenarioValidationError) as exc_info:
            Sweep()

        assert "missing required parameter 'detuning'" in str(exc_info.value)

    def test_optional_param_with_default(self):
        """Optional parameters use their default value when not provided."""

        class Sweep(Scenario):
            detuning: float
            points: int = 11

        sweep = Sweep(detuning=160.0)
        assert sweep.detuning == 160.0
        assert sweep.points == 11

    def test_optional_param_override(self):
        """Optional parameters can be overridden."""

        class Sweep(Scenario):
            detuning: float
            points: int = 11

        assert Sweep(detuning=160.0, points=3).points == 3

    def test_nullable_param(self):
        """Parameters with a None default are optional and nullable."""

        class Sweep(Scenario):
            waist: float | None = None

        assert Sweep().waist is None
        assert Sweep(waist=5e-5).waist == 5e-5

    def test_unknown_params_rejected(self):
        """Unknown parameters are reported instead of silently ignored."""

        class Sweep(Scenario):
            detuning: float

        with pytest.raises(ScenarioValidationError) as exc_info:
            Sweep(detuning=1.0, colour="red")

        assert "colour" in str(exc_info.value)

    def test_subclass_overrides_default(self):
        """A subclass can change an inherited default."""

        class Base(Scenario):
            reps: int = 1

        class Child(Base):
            reps: int = 50

        assert Base().reps == 1
        assert Child().reps == 50

    def test_simulation_requires_seed(self):
        """Simulation scenarios have a mandatory seed."""

        class Run(SimulationScenario):
            pass

        with pytest.raises(ScenarioValidationError):
            Run()
        assert Run(seed=3).seed == 3

    def test_list_defaults_are_not_shared(self):
        """Each instance gets its own copy of a list default."""

        class Scan(Scenario):
            points: list[float] = [1.0, 2.0]

        first, second = Scan(), Scan()
        first.points.append(3.0)
        assert second.points == [1.0, 2.0]

    def test_params_for_manifest(self):
        """params() returns every resolved parameter."""

        class Sweep(Scenario):
            detuning: float
            points: int = 11

        assert Sweep(detuning=1.0).params() == {"detuning": 1.0, "points": 11}


class TestTypeValidation:
    """Tests for parameter type validation."""

    def test_int_widens_to_float(self):
        """An int is accepted for a float parameter and stored as float."""

        class Sweep(Scenario):
            detuning: float

        value = Sweep(detuning=160).detuning
        assert value == 160.0
        assert isinstance(value, float)

    def test_string_rejected_for_float(self):
        """A string for a float parameter raises."""

        class Sweep(Scenario):
            detuning: float

        with pytest.raises(ScenarioValidationError) as exc_info:
            Sweep(detuning="fast")

        assert "detuning" in str(exc_info.value)

    def test_bool_rejected_for_int(self):
        """bool is not an int for parameter purposes."""

        class Sweep(Scenario):
            points: int

        with pytest.raises(ScenarioValidationError):
            Sweep(points=True)

    def test_list_items_validated(self):
        """List parameters validate and widen each item."""

        class Scan(Scenario):
            atoms: list[float]

        assert Scan(atoms=[1000, 3e3]).atoms == [1000.0, 3000.0]
        with pytest.raises(ScenarioValidationError):
            Scan(atoms=[1000, "many"])

    def test_none_for_required_type_raises(self):
        """None is only accepted by optional parameters."""

        class Sweep(Scenario):
            detuning: float

        with pytest.raises(ScenarioValidationError):
            Sweep(detuning=None)

    def test_union_type_validation(self):
        """Union types accept any of their members."""

        class Sweep(Scenario):
            label: int | str

        assert Sweep(label=3).label == 3
        assert Sweep(label="x").label == "x"
        with pytest.raises(ScenarioValidationError):
            Sweep(label=1.5)


class TestScenarioNaming:
    """Tests for scenario naming."""

    def test_default_name_from_class(self):
        """The name is derived from the class name."""

        class Sweep(Scenario):
            pass

        assert Sweep.get_scenario_name() == "sweep"

    def test_default_name_camel_case(self):
        """CamelCase class names become kebab-case."""

        assert RabiFig3.get_scenario_name() == "rabi-fig3"
        assert NoiseFig4.get_scenario_name() == "noise-fig4"

    def test_custom_scenario_name(self):
        """scenario_name on the class wins."""

        class Sweep(Scenario):
            scenario_name = "detuning-sweep"

        assert Sweep.get_scenario_name() == "detuning-sweep"

    def test_classvars_are_not_params(self):
        """command and scenario_name are not parameters."""
        assert "command" not in Balance.parameter_names()
        assert "scenario_name" not in Balance.parameter_names()


class TestBuiltinValidation:
    """Model-validity warnings of the shipped scenarios."""

    def test_defaults_have_no_warnings(self):
        """Default configurations are within the model's validity range."""
        assert RabiFig3(seed=1).validate() == []
        assert NoiseFig4(seed=1).validate() == []
        assert Balance().validate() == []

    def test_long_fig2_pulses_warn_about_kick(self):
        """140 nW for 1 us kicks the brightest class by more than 0.1 rad."""
        warnings = RabiFig2(seed=1).validate()
        assert any("Stark kick" in warning for warning in warnings)

    def test_huge_photon_number_warns(self):
        """1e9 photons at 4e-7 rad each is a kick of hundreds of radians."""
        warnings = RabiFig3(seed=1, photon_number=1e9).validate()
        assert any("Stark kick" in warning for warning in warnings)
        assert any("scattering" in warning for warning in warnings)

    def test_few_reps_warn(self):
        """Fewer than 100 repetitions are flagged for the noise scan."""
        warnings = NoiseFig4(seed=1, reps=10).validate()
        assert any("reps=10" in warning for warning in warnings)

    def test_near_resonant_detuning_warns(self):
        """A probe a few linewidths from resonance is flagged."""
        warnings = RabiFig3(seed=1, probe_detuning_mhz=10.0).validate()
        assert any("linewidths" in warning for warning in warnings)

    def test_wigner_arguments_checked(self):
        """The Wigner scenario needs a known kind and six arguments."""
        with pytest.raises(ScenarioValidationError):
            Wigner(kind="9j", arguments=["1"] * 6).validate()
        with pytest.raises(ScenarioValidationError):
            Wigner(kind="3j", arguments=["1"] * 5).validate()

    def test_wigner_run(self):
        """The Wigner scenario prints the exact value and its decimal."""
        result = Wigner(kind="6j", arguments=["1"] * 6).run()
        assert result.lines[0] == "1/6"
        assert float(result.lines[1]) == pytest.approx(1 / 6, rel=1e-14)
