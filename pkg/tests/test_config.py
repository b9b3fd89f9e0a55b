"""
Test key = value experiment configuration
"""

import math

import pytest

from oldroyd_lab.config import CALIBRATION_SEED, EXPERIMENT_NAMES, expand_sweep, known_keys, parse_config, parse_config_text
from oldroyd_lab.utils.errors import ConfigurationError


@pytest.mark.unit
class TestParseConfig:
    """Test parsing and validation"""

    def test_defaults(self):
        config = parse_config_text("experiment = energy")
        assert config.grid.d == 2
        assert config.grid.N == 64
        assert config.grid.L == pytest.approx(2.0 * math.pi)
        assert config.params.nu == 1.0
        assert config.time.dt is None
        assert config.epsilon == 0.01
        assert config.bounds.C == 8.0
        assert config.bounds.corpus == 5
        assert config.toolbox.corpus == 100
        assert config.toolbox.seed == CALIBRATION_SEED

    def test_smallest_grid(self):
        assert parse_config_text("experiment = energy\ngrid.N = 8").grid.N == 8

    def test_values_and_comments(self):
        text = """
        # damped run
        experiment = decay
        grid.N = 32          # coarse
        params.a = 0.5
        time.dt = 1e-3
        params.friedrichs_n = none
        """
        config = parse_config_text(text)
        assert config.grid.N == 32
        assert config.params.a == 0.5
        assert config.time.dt == 1e-3
        assert config.params.friedrichs_n is None

    def test_unknown_key_names_line(self):
        with pytest.raises(ConfigurationError) as excinfo:
            parse_config_text("experiment = decay\ngrid.M = 32")
        assert excinfo.value.line == 2

    def test_duplicate_key(self):
        with pytest.raises(ConfigurationError) as excinfo:
            parse_config_text("experiment = decay\nparams.a = 1\nparams.a = 2")
        assert excinfo.value.line == 3

    def test_missing_experiment(self):
        with pytest.raises(ConfigurationError):
            parse_config_text("params.a = 1")

    def test_line_without_assignment(self):
        with pytest.raises(ConfigurationError) as excinfo:
            parse_config_text("experiment = decay\ngrid.N 32")
        assert excinfo.value.line == 2

    @pytest.mark.parametrize("line", ["grid.N = 48", "grid.N = 4", "grid.d = 4", "params.nu = 0", "params.b = 2", "experiment = vortex"])
    def test_invalid_values(self, line):
        text = line if line.startswith("experiment") else f"experiment = energy\n{line}"
        with pytest.raises(ConfigurationError):
            parse_config_text(text)

    def test_invalid_value_names_line(self):
        with pytest.raises(ConfigurationError) as excinfo:
            parse_config_text("experiment = energy\n\ngrid.N = 48")
        assert excinfo.value.line == 3
        assert "grid.N" in str(excinfo.value)

    @pytest.mark.parametrize(
        "text",
        [
            "experiment = decay\nparams.mu = 0.5",
            "experiment = lipschitz\nparams.b = 0.1",
            "experiment = lorentz3d",
            "experiment = noncorot",
        ],
    )
    def test_experiment_constraints(self, text):
        with pytest.raises(ConfigurationError):
            parse_config_text(text)

    def test_band_order(self):
        with pytest.raises(ConfigurationError):
            parse_config_text("experiment = energy\ninitial_data.q0 = 2\ninitial_data.q1 = 1")

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            parse_config(tmp_path / "missing.cfg")

    def test_file(self, write_config, tmp_path):
        config = parse_config(write_config("experiment = lifespan\nparams.mu = 0.5"))
        assert config.experiment == "lifespan"
        assert config.output.directory == str(tmp_path / "out")

    def test_known_keys(self):
        keys = known_keys()
        assert "picard.horizon" in keys
        assert "diagnostics.weak_tolerance" in keys
        assert "toolbox.corpus" in keys
        assert "toolbox.seed" in keys
        assert "bounds.corpus" in keys
        assert "experiment" in keys

    def test_experiment_names(self):
        assert len(EXPERIMENT_NAMES) == 8


@pytest.mark.unit
class TestSweep:
    """Test single-key parameter sweeps"""

    def test_no_sweep(self):
        config = parse_config_text("experiment = energy")
        assert expand_sweep(config) == [config]

    def test_expansion(self):
        config = parse_config_text("experiment = energy\noutput.directory = runs\nsweep.params.a = 0, 0.5, 1")
        configs = expand_sweep(config)
        assert [c.params.a for c in configs] == [0.0, 0.5, 1.0]
        assert [c.output.directory for c in configs] == ["runs/sweep_0", "runs/sweep_1", "runs/sweep_2"]
        assert all(c.sweep.key is None for c in configs)

    def test_top_level_sweep(self):
        configs = expand_sweep(parse_config_text("experiment = lorentz3d\ngrid.d = 3\nsweep.epsilon = 0.01, 0.1"))
        assert [c.epsilon for c in configs] == [0.01, 0.1]

    def test_single_sweep_key(self):
        with pytest.raises(ConfigurationError):
            parse_config_text("experiment = energy\nsweep.params.a = 0, 1\nsweep.params.nu = 1, 2")

    def test_empty_sweep(self):
        with pytest.raises(ConfigurationError):
            parse_config_text("experiment = energy\nsweep.params.a = ,")

    def test_invalid_sweep_value(self):
        config = parse_config_text("experiment = energy\nsweep.grid.N = 32, 48")
        with pytest.raises(ConfigurationError):
            expand_sweep(config)

    def test_sweep_respects_constraints(self):
        config = parse_config_text("experiment = decay\nsweep.params.mu = 0, 1")
        with pytest.raises(ConfigurationError):
            expand_sweep(config)
