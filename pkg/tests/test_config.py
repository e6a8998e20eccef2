"""Run configuration: registry validation, file parsing, seed precedence."""

import pytest

from magniflow.config import SEED_ENV_VAR, REGISTRY, RunConfig, load_config, parse_config_text
from magniflow.errors import ConfigError


class TestDefaults:
    def test_training_recipe_defaults(self):
        cfg = RunConfig()
        assert cfg["regions"] == 5
        assert cfg["segments"] == 36
        assert cfg["m_min"] == 0.0
        assert cfg["m_max"] == 0.3
        assert cfg["alpha_min"] == 0.0
        assert cfg["alpha_max"] == 100.0
        assert cfg["k_terms"] == 4
        assert cfg["dmm_widths"] == (256, 256, 512)
        assert cfg["lr"] == 2e-4
        assert cfg["batch_size"] == 4

    def test_schedule_defaults(self):
        cfg = RunConfig()
        assert cfg["t_count"] == 1000
        assert cfg["f_max"] == 32.0
        assert cfg["sample_steps"] == 50

    def test_loss_defaults(self):
        cfg = RunConfig()
        assert cfg["lam_l1"] == 1.0
        assert cfg["lam_style"] == 40.0

    def test_every_registry_key_readable(self):
        cfg = RunConfig()
        for key in REGISTRY:
            cfg[key]

    def test_as_dict_is_a_copy(self):
        cfg = RunConfig()
        d = cfg.as_dict()
        d["seed"] = 123
        assert cfg["seed"] == 0


class TestValidation:
    def test_unknown_key_names_the_key(self):
        cfg = RunConfig()
        with pytest.raises(ConfigError, match="'warp_speed'"):
            cfg.set("warp_speed", "9")

    def test_unknown_key_on_read(self):
        with pytest.raises(ConfigError, match="'nope'"):
            RunConfig()["nope"]

    def test_type_coercion(self):
        cfg = RunConfig()
        cfg.set("seed", "17")
        cfg.set("lr", "1e-3")
        cfg.set("dmm_widths", "4,4,8")
        assert cfg["seed"] == 17
        assert cfg["lr"] == 1e-3
        assert cfg["dmm_widths"] == (4, 4, 8)

    def test_bad_int(self):
        with pytest.raises(ConfigError, match="integer"):
            RunConfig().set("seed", "seven")

    def test_bad_tuple(self):
        with pytest.raises(ConfigError, match="comma-separated"):
            RunConfig().set("dmm_widths", "4,x,8")


class TestParseText:
    def test_comments_and_blanks(self):
        text = "# header\nseed = 3\n\n   \nlr=5e-4  # inline\n"
        assert parse_config_text(text) == {"seed": "3", "lr": "5e-4"}

    def test_missing_equals_reports_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("seed = 1\nbroken line\n")

    def test_last_assignment_wins(self):
        assert parse_config_text("seed = 1\nseed = 2\n") == {"seed": "2"}


class TestLoadConfig:
    def test_file_plus_overrides(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("seed = 9\nbatch_size = 8\n")
        cfg = load_config(p, overrides={"batch_size": "2"})
        assert cfg["seed"] == 9
        assert cfg["batch_size"] == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.cfg")

    def test_unknown_key_in_file(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("mystery = 1\n")
        with pytest.raises(ConfigError, match="'mystery'"):
            load_config(p)


class TestSeedEnv:
    def test_env_overrides_default(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV_VAR, "41")
        assert RunConfig()["seed"] == 41

    def test_env_overrides_file_and_flags(self, tmp_path, monkeypatch):
        p = tmp_path / "run.cfg"
        p.write_text("seed = 5\n")
        monkeypatch.setenv(SEED_ENV_VAR, "77")
        cfg = load_config(p, overrides={"seed": "6"})
        assert cfg["seed"] == 77

    def test_env_bad_value(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV_VAR, "not-a-seed")
        with pytest.raises(ConfigError):
            RunConfig()

    def test_no_env_uses_config(self, monkeypatch):
        monkeypatch.delenv(SEED_ENV_VAR, raising=False)
        assert RunConfig({"seed": "12"})["seed"] == 12
