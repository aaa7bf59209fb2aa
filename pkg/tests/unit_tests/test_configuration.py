from src.config.settings import DESK_DEFAULTS, get_settings, resolve_seed, validate_env


class TestSettings:
    def test_get_settings_sections(self) -> None:
        settings = get_settings()
        assert set(settings) == {"system", "paths", "desk_defaults", "checkpoint"}
        assert settings["checkpoint"]["magic"] == b"PATHCKPT"

    def test_desk_defaults(self) -> None:
        assert DESK_DEFAULTS["patch_size"] == 4
        assert DESK_DEFAULTS["gate_temperature"] == 0.1


class TestResolveSeed:
    def test_explicit_wins(self, monkeypatch) -> None:
        monkeypatch.setenv("PATH_ENGINE_SEED", "9")
        assert resolve_seed(3) == 3

    def test_environment_fallback(self, monkeypatch) -> None:
        monkeypatch.setenv("PATH_ENGINE_SEED", "9")
        assert resolve_seed(None, 1) == 9

    def test_default(self, monkeypatch) -> None:
        monkeypatch.delenv("PATH_ENGINE_SEED", raising=False)
        assert resolve_seed(None, 5) == 5
        assert resolve_seed(None, None) is None


class TestValidateEnv:
    def test_valid(self, monkeypatch) -> None:
        monkeypatch.setenv("PATH_ENGINE_SEED", "42")
        assert validate_env()

    def test_invalid_seed(self, monkeypatch) -> None:
        monkeypatch.setenv("PATH_ENGINE_SEED", "forty-two")
        assert not validate_env()
