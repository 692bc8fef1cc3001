import pytest
from pydantic import ValidationError

from varcalc.config import Settings, SolverConfig, resolve_config


class TestSettings:
    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("VARCALC_NEWTON_TOL", raising=False)
        settings = Settings()
        assert settings.newton_tol == 1e-10
        assert settings.newton_max_iter == 50
        assert settings.rk_dt == 1e-3
        assert settings.verification_mode is False

    def test_environment_prefix(self, monkeypatch):
        monkeypatch.setenv("VARCALC_NEWTON_TOL", "1e-8")
        monkeypatch.setenv("VARCALC_VERIFICATION_MODE", "true")
        settings = Settings()
        assert settings.newton_tol == 1e-8
        assert settings.verification_mode is True


class TestSolverConfig:
    def test_from_settings(self):
        config = SolverConfig.from_settings(Settings(rk_dt=0.01, newton_max_iter=7))
        assert config.rk_dt == 0.01
        assert config.newton_max_iter == 7

    def test_rejects_non_positive(self):
        with pytest.raises(ValidationError):
            SolverConfig(newton_tol=0.0)
        with pytest.raises(ValidationError):
            SolverConfig(rk_dt=-1e-3)

    def test_frozen(self):
        config = SolverConfig()
        with pytest.raises(ValidationError):
            config.newton_tol = 1.0

    def test_model_copy_overrides(self):
        config = SolverConfig().model_copy(update={"newton_max_iter": 3})
        assert config.newton_max_iter == 3
        assert config.newton_tol == 1e-10

    def test_resolve(self, config):
        assert resolve_config(config) is config
        assert isinstance(resolve_config(None), SolverConfig)
