from pydantic import BaseModel, ConfigDict, Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache
import numpy as np

EPS = float(np.finfo(float).eps)


class Settings(BaseSettings):
    # Newton root finding
    newton_tol: float = 1e-10
    newton_max_iter: int = 50

    # Finite differences: step = scale * max(1, |x_i|)
    fd_step_scale: float = EPS ** (1.0 / 3.0)
    hessian_step_scale: float = EPS ** 0.25

    # Integration and linear algebra
    rk_dt: float = 1e-3
    condition_floor: float = 1e-10

    # Geometric tolerances
    admissibility_tol: float = 1e-8
    composability_tol: float = 1e-10

    # Cross-check analytic overrides against finite differences
    verification_mode: bool = False

    log_level: str = "INFO"

    model_config = SettingsConfigDict(env_prefix="VARCALC_", env_file=".env", extra="ignore")


@lru_cache()
def get_settings() -> Settings:
    return Settings()


class SolverConfig(BaseModel):
    """Numerical knobs shared by every solver. Immutable."""

    model_config = ConfigDict(frozen=True)

    newton_tol: float = Field(1e-10, gt=0)
    newton_max_iter: int = Field(50, gt=0)
    fd_step_scale: float = Field(EPS ** (1.0 / 3.0), gt=0)
    hessian_step_scale: float = Field(EPS ** 0.25, gt=0)
    rk_dt: float = Field(1e-3, gt=0)
    condition_floor: float = Field(1e-10, gt=0)
    admissibility_tol: float = Field(1e-8, gt=0)
    composability_tol: float = Field(1e-10, gt=0)
    verification_mode: bool = False

    @classmethod
    def from_settings(cls, settings: Settings = None) -> "SolverConfig":
        settings = settings or get_settings()
        return cls(
            newton_tol=settings.newton_tol,
            newton_max_iter=settings.newton_max_iter,
            fd_step_scale=settings.fd_step_scale,
            hessian_step_scale=settings.hessian_step_scale,
            rk_dt=settings.rk_dt,
            condition_floor=settings.condition_floor,
            admissibility_tol=settings.admissibility_tol,
            composability_tol=settings.composability_tol,
            verification_mode=settings.verification_mode,
        )


def resolve_config(config: SolverConfig = None) -> SolverConfig:
    """Return `config`, or the settings-derived default when None."""
    if config is not None:
        return config
    return _default_config()


@lru_cache()
def _default_config() -> SolverConfig:
    return SolverConfig.from_settings()
