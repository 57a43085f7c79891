from __future__ import annotations

from functools import lru_cache

from pydantic import BaseModel, ConfigDict, Field, InstanceOf
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.models import DiscreteSolution
from app.utils.text import parse_n_list


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_iters: int = Field(default=50, ge=1)
    residual_tol: float = Field(default=1e-11, gt=0)
    damping: float = Field(default=0.5, gt=0, lt=1)
    min_step: float = Field(default=1e-8, gt=0, le=1)
    warm_start: InstanceOf[DiscreteSolution] | None = None
    continuation: bool = True


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

    LOG_LEVEL: str = Field(default="INFO")
    SOLVER_MAX_ITERS: int = Field(default=50)
    SOLVER_RESIDUAL_TOL: float = Field(default=1e-11)
    SOLVER_DAMPING: float = Field(default=0.5)
    SOLVER_MIN_STEP: float = Field(default=1e-8)
    CONVERGE_N_MIN: int = Field(default=4)
    CONVERGE_N_MAX: int = Field(default=24)
    CONVERGE_STEP: int = Field(default=2)
    PROPERTY_N_VALUES: str = Field(default="25,50,75,100,125,150,175,200,225,250,275,300")

    @property
    def property_n_values(self) -> list[int]:
        values = parse_n_list(self.PROPERTY_N_VALUES)
        if not values:
            raise ValueError("PROPERTY_N_VALUES must list at least one N")
        return values

    @property
    def converge_range(self) -> tuple[int, int, int]:
        if self.CONVERGE_N_MIN < 1 or self.CONVERGE_N_MAX < self.CONVERGE_N_MIN:
            raise ValueError("CONVERGE_N_MIN must be >= 1 and <= CONVERGE_N_MAX")
        if self.CONVERGE_STEP < 1:
            raise ValueError("CONVERGE_STEP must be >= 1")
        return self.CONVERGE_N_MIN, self.CONVERGE_N_MAX, self.CONVERGE_STEP

    def solver_config(
        self,
        *,
        residual_tol: float | None = None,
        max_iters: int | None = None,
    ) -> SolverConfig:
        return SolverConfig(
            max_iters=max_iters if max_iters is not None else self.SOLVER_MAX_ITERS,
            residual_tol=residual_tol if residual_tol is not None else self.SOLVER_RESIDUAL_TOL,
            damping=self.SOLVER_DAMPING,
            min_step=self.SOLVER_MIN_STEP,
        )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
