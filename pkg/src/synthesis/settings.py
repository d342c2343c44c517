"""Validated settings objects shared by the solver, the anytime loop and the simulator."""
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class SolverConfig(BaseModel):
    """Termination settings for value iteration."""

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(default=1e-6, gt=0)
    max_iterations: int = Field(default=100000, gt=0)

    @property
    def tolerance(self) -> float:
        """Slack used wherever an epsilon-approximate fixed point is compared for equality"""
        return 10 * self.epsilon


class AnytimeConfig(BaseModel):
    """Budgets and strategy for the incremental synthesis loop."""

    model_config = ConfigDict(frozen=True)

    budget_seconds: Optional[float] = Field(default=None, ge=0)
    budget_states: Optional[int] = Field(default=None, ge=0)
    select: Literal["min-prob", "given"] = "min-prob"
    solver: SolverConfig = SolverConfig()
    output_dir: Optional[Path] = None
    evaluate: bool = True
    incremental: bool = True
    threads: int = Field(default=1, ge=1)


class SimulationConfig(BaseModel):
    """Monte Carlo oracle settings; a missing horizon means 10 x chain size."""

    model_config = ConfigDict(frozen=True)

    runs: int = Field(default=10000, ge=1)
    horizon: Optional[int] = Field(default=None, ge=1)
    seed: int = 0
    threads: int = Field(default=1, ge=1)
