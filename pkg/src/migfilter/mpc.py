"""Schedule-descent model predictive controller.

Supplies replacement actions in assistance mode and drives the
simulated skilled users.  From the null-control nominal trajectory and
its costates, each grid point gets the saturated descent action

    u*(t) = sat( -gamma R^-1 h(x(t))^T rho(t) ),

where h = df/du of the active mode.  For control-affine plants with
symmetric bounds every such action opposes the sign of h^T rho, so the
schedule's own insertion-gradient integral is non-positive by
construction; a backtracking loop (halving gamma) guards the rare
numerical exceptions, falling back to the null schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine, mig
from .dynamics import PlantModel, SimulationFailure
from .engine import EvaluationError
from .objective import QuadraticObjective, Trajectory, total_cost


def saturate(u: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Componentwise clamp of an input onto box bounds (identity inside)."""
    return np.clip(np.asarray(u, dtype=float), bounds[0], bounds[1])


@dataclass
class ControlSchedule:
    """Grid-aligned input sequence over one horizon."""

    t0: float
    dt: float
    inputs: np.ndarray
    saturated: np.ndarray
    mig_integral: float
    gamma: float

    @property
    def first(self) -> np.ndarray:
        return self.inputs[0]


@dataclass
class ScheduleController:
    """Receding-horizon controller emitting whole descent schedules."""

    objective: QuadraticObjective
    horizon: float = 0.5
    t_s: float = 0.01
    dt: float = 1e-3
    gamma: float = 1.0
    max_backtracks: int = 8
    _cfg: mig.FilterConfig = field(init=False, repr=False)

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("descent gain must be positive")
        if np.min(np.linalg.eigvalsh(self.objective.R)) <= 0:
            raise ValueError("controller objective needs positive definite R")
        self._cfg = mig.FilterConfig(t_s=self.t_s, horizon=self.horizon, dt=self.dt)

    def schedule(self, plant: PlantModel, x_now: np.ndarray, mode: int | None = None,
                 nominal: Trajectory | None = None, t_now: float = 0.0) -> ControlSchedule:
        """Descent schedule from ``x_now``; reuses ``nominal`` when supplied.

        A supplied nominal must carry costates for this controller's
        objective (the assistance filter shares its objective with the
        controller, so its evaluation trajectory is reused directly).
        """
        n = self._cfg.n_steps
        try:
            if nominal is not None and nominal.n_steps != n:
                nominal = None  # caller's grid differs; predict on our own horizon
            if nominal is None:
                nominal = mig.nominal_with_costates(x_now, self._cfg, plant,
                                                    self.objective, mode, t_now=t_now)
            elif nominal.costates is None:
                nominal = engine.adjoint(plant, self.objective, nominal)
        except (EvaluationError, SimulationFailure):
            return self._null_schedule(plant, n)

        cost_now = total_cost(self.objective, nominal)
        gamma = self.gamma
        for _ in range(self.max_backtracks + 1):
            us = engine.descent_schedule(plant, self.objective, nominal,
                                         -gamma * cost_now)
            value = engine.mig_of_schedule(plant, nominal, us)
            if value <= 0.0:
                return ControlSchedule(
                    t0=nominal.t0, dt=self.dt, inputs=us,
                    saturated=self._at_bounds(plant, us),
                    mig_integral=float(value), gamma=gamma)
            gamma *= 0.5
        return self._null_schedule(plant, n)

    def compute(self, plant: PlantModel, x_now: np.ndarray,
                mode: int | None = None, t_now: float = 0.0) -> np.ndarray:
        """First sampling-interval action of a fresh schedule."""
        return self.schedule(plant, x_now, mode=mode, t_now=t_now).first.copy()

    def _null_schedule(self, plant: PlantModel, n: int) -> ControlSchedule:
        us = engine.zero_schedule(plant, n)
        return ControlSchedule(t0=0.0, dt=self.dt, inputs=us,
                               saturated=np.zeros_like(us, dtype=bool),
                               mig_integral=0.0, gamma=0.0)

    @staticmethod
    def _at_bounds(plant: PlantModel, us: np.ndarray) -> np.ndarray:
        lo, hi = plant.input_bounds
        return (us <= lo) | (us >= hi)


def compute_schedule(x_now: np.ndarray, plant: PlantModel, obj: QuadraticObjective,
                     horizon: float, t_s: float, dt: float = 1e-3, gamma: float = 1.0,
                     mode: int | None = None) -> ControlSchedule:
    """One-shot schedule computation (functional form of ScheduleController)."""
    ctrl = ScheduleController(objective=obj, horizon=horizon, t_s=t_s, dt=dt,
                              gamma=gamma)
    return ctrl.schedule(plant, x_now, mode=mode)
