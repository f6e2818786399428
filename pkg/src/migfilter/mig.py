"""Mode-insertion-gradient action filter.

Each candidate input is scored by the sensitivity of a receding-horizon
cost to swapping the null nominal control for that input over one
sampling interval:

    dJ/dlambda(t) = rho(t)^T [f(x(t), u2(t)) - f(x(t), u1(t))]

integrated over the horizon, with x and rho computed on the nominal
(null-control) trajectory.  A non-positive integral marks the input as
a descent direction for the cost and it is accepted; otherwise it is
rejected (training) or replaced by a controller action (assistance).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .dynamics import PlantModel, SimulationFailure
from .engine import EvaluationError
from .objective import QuadraticObjective, Trajectory

TRAINING = "training"
ASSISTANCE = "assistance"

ACCEPTED = "accepted"
REJECTED = "rejected"
REPLACED = "replaced"


@dataclass
class FilterConfig:
    """Sampling interval, evaluation horizon and filter mode."""

    t_s: float = 0.01
    horizon: float = 0.5
    mode: str = TRAINING
    threshold: float = 0.0
    dt: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.t_s < self.horizon:
            raise ValueError("need 0 < t_s < horizon")
        if not np.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if self.mode not in (TRAINING, ASSISTANCE):
            raise ValueError(f"unknown filter mode {self.mode!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def n_hold(self) -> int:
        return int(round(self.t_s / self.dt))


@dataclass
class FilterDecision:
    """Outcome of evaluating one candidate input."""

    verdict: str
    mig_integral: float
    applied_control: np.ndarray
    wall_time: float = 0.0
    degraded: bool = False
    nominal: Trajectory | None = field(default=None, repr=False)

    @property
    def intervened(self) -> bool:
        return self.verdict != ACCEPTED


def build_u2(u_user: np.ndarray, t_s: float, horizon: float, dt: float = 1e-3,
             input_dim: int | None = None) -> np.ndarray:
    """Candidate schedule: the user input held on [0, t_s], null after.

    Zero-order hold over the grid, so the first round(t_s/dt) intervals
    carry the user input and the insertion measure is exactly
    |u_user| * t_s.
    """
    u_user = np.atleast_1d(np.asarray(u_user, dtype=float))
    if input_dim is not None and u_user.shape[0] != input_dim:
        raise ValueError("user input has the wrong dimension")
    n = int(round(horizon / dt))
    n_hold = int(round(t_s / dt))
    if not 0 < n_hold < n:
        raise ValueError("need 0 < t_s < horizon on the grid")
    u2 = np.zeros((n, u_user.shape[0]))
    u2[:n_hold] = u_user
    return u2


def mig_pointwise(rho: np.ndarray, x: np.ndarray, u1: np.ndarray, u2: np.ndarray,
                  plant: PlantModel, mode: int = 0) -> float:
    """Sensitivity of the cost to swapping u1 for u2 at one instant."""
    rho = np.asarray(rho, dtype=float)
    x = np.asarray(x, dtype=float)
    if rho.shape[0] != plant.state_dim or x.shape[0] != plant.state_dim:
        raise ValueError("state/costate dimension mismatch")
    df = plant.flow(x, np.atleast_1d(u2), mode) - plant.flow(x, np.atleast_1d(u1), mode)
    return float(rho @ df)


def nominal_with_costates(x_now: np.ndarray, cfg: FilterConfig, plant: PlantModel,
                          obj: QuadraticObjective, mode: int | None = None,
                          t_now: float = 0.0) -> Trajectory:
    """Null-control rollout over the horizon plus its backward costates.

    ``t_now`` anchors time-varying cost references; trajectories are
    otherwise time-invariant.
    """
    u1 = engine.zero_schedule(plant, cfg.n_steps)
    nominal = engine.rollout(plant, x_now, u1, cfg.dt, mode0=mode, t0=t_now)
    return engine.adjoint(plant, obj, nominal)


def mig_integral(x_now: np.ndarray, u_user: np.ndarray, cfg: FilterConfig,
                 plant: PlantModel, obj: QuadraticObjective,
                 mode: int | None = None,
                 nominal: Trajectory | None = None) -> float:
    """Horizon integral of the mode insertion gradient for one user input.

    Raises :class:`EvaluationError` when the nominal prediction cannot be
    completed; callers treat that as a rejection.
    """
    try:
        if nominal is None or nominal.costates is None:
            nominal = nominal_with_costates(x_now, cfg, plant, obj, mode)
        u2 = build_u2(plant.saturate(u_user), cfg.t_s, cfg.horizon, cfg.dt,
                      input_dim=plant.input_dim)
        return engine.mig_of_schedule(plant, nominal, u2)
    except SimulationFailure as exc:
        raise EvaluationError(str(exc)) from exc


def filter_decide(x_now: np.ndarray, u_user: np.ndarray, cfg: FilterConfig,
                  plant: PlantModel, obj: QuadraticObjective,
                  controller=None, mode: int | None = None) -> FilterDecision:
    """Accept, reject, or replace one user input.

    The applied control is held for the next sampling interval.  In
    assistance mode a controller computing replacement schedules is
    required; it reuses this evaluation's nominal trajectory.  A failed
    evaluation (diverged prediction) is a conservative rejection.
    """
    start = time.perf_counter()
    if cfg.mode == ASSISTANCE and controller is None:
        raise ValueError("assistance mode requires a controller")
    u_sat = plant.saturate(np.atleast_1d(np.asarray(u_user, dtype=float)))
    nominal = None
    try:
        nominal = nominal_with_costates(x_now, cfg, plant, obj, mode)
        value = mig_integral(x_now, u_sat, cfg, plant, obj, mode, nominal=nominal)
        failed = False
    except (EvaluationError, SimulationFailure):
        value = float("inf")
        failed = True

    if not failed and value <= cfg.threshold:
        verdict, applied = ACCEPTED, u_sat
    elif cfg.mode == TRAINING or failed:
        verdict, applied = REJECTED, np.zeros(plant.input_dim)
    else:
        reuse = nominal
        if reuse is not None and getattr(controller, "objective", None) is not obj:
            # rollout is objective-independent; costates are not
            reuse = Trajectory(t0=nominal.t0, dt=nominal.dt, states=nominal.states,
                               inputs=nominal.inputs, modes=nominal.modes,
                               transitions=list(nominal.transitions))
        schedule = controller.schedule(plant, x_now, mode=mode, nominal=reuse)
        verdict, applied = REPLACED, schedule.inputs[0].copy()

    wall = time.perf_counter() - start
    return FilterDecision(verdict=verdict, mig_integral=value,
                          applied_control=applied, wall_time=wall,
                          degraded=wall > cfg.t_s, nominal=nominal)
