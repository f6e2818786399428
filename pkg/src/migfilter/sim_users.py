"""Synthetic users of graded skill.

Two kinds: ``noise`` draws i.i.d. zero-mean Gaussian input per control
sample (an unskilled user), ``mpc`` takes the first sample of a
schedule-descent controller under its own objective.  Skill is encoded
entirely in that objective; the low-skill presets chase goals that the
plant cannot sustain (for the hopper, an apex height well below the leg
rest length) while skilled presets track feasible motions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import PlantModel
from .mpc import ScheduleController
from .objective import QuadraticObjective


@dataclass
class UserModel:
    """A deterministic input source: same seed, same stream."""

    kind: str  # "noise" | "mpc"
    name: str = ""
    noise_sigma: np.ndarray | float = 0.0
    objective: QuadraticObjective | None = None
    horizon: float = 0.5
    t_s: float = 0.01
    dt: float = 1e-3
    gamma: float = 5.0
    _rng: np.random.Generator | None = field(default=None, repr=False)
    _controller: ScheduleController | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("noise", "mpc"):
            raise ValueError(f"unknown user kind {self.kind!r}")
        if self.kind == "mpc" and self.objective is None:
            raise ValueError("mpc users need an objective")

    def reset(self, seed) -> "UserModel":
        """Arm the user for one trial; the seed fixes the whole stream."""
        self._rng = np.random.default_rng(seed)
        if self.kind == "mpc" and self._controller is None:
            self._controller = ScheduleController(
                objective=self.objective, horizon=self.horizon,
                t_s=self.t_s, dt=self.dt, gamma=self.gamma)
        return self

    def next_input(self, plant: PlantModel, x_now: np.ndarray, t: float,
                   mode: int = 0) -> np.ndarray:
        if self.kind == "noise":
            if self._rng is None:
                raise RuntimeError("user not reset with a seed")
            sigma = np.broadcast_to(np.asarray(self.noise_sigma, dtype=float),
                                    (plant.input_dim,))
            return plant.saturate(self._rng.normal(0.0, 1.0, plant.input_dim) * sigma)
        return self._controller.compute(plant, x_now, mode=mode, t_now=t)


def preset_users(system: str) -> dict[str, UserModel]:
    """The noise / low_skill / skilled catalog for one system."""
    if system == "cart_pendulum":
        # the filter's own cost: an always-successful inversion strategy
        # (swing up, balance, recenter); intervention against it stays ~0
        from .config import FILTER_WEIGHTS, cart_upright_terminal
        w = FILTER_WEIGHTS["cart_pendulum"]
        Q, R = np.diag(w["q"]), np.diag(w["r"])
        skilled_obj = QuadraticObjective(
            Q=Q, R=R, x_d=np.zeros(4),
            terminal_P=cart_upright_terminal(Q, R), angle_indices=(0,))
        # chases cart stillness only; never swings the pendulum up
        low_obj = QuadraticObjective(
            Q=np.diag([0.0, 0.0, 6.0, 3.0]), R=np.array([[0.5]]),
            x_d=np.zeros(4), angle_indices=(0,))
        return {
            "noise": UserModel(kind="noise", name="noise", noise_sigma=10.0),
            "low_skill": UserModel(kind="mpc", name="low_skill", objective=low_obj,
                                   horizon=0.5, gamma=5.0),
            "skilled": UserModel(kind="mpc", name="skilled", objective=skilled_obj,
                                 horizon=0.5, gamma=5.0),
        }
    if system == "slip":
        # apex above rest length keeps the gait banking hop energy; the
        # horizon must span a whole hop cycle to see that
        skilled_obj = QuadraticObjective(
            Q=np.diag([0.0, 10.0, 60.0, 2.0, 0.0]), R=np.diag([0.05, 0.05]),
            x_d=np.array([0.0, 1.0, 1.25, 0.0, 0.0]))  # desired speed 1
        # apex target below the rest length: the hop starves and the
        # leg sweeps through; unassisted it falls
        low_obj = QuadraticObjective(
            Q=np.diag([0.0, 10.0, 60.0, 2.0, 0.0]), R=np.diag([0.05, 0.05]),
            x_d=np.array([0.0, 1.0, 0.6, 0.0, 0.0]))
        return {
            "noise": UserModel(kind="noise", name="noise", noise_sigma=1.0,
                               horizon=0.6),
            "low_skill": UserModel(kind="mpc", name="low_skill", objective=low_obj,
                                   horizon=1.4),
            "skilled": UserModel(kind="mpc", name="skilled", objective=skilled_obj,
                                 horizon=1.4),
        }
    raise KeyError(f"unknown system {system!r}")
