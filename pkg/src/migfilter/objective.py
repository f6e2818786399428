"""Quadratic trajectory cost and its backward adjoint pass.

The running cost is 1/2 ||x - x_d||_Q^2 + 1/2 ||u||_R^2 with an optional
terminal term 1/2 ||x(tf) - x_d(tf)||_P^2.  The costate solves

    rho_dot = -grad l1(x) - D_x f(x, u1)^T rho,   rho(tf) = P (x(tf) - x_d)

integrated backward over the nominal trajectory's grid.  For hybrid
plants the costate is integrated piecewise with the active mode's
Jacobian and no jump conditions at guard crossings (an approximation;
the switching surfaces are ignored by the sensitivity).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import PlantModel, Transition, wrap_angle


def lqr_terminal_weight(A: np.ndarray, B: np.ndarray, Q: np.ndarray,
                        R: np.ndarray) -> np.ndarray:
    """Continuous-time Riccati solution, used as a terminal weight.

    Pricing the cost-to-go beyond the horizon keeps short receding
    windows honest near an equilibrium the running cost alone cannot
    see being lost.
    """
    from scipy.linalg import solve_continuous_are

    P = solve_continuous_are(A, B, Q, R)
    return 0.5 * (P + P.T)


@dataclass
class QuadraticObjective:
    """State-error / control-effort weights for one task.

    ``x_d`` may be a constant vector or a callable ``t -> state``.
    ``angle_indices`` marks error components wrapped into (-pi, pi]
    before weighing, so the cost is continuous across the angle cut.
    """

    Q: np.ndarray
    R: np.ndarray
    x_d: np.ndarray | Callable[[float], np.ndarray]
    terminal_P: np.ndarray | None = None
    angle_indices: tuple[int, ...] = ()
    x_d_rate: np.ndarray | None = None  # linear drift of a vector x_d

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        if self.x_d_rate is not None:
            if callable(self.x_d):
                raise ValueError("x_d_rate needs a vector x_d")
            self.x_d_rate = np.asarray(self.x_d_rate, dtype=float)
            if not np.any(self.x_d_rate):
                self.x_d_rate = None
        n = self.Q.shape[0]
        if self.terminal_P is None:
            self.terminal_P = np.zeros((n, n))
        self.terminal_P = np.asarray(self.terminal_P, dtype=float)
        for name, M in (("Q", self.Q), ("R", self.R), ("terminal_P", self.terminal_P)):
            if M.size and not np.allclose(M, M.T):
                raise ValueError(f"{name} must be symmetric")
            if M.size and np.min(np.linalg.eigvalsh(M)) < -1e-12:
                raise ValueError(f"{name} must be positive semidefinite")

    @property
    def state_dim(self) -> int:
        return self.Q.shape[0]

    def desired(self, t: float) -> np.ndarray:
        if callable(self.x_d):
            return np.asarray(self.x_d(t), dtype=float)
        base = np.asarray(self.x_d, dtype=float)
        if self.x_d_rate is None:
            return base
        return base + t * self.x_d_rate

    @property
    def constant_xd(self) -> np.ndarray | None:
        """The desired state if time-invariant, else None."""
        if callable(self.x_d) or self.x_d_rate is not None:
            return None
        return np.asarray(self.x_d, dtype=float)

    @property
    def linear_xd(self) -> tuple[np.ndarray, np.ndarray] | None:
        """(base, rate) when the reference is (affinely) linear in time."""
        if callable(self.x_d):
            return None
        base = np.asarray(self.x_d, dtype=float)
        rate = (np.zeros_like(base) if self.x_d_rate is None
                else np.asarray(self.x_d_rate, dtype=float))
        return base, rate

    def error(self, x: np.ndarray, t: float) -> np.ndarray:
        e = np.asarray(x, dtype=float) - self.desired(t)
        for i in self.angle_indices:
            e[i] = wrap_angle(e[i])
        return e


@dataclass
class Trajectory:
    """Uniform-grid trajectory: N+1 states, N zero-order-hold inputs.

    ``inputs[k]`` applies on [t_k, t_{k+1}).  ``costates`` aligns with
    ``states`` when present.  ``modes`` gives the active hybrid mode at
    each node (all zeros for smooth plants).
    """

    t0: float
    dt: float
    states: np.ndarray
    inputs: np.ndarray
    costates: np.ndarray | None = None
    modes: np.ndarray | None = None
    transitions: list[Transition] = field(default_factory=list)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.inputs.ndim == 1:
            self.inputs = self.inputs[:, None]
        if len(self.states) != len(self.inputs) + 1:
            raise ValueError("need |states| = |inputs| + 1")
        if self.modes is None:
            self.modes = np.zeros(len(self.states), dtype=np.int64)
        if self.costates is not None and len(self.costates) != len(self.states):
            raise ValueError("costates must align with states")

    @property
    def n_steps(self) -> int:
        return len(self.inputs)

    @property
    def tf(self) -> float:
        return self.t0 + self.n_steps * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.states))


def incremental_cost(obj: QuadraticObjective, x: np.ndarray, t: float) -> float:
    """1/2 (x - x_d(t))^T Q (x - x_d(t)), angle components wrapped."""
    e = obj.error(x, t)
    return 0.5 * float(e @ obj.Q @ e)


def cost_gradient(obj: QuadraticObjective, x: np.ndarray, t: float) -> np.ndarray:
    """State gradient Q (x - x_d(t)) of the incremental cost."""
    return obj.Q @ obj.error(x, t)


def terminal_cost(obj: QuadraticObjective, x: np.ndarray, t: float) -> float:
    e = obj.error(x, t)
    return 0.5 * float(e @ obj.terminal_P @ e)


def total_cost(obj: QuadraticObjective, traj: Trajectory) -> float:
    """Trapezoidal quadrature of the running cost plus the terminal term.

    The control-effort term is integrated exactly for zero-order-hold
    inputs (each input is constant over its interval).
    """
    if traj.n_steps < 1:
        raise ValueError("trajectory must span at least one step")
    lin = obj.linear_xd
    if lin is not None:
        base, rate = lin
        e = traj.states - (base + traj.times()[:, None] * rate)
        for i in obj.angle_indices:
            col = e[:, i]
            out = np.where((col > np.pi) | (col <= -np.pi),
                           (col + np.pi) % (2.0 * np.pi) - np.pi, col)
            out[out == -np.pi] = np.pi
            e[:, i] = out
        state_term = 0.5 * np.einsum("ki,ij,kj->k", e, obj.Q, e)
    else:
        ts = traj.times()
        state_term = np.array([incremental_cost(obj, x, t)
                               for x, t in zip(traj.states, ts)])
    J = float(np.trapezoid(state_term, dx=traj.dt))
    if np.any(obj.R):
        u = traj.inputs
        J += 0.5 * float(np.einsum("ki,ij,kj->", u, obj.R, u)) * traj.dt
    return J + terminal_cost(obj, traj.states[-1], traj.tf)


def adjoint_backward(obj: QuadraticObjective, plant: PlantModel,
                     nominal: Trajectory) -> Trajectory:
    """Backward costate sweep along ``nominal``; returns a new Trajectory.

    RK4 with the midpoint state linearly interpolated between grid
    nodes.  Hybrid segments use each node's recorded mode; no costate
    jumps are applied at transitions.
    """
    xs = nominal.states
    us = nominal.inputs
    modes = nominal.modes
    N = nominal.n_steps
    dt = nominal.dt
    n = plant.state_dim

    rho = np.zeros((N + 1, n))
    e_f = obj.error(xs[-1], nominal.tf)
    rho[-1] = obj.terminal_P @ e_f

    def rhs(x, t, u, mode, r):
        A = plant.jacobian(x, u, int(mode))
        return -cost_gradient(obj, x, t) - A.T @ r

    ts = nominal.times()
    for k in range(N - 1, -1, -1):
        x0, x1 = xs[k], xs[k + 1]
        xm = 0.5 * (x0 + x1)
        u = us[k]
        t0, t1 = ts[k], ts[k + 1]
        tm = 0.5 * (t0 + t1)
        mode = modes[k]
        r = rho[k + 1]
        k1 = rhs(x1, t1, u, modes[k + 1], r)
        k2 = rhs(xm, tm, u, mode, r - 0.5 * dt * k1)
        k3 = rhs(xm, tm, u, mode, r - 0.5 * dt * k2)
        k4 = rhs(x0, t0, u, mode, r - dt * k3)
        rho[k] = r - (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return Trajectory(t0=nominal.t0, dt=dt, states=xs, inputs=us,
                      costates=rho, modes=modes,
                      transitions=list(nominal.transitions))
