"""Shared simulation engine: rollouts, costate sweeps, MIG quadrature.

Routes each operation either to the compiled kernels in ``_fast`` (for
the two concrete plants with constant desired states) or to the generic
implementations built on ``PlantModel`` callables.  Both routes compute
the same quantities; tests pin them against each other.
"""

from __future__ import annotations

import numpy as np

from . import _fast
from .dynamics import (
    SLIP_EPS_LEN,
    DivergenceError,
    GuardChatterError,
    PlantModel,
    SingularLegError,
    Transition,
    step,
)
from .objective import QuadraticObjective, Trajectory, adjoint_backward


class EvaluationError(RuntimeError):
    """The prediction rollout or costate sweep could not be completed."""


def _fast_kind(plant: PlantModel, obj: QuadraticObjective | None = None) -> str | None:
    if plant.name == "cart_pendulum":
        if obj is not None and (obj.linear_xd is None or obj.angle_indices != (0,)):
            return None
        return "cart"
    if plant.name == "slip":
        if obj is not None and (obj.linear_xd is None or obj.angle_indices != ()):
            return None
        return "slip"
    return None


def zero_schedule(plant: PlantModel, n_steps: int) -> np.ndarray:
    return np.zeros((n_steps, plant.input_dim))


def rollout(plant: PlantModel, x0: np.ndarray, inputs: np.ndarray, dt: float,
            mode0: int | None = None, t0: float = 0.0) -> Trajectory:
    """Integrate a zero-order-hold schedule; raises on divergence/singularity."""
    x0 = np.asarray(x0, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1 and plant.input_dim == 1:
        inputs = inputs[:, None]
    if inputs.ndim != 2 or inputs.shape[1] != plant.input_dim:
        raise ValueError(f"schedule must be (N, {plant.input_dim})")
    if mode0 is None:
        mode0 = plant.initial_mode
    kind = _fast_kind(plant)
    if kind == "cart":
        p = plant.params
        xs = _fast.cart_rollout(x0, inputs, dt, p["length"], p["gravity"], p["damping"])
        if not np.all(np.isfinite(xs)) or np.max(np.abs(xs)) > plant.divergence_bound:
            raise DivergenceError("cart rollout diverged")
        return Trajectory(t0=t0, dt=dt, states=xs, inputs=inputs)
    if kind == "slip":
        p = plant.params
        cap = 64
        tt = np.empty(cap)
        tf_ = np.empty(cap, dtype=np.int64)
        tto = np.empty(cap, dtype=np.int64)
        xs, modes, status, n_valid, n_trans = _fast.slip_rollout(
            x0, mode0, inputs, dt, p["k"], p["l0"], p["m"], p["g"],
            SLIP_EPS_LEN, tt, tf_, tto)
        if status == _fast.SINGULAR:
            raise SingularLegError(f"slip rollout singular at step {n_valid}")
        if status == _fast.DIVERGED:
            raise DivergenceError(f"slip rollout diverged at step {n_valid}")
        if status == _fast.CHATTER:
            raise GuardChatterError(f"slip rollout chattering at step {n_valid}")
        trans = [Transition(t=t0 + tt[i], source_mode=int(tf_[i]), target_mode=int(tto[i]))
                 for i in range(n_trans)]
        return Trajectory(t0=t0, dt=dt, states=xs, inputs=inputs, modes=modes,
                          transitions=trans)
    # generic route
    N = inputs.shape[0]
    xs = np.empty((N + 1, plant.state_dim))
    modes = np.empty(N + 1, dtype=np.int64)
    xs[0] = x0
    modes[0] = mode0
    transitions: list[Transition] = []
    x, mode = x0, mode0
    for k in range(N):
        x, mode, trans = step(plant, x, inputs[k], dt, mode=mode, t=t0 + k * dt)
        xs[k + 1] = x
        modes[k + 1] = mode
        transitions.extend(trans)
    return Trajectory(t0=t0, dt=dt, states=xs, inputs=inputs, modes=modes,
                      transitions=transitions)


def adjoint(plant: PlantModel, obj: QuadraticObjective, nominal: Trajectory) -> Trajectory:
    """Backward costate sweep; fast route when the plant/objective allow."""
    kind = _fast_kind(plant, obj)
    if kind is not None:
        base, rate = obj.linear_xd
        xd_start = base + nominal.t0 * rate  # window-local reference origin
    if kind == "cart":
        p = plant.params
        rho = _fast.cart_adjoint(nominal.states, nominal.inputs, nominal.dt,
                                 p["length"], p["gravity"], p["damping"],
                                 obj.Q, xd_start, rate, obj.terminal_P)
        return Trajectory(t0=nominal.t0, dt=nominal.dt, states=nominal.states,
                          inputs=nominal.inputs, costates=rho, modes=nominal.modes,
                          transitions=list(nominal.transitions))
    if kind == "slip":
        p = plant.params
        rho, status = _fast.slip_adjoint(nominal.states, nominal.modes, nominal.inputs,
                                         nominal.dt, p["k"], p["l0"], p["m"], p["g"],
                                         SLIP_EPS_LEN, obj.Q, xd_start, rate,
                                         obj.terminal_P)
        if status != _fast.OK:
            raise EvaluationError("slip adjoint hit a singular leg state")
        return Trajectory(t0=nominal.t0, dt=nominal.dt, states=nominal.states,
                          inputs=nominal.inputs, costates=rho, modes=nominal.modes,
                          transitions=list(nominal.transitions))
    return adjoint_backward(obj, plant, nominal)


def mig_of_schedule(plant: PlantModel, traj: Trajectory, u2: np.ndarray,
                    u1: np.ndarray | None = None) -> float:
    """Integral of rho^T [f(x,u2) - f(x,u1)] along ``traj``.

    Zero-order-hold aware: each interval contributes a trapezoid with
    the interval's own controls evaluated at both endpoint nodes, so the
    control discontinuities at interval boundaries cost no accuracy.
    """
    if traj.costates is None:
        raise ValueError("trajectory carries no costates; run the adjoint first")
    u2 = np.atleast_2d(np.asarray(u2, dtype=float)).reshape(-1, plant.input_dim)
    if u1 is None:
        u1 = np.zeros_like(u2)
    else:
        u1 = np.atleast_2d(np.asarray(u1, dtype=float)).reshape(-1, plant.input_dim)
    if len(u2) != traj.n_steps or len(u1) != traj.n_steps:
        raise ValueError("schedule length must match the trajectory grid")
    kind = _fast_kind(plant)
    if kind == "cart":
        return float(_fast.cart_mig_schedule(traj.states, traj.costates, u2, u1,
                                             traj.dt, plant.params["length"]))
    if kind == "slip":
        p = plant.params
        val = float(_fast.slip_mig_schedule(traj.states, traj.modes, traj.costates,
                                            u2, u1, traj.dt, p["m"], SLIP_EPS_LEN,
                                            p["l0"]))
        if not np.isfinite(val):
            raise EvaluationError("MIG integrand hit a singular leg state")
        return val
    total = 0.0
    xs, rho, modes = traj.states, traj.costates, traj.modes
    for k in range(traj.n_steps):
        if np.array_equal(u2[k], u1[k]):
            continue
        g0 = rho[k] @ (plant.flow(xs[k], u2[k], int(modes[k]))
                       - plant.flow(xs[k], u1[k], int(modes[k])))
        g1 = rho[k + 1] @ (plant.flow(xs[k + 1], u2[k], int(modes[k + 1]))
                           - plant.flow(xs[k + 1], u1[k], int(modes[k + 1])))
        total += 0.5 * traj.dt * (g0 + g1)
    return float(total)


def descent_schedule(plant: PlantModel, obj: QuadraticObjective, traj: Trajectory,
                     alpha_d: float) -> np.ndarray:
    """Pointwise descent actions u*(t) = alpha_d (L + R)^-1 h(x)^T rho.

    L is the outer product of b = h^T rho with itself, so each action
    drives the pointwise insertion gradient b^T u toward the (negative)
    descent rate alpha_d and vanishes smoothly as the cost does; clamped
    to the input bounds.  Sherman-Morrison gives the closed form
    alpha_d R^-1 b / (1 + b^T R^-1 b).
    """
    if traj.costates is None:
        raise ValueError("trajectory carries no costates; run the adjoint first")
    lo, hi = plant.input_bounds
    kind = _fast_kind(plant)
    if kind is not None and np.any(obj.R != np.diag(np.diag(obj.R))):
        kind = None  # fast schedule kernels assume diagonal R
    if kind == "cart":
        return _fast.cart_schedule(traj.states, traj.costates, float(obj.R[0, 0]),
                                   alpha_d, float(hi[0]), plant.params["length"])
    if kind == "slip":
        return _fast.slip_schedule(traj.states, traj.modes, traj.costates,
                                   float(obj.R[0, 0]), float(obj.R[1, 1]), alpha_d,
                                   float(hi[0]), float(hi[1]),
                                   plant.params["m"], SLIP_EPS_LEN)
    R_inv = np.linalg.inv(obj.R)
    us = np.empty((traj.n_steps, plant.input_dim))
    for k in range(traj.n_steps):
        B = plant.input_jacobian(traj.states[k], np.zeros(plant.input_dim),
                                 int(traj.modes[k]))
        b = B.T @ traj.costates[k]
        us[k] = np.clip(alpha_d * (R_inv @ b) / (1.0 + b @ R_inv @ b), lo, hi)
    return us
