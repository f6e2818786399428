"""Plant models and fixed-step integration.

Two concrete systems are provided:

* a cart-pendulum driven by cart acceleration, with the pendulum angle
  measured from the inverted (upright) equilibrium, and
* a planar spring-loaded inverted pendulum (SLIP) hopper with hybrid
  stance/flight dynamics and guard-triggered mode switches.

Integration is classical fixed-step RK4.  For hybrid plants, guard zero
crossings inside a step are located by bisection (time tolerance
``GUARD_TIME_TOL``) and the mode switches at the crossing; the remainder
of the step continues under the new mode's flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

GUARD_TIME_TOL = 1e-6  # s, bisection stop for locating a guard crossing
MAX_SWITCHES_PER_STEP = 8

# SLIP mode labels
STANCE = 0
FLIGHT = 1


class NumericalDomainError(ValueError):
    """Non-finite state or input handed to a flow evaluation."""


class SimulationFailure(RuntimeError):
    """A rollout could not be continued; the trial ends (or is rejected)."""


class DivergenceError(SimulationFailure):
    """State norm exceeded the plant's divergence bound during a step."""


class SingularLegError(SimulationFailure):
    """SLIP stance leg length collapsed below the singularity guard."""


class GuardChatterError(SimulationFailure):
    """Guards re-fired more than MAX_SWITCHES_PER_STEP times in one step.

    For the SLIP this marks the leg sweeping through horizontal while the
    body falls: physically a fall, numerically a switching singularity.
    """


class AmbiguousModeError(ValueError):
    """Linearization requested on (or too close to) a guard surface."""


@dataclass(frozen=True)
class Guard:
    """Scalar event function whose directional zero crossing switches modes.

    ``direction`` +1 fires on a negative-to-positive crossing, -1 on
    positive-to-negative.  ``condition`` optionally vetoes a located
    crossing (evaluated at the crossing state), e.g. SLIP touchdown only
    while descending.
    """

    fn: Callable[[np.ndarray], float]
    source_mode: int
    target_mode: int
    direction: int
    condition: Callable[[np.ndarray], bool] | None = None


@dataclass
class PlantModel:
    """A controlled dynamic system, possibly hybrid.

    ``flow``/``jacobian``/``input_jacobian`` all take ``(x, u, mode)``.
    ``input_bounds`` is a ``(2, input_dim)`` array of per-channel closed
    intervals.  ``angle_indices`` marks state components that metrics and
    costs wrap into (-pi, pi]; raw integration state is never wrapped.
    """

    name: str
    state_dim: int
    input_dim: int
    input_bounds: np.ndarray
    flow: Callable[[np.ndarray, np.ndarray, int], np.ndarray]
    jacobian: Callable[[np.ndarray, np.ndarray, int], np.ndarray]
    input_jacobian: Callable[[np.ndarray, np.ndarray, int], np.ndarray]
    guards: Sequence[Guard] = ()
    angle_indices: tuple[int, ...] = ()
    initial_state: np.ndarray | None = None
    initial_mode: int = 0
    divergence_bound: float = 1e6
    params: dict = field(default_factory=dict)

    @property
    def hybrid(self) -> bool:
        return len(self.guards) > 0

    def guards_for_mode(self, mode: int) -> list[Guard]:
        return [g for g in self.guards if g.source_mode == mode]

    def saturate(self, u: np.ndarray) -> np.ndarray:
        """Componentwise projection of an input onto the plant's box bounds."""
        u = np.asarray(u, dtype=float)
        return np.clip(u, self.input_bounds[0], self.input_bounds[1])


@dataclass(frozen=True)
class Transition:
    """One guard firing: absolute time plus source/target modes."""

    t: float
    source_mode: int
    target_mode: int


def wrap_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]; exact for angles already in range."""
    if -math.pi < theta <= math.pi:
        return theta
    w = (theta + math.pi) % (2.0 * math.pi) - math.pi
    if w == -math.pi:
        return math.pi
    return w


def wrap_state(plant: PlantModel, x: np.ndarray) -> np.ndarray:
    """Copy of ``x`` with the plant's angle components wrapped."""
    out = np.array(x, dtype=float)
    for i in plant.angle_indices:
        out[i] = wrap_angle(out[i])
    return out


# ---------------------------------------------------------------------------
# Cart-pendulum
# ---------------------------------------------------------------------------

def cart_pendulum(length: float = 1.0, gravity: float = 9.81, damping: float = 0.0,
                  accel_limit: float = 20.0) -> PlantModel:
    """Cart-pendulum with acceleration input.

    State [theta, theta_dot, x_c, x_c_dot]; theta = 0 is the inverted
    upright equilibrium and the hanging rest state is theta = pi.  The
    cart is kinematically driven, so mass never enters.
    """

    l, g, b = float(length), float(gravity), float(damping)

    def flow(x, u, mode=0):
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise NumericalDomainError("non-finite state or input")
        a = float(u[0]) if np.ndim(u) else float(u)
        theta, theta_dot, _, xc_dot = x
        return np.array([
            theta_dot,
            (g / l) * math.sin(theta) - (a / l) * math.cos(theta) - b * theta_dot,
            xc_dot,
            a,
        ])

    def jac(x, u, mode=0):
        a = float(u[0]) if np.ndim(u) else float(u)
        theta = x[0]
        J = np.zeros((4, 4))
        J[0, 1] = 1.0
        J[1, 0] = (g / l) * math.cos(theta) + (a / l) * math.sin(theta)
        J[1, 1] = -b
        J[2, 3] = 1.0
        return J

    def input_jac(x, u, mode=0):
        theta = x[0]
        B = np.zeros((4, 1))
        B[1, 0] = -math.cos(theta) / l
        B[3, 0] = 1.0
        return B

    return PlantModel(
        name="cart_pendulum",
        state_dim=4,
        input_dim=1,
        input_bounds=np.array([[-accel_limit], [accel_limit]], dtype=float),
        flow=flow,
        jacobian=jac,
        input_jacobian=input_jac,
        angle_indices=(0,),
        initial_state=np.array([math.pi, 0.0, 0.0, 0.0]),
        divergence_bound=1e6,
        params={"length": l, "gravity": g, "damping": b},
    )


def cart_pendulum_energy(x: np.ndarray, length: float = 1.0, gravity: float = 9.81) -> float:
    """Pendulum mechanical energy per unit mass (cart frame, valid for a = 0)."""
    theta, theta_dot = x[0], x[1]
    return 0.5 * length**2 * theta_dot**2 + gravity * length * math.cos(theta)


# ---------------------------------------------------------------------------
# SLIP hopper
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlipParams:
    """Spring constant, rest length, mass, gravity; all strictly positive."""

    k: float = 1.0
    l0: float = 1.0
    m: float = 1.0
    g: float = 1.0

    def __post_init__(self):
        if min(self.k, self.l0, self.m, self.g) <= 0:
            raise ValueError("SLIP parameters must be strictly positive")


SLIP_EPS_LEN = 1e-6  # leg-length singularity guard


def leg_length(x: np.ndarray) -> float:
    """Body-to-toe distance sqrt((x_m - x_t)^2 + z_m^2)."""
    dx = x[0] - x[4]
    return math.sqrt(dx * dx + x[2] * x[2])


def slip(params: SlipParams = SlipParams(), thrust_limit: float = 2.0,
         toe_speed_limit: float = 2.0) -> PlantModel:
    """Planar SLIP hopper, state [x_m, x_m_dot, z_m, z_m_dot, x_t].

    Control [u_s, u_t]: leg thrust (stance only) and toe velocity offset
    (flight only); the inactive channel has no effect in either mode.
    Touchdown fires when the leg length drops to the rest length while
    the body descends; liftoff when it extends back through rest length.
    """

    p = params
    k, l0, m, g = p.k, p.l0, p.m, p.g

    def flow(x, u, mode):
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise NumericalDomainError("non-finite state or input")
        xm, vx, zm, vz, xt = x
        if mode == STANCE:
            dxl = xm - xt
            ls = math.sqrt(dxl * dxl + zm * zm)
            if ls <= SLIP_EPS_LEN:
                raise SingularLegError(f"stance leg length {ls:.3e}")
            force = k * (l0 - ls) + float(u[0])
            return np.array([
                vx,
                force * (xm - xt) / (m * ls),
                vz,
                force * zm / (m * ls) - g,
                0.0,
            ])
        return np.array([vx, 0.0, vz, -g, vx + float(u[1])])

    def jac(x, u, mode):
        J = np.zeros((5, 5))
        if mode == STANCE:
            xm, _, zm, _, xt = x
            dx = xm - xt
            ls = math.sqrt(dx * dx + zm * zm)
            if ls <= SLIP_EPS_LEN:
                raise SingularLegError(f"stance leg length {ls:.3e}")
            c1, c3 = dx / ls, zm / ls
            force = k * (l0 - ls) + float(u[0])
            q = force / ls
            dax_dxm = (-k * c1 * c1 + q * (1 - c1 * c1)) / m
            dax_dzm = -c1 * c3 * (k + q) / m
            daz_dzm = (-k * c3 * c3 + q * (1 - c3 * c3)) / m
            J[0, 1] = 1.0
            J[2, 3] = 1.0
            J[1, 0] = dax_dxm
            J[1, 2] = dax_dzm
            J[1, 4] = -dax_dxm
            J[3, 0] = dax_dzm
            J[3, 2] = daz_dzm
            J[3, 4] = -dax_dzm
        else:
            J[0, 1] = 1.0
            J[2, 3] = 1.0
            J[4, 1] = 1.0
        return J

    def input_jac(x, u, mode):
        B = np.zeros((5, 2))
        if mode == STANCE:
            xm, _, zm, _, xt = x
            dx = xm - xt
            ls = math.sqrt(dx * dx + zm * zm)
            if ls <= SLIP_EPS_LEN:
                raise SingularLegError(f"stance leg length {ls:.3e}")
            B[1, 0] = (xm - xt) / (m * ls)
            B[3, 0] = zm / (m * ls)
        else:
            B[4, 1] = 1.0
        return B

    def leg_extension(x):
        return leg_length(x) - l0

    guards = (
        # liftoff: spring extends back through rest length
        Guard(fn=leg_extension, source_mode=STANCE, target_mode=FLIGHT, direction=+1),
        # touchdown: leg reaches rest length while the body descends
        Guard(fn=leg_extension, source_mode=FLIGHT, target_mode=STANCE, direction=-1,
              condition=lambda x: x[3] < 0.0),
    )

    return PlantModel(
        name="slip",
        state_dim=5,
        input_dim=2,
        input_bounds=np.array([[-thrust_limit, -toe_speed_limit],
                               [thrust_limit, toe_speed_limit]], dtype=float),
        flow=flow,
        jacobian=jac,
        input_jacobian=input_jac,
        guards=guards,
        initial_state=np.array([0.0, 0.0, 1.05, 0.0, 0.0]),
        initial_mode=FLIGHT,
        divergence_bound=1e6,
        params={"k": k, "l0": l0, "m": m, "g": g,
                "thrust_limit": thrust_limit, "toe_speed_limit": toe_speed_limit},
    )


def slip_energy(x: np.ndarray, mode: int, params: SlipParams = SlipParams()) -> float:
    """Total mechanical energy: kinetic + gravitational + spring (stance)."""
    p = params
    e = 0.5 * p.m * (x[1] ** 2 + x[3] ** 2) + p.m * p.g * x[2]
    if mode == STANCE:
        e += 0.5 * p.k * (p.l0 - leg_length(x)) ** 2
    return e


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def _rk4(plant: PlantModel, x: np.ndarray, u: np.ndarray, dt: float, mode: int) -> np.ndarray:
    f = plant.flow
    k1 = f(x, u, mode)
    k2 = f(x + 0.5 * dt * k1, u, mode)
    k3 = f(x + 0.5 * dt * k2, u, mode)
    k4 = f(x + dt * k3, u, mode)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(plant: PlantModel, x: np.ndarray, u: np.ndarray, dt: float,
         mode: int = 0, t: float = 0.0) -> tuple[np.ndarray, int, list[Transition]]:
    """One RK4 step of length ``dt`` with guard handling.

    Returns ``(x_next, mode_next, transitions)``.  ``t`` is only used to
    timestamp transitions.  Raises :class:`DivergenceError` if the state
    leaves the plant's divergence bound.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    transitions: list[Transition] = []
    remaining = dt
    for _ in range(MAX_SWITCHES_PER_STEP):
        x_next = _rk4(plant, x, u, remaining, mode)
        crossing = _first_crossing(plant, x, u, remaining, mode, x_next)
        if crossing is None:
            x = x_next
            break
        tau, x_cross, guard = crossing
        t += tau
        remaining -= tau
        x = x_cross
        mode = guard.target_mode
        transitions.append(Transition(t=t, source_mode=guard.source_mode,
                                      target_mode=guard.target_mode))
        if remaining <= GUARD_TIME_TOL:
            break
    else:
        raise GuardChatterError("too many mode switches within one step")
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > plant.divergence_bound:
        raise DivergenceError(f"state diverged: {x}")
    return x, mode, transitions


def _first_crossing(plant, x, u, dt, mode, x_end):
    """Earliest directional guard crossing in (0, dt], or None.

    Bisects on the sub-step time until the bracket is below
    ``GUARD_TIME_TOL``; the returned state sits on the post-crossing side
    so the fired guard does not immediately re-trigger.
    """
    best = None
    for guard in plant.guards_for_mode(mode):
        g0 = guard.fn(x)
        g1 = guard.fn(x_end)
        if not _crossed(g0, g1, guard.direction):
            continue
        lo, hi = 0.0, dt
        x_hi = x_end
        while hi - lo > GUARD_TIME_TOL:
            mid = 0.5 * (lo + hi)
            x_mid = _rk4(plant, x, u, mid, mode)
            if _crossed(g0, guard.fn(x_mid), guard.direction):
                hi, x_hi = mid, x_mid
            else:
                lo = mid
        if guard.condition is not None and not guard.condition(x_hi):
            continue
        if best is None or hi < best[0]:
            best = (hi, x_hi, guard)
    return best


def _crossed(g0: float, g1: float, direction: int) -> bool:
    if direction > 0:
        return g0 < 0.0 <= g1
    return g0 > 0.0 >= g1


def linearize(plant: PlantModel, x: np.ndarray, u: np.ndarray,
              mode: int = 0, guard_margin: float = 1e-9) -> np.ndarray:
    """Analytic Jacobian D_x f of the active mode's flow.

    Rejects states on a guard surface of the active mode, where the
    one-sided Jacobian is ambiguous.
    """
    for guard in plant.guards_for_mode(mode):
        if abs(guard.fn(np.asarray(x, dtype=float))) <= guard_margin:
            raise AmbiguousModeError("state lies on a guard surface")
    return plant.jacobian(np.asarray(x, dtype=float), np.asarray(u, dtype=float), mode)
