"""Mode-insertion-gradient action filtering for shared control.

Evaluate each user input by the sensitivity of a receding-horizon cost
to inserting it for one sampling interval; accept descent directions,
reject or replace the rest.  Ships the cart-pendulum and SLIP hopper
testbeds, simulated users of graded skill, a Monte Carlo trial harness,
and a live WebSocket session server.
"""

from .dynamics import (
    FLIGHT,
    STANCE,
    DivergenceError,
    Guard,
    GuardChatterError,
    NumericalDomainError,
    PlantModel,
    SimulationFailure,
    SingularLegError,
    SlipParams,
    Transition,
    cart_pendulum,
    leg_length,
    linearize,
    slip,
    step,
    wrap_angle,
)
from .mig import (
    ACCEPTED,
    ASSISTANCE,
    REJECTED,
    REPLACED,
    TRAINING,
    FilterConfig,
    FilterDecision,
    build_u2,
    filter_decide,
    mig_integral,
    mig_pointwise,
)
from .mpc import ControlSchedule, ScheduleController, compute_schedule, saturate
from .objective import (
    QuadraticObjective,
    Trajectory,
    adjoint_backward,
    cost_gradient,
    incremental_cost,
    total_cost,
)
from .sim_users import UserModel, preset_users

__version__ = "0.1.0"

__all__ = [
    "ACCEPTED", "ASSISTANCE", "REJECTED", "REPLACED", "TRAINING", "FLIGHT",
    "STANCE", "ControlSchedule", "DivergenceError", "FilterConfig",
    "FilterDecision", "Guard", "GuardChatterError", "NumericalDomainError",
    "PlantModel", "QuadraticObjective", "ScheduleController",
    "SimulationFailure", "SingularLegError", "SlipParams", "Trajectory",
    "Transition", "UserModel", "adjoint_backward", "build_u2", "cart_pendulum",
    "compute_schedule", "cost_gradient", "filter_decide", "incremental_cost",
    "leg_length", "linearize", "mig_integral", "mig_pointwise", "preset_users",
    "saturate", "slip", "step", "total_cost", "wrap_angle",
]
