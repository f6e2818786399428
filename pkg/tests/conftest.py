import dataclasses

import numpy as np
import pytest

from migfilter import dynamics
from migfilter.objective import QuadraticObjective


@pytest.fixture
def cart():
    return dynamics.cart_pendulum()

@pytest.fixture
def hopper():
    return dynamics.slip()


@pytest.fixture
def cart_objective():
    return QuadraticObjective(Q=np.diag([100.0, 1.0, 1.0, 1.0]), R=np.zeros((1, 1)),
                              x_d=np.zeros(4), angle_indices=(0,))


@pytest.fixture
def slip_objective():
    return QuadraticObjective(Q=np.diag([0.0, 0.0, 50.0, 5.0, 0.0]), R=np.zeros((2, 2)),
                              x_d=np.array([0.0, 0.0, 1.0, 0.0, 0.0]))


def as_generic(plant):
    """Clone a plant under a name the fast-path dispatch does not know."""
    return dataclasses.replace(plant, name=plant.name + "_generic")


def random_cart_state(rng):
    return np.array([rng.uniform(-np.pi, np.pi), rng.uniform(-2, 2),
                     rng.uniform(-1, 1), rng.uniform(-2, 2)])


def random_slip_stance_state(rng):
    # compressed leg, toe planted under-ish the body
    angle = rng.uniform(-0.3, 0.3)
    ls = rng.uniform(0.75, 0.95)
    xt = rng.uniform(-1, 1)
    return np.array([xt + ls * np.sin(angle), rng.uniform(-1, 1),
                     ls * np.cos(angle), rng.uniform(-1, 1), xt])


def random_slip_flight_state(rng):
    xt = rng.uniform(-1, 1)
    return np.array([xt + rng.uniform(-0.3, 0.3), rng.uniform(-1, 1),
                     rng.uniform(1.05, 1.5), rng.uniform(-0.5, 1.0), xt])
