"""Compiled kernels against the generic plant-callable route."""

import numpy as np
import pytest

from migfilter import engine
from migfilter.dynamics import FLIGHT, GuardChatterError, SingularLegError
from migfilter.objective import QuadraticObjective

from .conftest import as_generic, random_cart_state, random_slip_flight_state


def test_cart_rollout_parity(cart):
    rng = np.random.default_rng(0)
    gen = as_generic(cart)
    for _ in range(3):
        x0 = random_cart_state(rng)
        us = rng.uniform(-20, 20, (300, 1))
        a = engine.rollout(cart, x0, us, 1e-3)
        b = engine.rollout(gen, x0, us, 1e-3)
        assert np.allclose(a.states, b.states, rtol=1e-12, atol=1e-12)


def test_cart_adjoint_parity(cart, cart_objective):
    rng = np.random.default_rng(1)
    gen = as_generic(cart)
    x0 = random_cart_state(rng)
    us = np.zeros((400, 1))
    ta = engine.rollout(cart, x0, us, 1e-3)
    tb = engine.rollout(gen, x0, us, 1e-3)
    ra = engine.adjoint(cart, cart_objective, ta)
    rb = engine.adjoint(gen, cart_objective, tb)
    scale = np.max(np.abs(ra.costates)) + 1.0
    assert np.max(np.abs(ra.costates - rb.costates)) / scale < 1e-12


def test_slip_rollout_parity_across_transitions(hopper):
    rng = np.random.default_rng(2)
    gen = as_generic(hopper)
    seen_transitions = 0
    for _ in range(3):
        x0 = random_slip_flight_state(rng)
        us = rng.uniform(-1, 1, (700, 2))
        us[:, 0] = np.abs(us[:, 0]) + 0.8  # thrust keeps the hop alive
        try:
            a = engine.rollout(hopper, x0, us, 1e-3, mode0=FLIGHT)
        except (SingularLegError, GuardChatterError):
            continue
        b = engine.rollout(gen, x0, us, 1e-3, mode0=FLIGHT)
        seen_transitions += len(a.transitions)
        assert len(a.transitions) == len(b.transitions)
        assert np.array_equal(a.modes, b.modes)
        assert np.max(np.abs(a.states - b.states)) < 1e-10
        for ta, tb in zip(a.transitions, b.transitions):
            assert ta.t == pytest.approx(tb.t, abs=2e-6)
            assert (ta.source_mode, ta.target_mode) == (tb.source_mode, tb.target_mode)
    assert seen_transitions >= 1


def test_slip_adjoint_parity(hopper, slip_objective):
    rng = np.random.default_rng(3)
    gen = as_generic(hopper)
    x0 = random_slip_flight_state(rng)
    us = np.zeros((500, 2))
    ta = engine.rollout(hopper, x0, us, 1e-3, mode0=FLIGHT)
    tb = engine.rollout(gen, x0, us, 1e-3, mode0=FLIGHT)
    ra = engine.adjoint(hopper, slip_objective, ta)
    rb = engine.adjoint(gen, slip_objective, tb)
    scale = np.max(np.abs(ra.costates)) + 1.0
    assert np.max(np.abs(ra.costates - rb.costates)) / scale < 1e-10


def test_mig_of_schedule_parity(cart, cart_objective, hopper, slip_objective):
    rng = np.random.default_rng(4)
    # cart
    x0 = random_cart_state(rng)
    traj = engine.adjoint(cart, cart_objective,
                          engine.rollout(cart, x0, np.zeros((500, 1)), 1e-3))
    gen = as_generic(cart)
    gtraj = engine.adjoint(gen, cart_objective,
                           engine.rollout(gen, x0, np.zeros((500, 1)), 1e-3))
    for _ in range(5):
        u2 = rng.uniform(-20, 20, (500, 1)) * (rng.random((500, 1)) > 0.5)
        a = engine.mig_of_schedule(cart, traj, u2)
        b = engine.mig_of_schedule(gen, gtraj, u2)
        assert a == pytest.approx(b, rel=1e-10, abs=1e-14)
    # slip
    x0 = random_slip_flight_state(rng)
    straj = engine.adjoint(hopper, slip_objective,
                           engine.rollout(hopper, x0, np.zeros((500, 2)), 1e-3,
                                          mode0=FLIGHT))
    sgen = as_generic(hopper)
    sgtraj = engine.adjoint(sgen, slip_objective,
                            engine.rollout(sgen, x0, np.zeros((500, 2)), 1e-3,
                                           mode0=FLIGHT))
    for _ in range(5):
        u2 = rng.uniform(-2, 2, (500, 2))
        a = engine.mig_of_schedule(hopper, straj, u2)
        b = engine.mig_of_schedule(sgen, sgtraj, u2)
        assert a == pytest.approx(b, rel=1e-10, abs=1e-14)


def test_descent_schedule_parity(cart, hopper):
    rng = np.random.default_rng(5)
    cart_obj = QuadraticObjective(Q=np.diag([100.0, 1, 1, 1]), R=np.array([[0.1]]),
                                  x_d=np.zeros(4), angle_indices=(0,))
    x0 = random_cart_state(rng)
    traj = engine.adjoint(cart, cart_obj,
                          engine.rollout(cart, x0, np.zeros((500, 1)), 1e-3))
    gen = as_generic(cart)
    gtraj = engine.adjoint(gen, cart_obj,
                           engine.rollout(gen, x0, np.zeros((500, 1)), 1e-3))
    a = engine.descent_schedule(cart, cart_obj, traj, alpha_d=-50.0)
    b = engine.descent_schedule(gen, cart_obj, gtraj, alpha_d=-50.0)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-12)

    slip_obj = QuadraticObjective(Q=np.diag([0.0, 0, 50, 5, 0]),
                                  R=np.diag([0.05, 0.05]),
                                  x_d=np.array([0, 0, 1.0, 0, 0.0]))
    x0 = random_slip_flight_state(rng)
    straj = engine.adjoint(hopper, slip_obj,
                           engine.rollout(hopper, x0, np.zeros((600, 2)), 1e-3,
                                          mode0=FLIGHT))
    sgen = as_generic(hopper)
    sgtraj = engine.adjoint(sgen, slip_obj,
                            engine.rollout(sgen, x0, np.zeros((600, 2)), 1e-3,
                                           mode0=FLIGHT))
    a = engine.descent_schedule(hopper, slip_obj, straj, alpha_d=-50.0)
    b = engine.descent_schedule(sgen, slip_obj, sgtraj, alpha_d=-50.0)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


def test_rollout_rejects_bad_schedule_shape(cart):
    with pytest.raises(ValueError):
        engine.rollout(cart, np.zeros(4), np.zeros((10, 3)), 1e-3)
