import numpy as np
import pytest

from migfilter import engine
from migfilter.dynamics import PlantModel, cart_pendulum
from migfilter.objective import (
    QuadraticObjective,
    Trajectory,
    adjoint_backward,
    cost_gradient,
    incremental_cost,
    total_cost,
)

from .conftest import random_cart_state


def scalar_rest_plant():
    """One-dimensional plant with f = 0 (state frozen)."""
    return PlantModel(name="rest", state_dim=1, input_dim=1,
                      input_bounds=np.array([[-1.0], [1.0]]),
                      flow=lambda x, u, mode=0: np.zeros(1),
                      jacobian=lambda x, u, mode=0: np.zeros((1, 1)),
                      input_jacobian=lambda x, u, mode=0: np.zeros((1, 1)))


def test_weights_must_be_psd():
    with pytest.raises(ValueError):
        QuadraticObjective(Q=np.array([[-1.0]]), R=np.zeros((1, 1)), x_d=np.zeros(1))
    with pytest.raises(ValueError):
        QuadraticObjective(Q=np.array([[1.0, 2.0], [0.0, 1.0]]),
                           R=np.zeros((1, 1)), x_d=np.zeros(2))


def test_incremental_cost_zero_at_target():
    obj = QuadraticObjective(Q=np.eye(4), R=np.zeros((1, 1)), x_d=np.ones(4))
    assert incremental_cost(obj, np.ones(4), 0.0) == 0.0


def test_incremental_cost_hand_value():
    obj = QuadraticObjective(Q=np.eye(4), R=np.zeros((1, 1)), x_d=np.zeros(4))
    assert incremental_cost(obj, np.array([3.0, 4.0, 0.0, 0.0]), 0.0) == pytest.approx(12.5)


def test_incremental_cost_null_weight():
    obj = QuadraticObjective(Q=np.zeros((4, 4)), R=np.zeros((1, 1)), x_d=np.zeros(4))
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert incremental_cost(obj, rng.normal(size=4), 0.0) == 0.0


def test_incremental_cost_nonnegative_random():
    rng = np.random.default_rng(1)
    M = rng.normal(size=(4, 4))
    obj = QuadraticObjective(Q=M @ M.T, R=np.zeros((1, 1)), x_d=np.zeros(4),
                             angle_indices=(0,))
    for _ in range(50):
        assert incremental_cost(obj, rng.normal(scale=3, size=4), 0.0) >= 0.0


def test_cost_wraps_angle_difference():
    obj = QuadraticObjective(Q=np.eye(4), R=np.zeros((1, 1)), x_d=np.zeros(4),
                             angle_indices=(0,))
    near = incremental_cost(obj, np.array([0.1, 0, 0, 0]), 0.0)
    wrapped = incremental_cost(obj, np.array([2 * np.pi + 0.1, 0, 0, 0]), 0.0)
    assert wrapped == pytest.approx(near, rel=1e-12)


def test_cost_gradient_diagonal_and_zero():
    q = np.array([3.0, 5.0, 7.0, 11.0])
    obj = QuadraticObjective(Q=np.diag(q), R=np.zeros((1, 1)), x_d=np.zeros(4))
    assert np.array_equal(cost_gradient(obj, np.zeros(4), 0.0), np.zeros(4))
    e = np.array([1.0, -2.0, 0.5, 3.0])
    assert np.allclose(cost_gradient(obj, e, 0.0), q * e)


def test_cost_gradient_matches_fd():
    rng = np.random.default_rng(2)
    M = rng.normal(size=(4, 4))
    obj = QuadraticObjective(Q=M @ M.T + np.eye(4), R=np.zeros((1, 1)),
                             x_d=np.zeros(4), angle_indices=(0,))
    for _ in range(20):
        x = rng.uniform(-2.5, 2.5, size=4)  # stay away from the angle cut
        grad = cost_gradient(obj, x, 0.0)
        eps = 1e-6
        for i in range(4):
            dx = np.zeros(4)
            dx[i] = eps
            fd = (incremental_cost(obj, x + dx, 0.0)
                  - incremental_cost(obj, x - dx, 0.0)) / (2 * eps)
            assert fd == pytest.approx(grad[i], rel=1e-6, abs=1e-7)


def test_total_cost_zero_at_rest_on_target():
    obj = QuadraticObjective(Q=np.eye(2), R=np.eye(1), x_d=np.ones(2))
    traj = Trajectory(t0=0.0, dt=0.01, states=np.ones((101, 2)),
                      inputs=np.zeros((100, 1)))
    assert total_cost(obj, traj) == 0.0


def test_total_cost_constant_error_closed_form():
    obj = QuadraticObjective(Q=np.eye(2), R=np.zeros((1, 1)), x_d=np.zeros(2))
    e = np.array([0.6, -0.8])
    T = 2.0
    traj = Trajectory(t0=0.0, dt=0.001, states=np.tile(e, (2001, 1)),
                      inputs=np.zeros((2000, 1)))
    assert total_cost(obj, traj) == pytest.approx(0.5 * (e @ e) * T, rel=1e-12)


def test_total_cost_control_term_exact_for_zoh():
    obj = QuadraticObjective(Q=np.zeros((2, 2)), R=2.0 * np.eye(1), x_d=np.zeros(2))
    us = np.linspace(-1, 1, 50)[:, None]
    traj = Trajectory(t0=0.0, dt=0.01, states=np.zeros((51, 2)), inputs=us)
    expect = 0.5 * 2.0 * float(np.sum(us**2)) * 0.01
    assert total_cost(obj, traj) == pytest.approx(expect, rel=1e-12)


def test_total_cost_quadrature_convergence(cart, cart_objective):
    x0 = np.array([2.5, 0.0, 0.0, 0.0])

    def J(dt):
        n = int(round(1.0 / dt))
        traj = engine.rollout(cart, x0, np.zeros((n, 1)), dt)
        return total_cost(cart_objective, traj)

    ref = J(1e-4)
    e1 = abs(J(4e-3) - ref)
    e2 = abs(J(2e-3) - ref)
    assert 2.5 < e1 / e2 < 6.0  # ~4x per halving


def test_total_cost_rejects_empty():
    obj = QuadraticObjective(Q=np.eye(1), R=np.eye(1), x_d=np.zeros(1))
    with pytest.raises(ValueError):
        Trajectory(t0=0.0, dt=0.01, states=np.zeros((1, 1)), inputs=np.zeros((1, 1)))
    traj = Trajectory.__new__(Trajectory)
    traj.t0, traj.dt = 0.0, 0.01
    traj.states = np.zeros((1, 1))
    traj.inputs = np.zeros((0, 1))
    traj.modes = np.zeros(1, dtype=int)
    traj.costates = None
    with pytest.raises(ValueError):
        total_cost(obj, traj)


# ---------------------------------------------------------------------------
# adjoint
# ---------------------------------------------------------------------------

def test_adjoint_costless_problem(cart):
    obj = QuadraticObjective(Q=np.zeros((4, 4)), R=np.zeros((1, 1)), x_d=np.zeros(4))
    traj = engine.rollout(cart, np.array([3.0, 0, 0, 0]), np.zeros((100, 1)), 1e-3)
    out = adjoint_backward(obj, cart, traj)
    assert np.array_equal(out.costates, np.zeros((101, 4)))


def test_adjoint_frozen_scalar_plant_closed_form():
    # f = 0, Q = 1, x(t) = c: rho_dot = -c, rho(tf) = 0 -> rho(t) = c (tf - t)
    plant = scalar_rest_plant()
    obj = QuadraticObjective(Q=np.eye(1), R=np.zeros((1, 1)), x_d=np.zeros(1))
    c = 0.7
    T, dt = 1.0, 1e-3
    n = int(T / dt)
    traj = Trajectory(t0=0.0, dt=dt, states=np.full((n + 1, 1), c),
                      inputs=np.zeros((n, 1)))
    out = adjoint_backward(obj, plant, traj)
    ts = out.times()
    assert np.allclose(out.costates[:, 0], c * (T - ts), atol=1e-12)


def test_adjoint_terminal_condition(cart, cart_objective):
    P = np.diag([2.0, 0.0, 1.0, 0.0])
    obj = QuadraticObjective(Q=cart_objective.Q, R=cart_objective.R,
                             x_d=np.zeros(4), terminal_P=P, angle_indices=(0,))
    traj = engine.rollout(cart, np.array([2.0, 0.3, 0.1, 0.0]), np.zeros((50, 1)), 1e-3)
    out = adjoint_backward(obj, cart, traj)
    e_f = obj.error(traj.states[-1], traj.tf)
    assert np.allclose(out.costates[-1], P @ e_f)


def test_adjoint_linearity_in_weights(cart):
    x0 = np.array([2.2, -0.4, 0.2, 0.1])
    traj = engine.rollout(cart, x0, np.zeros((200, 1)), 1e-3)
    obj1 = QuadraticObjective(Q=np.diag([10.0, 1, 1, 1]), R=np.zeros((1, 1)),
                              x_d=np.zeros(4), terminal_P=np.eye(4), angle_indices=(0,))
    obj2 = QuadraticObjective(Q=2 * obj1.Q, R=np.zeros((1, 1)),
                              x_d=np.zeros(4), terminal_P=2 * np.eye(4),
                              angle_indices=(0,))
    r1 = adjoint_backward(obj1, cart, traj).costates
    r2 = adjoint_backward(obj2, cart, traj).costates
    assert np.allclose(r2, 2 * r1, rtol=1e-12, atol=1e-12)


def test_adjoint_does_not_mutate_inputs(cart, cart_objective):
    traj = engine.rollout(cart, np.array([2.0, 0, 0, 0]), np.zeros((50, 1)), 1e-3)
    states_before = traj.states.copy()
    out = adjoint_backward(cart_objective, cart, traj)
    assert np.array_equal(traj.states, states_before)
    assert out.costates.shape == (51, 4)
    assert traj.costates is None


def _fd_initial_gradient(plant, obj, x0, n_steps, eps=1e-6):
    fd = np.zeros(len(x0))
    for i in range(len(x0)):
        dx = np.zeros(len(x0))
        dx[i] = eps
        Jp = total_cost(obj, engine.rollout(plant, x0 + dx, np.zeros((n_steps, 1)), 1e-3))
        Jm = total_cost(obj, engine.rollout(plant, x0 - dx, np.zeros((n_steps, 1)), 1e-3))
        fd[i] = (Jp - Jm) / (2 * eps)
    return fd


def test_adjoint_gradient_check_cart_smooth_cost(cart):
    # unwrapped quadratic cost: globally smooth, so rho(t0) must match the
    # finite-difference initial-state gradient everywhere
    obj = QuadraticObjective(Q=np.diag([100.0, 1.0, 1.0, 1.0]), R=np.zeros((1, 1)),
                             x_d=np.zeros(4))
    rng = np.random.default_rng(5)
    for _ in range(10):
        x0 = random_cart_state(rng)
        traj = engine.rollout(cart, x0, np.zeros((500, 1)), 1e-3)
        rho0 = adjoint_backward(obj, cart, traj).costates[0]
        fd = _fd_initial_gradient(cart, obj, x0, 500)
        assert np.linalg.norm(fd - rho0) <= 1e-3 * max(np.linalg.norm(rho0), 1e-9)


def test_adjoint_gradient_check_cart_wrapped_cost(cart, cart_objective):
    # wrapped cost has a gradient kink at the angle cut (theta = +-pi), so
    # check on windows that stay clear of it
    rng = np.random.default_rng(6)
    checked = 0
    while checked < 8:
        x0 = np.array([rng.uniform(-2.0, 2.0), rng.uniform(-1, 1),
                       rng.uniform(-1, 1), rng.uniform(-2, 2)])
        traj = engine.rollout(cart, x0, np.zeros((500, 1)), 1e-3)
        if np.max(np.abs(traj.states[:, 0])) > 3.0:
            continue
        rho0 = adjoint_backward(cart_objective, cart, traj).costates[0]
        fd = _fd_initial_gradient(cart, cart_objective, x0, 500)
        assert np.linalg.norm(fd - rho0) <= 1e-3 * max(np.linalg.norm(rho0), 1e-9)
        checked += 1
