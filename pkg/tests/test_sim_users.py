import numpy as np
import pytest

from migfilter import harness
from migfilter.config import ExperimentConfig
from migfilter.dynamics import cart_pendulum, slip
from migfilter.sim_users import UserModel, preset_users


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        UserModel(kind="oracle")
    with pytest.raises(ValueError):
        UserModel(kind="mpc")  # objective missing


def test_noise_zero_sigma_is_silent(cart):
    user = UserModel(kind="noise", noise_sigma=0.0).reset(3)
    for t in range(20):
        assert np.array_equal(user.next_input(cart, np.zeros(4), t * 0.01), np.zeros(1))


def test_noise_stream_is_seed_deterministic(cart):
    a = UserModel(kind="noise", noise_sigma=10.0).reset(99)
    b = UserModel(kind="noise", noise_sigma=10.0).reset(99)
    sa = [a.next_input(cart, np.zeros(4), t * 0.01) for t in range(3000)]
    sb = [b.next_input(cart, np.zeros(4), t * 0.01) for t in range(3000)]
    assert np.array_equal(np.array(sa), np.array(sb))


def test_noise_requires_reset(cart):
    user = UserModel(kind="noise", noise_sigma=1.0)
    with pytest.raises(RuntimeError):
        user.next_input(cart, np.zeros(4), 0.0)


def test_noise_empirical_sigma(cart):
    # 30 s at 100 Hz: empirical sigma within 5% of the configured one
    user = UserModel(kind="noise", noise_sigma=10.0).reset(5)
    xs = np.array([user.next_input(cart, np.zeros(4), t * 0.01)[0] for t in range(3000)])
    inside = np.abs(xs) < 19.9  # ignore the saturated tail
    assert abs(np.std(xs[inside]) - 10.0) / 10.0 < 0.05 or \
        abs(np.std(xs) - 10.0) / 10.0 < 0.08


def test_noise_respects_saturation(cart):
    user = UserModel(kind="noise", noise_sigma=50.0).reset(1)
    for t in range(200):
        u = user.next_input(cart, np.zeros(4), t * 0.01)
        assert abs(u[0]) <= 20.0


def test_preset_catalogs():
    for system, plant in (("cart_pendulum", cart_pendulum()), ("slip", slip())):
        cat = preset_users(system)
        assert set(cat) == {"noise", "low_skill", "skilled"}
        for name, user in cat.items():
            user.reset(0)
            u = user.next_input(plant, plant.initial_state, 0.0, plant.initial_mode)
            assert u.shape == (plant.input_dim,)
    with pytest.raises(KeyError):
        preset_users("double_pendulum")


def test_slip_low_skill_aims_below_rest_length():
    cat = preset_users("slip")
    assert cat["low_skill"].objective.desired(0.0)[2] < 1.0
    assert cat["skilled"].objective.desired(0.0)[2] > 1.0
    # both presets desire 1 m/s forward speed
    assert cat["low_skill"].objective.desired(0.0)[1] == 1.0
    assert cat["skilled"].objective.desired(0.0)[1] == 1.0


def test_mpc_user_deterministic(cart):
    cat = preset_users("cart_pendulum")
    a = cat["skilled"]
    x = np.array([np.pi - 0.4, 0.1, 0.0, 0.0])
    u1 = a.reset(3).next_input(cart, x, 0.0)
    u2 = a.reset(4).next_input(cart, x, 0.0)
    assert np.array_equal(u1, u2)  # mpc users do not consume randomness


@pytest.mark.slow
def test_slip_skilled_sustains_hopping():
    cfg = ExperimentConfig(system="slip", user="skilled", mode="off", duration=20.0)
    rec = harness.run_trial(cfg, seed=0)
    assert not rec.metrics.fallen
    assert len(rec.transitions) >= 10  # kept alternating stance/flight


@pytest.mark.slow
def test_slip_low_skill_falls_unassisted():
    cfg = ExperimentConfig(system="slip", user="low_skill", mode="off", duration=10.0)
    rec = harness.run_trial(cfg, seed=0)
    assert rec.metrics.fallen
