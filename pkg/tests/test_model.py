import numpy as np
import pytest

from swarmtrack import (ModelParams, Observation, ParameterError, TrajectoryConfig,
                        default_model, generate_trajectory, observe, step_truth)
from swarmtrack.seeding import substream


def test_default_model_matches_reference_parameters():
    params = default_model(dt=0.1, q_scale=0.1, r_scale=10.0)
    assert params.A[0, 3] == pytest.approx(0.1)
    assert np.allclose(params.Q, 0.1 * np.eye(6))
    assert np.allclose(params.R, 10.0 * np.eye(3))
    # block structure: identity diagonal, velocity coupling, position readout
    assert np.allclose(params.A[:3, :3], np.eye(3))
    assert np.allclose(params.A[3:, 3:], np.eye(3))
    assert np.allclose(params.A[3:, :3], 0.0)
    assert np.allclose(params.C, np.hstack([np.eye(3), np.zeros((3, 3))]))


def test_default_model_zero_process_noise():
    params = default_model(dt=1.0, q_scale=0.0, r_scale=1.0)
    assert np.allclose(params.Q, 0.0)
    assert params.A[0, 3] == pytest.approx(1.0)


def test_default_model_input_matrix_scales_with_dt():
    # Euler step: acceleration enters the velocity rows scaled by dt.
    params = default_model(dt=0.5, q_scale=1.0, r_scale=1.0)
    assert params.B[3, 0] == pytest.approx(0.5)
    assert np.allclose(params.B[:3, :], 0.0)


@pytest.mark.parametrize("kwargs", [
    dict(dt=0.0), dict(dt=-1.0), dict(r_scale=0.0), dict(r_scale=-2.0),
    dict(q_scale=-0.1),
])
def test_default_model_rejects_bad_parameters(kwargs):
    full = dict(dt=0.1, q_scale=0.1, r_scale=10.0)
    full.update(kwargs)
    with pytest.raises(ParameterError):
        default_model(**full)


def test_model_params_validates_covariances():
    eye = np.eye(2)
    with pytest.raises(ParameterError):
        ModelParams(dt=1.0, A=eye, B=np.zeros((2, 1)), C=np.eye(2)[:1],
                    Q=np.array([[1.0, 2.0], [2.0, 1.0]]), R=[[1.0]])  # indefinite Q
    with pytest.raises(ParameterError):
        ModelParams(dt=1.0, A=eye, B=np.zeros((2, 1)), C=np.eye(2)[:1],
                    Q=np.array([[1.0, 0.5], [0.0, 1.0]]), R=[[1.0]])  # asymmetric Q


def test_step_truth_noiseless_constant_velocity():
    params = default_model(dt=0.1, q_scale=0.0, r_scale=1.0)
    state = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    out = step_truth(params, state, np.zeros(3), substream(0))
    assert np.allclose(out, [0.1, 0.0, 0.0, 1.0, 0.0, 0.0])


def test_step_truth_applies_input_through_velocity():
    params = default_model(dt=0.1, q_scale=0.0, r_scale=1.0)
    out = step_truth(params, np.zeros(6), np.array([1.0, 0.0, 0.0]), substream(0))
    assert np.allclose(out, [0.0, 0.0, 0.0, 0.1, 0.0, 0.0])


def test_step_truth_deterministic_under_fixed_seed():
    params = default_model(dt=0.1, q_scale=0.1, r_scale=1.0)
    state = np.arange(6.0)
    a = step_truth(params, state, np.zeros(3), substream(123, 4))
    b = step_truth(params, state, np.zeros(3), substream(123, 4))
    assert np.array_equal(a, b)


def test_observe_perfect_channel_and_zero_noise():
    # R = 0 is allowed at the model level (only the filter needs it invertible).
    params = ModelParams(dt=0.1, A=np.eye(6), B=np.zeros((6, 3)),
                         C=np.hstack([np.eye(3), np.zeros((3, 3))]),
                         Q=np.zeros((6, 6)), R=np.zeros((3, 3)))
    state = np.array([1.0, 2.0, 3.0, 9.0, 9.0, 9.0])
    obs = observe(params, state, 1.0, substream(0))
    assert obs.received
    assert np.allclose(obs.y, [1.0, 2.0, 3.0])


def test_observe_never_receives_at_zero_rate():
    params = default_model()
    rng = substream(5)
    assert all(not observe(params, np.zeros(6), 0.0, rng).received for _ in range(100))


def test_observe_empirical_rate():
    params = default_model()
    rng = substream(17)
    hits = sum(observe(params, np.zeros(6), 0.2, rng).received for _ in range(10_000))
    assert abs(hits / 10_000 - 0.2) <= 0.02


def test_observe_rejects_bad_probability():
    params = default_model()
    with pytest.raises(ParameterError):
        observe(params, np.zeros(6), 1.5, substream(0))


def test_observation_consistency_enforced():
    with pytest.raises(ParameterError):
        Observation(received=True, y=None)
    with pytest.raises(ParameterError):
        Observation(received=False, y=np.zeros(3))


def test_generate_trajectory_equilibrium():
    params = default_model(dt=0.1, q_scale=0.0, r_scale=1.0)
    config = TrajectoryConfig(horizon=25, input_mode="zero", seed=0)
    traj = generate_trajectory(params, config, np.zeros(6))
    assert np.allclose(traj.states, 0.0)
    assert np.allclose(traj.inputs, 0.0)


def test_generate_trajectory_reproducible():
    params = default_model()
    config = TrajectoryConfig(horizon=40, input_mode="white_noise", accel_var=100.0, seed=9)
    a = generate_trajectory(params, config, np.zeros(6))
    b = generate_trajectory(params, config, np.zeros(6))
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.inputs, b.inputs)


def test_generate_trajectory_constant_acceleration_integrates():
    params = default_model(dt=0.1, q_scale=0.0, r_scale=1.0)
    inputs = np.tile([1.0, 0.0, 0.0], (10, 1))
    config = TrajectoryConfig(horizon=10, input_mode="sequence", inputs=inputs, seed=0)
    traj = generate_trajectory(params, config, np.zeros(6))
    assert traj.states[-1][3] == pytest.approx(1.0)


def test_noiseless_propagation_preserves_velocity():
    params = default_model(dt=0.25, q_scale=0.0, r_scale=1.0)
    config = TrajectoryConfig(horizon=12, input_mode="zero", seed=0)
    x0 = np.array([1.0, -2.0, 0.5, 0.3, -0.4, 0.1])
    traj = generate_trajectory(params, config, x0)
    assert np.allclose(traj.states[:, 3:], x0[3:])
    steps = np.diff(traj.states[:, :3], axis=0)
    assert np.allclose(steps, 0.25 * x0[3:])


def test_process_noise_covariance_matches_q():
    params = default_model(dt=0.1, q_scale=0.1, r_scale=1.0)
    config = TrajectoryConfig(horizon=100_000, input_mode="zero", seed=314)
    traj = generate_trajectory(params, config, np.zeros(6))
    noise = traj.states[1:] - traj.states[:-1] @ params.A.T
    emp = np.cov(noise.T, bias=True)
    assert np.all(np.abs(emp - params.Q) <= 0.05 * 0.1)


def test_trajectory_config_validation():
    with pytest.raises(ParameterError):
        TrajectoryConfig(horizon=0)
    with pytest.raises(ParameterError):
        TrajectoryConfig(horizon=5, input_mode="unknown")
    with pytest.raises(ParameterError):
        TrajectoryConfig(horizon=5, accel_var=-1.0)
    with pytest.raises(ParameterError):
        TrajectoryConfig(horizon=5, input_mode="sequence")
