import numpy as np
import pytest

from clafd.models import (ControllerGains, NoiseModel, StateSpaceModel,
                          build_lifted, close_loop, dc_feedforward_gain,
                          place_poles)
from clafd.scenarios import build_scenario, oscillator_models


def random_model(rng, n_x=2, n_u=2, n_y=2, stable=True):
    A = rng.normal(size=(n_x, n_x))
    if stable:
        A *= 0.9 / max(np.abs(np.linalg.eigvals(A)))
    return StateSpaceModel(A, rng.normal(size=(n_x, n_u)), rng.normal(size=(n_y, n_x)))


def random_noise(rng, n_x=2, n_y=2, with_cross=False):
    G = rng.normal(size=(n_y + n_x, n_y + n_x + 2))
    joint = G @ G.T
    R = joint[:n_y, :n_y]
    Q = joint[n_y:, n_y:]
    S = joint[n_y:, :n_y] if with_cross else np.zeros((n_x, n_y))
    return NoiseModel(Q, R, S)


class TestTypes:
    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            StateSpaceModel(np.zeros((2, 3)), np.zeros((2, 1)), np.zeros((1, 2)))
        with pytest.raises(ValueError):
            StateSpaceModel(np.eye(2), np.zeros((3, 1)), np.zeros((1, 2)))
        with pytest.raises(ValueError):
            StateSpaceModel(np.eye(2), np.zeros((2, 1)), np.zeros((1, 3)))

    def test_nonfinite_rejected(self):
        A = np.eye(2)
        A[0, 0] = np.nan
        with pytest.raises(ValueError):
            StateSpaceModel(A, np.zeros((2, 1)), np.zeros((1, 2)))

    def test_joint_noise_must_be_psd(self):
        # strong cross-correlation S breaks joint PSD-ness
        with pytest.raises(ValueError):
            NoiseModel(np.eye(2), np.eye(2), 5.0 * np.eye(2))


class TestBuildLifted:
    def test_horizon_one(self):
        rng = np.random.default_rng(0)
        mdl = random_model(rng)
        lift = build_lifted(mdl, random_noise(rng), 1)
        assert np.array_equal(lift.toeplitzA, np.zeros((2, 2)))
        assert np.array_equal(lift.boldA, np.eye(2))

    def test_horizon_two_blocks(self):
        rng = np.random.default_rng(1)
        mdl = random_model(rng)
        lift = build_lifted(mdl, random_noise(rng), 2)
        n = mdl.n_x
        assert np.array_equal(lift.toeplitzA[:n, :], np.zeros((n, 2 * n)))
        assert np.array_equal(lift.toeplitzA[n:, :n], np.eye(n))
        assert np.array_equal(lift.toeplitzA[n:, n:], np.zeros((n, n)))
        assert np.array_equal(lift.boldA, np.vstack([np.eye(n), mdl.A]))

    def test_horizon_three_scalar(self):
        mdl = StateSpaceModel([[2.0]], [[1.0]], [[1.0]])
        noise = NoiseModel([[0.0]], [[1.0]], [[0.0]])
        lift = build_lifted(mdl, noise, 3)
        expected = np.array([[0, 0, 0], [1, 0, 0], [2, 1, 0]], dtype=float)
        assert np.array_equal(lift.toeplitzA, expected)

    def test_block_kron_structure(self):
        rng = np.random.default_rng(2)
        mdl = random_model(rng, n_u=1, n_y=3)
        noise = random_noise(rng, n_y=3, with_cross=True)
        lift = build_lifted(mdl, noise, 4)
        assert np.array_equal(lift.boldQ, np.kron(np.eye(4), noise.Q))
        assert np.array_equal(lift.boldB, np.kron(np.eye(4), mdl.B))
        assert np.array_equal(lift.boldS, np.kron(np.eye(4), noise.S))

    @pytest.mark.parametrize("N", [1, 2, 3, 5])
    def test_lifted_relation_matches_recursion(self, N):
        # x-stack = boldA x[k+1] + toeplitzA boldB u-stack + toeplitzA w-stack,
        # exactly, for the step-by-step recursion
        rng = np.random.default_rng(10 + N)
        mdl = random_model(rng, n_x=3, n_u=2, n_y=1, stable=False)
        lift = build_lifted(mdl, random_noise(rng, n_x=3, n_y=1), N)
        x1 = rng.normal(size=3)
        us = rng.normal(size=(N, 2))
        ws = rng.normal(size=(N, 3))
        xs = [x1]
        for k in range(N - 1):
            xs.append(mdl.A @ xs[-1] + mdl.B @ us[k] + ws[k])
        stacked = (lift.boldA @ x1 + lift.toeplitzA @ lift.boldB @ us.reshape(-1)
                   + lift.toeplitzA @ ws.reshape(-1))
        assert np.allclose(stacked, np.concatenate(xs), rtol=0, atol=1e-12)

    def test_dimension_mismatch_raises(self):
        rng = np.random.default_rng(3)
        mdl = random_model(rng, n_x=2)
        with pytest.raises(ValueError):
            build_lifted(mdl, random_noise(rng, n_x=3, n_y=2), 2)
        with pytest.raises(ValueError):
            build_lifted(mdl, random_noise(rng), 0)


class TestCloseLoop:
    def test_zero_gains_block_diagonal(self):
        rng = np.random.default_rng(4)
        cand = random_model(rng)
        nominal = random_model(rng)
        noise = random_noise(rng)
        gains = ControllerGains(F=np.zeros((2, 2)), G=np.eye(2), K=np.zeros((2, 2)))
        closed, cnoise = close_loop(cand, noise, nominal, gains)
        assert np.allclose(closed.A[:2, 2:], 0)
        assert np.allclose(closed.A[2:, :2], 0)
        assert np.allclose(closed.A[:2, :2], cand.A)
        assert np.allclose(closed.A[2:, 2:], nominal.A)
        assert np.allclose(cnoise.Q[:2, :2], noise.Q)
        assert np.allclose(cnoise.Q[2:, :], 0)
        assert np.allclose(cnoise.Q[:, 2:], 0)

    def test_separation_principle_eigenvalues(self):
        # candidate == nominal: closed-loop spectrum is the union of the
        # state-feedback spectrum and the observer spectrum
        rng = np.random.default_rng(5)
        nominal = random_model(rng, stable=False)
        noise = random_noise(rng)
        F = place_poles(nominal.A, nominal.B, [0.3, 0.4])
        K = place_poles(nominal.A.T, nominal.C.T, [0.1, 0.2]).T
        gains = ControllerGains(F=F, G=np.eye(2), K=K)
        closed, _ = close_loop(nominal, noise, nominal, gains)
        got = np.sort(np.linalg.eigvals(closed.A).real)
        want = np.sort(np.concatenate([
            np.linalg.eigvals(nominal.A - nominal.B @ F).real,
            np.linalg.eigvals(nominal.A - K @ nominal.C).real,
        ]))
        assert np.allclose(got, want, atol=1e-8)

    def test_cross_covariance_from_observer_noise(self):
        # with open-loop S = 0 the closed cross term is [0; K R]
        cfg = build_scenario("feedback-ball")
        noise = cfg.noises[0]
        assert np.allclose(noise.S[:2, :], 0)
        assert np.linalg.norm(noise.S[2:, :]) > 0

    def test_closed_joint_psd_for_psd_inputs(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            cand = random_model(rng)
            nominal = random_model(rng)
            noise = random_noise(rng, with_cross=True)
            gains = ControllerGains(F=rng.normal(size=(2, 2)),
                                    G=rng.normal(size=(2, 2)),
                                    K=rng.normal(size=(2, 2)))
            _, cnoise = close_loop(cand, noise, nominal, gains)
            assert np.linalg.eigvalsh(cnoise.joint).min() > -1e-10

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(7)
        cand = random_model(rng, n_x=3, n_u=2, n_y=2)
        nominal = random_model(rng, n_x=2)
        gains = ControllerGains(F=np.zeros((2, 2)), G=np.eye(2), K=np.zeros((2, 2)))
        with pytest.raises(ValueError):
            close_loop(cand, random_noise(rng, n_x=3), nominal, gains)


class TestPlacePoles:
    def test_diagonal_case_places_poles(self):
        # F = diag(0.4, 0.1) is one valid gain here; the contract pins the
        # closed-loop spectrum, not the particular gain
        F = place_poles(np.diag([0.5, 0.3]), np.eye(2), [0.1, 0.2])
        eig = np.sort(np.linalg.eigvals(np.diag([0.5, 0.3]) - F).real)
        assert np.allclose(eig, [0.1, 0.2], atol=1e-8)

    def test_feedback_scenario_poles(self):
        models = oscillator_models((2.0,), (1.6594,))
        F = place_poles(models[0].A, models[0].B, [0.94, 0.95])
        eig = np.sort(np.linalg.eigvals(models[0].A - models[0].B @ F).real)
        assert np.allclose(eig, [0.94, 0.95], atol=1e-8)

    def test_poles_at_existing_spectrum(self):
        rng = np.random.default_rng(8)
        A = rng.normal(size=(2, 2))
        A = A + A.T  # real eigenvalues
        poles = np.sort(np.linalg.eigvals(A).real)
        F = place_poles(A, np.eye(2), poles)
        eig = np.sort(np.linalg.eigvals(A - F).real)
        assert np.max(np.abs(eig - poles)) < 1e-8

    def test_uncontrollable_pair_raises(self):
        with pytest.raises(ValueError):
            place_poles(np.eye(2), np.array([[1.0], [0.0]]), [0.1, 0.2])


class TestDcFeedforward:
    def test_unit_plant(self):
        mdl = StateSpaceModel([[0.0]], [[1.0]], [[1.0]])
        assert np.allclose(dc_feedforward_gain(mdl, np.zeros((1, 1))), [[1.0]])

    def test_geometric_series_plant(self):
        mdl = StateSpaceModel([[0.5]], [[1.0]], [[1.0]])
        assert np.allclose(dc_feedforward_gain(mdl, np.zeros((1, 1))), [[0.5]])

    def test_singular_dc_gain_raises(self):
        mdl = StateSpaceModel([[0.5]], [[1.0]], [[0.0]])
        with pytest.raises(ValueError):
            dc_feedforward_gain(mdl, np.zeros((1, 1)))

    def test_feedback_scenario_tracks_reference(self):
        # noise-free closed-loop simulation settles on the commanded output
        cfg = build_scenario("feedback-ball")
        mdl = cfg.models[0]
        r = np.array([3.0, 5.0])
        x = np.zeros(mdl.n_x)
        for _ in range(600):
            x = mdl.A @ x + mdl.B @ r
        y = mdl.C @ x
        assert np.all(np.abs(y - r) / np.abs(r) < 0.01)

    def test_feedback_scenario_stable(self):
        cfg = build_scenario("feedback-ball")
        for mdl in cfg.models:
            assert np.max(np.abs(np.linalg.eigvals(mdl.A))) < 1.0
