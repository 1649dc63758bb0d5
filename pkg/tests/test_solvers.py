import numpy as np
import pytest

from compact_sde.dynamics import Calculus, DynamicsSpec
from compact_sde.geometry import DomainError
from compact_sde.solvers import (KlExpansion, NoiseStream, brownian_increments, euler_maruyama, integrate_ito,
                                 kl_expansion, kl_path, kl_velocity, milstein, simulate_kl_sde)
from compact_sde.trajectory import NumericalAbort

# first increment of stream (seed=1, sample=0) with dt=1, captured from the generator at build time
FIRST_INCREMENT = -0.8521701186708879
KL_R40_VARIANCE = sum(8.0 / ((2 * r - 1) ** 2 * np.pi ** 2) for r in range(1, 41))


def _const(c):
    return lambda t, z: 0.0 * z + c


def gbm(mu=0.5, sigma=1.0):
    return DynamicsSpec(lambda t, z: mu * z, lambda t, z: sigma * z, 1)


def gbm_strong_errors(scheme, dts, n_paths=256, mu=0.5, sigma=1.0, T=1.0):
    errors = []
    for dt in dts:
        n = int(round(T / dt))
        streams = [NoiseStream(1000 + p, 0, 1, dt, n) for p in range(n_paths)]
        trajs = integrate_ito(gbm(mu, sigma), np.ones((n_paths, 1)), 0.0, T, dt, streams, scheme)
        B = np.array([brownian_increments(s).sum() for s in streams])
        exact = np.exp((mu - 0.5 * sigma ** 2) * T + sigma * B)
        errors.append(np.mean(np.abs(np.array([tr.final[0] for tr in trajs]) - exact)))
    return np.array(errors)


def loglog_slope(dts, errors):
    return np.polyfit(np.log(dts), np.log(errors), 1)[0]


class TestNoise:
    def test_regression_constant(self):
        assert brownian_increments(NoiseStream(1, 0, 1, 1.0, 1))[0, 0] == FIRST_INCREMENT

    def test_increment_layout(self):
        inc = brownian_increments(NoiseStream(2, 0, 3, 0.25, 4))
        assert inc.shape == (4, 3)
        np.testing.assert_array_equal(brownian_increments(NoiseStream(2, 0, 3, 0.25, 2)), inc[:2])

    def test_mean_and_variance(self):
        dt = 1e-3
        inc = brownian_increments(NoiseStream(5, 0, 1, dt, 10 ** 6))[:, 0]
        assert abs(inc.mean()) < 4 * np.sqrt(dt / 1e6)
        np.testing.assert_allclose(inc.var(), dt, rtol=0.01)

    def test_samples_are_uncorrelated(self):
        a = brownian_increments(NoiseStream(5, 0, 1, 1.0, 10 ** 5))[:, 0]
        b = brownian_increments(NoiseStream(5, 1, 1, 1.0, 10 ** 5))[:, 0]
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.01

    def test_invalid_stream(self):
        with pytest.raises(ValueError):
            NoiseStream(0, 0, 1, 0.0, 10)


class TestEulerMaruyama:
    def test_zero_dynamics(self):
        spec = DynamicsSpec(_const(0.0), _const(0.0), 2)
        traj = euler_maruyama(spec, [0.3, 0.7], 0.0, 1.0, 0.1, NoiseStream(0, 0, 2, 0.1, 10))
        np.testing.assert_array_equal(traj.states, np.tile([0.3, 0.7], (11, 1)))

    def test_unit_drift(self):
        spec = DynamicsSpec(_const(1.0), _const(0.0), 1)
        traj = euler_maruyama(spec, [0.0], 0.0, 5.0, 1e-3, NoiseStream(0, 0, 1, 1e-3, 5000))
        assert abs(traj.final[0] - 5.0) <= 1e-9

    def test_strong_order_half(self):
        dts = 2.0 ** -np.arange(4, 10)
        assert 0.3 <= loglog_slope(dts, gbm_strong_errors("euler", dts)) <= 0.7

    def test_rejects_stratonovich(self):
        spec = DynamicsSpec(_const(0.0), _const(1.0), 1, Calculus.STRATONOVICH)
        with pytest.raises(ValueError, match="Ito"):
            euler_maruyama(spec, [0.0], 0.0, 1.0, 0.1, NoiseStream(0, 0, 1, 0.1, 10))

    def test_blow_up_aborts_with_step(self):
        spec = DynamicsSpec(lambda t, z: z * z * z, _const(0.0), 1)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NumericalAbort) as info:
                euler_maruyama(spec, [10.0], 0.0, 10.0, 0.1, NoiseStream(0, 0, 1, 0.1, 100))
        assert info.value.step is not None and info.value.step < 100


class TestMilstein:
    def test_equals_euler_for_constant_diffusion(self):
        spec = DynamicsSpec(lambda t, z: -z, _const(0.4), 1)
        stream = NoiseStream(7, 2, 1, 0.01, 200)
        np.testing.assert_array_equal(milstein(spec, [0.2], 0.0, 2.0, 0.01, stream).states,
                                      euler_maruyama(spec, [0.2], 0.0, 2.0, 0.01, stream).states)

    def test_strong_order_one(self):
        dts = 2.0 ** -np.arange(4, 10)
        assert 0.8 <= loglog_slope(dts, gbm_strong_errors("milstein", dts)) <= 1.2

    def test_shared_noise_gap_shrinks(self):
        # a single path is too noisy for a monotone check, so the pathwise max gap is averaged
        gaps = []
        for dt in (2.0 ** -6, 2.0 ** -7, 2.0 ** -8, 2.0 ** -9):
            streams = [NoiseStream(100 + p, 0, 1, dt, int(round(1 / dt))) for p in range(256)]
            a = integrate_ito(gbm(), np.ones((256, 1)), 0.0, 1.0, dt, streams, "euler")
            b = integrate_ito(gbm(), np.ones((256, 1)), 0.0, 1.0, dt, streams, "milstein")
            gaps.append(np.mean([np.max(np.abs(x.states - y.states)) for x, y in zip(a, b)]))
        assert all(x > y for x, y in zip(gaps, gaps[1:]))

    def test_batched_equals_single(self):
        streams = [NoiseStream(s, 1, 1, 0.01, 100) for s in range(4)]
        batch = integrate_ito(gbm(), np.ones((4, 1)), 0.0, 1.0, 0.01, streams)
        for s, tr in zip(streams, batch):
            np.testing.assert_array_equal(milstein(gbm(), [1.0], 0.0, 1.0, 0.01, s).states, tr.states)

    def test_record_every(self):
        stream = NoiseStream(0, 0, 1, 0.01, 100)
        full = integrate_ito(gbm(), [1.0], 0.0, 1.0, 0.01, [stream])[0]
        thin = integrate_ito(gbm(), [1.0], 0.0, 1.0, 0.01, [stream], record_every=10)[0]
        np.testing.assert_array_equal(thin.states, full.states[::10])
        with pytest.raises(ValueError):
            integrate_ito(gbm(), [1.0], 0.0, 1.0, 0.01, [stream], record_every=7)


class TestKarhunenLoeve:
    def test_zero_coefficients(self):
        exp = KlExpansion(np.zeros(10), 5.0)
        assert kl_velocity(exp, 1.3) == 0.0
        assert kl_path(exp, 2.0) == 0.0

    def test_single_term(self):
        np.testing.assert_allclose(kl_velocity(KlExpansion(np.ones(1), 5.0), 0.0), np.sqrt(2 / 5), rtol=1e-15)

    def test_outside_horizon(self):
        with pytest.raises(DomainError):
            kl_velocity(KlExpansion(np.ones(3), 1.0), 1.5)

    def test_path_is_integral_of_velocity(self):
        exp = kl_expansion(4, 0, 40, 5.0)
        t, h = 2.1, 1e-6
        fd = (kl_path(exp, t + h) - kl_path(exp, t - h)) / (2 * h)
        np.testing.assert_allclose(fd, kl_velocity(exp, t), atol=1e-6)
        assert kl_path(exp, 0.0) == 0.0

    def test_endpoint_variance(self):
        T = 5.0
        draws = kl_expansion(0, 0, 40, T, dim=100_000)
        endpoint = kl_path(draws, T)
        np.testing.assert_allclose(endpoint.var() / T, KL_R40_VARIANCE, rtol=0.01)
        np.testing.assert_allclose(KL_R40_VARIANCE, 0.99494, atol=1e-5)

    def test_pure_noise_sde_variance(self):
        spec = DynamicsSpec(_const(0.0), _const(1.0), 1, Calculus.STRATONOVICH)
        streams = [NoiseStream(9, i, 1, 0.01, 100) for i in range(10_000)]
        trajs = simulate_kl_sde(spec, np.zeros(1), 1.0, 40, streams, dt=0.01)
        finals = np.array([tr.final[0] for tr in trajs])
        np.testing.assert_allclose(finals.var(), KL_R40_VARIANCE, rtol=0.05)

    def test_zero_diffusion_is_plain_ode(self):
        spec = DynamicsSpec(lambda t, z: -z, _const(0.0), 1, Calculus.STRATONOVICH)
        traj = simulate_kl_sde(spec, np.ones(1), 1.0, 40, [NoiseStream(0, 0, 1, 0.01, 100)], dt=0.01)[0]
        np.testing.assert_allclose(traj.final, [np.exp(-1.0)], rtol=1e-10)

    def test_needs_stratonovich(self):
        with pytest.raises(ValueError, match="Stratonovich"):
            simulate_kl_sde(gbm(), np.ones(1), 1.0, 40, [NoiseStream(0, 0, 1, 0.01, 100)])

    def test_deterministic(self):
        spec = DynamicsSpec(lambda t, z: -z, lambda t, z: 0.5 + 0.0 * z, 1, Calculus.STRATONOVICH)
        stream = NoiseStream(2, 3, 1, 0.01, 100)
        a = simulate_kl_sde(spec, np.ones(1), 1.0, 40, [stream], dt=0.01)[0]
        b = simulate_kl_sde(spec, np.ones(1), 1.0, 40, [stream], dt=0.01)[0]
        np.testing.assert_array_equal(a.states, b.states)
