import numpy as np
import pytest

from compact_sde.ode import rk_adaptive, rk_fixed
from compact_sde.trajectory import NumericalAbort


class TestAdaptive:
    def test_exponential_decay(self):
        traj = rk_adaptive(lambda t, z: -z, np.ones(1), 0.0, 1.0, rtol=1e-8, atol=1e-12)
        assert abs(traj.final[0] - np.exp(-1.0)) <= 1e-8
        assert traj.times[-1] == 1.0

    def test_sine(self):
        traj = rk_adaptive(lambda t, z: np.cos(t) + 0.0 * z, np.zeros(1), 0.0, np.pi, rtol=1e-8, atol=1e-12)
        assert abs(traj.final[0]) <= 1e-8

    def test_zero_rhs(self):
        traj = rk_adaptive(lambda t, z: 0.0 * z, np.array([0.25, -1.0]), 0.0, 3.0)
        np.testing.assert_array_equal(traj.states, np.tile([0.25, -1.0], (len(traj.times), 1)))

    def test_error_falls_with_tolerance(self):
        errors = [abs(rk_adaptive(lambda t, z: -z, np.ones(1), 0.0, 1.0, rtol=r, atol=1e-14).final[0]
                      - np.exp(-1.0)) for r in (1e-4, 1e-6, 1e-8)]
        assert errors[0] > errors[1] > errors[2]

    def test_dense_output(self):
        t_eval = np.linspace(0.0, 2.0, 17)
        traj = rk_adaptive(lambda t, z: -z, np.ones(1), 0.0, 2.0, rtol=1e-9, atol=1e-12, t_eval=t_eval)
        np.testing.assert_array_equal(traj.times, t_eval)
        np.testing.assert_allclose(traj.states[:, 0], np.exp(-t_eval), atol=1e-8)

    def test_finite_time_blow_up_aborts(self):
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NumericalAbort):
                rk_adaptive(lambda t, z: z * z, np.ones(1), 0.0, 2.0)

    def test_bad_t_eval(self):
        with pytest.raises(ValueError):
            rk_adaptive(lambda t, z: -z, np.ones(1), 0.0, 1.0, t_eval=[0.5, 0.2])


class TestFixed:
    def test_fifth_order_convergence(self):
        errors = [abs(rk_fixed(lambda t, z: -z, np.ones(1), 0.0, 1.0, dt).final[0] - np.exp(-1.0))
                  for dt in (0.1, 0.05)]
        np.testing.assert_allclose(np.log2(errors[0] / errors[1]), 5.0, atol=0.3)

    def test_stores_every_step(self):
        traj = rk_fixed(lambda t, z: 0.0 * z, np.zeros((3, 1)), 0.0, 1.0, 0.25)
        assert traj.states.shape == (5, 3, 1)
