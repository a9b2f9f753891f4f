"""Membrane dynamics and the three firing rules."""

import numpy as np
import pytest

from reverb_snn.errors import DimensionError, ModeError
from reverb_snn.neuron import (FireMode, LifState, NeuronParams, fire,
                               fire_backward, fire_binary, fire_real,
                               fire_real_scaled, membrane_update)


def binary_params(tau=0.25, v_th=0.0):
    return NeuronParams(tau=tau, v_th=v_th, mode=FireMode.BINARY)


def real_params(tau=0.25, v_th=0.0):
    return NeuronParams(tau=tau, v_th=v_th, mode=FireMode.REAL)


def scaled_params(scale, tau=0.25, v_th=0.0):
    return NeuronParams(tau=tau, v_th=v_th, mode=FireMode.SCALED_REAL,
                        scale=np.asarray(scale, dtype=np.float64))


class TestMembraneUpdate:
    def test_zero_initial_potential(self):
        state = LifState(np.zeros(3))
        new = membrane_update(state, np.array([1.0, -2.0, 0.5]), real_params(tau=0.7))
        np.testing.assert_array_equal(new.u, [1.0, -2.0, 0.5])

    def test_leak_then_integrate(self):
        state = LifState(np.array([1.0]))
        new = membrane_update(state, np.array([0.5]), real_params(tau=0.25))
        np.testing.assert_allclose(new.u, [0.75])

    def test_tau_zero_is_memoryless(self):
        state = LifState(np.array([123.0]))
        new = membrane_update(state, np.array([0.5]), real_params(tau=0.0))
        np.testing.assert_array_equal(new.u, [0.5])

    def test_timestep_advances(self):
        state = LifState(np.zeros(2), t=3)
        assert membrane_update(state, np.zeros(2), real_params()).t == 4

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            membrane_update(LifState(np.zeros(3)), np.zeros(2), real_params())


class TestFireBinary:
    def test_threshold_inclusive(self):
        spikes, _ = fire_binary(LifState(np.array([0.5])), binary_params(v_th=0.5))
        np.testing.assert_array_equal(spikes, [1.0])

    def test_below_threshold_no_spike_no_reset(self):
        state = LifState(np.array([0.5 - 1e-12]))
        spikes, new = fire_binary(state, binary_params(v_th=0.5))
        np.testing.assert_array_equal(spikes, [0.0])
        np.testing.assert_array_equal(new.u, state.u)

    def test_mixed_fire_and_reset(self):
        spikes, new = fire_binary(LifState(np.array([0.5, -0.3])), binary_params(v_th=0.0))
        np.testing.assert_array_equal(spikes, [1.0, 0.0])
        np.testing.assert_array_equal(new.u, [0.0, -0.3])

    def test_wrong_mode(self):
        with pytest.raises(ModeError):
            fire_binary(LifState(np.zeros(1)), real_params())


class TestFireReal:
    def test_emits_membrane_value(self):
        spikes, new = fire_real(LifState(np.array([0.7, -0.2])), real_params(v_th=0.0))
        np.testing.assert_array_equal(spikes, [0.7, 0.0])
        np.testing.assert_array_equal(new.u, [0.0, -0.2])

    def test_silent_below_threshold(self):
        state = LifState(np.array([-0.5, -0.1]))
        spikes, new = fire_real(state, real_params(v_th=0.0))
        np.testing.assert_array_equal(spikes, [0.0, 0.0])
        np.testing.assert_array_equal(new.u, state.u)

    def test_zero_magnitude_spike_at_boundary(self):
        # u == v_th == 0 fires a zero-valued spike; downstream effect is nil.
        spikes, new = fire_real(LifState(np.array([0.0])), real_params(v_th=0.0))
        np.testing.assert_array_equal(spikes, [0.0])
        np.testing.assert_array_equal(new.u, [0.0])

    def test_reset_idempotence(self):
        # After firing, re-evaluating without new input gives no second spike.
        params = real_params(v_th=0.4)
        spikes, state = fire_real(LifState(np.array([0.9])), params)
        np.testing.assert_array_equal(spikes, [0.9])
        spikes2, _ = fire_real(state, params)
        np.testing.assert_array_equal(spikes2, [0.0])

    def test_matches_binary_scaled_on_two_level_inputs(self):
        # Inputs restricted to {0, v_th}: real firing == v_th * binary firing.
        v_th = 0.5
        u = np.array([0.0, v_th, 0.0, v_th])
        real_spikes, _ = fire_real(LifState(u.copy()), real_params(v_th=v_th))
        bin_spikes, _ = fire_binary(LifState(u.copy()), binary_params(v_th=v_th))
        np.testing.assert_array_equal(real_spikes, v_th * bin_spikes)


class TestFireRealScaled:
    def test_unit_scale_equals_fire_real(self):
        u = np.array([0.7, -0.2, 0.0])
        real_spikes, _ = fire_real(LifState(u.copy()), real_params())
        scaled_spikes, _ = fire_real_scaled(LifState(u.copy()), scaled_params(np.ones(3)))
        np.testing.assert_array_equal(real_spikes, scaled_spikes)

    def test_scales_emitted_value(self):
        spikes, new = fire_real_scaled(LifState(np.array([2.0])), scaled_params([0.5]))
        np.testing.assert_array_equal(spikes, [1.0])
        np.testing.assert_array_equal(new.u, [0.0])

    def test_gating_precedes_scaling(self):
        spikes, _ = fire_real_scaled(
            LifState(np.array([-1.0])), scaled_params([100.0], v_th=0.0)
        )
        np.testing.assert_array_equal(spikes, [0.0])

    def test_channel_broadcast_on_conv_maps(self):
        u = np.ones((2, 3, 3))
        u[1] = 2.0
        spikes, _ = fire_real_scaled(LifState(u), scaled_params([2.0, 0.5]))
        np.testing.assert_array_equal(spikes[0], 2.0 * np.ones((3, 3)))
        np.testing.assert_array_equal(spikes[1], np.ones((3, 3)))

    def test_scale_length_mismatch(self):
        with pytest.raises(DimensionError):
            fire_real_scaled(LifState(np.zeros(3)), scaled_params([1.0, 1.0]))

    def test_nonpositive_scale_rejected(self):
        with pytest.raises(ValueError):
            scaled_params([0.0])


class TestFireBackward:
    def test_real_gradient_is_fired_indicator(self):
        g = fire_backward(np.array([0.7, -0.2]), real_params(v_th=0.0))
        np.testing.assert_array_equal(g, [1.0, 0.0])

    def test_scaled_gradient_is_scale_on_fired(self):
        g = fire_backward(np.array([2.0]), scaled_params([0.5]))
        np.testing.assert_array_equal(g, [0.5])

    def test_binary_window_center(self):
        g = fire_backward(np.array([0.3]), binary_params(v_th=0.3))
        np.testing.assert_array_equal(g, [1.0])

    def test_binary_window_edges(self):
        params = binary_params(v_th=0.0)
        np.testing.assert_array_equal(
            fire_backward(np.array([0.5, -0.5, 0.51, -0.51]), params),
            [1.0, 1.0, 0.0, 0.0],
        )

    def test_real_matches_finite_differences_away_from_gate(self):
        # d(fire_real)/du via central differences at |u - v_th| > 1e-3.
        rng = np.random.default_rng(4)
        params = real_params(v_th=0.0)
        u = rng.uniform(-2, 2, 200)
        u = u[np.abs(u) > 1e-3]
        h = 1e-7

        def f(v):
            spikes, _ = fire_real(LifState(v), params)
            return spikes

        fd = (f(u + h) - f(u - h)) / (2 * h)
        np.testing.assert_allclose(fire_backward(u, params), fd, rtol=1e-6, atol=1e-6)


class TestEventDrivenInvariance:
    def test_subthreshold_contributes_exactly_zero(self):
        rng = np.random.default_rng(8)
        u = rng.uniform(-1, -1e-6, 50)
        spikes, _ = fire_real(LifState(u), real_params(v_th=0.0))
        w = rng.uniform(-1, 1, (10, 50))
        np.testing.assert_array_equal(w @ spikes, np.zeros(10))

    def test_dispatch_matches_mode(self):
        u = np.array([0.4])
        for params, ref in [
            (binary_params(), fire_binary),
            (real_params(), fire_real),
            (scaled_params([2.0]), fire_real_scaled),
        ]:
            got, _ = fire(LifState(u.copy()), params)
            want, _ = ref(LifState(u.copy()), params)
            np.testing.assert_array_equal(got, want)


class TestParamsValidation:
    def test_tau_out_of_range(self):
        with pytest.raises(ValueError):
            NeuronParams(tau=1.5)
        with pytest.raises(ValueError):
            NeuronParams(tau=-0.1)
