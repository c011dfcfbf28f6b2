import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relugd import network as nw
from relugd import serialization
from relugd.errors import DimensionError, DomainError, SchemaError
from relugd.network import Dataset, ShallowReluNet

from conftest import (central_differences, loop_realize, off_kink_instance, random_dataset, random_net,
                      smoothed_gradient)


class TestRectifier:
    def test_sign_cases(self):
        np.testing.assert_array_equal(nw.rectifier([-1.0, 2.0, 0.0]), [0.0, 2.0, 0.0])

    def test_negative_vector(self):
        np.testing.assert_array_equal(nw.rectifier([-3.0, -0.5]), [0.0, 0.0])

    def test_identity_on_cone(self):
        v = np.array([0.0, 1.5, 7.0])
        np.testing.assert_array_equal(nw.rectifier(v), v)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=8), st.floats(0, 1e3))
    def test_positive_homogeneity(self, v, alpha):
        v = np.array(v)
        np.testing.assert_allclose(nw.rectifier(alpha * v), alpha * nw.rectifier(v), rtol=1e-15)


class TestSoftplus:
    def test_value_at_zero(self):
        assert nw.softplus(0.0, 1.0) == pytest.approx(math.log(2.0), rel=1e-15)

    @pytest.mark.parametrize("t", [0.5, 1.0, 3.0, 1e3, 1e8])
    def test_derivative_at_zero(self, t):
        assert nw.softplus_deriv(0.0, t) == pytest.approx(t / (t + 1.0), rel=1e-15)

    def test_value_at_one(self):
        for t in np.geomspace(3.0, 1e8, 40):
            assert abs(nw.softplus(1.0, t) - 1.0) <= 2.0 * math.log(t) / t

    def test_nonpositive_t(self):
        with pytest.raises(DomainError):
            nw.softplus(1.0, 0.0)
        with pytest.raises(DomainError):
            nw.softplus_deriv(1.0, -1.0)

    @pytest.mark.parametrize("t", [1.0, 1e3, 1e6])
    def test_no_overflow(self, t):
        z = np.array([-1e6, -1.0, 0.0, 1.0, 1e6]) / t
        with np.errstate(over="raise", invalid="raise"):
            v = nw.softplus(z, t)
            g = nw.softplus_deriv(z, t)
        assert np.all(np.isfinite(v)) and np.all(np.isfinite(g))
        assert v[-1] == pytest.approx(z[-1] + math.log(t) / t, rel=1e-12)
        assert g[0] == 0.0 and g[-1] == 1.0

    def test_branches_agree_at_split(self):
        t = 7.0
        z = nw.SOFTPLUS_BRANCH / t
        lo = math.log1p(t * math.exp(t * z)) / t
        assert nw.softplus(z, t) == pytest.approx(lo, rel=1e-15)
        assert nw.softplus(np.nextafter(z, 1.0), t) == pytest.approx(lo, rel=1e-14)

    def test_matches_mpmath(self):
        import mpmath
        for t in (0.3, 2.0, 50.0, 1e4):
            for z in (-2.0, -1e-3, 0.0, 1e-3, 0.5, 4.0):
                with mpmath.workdps(40):
                    exact = mpmath.log1p(t * mpmath.e ** (t * mpmath.mpf(z))) / t
                    dexact = 1 / (1 + mpmath.e ** (-t * mpmath.mpf(z)) / t)
                assert nw.softplus(z, t) == pytest.approx(float(exact), rel=1e-13, abs=1e-300)
                assert nw.softplus_deriv(z, t) == pytest.approx(float(dexact), rel=1e-13, abs=1e-300)

    @pytest.mark.parametrize("t", [10.0, 100.0, 1000.0])
    def test_distance_to_rectifier(self, t):
        z = np.linspace(-0.5, 3.0, 351)
        gap = np.abs(nw.softplus(z, t) - np.maximum(z, 0.0))
        bound = math.log(t) / t + np.abs(np.log(np.exp(-t * z) / t + 1.0)) / t
        assert np.all(gap <= bound + 1e-15)


class TestRealize:
    def test_hand_example(self):
        net = ShallowReluNet(W=[[2.0]], B=[-1.0], Wout=[3.0], bias=0.5)
        assert nw.realize(net, [1.0]) == 3.5

    def test_dead_hidden_layer(self):
        net = ShallowReluNet(W=[[1.0, 1.0], [2.0, 0.0]], B=[-10.0, -10.0], Wout=[1.0, -1.0], bias=0.25)
        assert nw.realize(net, [1.0, 1.0]) == 0.25

    def test_loop_oracle(self, rng):
        for _ in range(20):
            net = random_net(rng, 4, 9)
            x = rng.standard_normal(4)
            expected = loop_realize(net.W, net.B, net.Wout, net.bias, x)
            assert nw.realize(net, x) == pytest.approx(expected, rel=1e-12, abs=1e-15)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            nw.realize(random_net(rng, 3, 2), [1.0, 2.0])

    def test_predictions_match_realize(self, rng):
        net, data = random_net(rng, 3, 5), random_dataset(rng, 3, 6)
        f = nw.predictions(net, data)
        for j in range(data.m):
            assert f[j] == nw.realize(net, data.x[j])


class TestRisk:
    def test_exact_fit(self, rng):
        net, data = random_net(rng, 2, 4), random_dataset(rng, 2, 3)
        fitted = Dataset(x=data.x, y=nw.predictions(net, data))
        assert nw.empirical_risk(net, fitted) == 0.0

    def test_zero_network(self, rng):
        data = random_dataset(rng, 3, 5)
        net = ShallowReluNet(W=np.zeros((4, 3)), B=np.zeros(4), Wout=np.zeros(4), bias=0.0)
        assert nw.empirical_risk(net, data) == pytest.approx(np.mean(data.y**2), rel=1e-15)

    def test_loop_oracle(self, rng):
        net, data = random_net(rng, 3, 7), random_dataset(rng, 3, 5)
        acc = 0.0
        for j in range(data.m):
            r = loop_realize(net.W, net.B, net.Wout, net.bias, data.x[j]) - data.y[j]
            acc += r * r
        assert nw.empirical_risk(net, data) == pytest.approx(acc / data.m, rel=1e-12)

    def test_nonnegative(self, rng):
        for _ in range(20):
            assert nw.empirical_risk(random_net(rng, 2, 3), random_dataset(rng, 2, 4)) >= 0.0


class TestGradient:
    def test_zero_residuals(self, rng):
        net, data = random_net(rng, 2, 4), random_dataset(rng, 2, 3)
        g = nw.risk_gradient(net, Dataset(x=data.x, y=nw.predictions(net, data)))
        assert not np.any(g.dW) and not np.any(g.dB) and g.dBias == 0.0

    def test_hand_instance(self):
        # m = d = width = 1: z = 2*1.5 - 1 = 2, f = 3*2 + 0.5 = 6.5, residual 6.5 - 1 = 5.5
        net = ShallowReluNet(W=[[2.0]], B=[-1.0], Wout=[3.0], bias=0.5)
        data = Dataset(x=[[1.5]], y=[1.0])
        g = nw.risk_gradient(net, data)
        assert g.dW[0, 0] == 2 * 5.5 * 3.0 * 1.5
        assert g.dB[0] == 2 * 5.5 * 3.0
        assert g.dBias == 2 * 5.5

    def test_kink_counts_as_active(self):
        net = ShallowReluNet(W=[[1.0]], B=[-1.0], Wout=[2.0], bias=0.0)
        g = nw.risk_gradient(net, Dataset(x=[[1.0]], y=[1.0]))
        # z = 0 exactly: indicator is 1, residual is -1
        assert g.dB[0] == 2 * (-1.0) * 2.0

    def test_matches_exact_finite_differences(self, rng):
        # the risk is smooth away from kinks, so plain central differences apply
        for _ in range(30):
            net, data = off_kink_instance(rng)
            g = nw.risk_gradient(net, data)
            dW, dB, db = central_differences(lambda n: nw.empirical_risk(n, data), net, 1e-6)
            np.testing.assert_allclose(g.dW, dW, atol=1e-7)
            np.testing.assert_allclose(g.dB, dB, atol=1e-7)
            assert g.dBias == pytest.approx(db, abs=1e-7)

    def test_smoothed_gradient_matches_finite_differences(self, rng):
        for _ in range(20):
            net, data = off_kink_instance(rng, margin=0.0)
            dW, dB, db = central_differences(lambda n: nw.smoothed_risk(n, data, 1e4), net, 1e-6)
            aW, aB, ab = smoothed_gradient(net, data, 1e4)
            np.testing.assert_allclose(aW, dW, atol=1e-6)
            np.testing.assert_allclose(aB, dB, atol=1e-6)
            assert ab == pytest.approx(db, abs=1e-6)

    @pytest.mark.parametrize("t,tol", [(1e6, 2e-4), (1e8, 2e-6)])
    def test_smoothed_finite_differences_converge(self, rng, t, tol):
        for _ in range(20):
            net, data = off_kink_instance(rng)
            g = nw.risk_gradient(net, data)
            dW, dB, db = central_differences(lambda n: nw.smoothed_risk(n, data, t), net, 1e-7)
            err = max(np.max(np.abs(g.dW - dW)), np.max(np.abs(g.dB - dB)), abs(g.dBias - db))
            assert err <= tol


class TestSmoothedRisk:
    def test_close_to_empirical_at_large_t(self, rng):
        for _ in range(20):
            net, data = random_net(rng, 3, 8), random_dataset(rng, 3, 4)
            assert abs(nw.smoothed_risk(net, data, 1e6) - nw.empirical_risk(net, data)) <= 1e-3

    def test_dead_layer_limit(self, rng):
        data = random_dataset(rng, 2, 4)
        net = ShallowReluNet(W=np.ones((3, 2)), B=np.full(3, -50.0), Wout=np.ones(3), bias=0.3)
        expected = np.mean((0.3 - data.y) ** 2)
        assert nw.smoothed_risk(net, data, 1e4) == pytest.approx(expected, rel=1e-12)

    def test_approaches_empirical(self, rng):
        net, data = random_net(rng, 2, 6), random_dataset(rng, 2, 5)
        target = nw.empirical_risk(net, data)
        gaps = [abs(nw.smoothed_risk(net, data, t) - target) for t in (1e2, 1e3, 1e4)]
        assert gaps[0] > gaps[1] > gaps[2]

    def test_nonpositive_t(self, rng):
        with pytest.raises(DomainError):
            nw.smoothed_risk(random_net(rng, 1, 1), random_dataset(rng, 1, 1), 0.0)


class TestContainers:
    def test_arrays_are_read_only(self, rng):
        net = random_net(rng, 2, 3)
        with pytest.raises(ValueError):
            net.W[0, 0] = 1.0

    def test_constructor_copies(self):
        W = np.ones((2, 2))
        net = ShallowReluNet(W=W, B=np.zeros(2), Wout=np.ones(2), bias=0.0)
        W[0, 0] = 5.0
        assert net.W[0, 0] == 1.0

    def test_inconsistent_widths(self):
        with pytest.raises(DimensionError):
            ShallowReluNet(W=np.ones((2, 2)), B=np.zeros(3), Wout=np.ones(2), bias=0.0)

    def test_nonfinite_rejected(self):
        with pytest.raises(DomainError):
            ShallowReluNet(W=[[np.inf]], B=[0.0], Wout=[1.0], bias=0.0)

    def test_zero_input_rejected(self):
        with pytest.raises(DomainError):
            Dataset(x=[[1.0, 0.0], [0.0, 0.0]], y=[1.0, 2.0])

    def test_target_count(self):
        with pytest.raises(DimensionError):
            Dataset(x=[[1.0], [2.0]], y=[1.0])


class TestSerialization:
    def test_parameter_count(self):
        assert nw.num_params(3, 5) == 5 * 3 + 2 * 5 + 1

    def test_flatten_order(self):
        net = ShallowReluNet(W=[[1.0, 2.0], [3.0, 4.0]], B=[5.0, 6.0], Wout=[7.0, 8.0], bias=9.0)
        np.testing.assert_array_equal(nw.to_parameter_vector(net), np.arange(1.0, 10.0))

    def test_flatten_round_trip(self, rng):
        net = random_net(rng, 3, 4)
        assert nw.from_parameter_vector(nw.to_parameter_vector(net), 3, 4) == net

    def test_json_round_trip_is_bit_exact(self, rng):
        net = random_net(rng, 3, 5)
        text = serialization.dumps(nw.network_to_dict(net))
        back = nw.network_from_dict(json.loads(text))
        assert back == net
        assert nw.to_parameter_vector(back).tobytes() == nw.to_parameter_vector(net).tobytes()

    def test_json_fields(self, rng):
        doc = nw.network_to_dict(random_net(rng, 2, 3))
        assert set(doc) == {"schema", "d", "width", "W", "B", "Wout", "bias_out"}
        assert len(doc["W"]) == 6

    def test_dataset_round_trip(self, rng):
        data = random_dataset(rng, 2, 4)
        back = nw.dataset_from_dict(json.loads(serialization.dumps(nw.dataset_to_dict(data))))
        assert np.array_equal(back.x, data.x) and np.array_equal(back.y, data.y)

    def test_unknown_major_rejected(self, rng):
        doc = nw.network_to_dict(random_net(rng, 1, 1))
        doc["schema"] = "relugd.network/2.0"
        with pytest.raises(SchemaError):
            nw.network_from_dict(doc)

    def test_newer_minor_accepted(self, rng):
        doc = nw.network_to_dict(random_net(rng, 1, 1))
        doc["schema"] = "relugd.network/1.7"
        nw.network_from_dict(doc)

    def test_wrong_kind_rejected(self, rng):
        with pytest.raises(SchemaError):
            nw.dataset_from_dict(nw.network_to_dict(random_net(rng, 1, 1)))

    @settings(max_examples=30)
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=4, max_size=4))
    def test_any_finite_double_round_trips(self, vals):
        net = ShallowReluNet(W=[[vals[0]]], B=[vals[1]], Wout=[vals[2]], bias=vals[3])
        back = nw.network_from_dict(json.loads(serialization.dumps(nw.network_to_dict(net))))
        assert nw.to_parameter_vector(back).tobytes() == nw.to_parameter_vector(net).tobytes()
