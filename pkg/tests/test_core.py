import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scobul.core import NeuronParams, NeuronState, PlasticityParams, integrate_step, resource_to_weight

finite = st.floats(-1e6, 1e6, allow_nan=False)
w_max_st = st.floats(1e-3, 1e3)


@pytest.mark.parametrize("W, w_max, expected", [(-5.0, 1.0, 0.0), (1.0, 1.0, 0.5), (2.0, 2.0, 1.0), (0.0, 3.0, 0.0)])
def test_resource_to_weight_examples(W, w_max, expected):
    assert resource_to_weight(W, 0.0, w_max) == expected


def test_resource_to_weight_approaches_but_never_reaches_w_max():
    vals = [resource_to_weight(10.0 ** e, 0.0, 1.0) for e in range(1, 15)]
    assert all(v < 1.0 for v in vals)
    assert vals[-1] == pytest.approx(1.0, abs=1e-12)
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_resource_to_weight_vectorised_matches_scalar(rng):
    W = rng.normal(0, 3, 50)
    vec = resource_to_weight(W, 0.0, 2.0)
    assert isinstance(resource_to_weight(1.5, 0.0, 2.0), float)
    assert np.array_equal(vec, [resource_to_weight(float(x), 0.0, 2.0) for x in W])


@given(finite, finite, w_max_st)
def test_resource_to_weight_monotone(a, b, w_max):
    lo, hi = min(a, b), max(a, b)
    assert resource_to_weight(lo, 0.0, w_max) <= resource_to_weight(hi, 0.0, w_max)


@given(finite, w_max_st)
def test_resource_to_weight_range(W, w_max):
    w = resource_to_weight(W, 0.0, w_max)
    assert 0.0 <= w < w_max or (W > 0 and math.isclose(w, w_max))
    if W <= 0:
        assert w == 0.0


def test_plasticity_params_validation():
    with pytest.raises(ValueError):
        PlasticityParams(w_max=0.0)
    with pytest.raises(ValueError):
        PlasticityParams(tau_p=0)
    with pytest.raises(ValueError):
        PlasticityParams(d=-0.1)
    assert PlasticityParams(renorm_mode="periodic").renorm_mode.value == "periodic"


def test_leak_is_exponential():
    assert NeuronParams(tau_m=10).leak == pytest.approx(math.exp(-0.1))


class TestIntegrateStep:
    def test_two_inputs_sum_past_threshold(self):
        n = NeuronState(threshold=1.0, leak_factor=0.9, refractory_len=2)
        assert integrate_step(n, 0.4 + 0.7, t=0)
        assert n.V == 0.0 and n.refractory_remaining == 2 and n.silence_counter == 0

    def test_zero_is_a_fixed_point(self):
        n = NeuronState(threshold=1.0, leak_factor=0.5)
        assert not integrate_step(n, 0.0, t=0)
        assert n.V == 0.0

    def test_inhibitory_input(self):
        n = NeuronState(threshold=1.0, leak_factor=0.9, V=0.5)
        assert not integrate_step(n, -0.8, t=0)
        assert n.V == pytest.approx(0.9 * 0.5 - 0.8)

    def test_refractory_blocks_firing(self):
        n = NeuronState(threshold=1.0, leak_factor=1.0, refractory_len=3)
        fired = [integrate_step(n, 5.0, t) for t in range(9)]
        assert fired == [True, False, False, False, True, False, False, False, True]

    def test_silence_counter(self):
        n = NeuronState(threshold=10.0, leak_factor=0.5)
        for t in range(7):
            integrate_step(n, 0.1, t)
        assert n.silence_counter == 7

    @given(st.integers(1, 20), st.floats(0.01, 1.0), st.floats(0.0, 1.0))
    def test_saturation_bound(self, n_inputs, w_max, leak):
        # all inputs at every step, still below threshold in the long run
        theta = n_inputs * w_max / max(1e-9, 1 - leak) + 1.0 if leak < 1 else math.inf
        n = NeuronState(threshold=theta, leak_factor=leak)
        w = resource_to_weight(1e9, 0.0, w_max)
        assert not any(integrate_step(n, n_inputs * w, t) for t in range(200))
