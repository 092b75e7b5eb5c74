import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from simcellfree.sim_stack import (
    StaleSurfaceError, SurfaceState, TWO_PI, canonical_phase, compose_G, equivalent_channel,
    equivalent_channels, quantize_angles, quantize_phases,
)

from oracles import crandn, dense_oracle, random_props


def test_single_layer_identity_is_bit_exact():
    props = random_props(np.random.default_rng(0), T=1)
    G = compose_G(props, SurfaceState.zeros([1], 4), 0)
    assert np.array_equal(G, props.transfer[0][0])


def test_dead_layer_annihilates():
    rng = np.random.default_rng(1)
    props = random_props(rng, T=3)
    state = SurfaceState.random([3], 4, rng)
    state.upsilon[0][1] = 0.0
    assert not np.any(compose_G(props, state, 0))


def test_compose_matches_dense_product():
    rng = np.random.default_rng(7)
    props = random_props(rng, M=2, N=4, T=2)
    state = SurfaceState([rng.uniform(0, TWO_PI, (2, 4))], [rng.uniform(0, 1, (2, 4))])
    G = compose_G(props, state, 0)
    ref = dense_oracle(props.transfer[0], state.phases[0], state.upsilon[0])
    np.testing.assert_allclose(G, ref, rtol=1e-12)


def triple_loop(G, h, rho):
    M, N = len(G), len(G[0])
    return np.array([math.sqrt(rho) * sum(G[m][n] * h[n] for n in range(N)) for m in range(M)])


def test_equivalent_channel_oracle_and_scaling():
    rng = np.random.default_rng(3)
    G, h = crandn(rng, 3, 5), crandn(rng, 5)
    q = equivalent_channel(G, h, 0.3)
    np.testing.assert_allclose(q, triple_loop(G.tolist(), h.tolist(), 0.3), rtol=1e-12)
    assert not np.any(equivalent_channel(G, h, 0.0))
    assert np.linalg.norm(equivalent_channel(G, h, 1.2)) == pytest.approx(2 * np.linalg.norm(q))


def test_equivalent_channels_stack_every_ue():
    rng = np.random.default_rng(4)
    props = random_props(rng, T=3, K=4)
    state = SurfaceState.random([3], 4, rng)
    Q = equivalent_channels(props, state, 0)
    G = dense_oracle(props.transfer[0], state.phases[0], state.upsilon[0])
    for k in range(4):
        np.testing.assert_allclose(Q[:, k], equivalent_channel(G, props.h[0, k], props.large_scale[k, 0]),
                                   rtol=1e-12)


def test_stale_cache_is_detected():
    rng = np.random.default_rng(5)
    props = random_props(rng)
    state = SurfaceState.random([2], 4, rng)
    with pytest.raises(StaleSurfaceError):
        state.G(0)
    G = state.compose(props, 0)
    assert state.G(0) is G
    state.set_layer(0, 1, np.zeros(4))
    with pytest.raises(StaleSurfaceError):
        state.G(0)
    np.testing.assert_allclose(state.compose(props, 0), compose_G(props, state, 0))


def test_layer_responses_are_unitary():
    state = SurfaceState.random([3], 6, np.random.default_rng(6))
    for d in state.xi(0):
        D = np.diag(d)
        np.testing.assert_allclose(D @ D.conj().T, np.eye(6), atol=1e-15)


def test_quantization_examples():
    assert quantize_angles(0.1, 1) == 0.0
    assert quantize_angles(3 * np.pi / 4, 2) == pytest.approx(np.pi / 2)
    assert quantize_angles(TWO_PI - 1e-3, 3) == 0.0
    assert quantize_angles(-0.1, 1) == 0.0


@settings(max_examples=60)
@given(arrays(float, 16, elements=st.floats(-20, 20)), st.integers(1, 6))
def test_quantization_idempotent_and_nearest(theta, bits):
    q = quantize_angles(theta, bits)
    np.testing.assert_array_equal(quantize_angles(q, bits), q)
    step = TWO_PI / 2 ** bits
    dist = np.abs(np.angle(np.exp(1j * (q - theta))))
    assert np.all(dist <= step / 2 + 1e-9)
    assert np.all((q >= 0) & (q < TWO_PI))


@given(arrays(float, 8, elements=st.floats(-1e3, 1e3)))
def test_canonical_phase_range(theta):
    c = canonical_phase(theta)
    assert np.all((c >= 0) & (c < TWO_PI))
    np.testing.assert_allclose(np.exp(1j * c), np.exp(1j * theta), atol=1e-9)


def test_quantize_phases_leaves_original():
    state = SurfaceState.random([2, 1], 4, np.random.default_rng(8))
    before = [p.copy() for p in state.phases]
    q = quantize_phases(state, 2)
    for p, b in zip(state.phases, before):
        np.testing.assert_array_equal(p, b)
    assert all(np.all(np.isin(np.round(p / (np.pi / 2)), [0, 1, 2, 3])) for p in q.phases)


def test_state_csv_round_trip(tmp_path):
    state = SurfaceState([np.array([[0.0, 1.0], [2.0, 3.0]]), np.array([[4.0, 5.0]])],
                         [0.9, np.array([[1.0, 0.5]])])
    state.to_csv(tmp_path / "state.csv")
    back = SurfaceState.from_csv(tmp_path / "state.csv")
    for a, b in zip(back.phases, state.phases):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(back.upsilon, state.upsilon):
        np.testing.assert_array_equal(a, b)


def test_bad_coefficients_rejected():
    with pytest.raises(ValueError):
        SurfaceState([np.zeros((1, 2))], [1.5])
