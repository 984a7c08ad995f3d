import itertools
import warnings

import pytest
from hypothesis import given, strategies as st

from aoii_eh.model import (
    Action,
    MdpState,
    ModelParams,
    feasible_actions,
    g,
    g_vector,
    state_from_index,
    state_index,
)


def g_by_enumeration(n, p):
    # probability the symmetric chain is back in its start state after n steps
    total = 0.0
    for flips in itertools.product((0, 1), repeat=n):
        if sum(flips) % 2 == 0:
            w = 1.0
            for f in flips:
                w *= (1 - p) if f else p
            total += w
    return total


def test_g_known_values():
    assert g(0, 0.7) == 1.0
    assert g(1, 0.7) == pytest.approx(0.7, abs=1e-15)
    # 0.7^3 + 3 * 0.7 * 0.3^2
    assert g(3, 0.7) == pytest.approx(0.532, abs=1e-12)
    assert g(3, 0.7) == pytest.approx(g_by_enumeration(3, 0.7), abs=1e-12)


@pytest.mark.parametrize("p", [0.55, 0.7, 0.9, 1.0])
def test_g_matches_enumeration(p):
    for n in range(0, 11):
        assert g(n, p) == pytest.approx(g_by_enumeration(n, p), abs=1e-12)


def test_g_deterministic_source():
    assert all(g(n, 1.0) == 1.0 for n in range(100))


def test_g_underflow_flushes_to_half():
    assert g(10**9, 0.999) == 0.5
    assert g(10**6, 0.75) == 0.5


@given(p=st.floats(0.5001, 0.9999), n=st.integers(0, 500))
def test_g_decreasing_and_bounded(p, n):
    assert 0.5 <= g(n + 1, p) <= g(n, p) <= 1.0


def test_g_vector():
    v = g_vector(5, 0.8)
    assert v.shape == (6,)
    assert v[0] == 1.0 and v[1] == pytest.approx(0.8)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(p=0.5)
    with pytest.raises(ValueError):
        ModelParams(p=1.01)
    with pytest.raises(ValueError):
        ModelParams(mu=-0.1)
    with pytest.raises(ValueError):
        ModelParams(c_s=0, c_t=0)
    with pytest.raises(ValueError):
        ModelParams(n_max=1)
    with pytest.raises(ValueError):
        ModelParams(c_s=1.5)
    with pytest.raises(ValueError):
        ModelParams(cap_e=0)


def test_params_flag_infeasible_act():
    with pytest.warns(UserWarning):
        ModelParams(cap_e=1, c_s=1, c_t=1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ModelParams(cap_e=2, c_s=1, c_t=1)


def test_state_index_conventions():
    params = ModelParams(cap_e=4, n_max=6)
    assert state_index(MdpState(0, 1), params) == 0
    assert state_index(MdpState(0, 6), params) == 5
    assert state_index(MdpState(4, 6), params) == 5 * 6 - 1
    with pytest.raises(ValueError):
        state_index(MdpState(5, 1), params)
    with pytest.raises(ValueError):
        state_index(MdpState(0, 0), params)


@given(cap=st.integers(1, 12), n=st.integers(2, 15))
def test_state_index_bijection(cap, n):
    params = ModelParams(cap_e=max(cap, 2), n_max=n)
    seen = [state_index(s, params) for s in params.states()]
    assert seen == list(range(params.n_states))
    for i in range(params.n_states):
        assert state_index(state_from_index(i, params), params) == i


def test_feasible_actions():
    params = ModelParams()
    assert feasible_actions(MdpState(0, 3), params) == (Action.IDLE,)
    assert feasible_actions(MdpState(1, 3), params) == (Action.IDLE,)
    assert feasible_actions(MdpState(2, 3), params) == (Action.IDLE, Action.ACT)
