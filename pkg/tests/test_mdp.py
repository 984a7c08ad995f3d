import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aoii_eh.mdp import (
    Objective,
    PolicyTable,
    TransmitRule,
    build_kernel,
    expected_aoii_cost,
    kernel_rows,
)
from aoii_eh.model import Action, MdpState, ModelParams, state_index


def next_energy(kernel, s, a):
    params = kernel.params
    out = {}
    for j, prob in kernel.row(state_index(s, params), a):
        e, r = divmod(j, params.n_max)
        out[(e, r + 1)] = out.get((e, r + 1), 0.0) + prob
    return out


def test_idle_saturates_at_capacity():
    params = ModelParams()
    k = build_kernel(params)
    assert next_energy(k, MdpState(10, 4), Action.IDLE) == {(10, 5): pytest.approx(1.0, abs=0)}


def test_idle_row():
    params = ModelParams(mu=0.3)
    k = build_kernel(params)
    row = next_energy(k, MdpState(4, 20), Action.IDLE)
    assert row == {(5, 20): pytest.approx(0.3), (4, 20): pytest.approx(0.7)}


def test_act_row_hand_expanded():
    params = ModelParams(p=0.7, mu=0.5, c_s=1, c_t=1)
    k = build_kernel(params)
    row = next_energy(k, MdpState(2, 1), Action.ACT)
    # mu*g, (1-mu)*g + mu*(1-g), (1-mu)*(1-g) with g(1) = 0.7
    assert row.keys() == {(2, 1), (1, 1), (0, 1)}
    assert row[(2, 1)] == pytest.approx(0.35, abs=1e-15)
    assert row[(1, 1)] == pytest.approx(0.50, abs=1e-15)
    assert row[(0, 1)] == pytest.approx(0.15, abs=1e-15)
    assert sum(row.values()) == pytest.approx(1.0, abs=1e-15)


def test_act_only_where_feasible():
    params = ModelParams()
    k = build_kernel(params)
    for s in params.states():
        i = state_index(s, params)
        assert k.act_feasible[i] == (s.e >= 2)
        if not k.act_feasible[i]:
            with pytest.raises(ValueError):
                k.row(i, Action.ACT)


def test_clamp_with_free_sampling():
    params = ModelParams(c_s=0, c_t=1, cap_e=3, mu=0.5)
    k = build_kernel(params)
    row = next_energy(k, MdpState(3, 2), Action.ACT)
    assert max(e for e, _ in row) == 3
    assert sum(row.values()) == pytest.approx(1.0, abs=1e-12)


def test_cost_values():
    params = ModelParams(p=0.7)
    assert expected_aoii_cost(1, params) == pytest.approx(0.3, abs=1e-15)
    assert expected_aoii_cost(1, params.replace(p=1.0)) == 0.0
    k_aoi = build_kernel(params, Objective.AOI)
    assert k_aoi.cost[state_index(MdpState(3, 7), params)] == 7.0


def test_cost_monte_carlo_oracle():
    # E[AoII | 4 slots since the sample], simulated on the hidden source
    p, theta, n = 0.7, 4, 1_000_000
    rng = np.random.default_rng(12345)
    flips = rng.random((n, theta)) < 1 - p
    x = np.cumsum(flips, axis=1) % 2
    delta = np.zeros(n)
    for t in range(theta):
        delta = np.where(x[:, t] == 0, 0, delta + 1)
    mean, se = delta.mean(), delta.std(ddof=1) / np.sqrt(n)
    exact = expected_aoii_cost(theta, ModelParams(p=p))
    assert abs(mean - exact) < 3 * se


@pytest.mark.parametrize("p", [0.55, 0.7, 0.95])
def test_cost_monotone(p):
    params = ModelParams(p=p, n_max=60)
    c = [expected_aoii_cost(t, params) for t in range(1, 61)]
    assert all(b >= a for a, b in zip(c, c[1:]))
    assert all(v > 0 for v in c)


@settings(max_examples=40, deadline=None)
@given(
    p=st.floats(0.51, 1.0),
    mu=st.floats(0.0, 1.0),
    cap=st.integers(2, 8),
    cs=st.integers(0, 2),
    ct=st.integers(1, 2),
    n=st.integers(2, 8),
    transmit=st.sampled_from(list(TransmitRule)),
)
def test_rows_stochastic(p, mu, cap, cs, ct, n, transmit):
    params = ModelParams(p=p, mu=mu, cap_e=max(cap, cs + ct), c_s=cs, c_t=ct, n_max=n)
    k = build_kernel(params, transmit=transmit)
    for a, m in zip((Action.IDLE, Action.ACT), k.transitions):
        sums = np.asarray(m.sum(axis=1)).ravel()
        rows = np.ones(k.n_states, bool) if a == Action.IDLE else k.act_feasible
        assert np.all(np.abs(sums[rows] - 1) <= 1e-12)
        assert np.all(sums[~rows] == 0)
        assert m.nnz == 0 or (m.data.min() > 0 and m.data.max() <= 1)


def test_idle_theta_marginal_independent_of_energy():
    params = ModelParams(cap_e=6, n_max=5)
    k = build_kernel(params)
    idle = k.transitions[Action.IDLE].toarray()
    for theta in range(1, 6):
        marginals = []
        for e in range(params.cap_e + 1):
            row = idle[state_index(MdpState(e, theta), params)].reshape(params.cap_e + 1, -1)
            marginals.append(row.sum(axis=0))
        assert np.allclose(marginals, marginals[0], atol=1e-15)


def test_objectives_share_transitions():
    params = ModelParams()
    a, b = build_kernel(params, Objective.AOII), build_kernel(params, Objective.AOI)
    for ma, mb in zip(a.transitions, b.transitions):
        assert (ma != mb).nnz == 0
    assert not np.allclose(a.cost, b.cost)


def test_always_transmit_drains_full_cost():
    params = ModelParams(p=0.9)
    k = build_kernel(params, transmit=TransmitRule.ALWAYS)
    row = next_energy(k, MdpState(5, 3), Action.ACT)
    assert row == {(4, 1): pytest.approx(0.5), (3, 1): pytest.approx(0.5)}


def test_policy_table_rejects_infeasible():
    params = ModelParams()
    acts = np.zeros(params.n_states, dtype=np.int8)
    acts[state_index(MdpState(1, 5), params)] = 1
    with pytest.raises(ValueError):
        PolicyTable(acts, params)
    with pytest.raises(ValueError):
        PolicyTable(np.zeros(3), params)
    greedy = PolicyTable.greedy(params)
    assert greedy[MdpState(2, 1)] == Action.ACT and greedy[MdpState(1, 1)] == Action.IDLE


def test_kernel_rows_listing():
    params = ModelParams(cap_e=2, n_max=3)
    rows = list(kernel_rows(build_kernel(params)))
    assert rows[0][:3] == (0, 1, "idle")
    total = {}
    for e, th, a, *_, prob in rows:
        total[(e, th, a)] = total.get((e, th, a), 0.0) + prob
    assert all(v == pytest.approx(1.0, abs=1e-12) for v in total.values())
    assert sum(1 for key in total if key[2] == "act") == 3
