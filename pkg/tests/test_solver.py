import numpy as np
import pytest

from aoii_eh.mdp import Objective, PolicyTable, build_kernel, expected_aoii_cost
from aoii_eh.model import Action, MdpState, ModelParams
from aoii_eh.solver import (
    SolverDidNotConverge,
    enumerate_policies_oracle,
    evaluate_policy_exact,
    expected_absorption_time,
    long_run_occupancy,
    rvi_solve,
)

TINY = ModelParams(p=0.7, mu=0.5, cap_e=2, c_s=1, c_t=1, n_max=3)


@pytest.fixture(scope="module")
def default_solution(default_kernel):
    return rvi_solve(default_kernel)


def test_tiny_matches_enumeration():
    k = build_kernel(TINY)
    res = rvi_solve(k)
    best, policy = enumerate_policies_oracle(k)
    assert abs(res.gain - best) < 1e-6
    assert evaluate_policy_exact(k, res.policy) == pytest.approx(best, abs=1e-9)


def test_no_harvest_gain_is_saturated_cost():
    params = ModelParams(mu=0.0, cap_e=6, n_max=10)
    res = rvi_solve(build_kernel(params))
    assert res.gain == pytest.approx(expected_aoii_cost(10, params), abs=1e-8)


def test_deterministic_source():
    params = ModelParams(p=1.0, cap_e=5, n_max=6)
    k = build_kernel(params)
    res = rvi_solve(k)
    assert res.gain == 0.0
    assert not res.policy.actions.any()
    best, _ = enumerate_policies_oracle(build_kernel(TINY.replace(p=1.0)))
    assert best == 0.0


def test_only_idle_when_act_never_feasible():
    with pytest.warns(UserWarning):
        params = ModelParams(cap_e=1, n_max=2, c_s=1, c_t=1)
    k = build_kernel(params)
    best, policy = enumerate_policies_oracle(k)
    assert not policy.actions.any()
    assert best == pytest.approx(expected_aoii_cost(2, params), abs=1e-12)


def test_enumeration_limit(default_kernel):
    with pytest.raises(ValueError):
        enumerate_policies_oracle(default_kernel)


def test_all_idle_evaluates_to_saturated_cost(default_kernel, default_params):
    policy = PolicyTable.all_idle(default_params)
    assert evaluate_policy_exact(default_kernel, policy) == pytest.approx(
        expected_aoii_cost(20, default_params), abs=1e-12
    )
    p1 = default_params.replace(p=1.0)
    assert evaluate_policy_exact(build_kernel(p1), PolicyTable.all_idle(p1)) == 0.0


def test_rvi_self_consistency(default_kernel, default_solution):
    res = default_solution
    assert res.residual_span <= 1e-9
    assert res.bellman_residual(default_kernel) <= 1e-8
    assert evaluate_policy_exact(default_kernel, res.policy) == pytest.approx(res.gain, abs=1e-6)
    assert res.values[res.ref_index] == res.gain


def test_reference_state_invariance(default_kernel, default_solution):
    other = rvi_solve(default_kernel, ref_state=MdpState(7, 13))
    assert abs(other.gain - default_solution.gain) <= 10 * 1e-9
    assert np.array_equal(other.policy.actions, default_solution.policy.actions)


def test_start_state_invariance(default_kernel, default_solution):
    gains = [
        evaluate_policy_exact(default_kernel, default_solution.policy, s)
        for s in (MdpState(0, 1), MdpState(10, 20), MdpState(4, 9))
    ]
    assert max(gains) - min(gains) < 1e-9


def test_damping_keeps_gain_and_policy(default_kernel, default_solution):
    damped = rvi_solve(default_kernel, damping=0.3)
    assert damped.gain == pytest.approx(default_solution.gain, abs=1e-7)
    assert np.array_equal(damped.policy.actions, default_solution.policy.actions)
    assert damped.bellman_residual(default_kernel) <= 1e-7


def test_non_convergence_reported(default_kernel):
    with pytest.raises(SolverDidNotConverge) as info:
        rvi_solve(default_kernel, max_iters=5)
    assert info.value.iterations == 5
    assert info.value.residual > 1e-9


def test_ties_prefer_idle():
    params = ModelParams(p=1.0, cap_e=4, n_max=4)
    res = rvi_solve(build_kernel(params))
    assert not res.policy.actions.any()


def test_policy_is_feasible(default_solution, default_params):
    grid = default_solution.policy.grid()
    assert not grid[: default_params.act_cost].any()


def test_aoi_objective_solves(default_params):
    res = rvi_solve(build_kernel(default_params, Objective.AOI))
    assert res.gain > 1.0


def test_occupancy_mixes_absorbing_classes():
    # act-at-3 from (4, 1): energy can only grow, so it ends at (E, N)
    params = ModelParams(cap_e=5, n_max=4)
    k = build_kernel(params)
    policy = PolicyTable.from_function(params, lambda s: s.e == 3)
    occ = long_run_occupancy(k, policy, MdpState(4, 1))
    assert occ[-1] == pytest.approx(1.0, abs=1e-12)
    low = long_run_occupancy(k, policy, MdpState(0, 1))
    assert low[-1] == 0.0 and low.sum() == pytest.approx(1.0, abs=1e-12)
    assert expected_absorption_time(k, policy, MdpState(1, 1)) == 0.0
    assert expected_absorption_time(k, policy, MdpState(0, 1)) > 0.0
    # from (4, 1) the mean wait for a harvest is 1/mu, then theta climbs to N
    assert expected_absorption_time(k, policy, MdpState(4, 1)) > 2.0


def test_act_mask_respected_in_values(default_kernel, default_solution):
    from aoii_eh.solver import _q_values

    q_idle, q_act = _q_values(default_kernel, default_solution.values)
    assert np.all(np.isinf(q_act[~default_kernel.act_feasible]))
    chosen = np.where(default_solution.policy.actions == Action.ACT, q_act, q_idle)
    assert np.all(chosen <= np.minimum(q_idle, q_act) + 1e-9)
