"""Average-cost solution of the finite MDP.

``rvi_solve`` runs synchronous relative value iteration.  The exact
evaluator and the enumeration oracle are independent of it: they build
the chain a fixed policy induces, split it into recurrent classes and
solve for stationary distributions directly.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from aoii_eh.chain_analysis import decompose, induce_chain
from aoii_eh.mdp import MdpKernel, PolicyTable
from aoii_eh.model import Action, MdpState, state_index

log = logging.getLogger(__name__)

DEFAULT_REF = MdpState(0, 1)
ENUMERATION_LIMIT = 12


class SolverDidNotConverge(RuntimeError):
    def __init__(self, iterations: int, residual: float, epsilon: float):
        super().__init__(
            f"relative value iteration stopped after {iterations} iterations "
            f"with residual span {residual:.3e} > epsilon {epsilon:.1e}"
        )
        self.iterations = iterations
        self.residual = residual
        self.epsilon = epsilon


@dataclass(frozen=True)
class SolveResult:
    gain: float
    values: np.ndarray
    policy: PolicyTable
    iterations: int
    residual_span: float
    ref_index: int

    def bellman_residual(self, kernel: MdpKernel) -> float:
        """``max |C + min_a P V - V - gain|`` at the returned values."""
        q_idle, q_act = _q_values(kernel, self.values)
        return float(np.max(np.abs(np.minimum(q_idle, q_act) - self.values - self.gain)))


def _span(x: np.ndarray) -> float:
    return float(x.max() - x.min())


def _q_values(kernel: MdpKernel, v: np.ndarray, damping: float = 0.0):
    idle, act = kernel.transitions
    pv_idle = idle @ v
    pv_act = act @ v
    if damping:
        pv_idle = damping * v + (1.0 - damping) * pv_idle
        pv_act = damping * v + (1.0 - damping) * pv_act
    q_idle = kernel.cost + pv_idle
    q_act = np.where(kernel.act_feasible, kernel.cost + pv_act, np.inf)
    return q_idle, q_act


def _greedy(q_idle: np.ndarray, q_act: np.ndarray, tie_tol: float) -> np.ndarray:
    # idle wins ties
    return (q_act < q_idle - tie_tol).astype(np.int8)


def rvi_solve(
    kernel: MdpKernel,
    epsilon: float = 1e-9,
    max_iters: int = 1_000_000,
    ref_state: MdpState = DEFAULT_REF,
    damping: float = 0.0,
    tie_tol: float | None = None,
) -> SolveResult:
    """Relative value iteration, ``V <- min_a (C + P_a V) - V(ref)``.

    Stops once the span of ``T V - V`` drops below ``epsilon``; the gain
    is then ``V(ref)``.  ``damping`` in ``[0, 1)`` replaces every
    transition matrix by ``damping * I + (1 - damping) * P``, which leaves
    the gain unchanged and breaks periodicity.  Near-ties within
    ``tie_tol`` (default ``epsilon``) resolve to idle.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not (0.0 <= damping < 1.0):
        raise ValueError("damping must lie in [0, 1)")
    if tie_tol is None:
        tie_tol = epsilon
    params = kernel.params
    ref = state_index(ref_state, params)

    v = np.zeros(kernel.n_states)
    residual = np.inf
    it = 0
    while it < max_iters:
        it += 1
        q_idle, q_act = _q_values(kernel, v, damping)
        tv = np.minimum(q_idle, q_act)
        residual = _span(tv - v)
        v = tv - v[ref]
        if residual < epsilon:
            break
    else:
        raise SolverDidNotConverge(it, residual, epsilon)

    gain = float(v[ref])
    # damped relative values are the undamped ones scaled by 1 / (1 - damping)
    values = (1.0 - damping) * (v - gain) + gain if damping else v
    q_idle, q_act = _q_values(kernel, values)
    policy = PolicyTable(_greedy(q_idle, q_act, tie_tol), params)
    log.debug("RVI converged in %d iterations, gain %.12g", it, gain)
    return SolveResult(gain, values, policy, it, float(residual), ref)


def _stationary(p: np.ndarray) -> np.ndarray:
    n = p.shape[0]
    a = p.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"stationary solve is singular on a recurrent class of {n} states"
        ) from exc
    return pi


def long_run_occupancy(kernel: MdpKernel, policy: PolicyTable, start: MdpState) -> np.ndarray:
    """Limiting average state occupancy of ``policy`` started at ``start``.

    A mixture of the stationary distributions of the recurrent classes,
    weighted by the probability of being absorbed in each from ``start``.
    """
    chain = induce_chain(kernel, policy)
    dec = decompose(chain)
    p = chain.matrix.toarray()
    n = kernel.n_states
    s0 = state_index(start, kernel.params)

    classes = dec.recurrent_classes
    transient = dec.transient_states
    absorb = np.zeros(len(classes))
    if s0 in transient:
        q = p[np.ix_(transient, transient)]
        r = np.column_stack([p[np.ix_(transient, cls)].sum(axis=1) for cls in classes])
        absorb[:] = np.linalg.solve(np.eye(len(transient)) - q, r)[transient.index(s0)]
    else:
        absorb[[s0 in cls for cls in classes]] = 1.0

    occ = np.zeros(n)
    for k, cls in enumerate(classes):
        if absorb[k] <= 0.0:
            continue
        occ[list(cls)] += absorb[k] * _stationary(p[np.ix_(cls, cls)])
    return occ


def expected_absorption_time(
    kernel: MdpKernel, policy: PolicyTable, start: MdpState = DEFAULT_REF
) -> float:
    """Mean number of slots before the induced chain enters a recurrent class."""
    chain = induce_chain(kernel, policy)
    transient = decompose(chain).transient_states
    s0 = state_index(start, kernel.params)
    if s0 not in transient:
        return 0.0
    q = chain.matrix.toarray()[np.ix_(transient, transient)]
    steps = np.linalg.solve(np.eye(len(transient)) - q, np.ones(len(transient)))
    return float(steps[transient.index(s0)])


def evaluate_policy_exact(
    kernel: MdpKernel, policy: PolicyTable, start: MdpState = DEFAULT_REF
) -> float:
    """Long-run average cost of a fixed deterministic policy from ``start``."""
    return float(long_run_occupancy(kernel, policy, start) @ kernel.cost)


def enumerate_policies_oracle(
    kernel: MdpKernel, start: MdpState = DEFAULT_REF
) -> tuple[float, PolicyTable]:
    """Best deterministic policy by evaluating every one of them exactly."""
    if kernel.n_states > ENUMERATION_LIMIT:
        raise ValueError(
            f"{kernel.n_states} states exceeds the enumeration limit of {ENUMERATION_LIMIT}"
        )
    free = np.flatnonzero(kernel.act_feasible)
    best_gain, best_policy = np.inf, None
    for choice in itertools.product((Action.IDLE, Action.ACT), repeat=len(free)):
        actions = np.zeros(kernel.n_states, dtype=np.int8)
        actions[free] = choice
        policy = PolicyTable(actions, kernel.params)
        gain = evaluate_policy_exact(kernel, policy, start)
        if gain < best_gain:
            best_gain, best_policy = gain, policy
    return float(best_gain), best_policy
