"""Finite average-cost MDP over (battery level, bounded AoI)."""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from aoii_eh.belief import belief_from_aoi
from aoii_eh.model import Action, MdpState, ModelParams, g, state_from_index, state_index

ROW_TOL = 1e-12


class Objective(str, enum.Enum):
    AOII = "aoii"
    AOI = "aoi"


class TransmitRule(str, enum.Enum):
    """When an act transmits the fresh sample."""

    ON_MISMATCH = "on_mismatch"
    # content-blind transmitter, as an AoI-driven design would use
    ALWAYS = "always"


def expected_aoii_cost(theta: int, params: ModelParams) -> float:
    """Expected AoII given AoI ``theta``."""
    return belief_from_aoi(theta, params).expected_aoii()


def cost_vector(params: ModelParams, objective: Objective) -> np.ndarray:
    objective = Objective(objective)
    if objective is Objective.AOII:
        per_theta = np.array(
            [expected_aoii_cost(theta, params) for theta in range(1, params.n_max + 1)]
        )
    else:
        per_theta = np.arange(1, params.n_max + 1, dtype=float)
    return np.tile(per_theta, params.cap_e + 1)


def _energy_outcomes(
    e: int, a: Action, theta: int, params: ModelParams, transmit: TransmitRule
) -> dict[int, float]:
    mu, cap = params.mu, params.cap_e
    out: dict[int, float] = defaultdict(float)
    if a == Action.IDLE:
        out[min(e + 1, cap)] += mu
        out[e] += 1.0 - mu
        return out
    # no mismatch: sample only
    hit = g(theta, params.p) if transmit is TransmitRule.ON_MISMATCH else 0.0
    for drain, p_drain in ((params.c_s, hit), (params.c_s + params.c_t, 1.0 - hit)):
        out[min(e + 1 - drain, cap)] += mu * p_drain
        out[min(e - drain, cap)] += (1.0 - mu) * p_drain
    return out


@dataclass(frozen=True)
class MdpKernel:
    """Transition matrices for both actions plus the per-state cost.

    ``act_feasible[s]`` is False where the battery cannot cover both
    costs; those rows of ``transitions[Action.ACT]`` are empty.
    """

    params: ModelParams
    objective: Objective
    cost: np.ndarray
    transitions: tuple[sp.csr_matrix, sp.csr_matrix]
    act_feasible: np.ndarray
    transmit: TransmitRule = TransmitRule.ON_MISMATCH

    @property
    def n_states(self) -> int:
        return self.params.n_states

    def feasible(self, s: int, a: Action) -> bool:
        return a == Action.IDLE or bool(self.act_feasible[s])

    def row(self, s: int, a: Action) -> list[tuple[int, float]]:
        """Sparse ``(next_index, prob)`` list for one (state, action) pair."""
        if not self.feasible(s, a):
            raise ValueError(f"action {a.name} infeasible in state {state_from_index(s, self.params)}")
        m = self.transitions[a]
        lo, hi = m.indptr[s], m.indptr[s + 1]
        return list(zip(m.indices[lo:hi].tolist(), m.data[lo:hi].tolist()))

    def with_cost(self, objective: Objective) -> MdpKernel:
        objective = Objective(objective)
        return MdpKernel(
            self.params, objective, cost_vector(self.params, objective),
            self.transitions, self.act_feasible, self.transmit,
        )


def build_kernel(
    params: ModelParams,
    objective: Objective = Objective.AOII,
    transmit: TransmitRule = TransmitRule.ON_MISMATCH,
) -> MdpKernel:
    objective = Objective(objective)
    transmit = TransmitRule(transmit)
    n = params.n_states
    rows = {Action.IDLE: ([], [], []), Action.ACT: ([], [], [])}
    act_feasible = np.zeros(n, dtype=bool)

    for s in params.states():
        e, theta = s
        i = state_index(s, params)
        act_feasible[i] = e >= params.act_cost
        for a in (Action.IDLE, Action.ACT):
            if a == Action.ACT and not act_feasible[i]:
                continue
            theta_next = 1 if a == Action.ACT else min(theta + 1, params.n_max)
            outcomes = _energy_outcomes(e, a, theta, params, transmit)
            r, c, v = rows[a]
            for e_next in sorted(outcomes):
                prob = outcomes[e_next]
                if prob == 0.0:
                    continue
                if e_next < 0:
                    raise AssertionError(f"negative energy from {tuple(s)} under {a.name}")
                r.append(i)
                c.append(state_index(MdpState(e_next, theta_next), params))
                v.append(prob)

    mats = []
    for a in (Action.IDLE, Action.ACT):
        r, c, v = rows[a]
        m = sp.csr_matrix((v, (r, c)), shape=(n, n))
        m.sum_duplicates()
        m.sort_indices()
        mats.append(m)

    kernel = MdpKernel(
        params, objective, cost_vector(params, objective), tuple(mats), act_feasible, transmit
    )
    check_kernel(kernel)
    return kernel


def check_kernel(kernel: MdpKernel, tol: float = ROW_TOL) -> None:
    sums_idle = np.asarray(kernel.transitions[Action.IDLE].sum(axis=1)).ravel()
    sums_act = np.asarray(kernel.transitions[Action.ACT].sum(axis=1)).ravel()
    if np.any(np.abs(sums_idle - 1.0) > tol):
        raise ValueError("idle rows are not stochastic")
    feas = kernel.act_feasible
    if np.any(np.abs(sums_act[feas] - 1.0) > tol) or np.any(sums_act[~feas] != 0.0):
        raise ValueError("act rows are not stochastic on feasible states")
    for m in kernel.transitions:
        if m.nnz and (m.data.min() < 0.0 or m.data.max() > 1.0):
            raise ValueError("transition probabilities outside [0, 1]")


@dataclass(frozen=True)
class PolicyTable:
    """Deterministic policy, one action per flat state index."""

    actions: np.ndarray
    params: ModelParams

    def __post_init__(self) -> None:
        actions = np.asarray(self.actions, dtype=np.int8)
        if actions.shape != (self.params.n_states,):
            raise ValueError(f"policy needs {self.params.n_states} entries, got {actions.shape}")
        if np.any((actions != 0) & (actions != 1)):
            raise ValueError("actions must be 0 (idle) or 1 (act)")
        energy = np.repeat(np.arange(self.params.cap_e + 1), self.params.n_max)
        bad = np.flatnonzero((actions == Action.ACT) & (energy < self.params.act_cost))
        if bad.size:
            raise ValueError(
                f"policy acts where infeasible, e.g. {state_from_index(int(bad[0]), self.params)}"
            )
        actions.setflags(write=False)
        object.__setattr__(self, "actions", actions)

    def __getitem__(self, s: MdpState) -> Action:
        return Action(int(self.actions[state_index(s, self.params)]))

    def grid(self) -> np.ndarray:
        """Actions as an ``(E+1, N)`` array indexed ``[e, theta-1]``."""
        return self.actions.reshape(self.params.cap_e + 1, self.params.n_max)

    @classmethod
    def all_idle(cls, params: ModelParams) -> PolicyTable:
        return cls(np.zeros(params.n_states, dtype=np.int8), params)

    @classmethod
    def greedy(cls, params: ModelParams) -> PolicyTable:
        """Act wherever feasible."""
        energy = np.repeat(np.arange(params.cap_e + 1), params.n_max)
        return cls((energy >= params.act_cost).astype(np.int8), params)

    @classmethod
    def from_function(cls, params: ModelParams, rule) -> PolicyTable:
        acts = [
            int(rule(s)) if s.e >= params.act_cost else 0 for s in params.states()
        ]
        return cls(np.array(acts, dtype=np.int8), params)

    @classmethod
    def random(cls, params: ModelParams, rng: np.random.Generator) -> PolicyTable:
        energy = np.repeat(np.arange(params.cap_e + 1), params.n_max)
        coin = rng.integers(0, 2, size=params.n_states)
        return cls((coin * (energy >= params.act_cost)).astype(np.int8), params)


def kernel_rows(kernel: MdpKernel):
    """Yield ``(e, theta, action, e', theta', prob)`` for every listed transition."""
    params = kernel.params
    for i in range(kernel.n_states):
        s = state_from_index(i, params)
        for a in (Action.IDLE, Action.ACT):
            if not kernel.feasible(i, a):
                continue
            for j, prob in kernel.row(i, a):
                t = state_from_index(j, params)
                yield s.e, s.theta, a.name.lower(), t.e, t.theta, prob
