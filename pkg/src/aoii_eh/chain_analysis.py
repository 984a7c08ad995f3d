"""Recurrent-class structure of chains induced on the MDP.

Two checks live here: whether the MDP is communicating (every state
reaches every other under some policy), and the class decomposition of a
chain induced by a particular deterministic or randomized policy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from aoii_eh.mdp import MdpKernel, PolicyTable, build_kernel
from aoii_eh.model import Action, ModelParams, state_from_index


@dataclass(frozen=True)
class InducedChain:
    """Transition structure over flat state indices.

    ``qualitative`` chains (the union over feasible actions) only carry
    edge existence; their stored weights are not row-stochastic.
    """

    matrix: sp.csr_matrix
    qualitative: bool = False

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def successors(self, s: int) -> np.ndarray:
        m = self.matrix
        lo, hi = m.indptr[s], m.indptr[s + 1]
        return m.indices[lo:hi][m.data[lo:hi] > 0.0]


@dataclass(frozen=True)
class ClassDecomposition:
    components: tuple[tuple[int, ...], ...]
    recurrent: tuple[bool, ...]
    membership: np.ndarray

    @property
    def recurrent_classes(self) -> list[tuple[int, ...]]:
        return [c for c, r in zip(self.components, self.recurrent) if r]

    @property
    def transient_states(self) -> list[int]:
        return sorted(s for c, r in zip(self.components, self.recurrent) if not r for s in c)

    def to_dict(self, params: ModelParams | None = None) -> dict:
        def label(s):
            return list(state_from_index(s, params)) if params is not None else s

        return {
            "n_components": len(self.components),
            "n_recurrent": sum(self.recurrent),
            "classes": [
                {
                    "recurrent": r,
                    "size": len(c),
                    "states": [label(s) for s in c],
                }
                for c, r in zip(self.components, self.recurrent)
            ],
        }


def induce_chain(kernel: MdpKernel, policy: PolicyTable | np.ndarray) -> InducedChain:
    """Chain under a deterministic policy or an ``(n_states, 2)`` weight array."""
    idle, act = kernel.transitions
    if isinstance(policy, PolicyTable):
        weights = np.zeros((kernel.n_states, 2))
        weights[np.arange(kernel.n_states), policy.actions] = 1.0
    else:
        weights = np.asarray(policy, dtype=float)
        if weights.shape != (kernel.n_states, 2):
            raise ValueError(f"weights must have shape ({kernel.n_states}, 2)")
        if np.any(weights < 0) or np.any(np.abs(weights.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("weights must be a probability distribution per state")
    if np.any(weights[~kernel.act_feasible, Action.ACT] > 0.0):
        raise ValueError("policy puts weight on an infeasible act action")
    m = sp.diags(weights[:, Action.IDLE]) @ idle + sp.diags(weights[:, Action.ACT]) @ act
    m = sp.csr_matrix(m)
    m.eliminate_zeros()
    m.sort_indices()
    return InducedChain(m)


def union_chain(kernel: MdpKernel) -> InducedChain:
    idle, act = kernel.transitions
    m = sp.csr_matrix(idle + act)
    m.eliminate_zeros()
    m.sort_indices()
    return InducedChain(m, qualitative=True)


def strongly_connected_components(successors: list[np.ndarray]) -> list[list[int]]:
    """Tarjan's algorithm with an explicit stack."""
    n = len(successors)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0

    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, k = work[-1]
            succ = successors[v]
            if k < len(succ):
                work[-1] = (v, k + 1)
                w = int(succ[k])
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


def decompose(chain: InducedChain) -> ClassDecomposition:
    succ = [chain.successors(s) for s in range(chain.n_states)]
    comps = sorted(strongly_connected_components(succ), key=lambda c: c[0])
    membership = np.empty(chain.n_states, dtype=int)
    for k, comp in enumerate(comps):
        membership[comp] = k
    recurrent = []
    for k, comp in enumerate(comps):
        closed = all(np.all(membership[succ[s]] == k) for s in comp)
        recurrent.append(closed)
    return ClassDecomposition(tuple(tuple(c) for c in comps), tuple(recurrent), membership)


class CommunicationCheck(NamedTuple):
    communicating: bool
    decomposition: ClassDecomposition

    def __bool__(self) -> bool:
        return self.communicating


def is_communicating(params: ModelParams, kernel: MdpKernel | None = None) -> CommunicationCheck:
    """Single strongly connected component over the union of feasible actions.

    This is the same as every pair of states being mutually accessible
    under the policy that mixes 50/50 wherever acting is feasible, since
    that policy's support is exactly the union graph.
    """
    if kernel is None:
        kernel = build_kernel(params)
    dec = decompose(union_chain(kernel))
    return CommunicationCheck(len(dec.components) == 1, dec)


def mixing_weights(kernel: MdpKernel) -> np.ndarray:
    """Idle w.p. 1 where acting is infeasible, otherwise a fair coin."""
    w = np.zeros((kernel.n_states, 2))
    w[:, Action.IDLE] = np.where(kernel.act_feasible, 0.5, 1.0)
    w[:, Action.ACT] = np.where(kernel.act_feasible, 0.5, 0.0)
    return w


def act_at_level_policy(params: ModelParams, level: int) -> PolicyTable:
    """Act exactly when the battery level equals ``level`` (if feasible)."""
    return PolicyTable.from_function(params, lambda s: s.e == level)
