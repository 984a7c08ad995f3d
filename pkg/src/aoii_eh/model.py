"""System parameters, state indexing and action feasibility.

States are pairs ``(e, theta)`` with battery level ``e`` in ``0..E`` and
bounded AoI ``theta`` in ``1..N``.  The flat index is row-major with the
battery level as the outer coordinate::

    index = e * N + (theta - 1)
"""

from __future__ import annotations

import enum
import math
import numbers
import warnings
from dataclasses import dataclass
from typing import Iterator

import numpy as np

# (2p-1)^n below this is flushed to zero
_FLUSH = 1e-300


class Action(enum.IntEnum):
    IDLE = 0
    # sample, and transmit only when the sample disagrees with the monitor's estimate
    ACT = 1


def _require_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class ModelParams:
    """Scalar parameters of the source, battery and truncated AoI.

    ``p`` is the self-transition probability of the binary symmetric
    source, ``mu`` the per-slot probability of harvesting one energy unit,
    ``cap_e`` the battery capacity, ``c_s``/``c_t`` the sampling and
    transmission costs, and ``n_max`` the AoI truncation bound.
    """

    p: float = 0.7
    mu: float = 0.5
    cap_e: int = 10
    c_s: int = 1
    c_t: int = 1
    n_max: int = 20

    def __post_init__(self) -> None:
        for name in ("cap_e", "c_s", "c_t", "n_max"):
            object.__setattr__(self, name, _require_int(name, getattr(self, name)))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "mu", float(self.mu))

        if not (0.5 < self.p <= 1.0):
            raise ValueError(f"p must satisfy 0.5 < p <= 1, got {self.p}")
        if not (0.0 <= self.mu <= 1.0):
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")
        if self.cap_e < 1:
            raise ValueError(f"cap_e must be >= 1, got {self.cap_e}")
        if self.c_s < 0 or self.c_t < 0:
            raise ValueError("energy costs must be nonnegative")
        if self.c_s + self.c_t < 1:
            raise ValueError("c_s + c_t must be >= 1")
        if self.n_max < 2:
            raise ValueError(f"n_max must be >= 2, got {self.n_max}")
        if self.act_cost > self.cap_e:
            warnings.warn(
                f"c_s + c_t = {self.act_cost} exceeds cap_e = {self.cap_e}; "
                "the act action is never feasible",
                stacklevel=3,
            )

    @property
    def act_cost(self) -> int:
        """Energy needed before acting (worst case: sample plus transmit)."""
        return self.c_s + self.c_t

    @property
    def n_states(self) -> int:
        return (self.cap_e + 1) * self.n_max

    def states(self) -> Iterator[MdpState]:
        """All states in flat-index order."""
        for e in range(self.cap_e + 1):
            for theta in range(1, self.n_max + 1):
                yield MdpState(e, theta)

    def replace(self, **changes) -> ModelParams:
        fields = dict(
            p=self.p, mu=self.mu, cap_e=self.cap_e, c_s=self.c_s, c_t=self.c_t, n_max=self.n_max
        )
        fields.update(changes)
        return ModelParams(**fields)


class MdpState(tuple):
    """``(e, theta)`` pair; a plain tuple so it unpacks and hashes naturally."""

    __slots__ = ()

    def __new__(cls, e: int, theta: int) -> MdpState:
        return super().__new__(cls, (int(e), int(theta)))

    @property
    def e(self) -> int:
        return self[0]

    @property
    def theta(self) -> int:
        return self[1]

    def __repr__(self) -> str:
        return f"MdpState(e={self[0]}, theta={self[1]})"


def check_state(s: MdpState, params: ModelParams) -> None:
    e, theta = s
    if not (0 <= e <= params.cap_e) or not (1 <= theta <= params.n_max):
        raise ValueError(f"state {tuple(s)} outside 0..{params.cap_e} x 1..{params.n_max}")


def state_index(s: MdpState, params: ModelParams) -> int:
    check_state(s, params)
    return s[0] * params.n_max + (s[1] - 1)


def state_from_index(index: int, params: ModelParams) -> MdpState:
    if not (0 <= index < params.n_states):
        raise ValueError(f"index {index} outside 0..{params.n_states - 1}")
    e, r = divmod(int(index), params.n_max)
    return MdpState(e, r + 1)


def feasible_actions(s: MdpState, params: ModelParams) -> tuple[Action, ...]:
    check_state(s, params)
    if s[0] >= params.act_cost:
        return (Action.IDLE, Action.ACT)
    return (Action.IDLE,)


def g(n: int, p: float) -> float:
    """Probability that the estimate is still correct ``n`` slots after a sync.

    ``0.5 * (1 + (2p - 1)**n)``, with ``g(0) == 1``.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n == 0:
        return 1.0
    r = 2.0 * p - 1.0
    if r == 1.0:
        return 1.0
    if r <= 0.0:
        raise ValueError(f"p must satisfy 0.5 < p <= 1, got {p}")
    log_rn = n * math.log(r)
    rn = math.exp(log_rn) if log_rn > math.log(_FLUSH) else 0.0
    return 0.5 * (1.0 + rn)


def g_vector(n_max: int, p: float) -> np.ndarray:
    """``g(0), ..., g(n_max)`` as an array."""
    return np.array([g(n, p) for n in range(n_max + 1)])
