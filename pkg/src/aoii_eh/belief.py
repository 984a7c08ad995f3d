"""Belief over the AoII given the controller's information.

Because the observation is the battery level alone, the belief after a
synchronizing sample depends only on the AoI ``theta`` and has a closed
form in terms of :func:`aoii_eh.model.g`.  :func:`path_enumeration_belief`
recomputes the same vector by brute force over source sample paths and is
kept independent of the closed form on purpose.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from aoii_eh.model import Action, ModelParams, g

NORM_TOL = 1e-9


@dataclass(frozen=True)
class BeliefVector:
    """Mass ``b_0..b_theta`` over AoII values; entries past ``theta`` are zero."""

    mass: np.ndarray
    theta: int

    def __post_init__(self) -> None:
        mass = np.asarray(self.mass, dtype=float)
        if mass.ndim != 1 or len(mass) != self.theta + 1:
            raise ValueError(f"belief for theta={self.theta} needs {self.theta + 1} entries")
        if np.any(mass < -1e-15) or np.any(mass > 1 + 1e-15):
            raise ValueError("belief entries must lie in [0, 1]")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.total - 1.0) <= tol

    def expected_aoii(self) -> float:
        return float(np.dot(np.arange(self.theta + 1), self.mass))

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros(max(length, len(self.mass)))
        out[: len(self.mass)] = self.mass
        return out


def synced_belief() -> BeliefVector:
    """Belief when the estimate is known to be correct (AoII = 0)."""
    return BeliefVector(np.array([1.0]), 0)


def belief_update(b: BeliefVector, a: Action, params: ModelParams) -> BeliefVector:
    if not b.is_normalized():
        raise ValueError(f"belief is not normalized (sum={b.total!r})")
    p = params.p
    if a == Action.ACT:
        return BeliefVector(np.array([p, 1.0 - p]), 1)

    b0 = b.mass[0]
    out = np.empty(b.theta + 2)
    out[0] = b0 * p + (1.0 - b0) * (1.0 - p)
    out[1] = (1.0 - p) * b0
    out[2:] = p * b.mass[1:]
    return BeliefVector(out / out.sum(), b.theta + 1)


def belief_from_aoi(theta: int, params: ModelParams) -> BeliefVector:
    if not (1 <= theta <= params.n_max):
        raise ValueError(f"theta must lie in 1..{params.n_max}, got {theta}")
    return _closed_form(theta, params.p)


def _closed_form(theta: int, p: float) -> BeliefVector:
    i = np.arange(1, theta + 1)
    mass = np.empty(theta + 1)
    mass[0] = g(theta, p)
    mass[1:] = [g(theta - k, p) for k in i]
    mass[1:] *= (1.0 - p) * p ** (i - 1)
    return BeliefVector(mass, theta)


def truncation_gap(n1: int, n2: int, params: ModelParams) -> float:
    """How far the AoI-``n1`` belief is from the AoI-``n2`` belief.

    Sup-norm distance over indices ``0..n1`` plus the mass the ``n2``
    belief places beyond ``n1``.  Uses the closed form directly, so ``n2``
    may exceed ``params.n_max``.
    """
    if n1 < 1 or n2 < n1:
        raise ValueError(f"need 1 <= n1 <= n2, got n1={n1}, n2={n2}")
    b1 = _closed_form(n1, params.p).mass
    b2 = _closed_form(n2, params.p).mass
    head = float(np.max(np.abs(b1 - b2[: n1 + 1])))
    tail = float(b2[n1 + 1 :].sum())
    return head + tail


def path_enumeration_belief(theta: int, p: float) -> np.ndarray:
    """AoII distribution ``theta`` slots after a sample, by path enumeration.

    The monitor holds the sampled value from slot 0.  Every flip pattern
    of the source over slots ``1..theta`` is enumerated and weighted; the
    AoII at slot ``theta`` is ``theta`` minus the last slot at which the
    source agreed with the held value.
    """
    out = np.zeros(theta + 1)
    for flips in itertools.product((0, 1), repeat=theta):
        weight = 1.0
        state = 0
        last_match = 0
        for t, f in enumerate(flips, start=1):
            weight *= (1.0 - p) if f else p
            state ^= f
            if state == 0:
                last_match = t
        out[theta - last_match] += weight
    return out
