"""Monte Carlo ground truth: hidden source, battery, monitor and controller.

One slot, as implemented by :func:`step` and by the fast loop in
:func:`run` (both consume the same two uniforms per slot, in order):

1. the controller reads ``(e, theta)`` and applies the policy;
2. on act, the source value is sampled; it is transmitted if it differs
   from the monitor's estimate (or always, for a content-blind
   transmitter); the battery is charged ``c_s`` (+ ``c_t``) and
   ``theta`` resets to 1, otherwise ``theta`` grows, clamped at ``N``;
3. the source flips with probability ``1 - p`` (first uniform);
4. a transmitted sample is delivered, so the new estimate is the value
   sampled one slot earlier;
5. one energy unit arrives with probability ``mu`` (second uniform) and
   ``e <- min(e + u - drain, E)``;
6. the true AoII of the new slot is scored: zero if the estimate matches,
   1 right after an act (the estimate equals the previous slot's value),
   otherwise the previous AoII plus one.

Time averages are taken over the post-transition values of every slot
after the burn-in.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from aoii_eh.mdp import PolicyTable, TransmitRule
from aoii_eh.model import Action, ModelParams

log = logging.getLogger(__name__)

METRICS = ("avg_aoii", "avg_aoi", "real_time_error", "action_rate", "transmit_rate", "mean_energy")
Z95 = 1.959963984540054
_CHUNK = 1 << 16


class EnergyCausalityViolation(AssertionError):
    pass


@dataclass
class SimulatorState:
    x: int = 0
    x_hat: int = 0
    e: int = 0
    theta: int = 1
    delta: int = 0
    t: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng, repr=False)
    # unclamped age of the freshest sample (ground truth AoI)
    aoi: int = 1
    action: int = 0
    transmitted: bool = False


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication,)))


def initial_state(seed: int, replication: int = 0) -> SimulatorState:
    """Synced monitor, empty battery, ``theta = 1``."""
    return SimulatorState(rng=replication_rng(seed, replication))


def step(
    state: SimulatorState,
    policy: PolicyTable,
    params: ModelParams,
    transmit: TransmitRule = TransmitRule.ON_MISMATCH,
) -> SimulatorState:
    a = policy.actions[state.e * params.n_max + state.theta - 1]
    drain = 0
    x_hat_next = state.x_hat
    transmitted = False
    if a == Action.ACT:
        transmitted = transmit is TransmitRule.ALWAYS or state.x != state.x_hat
        drain = params.c_s + (params.c_t if transmitted else 0)
        if drain > state.e:
            raise EnergyCausalityViolation(
                f"slot {state.t}: drain {drain} exceeds battery {state.e}"
            )
        x_hat_next = state.x
        theta = 1
        aoi = 1
    else:
        theta = min(state.theta + 1, params.n_max)
        aoi = state.aoi + 1

    flip = state.rng.random() < 1.0 - params.p
    harvest = state.rng.random() < params.mu
    x = state.x ^ int(flip)
    e = min(state.e + int(harvest) - drain, params.cap_e)
    if x == x_hat_next:
        delta = 0
    elif a == Action.ACT:
        delta = 1
    else:
        delta = state.delta + 1
    return replace(
        state, x=x, x_hat=x_hat_next, e=e, theta=theta, delta=delta, t=state.t + 1,
        aoi=aoi, action=int(a), transmitted=transmitted,
    )


@dataclass(frozen=True)
class SimMetrics:
    """Time averages with batch-means standard errors.

    ``stderr[name]`` is the standard error of metric ``name``; the 95%
    half-width is ``Z95 * stderr[name]``.
    """

    avg_aoii: float
    avg_aoi: float
    real_time_error: float
    action_rate: float
    transmit_rate: float
    mean_energy: float
    stderr: dict[str, float]
    slots: int
    replications: int
    batches: int

    def half_width(self, name: str) -> float:
        return Z95 * self.stderr[name]

    def to_dict(self) -> dict:
        out = {}
        for name in METRICS:
            out[name] = getattr(self, name)
            out[f"{name}_se"] = self.stderr[name]
            out[f"{name}_ci95"] = self.half_width(name)
        out.update(slots=self.slots, replications=self.replications, batches=self.batches)
        return out


def _batch_layout(horizon: int, burn_in: float, batches: int) -> tuple[int, int]:
    if horizon < 1 or batches < 2:
        raise ValueError("need horizon >= 1 and at least 2 batches")
    burn = int(burn_in * horizon)
    batch_len = (horizon - burn) // batches
    if batch_len < 1:
        raise ValueError("horizon too short for the requested batches")
    # leftover slots join the burn-in
    return horizon - batch_len * batches, batch_len


def _simulate_replication(args) -> np.ndarray:
    """Batch sums, shape ``(batches, len(METRICS))``, for one replication."""
    actions, params, transmit, horizon, burn, batch_len, batches, seed, rep = args
    rng = replication_rng(seed, rep)
    acts = actions.tolist()
    n_max, cap, cs, ct = params.n_max, params.cap_e, params.c_s, params.c_t
    flip_prob, mu = 1.0 - params.p, params.mu
    always = transmit is TransmitRule.ALWAYS

    x = x_hat = 0
    e, theta, delta, aoi = 0, 1, 0, 1
    sums = np.zeros((batches, len(METRICS)))
    s_aoii = s_aoi = s_err = s_act = s_tx = s_e = 0
    t = 0
    batch = -1
    next_boundary = burn
    while t < horizon:
        n = min(_CHUNK, horizon - t)
        u = rng.random(2 * n)
        flips = (u[0::2] < flip_prob).tolist()
        harvests = (u[1::2] < mu).tolist()
        for k in range(n):
            if t == next_boundary:
                if batch >= 0:
                    sums[batch] = (s_aoii, s_aoi, s_err, s_act, s_tx, s_e)
                batch += 1
                next_boundary += batch_len
                s_aoii = s_aoi = s_err = s_act = s_tx = s_e = 0
            if acts[e * n_max + theta - 1]:
                tx = always or x != x_hat
                drain = cs + ct if tx else cs
                if drain > e:
                    raise EnergyCausalityViolation(f"slot {t}: drain {drain} exceeds battery {e}")
                x_hat = x
                theta = aoi = 1
                x ^= flips[k]
                delta = 0 if x == x_hat else 1
                s_act += 1
                s_tx += tx
            else:
                drain = 0
                if theta < n_max:
                    theta += 1
                aoi += 1
                x ^= flips[k]
                delta = 0 if x == x_hat else delta + 1
            e += harvests[k] - drain
            if e > cap:
                e = cap
            s_aoii += delta
            s_aoi += aoi
            s_err += x != x_hat
            s_e += e
            t += 1
    sums[batch] = (s_aoii, s_aoi, s_err, s_act, s_tx, s_e)
    return sums


def run(
    policy: PolicyTable,
    params: ModelParams,
    horizon: int = 1_000_000,
    replications: int = 5,
    seed: int = 0,
    burn_in: float = 0.01,
    batches: int = 20,
    transmit: TransmitRule = TransmitRule.ON_MISMATCH,
    workers: int = 1,
) -> SimMetrics:
    """Simulate ``replications`` independent runs and pool their batch means.

    Deterministic in ``(policy, params, horizon, replications, seed,
    burn_in, batches, transmit)``; ``workers`` only changes wall time.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if policy.params != params:
        raise ValueError("policy was built for different parameters")
    transmit = TransmitRule(transmit)
    burn, batch_len = _batch_layout(horizon, burn_in, batches)
    jobs = [
        (policy.actions, params, transmit, horizon, burn, batch_len, batches, seed, r)
        for r in range(replications)
    ]
    if workers > 1 and replications > 1:
        with ProcessPoolExecutor(max_workers=min(workers, replications)) as pool:
            per_rep = list(pool.map(_simulate_replication, jobs))
    else:
        per_rep = [_simulate_replication(job) for job in jobs]

    means = np.concatenate(per_rep) / batch_len
    nb = means.shape[0]
    centre = means.mean(axis=0)
    se = means.std(axis=0, ddof=1) / np.sqrt(nb)
    values = dict(zip(METRICS, centre.tolist()))
    return SimMetrics(
        **values,
        stderr=dict(zip(METRICS, se.tolist())),
        slots=batch_len * batches,
        replications=replications,
        batches=batches,
    )


def trace(
    policy: PolicyTable,
    params: ModelParams,
    horizon: int,
    seed: int = 0,
    replication: int = 0,
    transmit: TransmitRule = TransmitRule.ON_MISMATCH,
):
    """Yield the state after each slot, driven by :func:`step`."""
    state = initial_state(seed, replication)
    for _ in range(horizon):
        state = step(state, policy, params, transmit)
        yield state


TRACE_COLUMNS = ("t", "x", "x_hat", "e", "theta", "delta", "action")


def write_trace(path, states) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for s in states:
            w.writerow((s.t, s.x, s.x_hat, s.e, s.theta, s.delta, s.action))

