"""Experiment drivers behind the CLI subcommands.

Each ``cmd_*`` writes plot-ready CSV plus a JSON summary into
``config.out_dir`` and returns the summary.  Outputs carry no timestamps
or paths, so reruns with the same config are byte-identical.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from aoii_eh.belief import belief_from_aoi
from aoii_eh.chain_analysis import (
    act_at_level_policy,
    decompose,
    induce_chain,
    is_communicating,
    mixing_weights,
    union_chain,
)
from aoii_eh.config import ConfigError, ExperimentConfig
from aoii_eh.mdp import Objective, PolicyTable, TransmitRule, build_kernel, kernel_rows
from aoii_eh.model import ModelParams, g, state_from_index
from aoii_eh.simulator import METRICS, run, trace, write_trace
from aoii_eh.solver import (
    enumerate_policies_oracle,
    evaluate_policy_exact,
    long_run_occupancy,
    rvi_solve,
)

log = logging.getLogger(__name__)

POLICY_COLUMNS = ("e", "theta", "action", "value")
SWEEP_N_COLUMNS = ("n_max", "gain", "iterations", "abs_diff_to_largest_n")
COMPARE_COLUMNS = (
    "p", "mu",
    "real_time_error_aoii_opt", "real_time_error_aoii_opt_ci95",
    "real_time_error_aoi_opt", "real_time_error_aoi_opt_ci95",
    "gap", "ci_separated",
    "real_time_error_aoii_opt_exact", "real_time_error_aoi_opt_exact",
    "avg_aoii_aoii_opt", "avg_aoii_aoi_opt",
    "action_rate_aoii_opt", "action_rate_aoi_opt",
    "transmit_rate_aoii_opt", "transmit_rate_aoi_opt",
)
KERNEL_COLUMNS = ("e", "theta", "action", "e_next", "theta_next", "prob")


def _out_dir(config: ExperimentConfig) -> Path:
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _params_meta(params: ModelParams) -> dict:
    return {
        "p": params.p, "mu": params.mu, "cap_e": params.cap_e,
        "c_s": params.c_s, "c_t": params.c_t, "n_max": params.n_max,
    }


def _solver_meta(config: ExperimentConfig) -> dict:
    return {
        "epsilon": config.epsilon, "max_iters": config.max_iters,
        "ref_state": list(config.ref_state), "damping": config.damping,
    }


def _solve(params, config, objective=Objective.AOII, transmit=TransmitRule.ON_MISMATCH):
    kernel = build_kernel(params, objective, transmit)
    result = rvi_solve(
        kernel, config.epsilon, config.max_iters, config.ref_state, damping=config.damping
    )
    return kernel, result


def _map(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(items))) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def policy_rows(result, params: ModelParams):
    for i in range(params.n_states):
        s = state_from_index(i, params)
        yield s.e, s.theta, int(result.policy.actions[i]), float(result.values[i])


def cmd_solve(config: ExperimentConfig) -> dict:
    out = _out_dir(config)
    params = config.params()
    kernel, result = _solve(params, config, config.objective)
    _write_csv(out / "policy.csv", POLICY_COLUMNS, policy_rows(result, params))
    _write_csv(
        out / "values.csv", ("e", "theta", "value"),
        ((e, th, v) for e, th, _, v in policy_rows(result, params)),
    )
    summary = {
        "command": "solve",
        "objective": kernel.objective.value,
        "params": _params_meta(params),
        "solver": _solver_meta(config),
        "gain": result.gain,
        "iterations": result.iterations,
        "residual_span": result.residual_span,
        "bellman_residual": result.bellman_residual(kernel),
        "act_states": int(result.policy.actions.sum()),
    }
    if config.tiny_oracle:
        best, _ = enumerate_policies_oracle(kernel, config.ref_state)
        summary["oracle_gain"] = best
        summary["oracle_abs_diff"] = abs(best - result.gain)
    _write_json(out / "summary.json", summary)
    return summary


def cmd_simulate(config: ExperimentConfig, trace_slots: int = 0) -> dict:
    out = _out_dir(config)
    params = config.params()
    kernel, result = _solve(params, config, config.objective)
    metrics = run(
        result.policy, params, config.horizon, config.replications, config.seed,
        config.burn_in, config.batches, workers=config.threads,
    )
    row = metrics.to_dict()
    columns = ["objective", *_params_meta(params), "rvi_gain", *row]
    values = {"objective": kernel.objective.value, **_params_meta(params),
              "rvi_gain": result.gain, **row}
    _write_csv(out / "metrics.csv", columns, [[values[c] for c in columns]])
    summary = {
        "command": "simulate",
        "objective": kernel.objective.value,
        "params": _params_meta(params),
        "solver": _solver_meta(config),
        "simulation": {
            "horizon": config.horizon, "replications": config.replications,
            "seed": config.seed, "burn_in": config.burn_in, "batches": config.batches,
        },
        "rvi_gain": result.gain,
        "metrics": row,
    }
    _write_json(out / "metrics.json", summary)
    if trace_slots:
        write_trace(out / "trace.csv", trace(result.policy, params, trace_slots, config.seed))
    return summary


def _sweep_point(args):
    params, config = args
    _, result = _solve(params, config)
    return result.gain, result.iterations


def cmd_sweep_n(config: ExperimentConfig) -> dict:
    out = _out_dir(config)
    ns = sorted(set(config.sweep_n))
    if not ns:
        raise ConfigError("sweep_n is empty")
    points = _map(_sweep_point, [(config.params(n_max=n), config) for n in ns], config.threads)
    gains = [gain for gain, _ in points]
    ref = gains[-1]
    rows = [(n, gain, it, abs(gain - ref)) for n, (gain, it) in zip(ns, points)]
    _write_csv(out / "sweep_n.csv", SWEEP_N_COLUMNS, rows)

    # smallest N from which every larger N stays within tolerance of the largest
    stable_from = None
    for n, _, _, diff in reversed(rows):
        if diff >= config.stability_tol:
            break
        stable_from = n
    summary = {
        "command": "sweep-n",
        "params": _params_meta(config.params(n_max=ns[-1])),
        "solver": _solver_meta(config),
        "n_values": ns,
        "gains": gains,
        "stability_tol": config.stability_tol,
        "stable_from_n": stable_from,
    }
    _write_json(out / "sweep_n.json", summary)
    return summary


def _compare_point(args):
    params, config = args
    k_aoii, r_aoii = _solve(params, config, Objective.AOII, TransmitRule.ON_MISMATCH)
    k_base, r_base = _solve(params, config, config.baseline_objective, config.baseline_transmit)
    sim = dict(
        horizon=config.horizon, replications=config.replications, seed=config.seed,
        burn_in=config.burn_in, batches=config.batches,
    )
    m_aoii = run(r_aoii.policy, params, transmit=TransmitRule.ON_MISMATCH, **sim)
    m_base = run(r_base.policy, params, transmit=config.baseline_transmit, **sim)

    err = np.array([1.0 - g(s.theta, params.p) for s in params.states()])
    exact_aoii = float(long_run_occupancy(k_aoii, r_aoii.policy, config.ref_state) @ err)
    exact_base = float(long_run_occupancy(k_base, r_base.policy, config.ref_state) @ err)
    hw_a = m_aoii.half_width("real_time_error")
    hw_b = m_base.half_width("real_time_error")
    separated = m_aoii.real_time_error + hw_a < m_base.real_time_error - hw_b
    return (
        params.p, params.mu,
        m_aoii.real_time_error, hw_a, m_base.real_time_error, hw_b,
        m_base.real_time_error - m_aoii.real_time_error, int(separated),
        exact_aoii, exact_base,
        m_aoii.avg_aoii, m_base.avg_aoii,
        m_aoii.action_rate, m_base.action_rate,
        m_aoii.transmit_rate, m_base.transmit_rate,
    )


def cmd_compare(config: ExperimentConfig) -> dict:
    out = _out_dir(config)
    mus = config.sweep_mu or [config.mu]
    ps = list(dict.fromkeys(config.sweep_p))
    if not ps:
        raise ConfigError("sweep_p is empty")
    jobs = [(config.params(p=p, mu=mu), config) for mu in mus for p in ps]
    rows = _map(_compare_point, jobs, config.threads)
    _write_csv(out / "compare.csv", COMPARE_COLUMNS, rows)
    summary = {
        "command": "compare",
        "params": {k: v for k, v in _params_meta(config.params()).items() if k not in ("p", "mu")},
        "p_values": ps,
        "mu_values": mus,
        "baseline": {
            "objective": config.baseline_objective.value,
            "transmit": config.baseline_transmit.value,
        },
        "solver": _solver_meta(config),
        "simulation": {
            "horizon": config.horizon, "replications": config.replications,
            "seed": config.seed, "burn_in": config.burn_in, "batches": config.batches,
        },
        "rows": [dict(zip(COMPARE_COLUMNS, r)) for r in rows],
    }
    _write_json(out / "compare.json", summary)
    return summary


def cmd_analyze_chain(config: ExperimentConfig, policy: str = "union", level: int = 3) -> dict:
    """Class decomposition of the union graph or of a policy-induced chain.

    ``policy`` is one of ``union``, ``mixing`` (fair coin wherever acting
    is feasible), ``optimal`` (RVI policy) or ``act-at-level``.
    """
    out = _out_dir(config)
    params = config.params()
    kernel = build_kernel(params, config.objective)
    if policy == "union":
        dec = decompose(union_chain(kernel))
    elif policy == "mixing":
        dec = decompose(induce_chain(kernel, mixing_weights(kernel)))
    elif policy == "optimal":
        _, result = _solve(params, config, config.objective)
        dec = decompose(induce_chain(kernel, result.policy))
    elif policy == "act-at-level":
        dec = decompose(induce_chain(kernel, act_at_level_policy(params, level)))
    else:
        raise ConfigError(f"unknown chain policy {policy!r}")
    payload = {
        "command": "analyze-chain",
        "policy": policy if policy != "act-at-level" else f"act-at-level:{level}",
        "params": _params_meta(params),
        "communicating": bool(is_communicating(params, kernel)),
        **dec.to_dict(params),
    }
    _write_json(out / "chain.json", payload)
    return payload


def belief_rows(p: float, theta: int):
    params = ModelParams(p=p, n_max=max(theta, 2))
    b = belief_from_aoi(theta, params)
    return [(i, float(v)) for i, v in enumerate(b.mass)]


def cmd_kernel_dump(config: ExperimentConfig) -> Path:
    out = _out_dir(config)
    kernel = build_kernel(config.params(), config.objective)
    path = out / "kernel.csv"
    _write_csv(path, KERNEL_COLUMNS, kernel_rows(kernel))
    return path


def random_policies(params: ModelParams, count: int, seed: int) -> list[PolicyTable]:
    rng = np.random.default_rng(seed)
    return [PolicyTable.random(params, rng) for _ in range(count)]


def exact_vs_simulated(policy, params, config) -> tuple[float, float, float]:
    """``(exact gain, simulated AoII, its standard error)`` for one policy."""
    kernel = build_kernel(params)
    exact = evaluate_policy_exact(kernel, policy, config.ref_state)
    m = run(policy, params, config.horizon, config.replications, config.seed,
            config.burn_in, config.batches)
    return exact, m.avg_aoii, m.stderr["avg_aoii"]

