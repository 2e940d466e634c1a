"""Experiment drivers: link reliability, covert-throughput scaling, and warden detection.

Every random draw comes from a stream keyed by (seed, n, j, purpose), so a
result does not depend on worker scheduling and identical configs reproduce
identical output bytes.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.stats import binomtest

from .adversary import EXACT_BUDGET, covertness_kl, errors_at, lrt_statistics
from .channels import BroadcastChannel, sample_output
from .codec import (
    Codebooks,
    covert_scores,
    decide_covert,
    decode_common,
    generate_codebooks,
    threshold_gamma_j,
)
from .config import ExperimentConfig
from .covert import (
    InfeasibleSchedule,
    codebook_size,
    effective_rows,
    exact_covert_kl,
    schedule_at,
)
from .infotheory import (
    ChannelAnalysis,
    analyze_channel,
    covert_coefficient,
    optimize_gamma,
    resolvability_coefficient,
)

log = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = 1

_CODEBOOK, _TRIALS, _KL, _LRT, _SCALING = 1, 2, 3, 4, 5

ADDENDS = (
    "pe1_common_h0",  # P[W2_hat != j | W1 = 0]
    "pe1_common_h1",  # P[W2_hat != j | W1 != 0]
    "pe1_covert_h0",  # P[W1_hat != 0 | W1 = 0, W2_hat = j]
    "pe1_covert_h1",  # P[W1_hat != W1 | W1 != 0, W2_hat = j]
    "pe2_h0",  # Willie: P[W2_tilde != j | W1 = 0]
    "pe2_h1",  # Willie: P[W2_tilde != j | W1 != 0]
)


class AllInfeasible(RuntimeError):
    """The covert rate interval is empty at every blocklength of the grid."""


def rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


def worker_count(tasks: int) -> int:
    cap = os.environ.get("COVERTCAST_THREADS")
    n = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n, tasks))


def _map(fn, items):
    items = list(items)
    if worker_count(len(items)) == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=worker_count(len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- link simulation


@dataclass
class TrialRecord:
    n: int
    trial: int
    j: int
    w1_true: int
    w1_hat: int
    w2_hat_bob: int
    w2_hat_willie: int
    ambiguous: bool
    bob_common_err: bool
    willie_common_err: bool
    covert_attributed: bool
    bob_covert_err: bool

    def to_dict(self) -> dict:
        return asdict(self)


def simulate_link(cb: Codebooks, ch: BroadcastChannel, w1: np.ndarray, w2: np.ndarray, delta: float,
                  rng: np.random.Generator) -> dict:
    """Transmit message pairs (w1[t], w2[t]) and run both receivers.

    Returns arrays ``w2_bob``, ``w2_willie``, ``w1_hat``, ``ambiguous``.
    Bob's covert decoder always searches the sub-codebook of his own common
    estimate; attribution to error events is left to :func:`trial_flags`.
    """
    w1 = np.asarray(w1, dtype=np.int64)
    w2 = np.asarray(w2, dtype=np.int64)
    x = np.where(
        (w1 == 0)[:, None],
        cb.innocent[w2 - 1],
        cb.covert[w2 - 1, np.maximum(w1 - 1, 0)],
    ).astype(np.uint8)
    y = sample_output(ch.y_rows, x, rng)
    z = sample_output(ch.z_rows, x, rng)
    params = cb.params
    w2_bob = np.atleast_1d(decode_common(cb, y, effective_rows(ch.y_rows, params)))
    w2_willie = np.atleast_1d(decode_common(cb, z, effective_rows(ch.z_rows, params)))
    w1_hat = np.zeros_like(w1)
    amb = np.zeros(w1.shape, dtype=bool)
    for j in np.unique(w2_bob):
        sel = w2_bob == j
        g = threshold_gamma_j(cb.innocent[j - 1], params, ch.y_rows, delta)
        scores = covert_scores(cb, int(j), y[sel], params, ch.y_rows)
        w1_hat[sel], amb[sel] = decide_covert(np.atleast_2d(scores), g)
    return {"w2_bob": w2_bob, "w2_willie": w2_willie, "w1_hat": w1_hat, "ambiguous": amb}


def trial_flags(w1, w2, out) -> dict:
    attributed = out["w2_bob"] == w2
    covert_err = attributed & ((out["w1_hat"] != w1) | out["ambiguous"])
    return {
        "bob_common_err": out["w2_bob"] != w2,
        "willie_common_err": out["w2_willie"] != w2,
        "covert_attributed": attributed,
        "bob_covert_err": covert_err,
    }


def allocate_trials(trials: int, M1: int, M2: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """First half W1 = 0, second half W1 uniform on 1..M1; W2 cycles over 1..M2 within each half."""
    h0 = (trials + 1) // 2
    h1 = trials - h0
    w1 = np.concatenate([np.zeros(h0, dtype=np.int64), rng.integers(1, M1 + 1, size=h1)])
    w2 = np.concatenate([np.arange(h0) % M2, np.arange(h1) % M2]).astype(np.int64) + 1
    return w1, w2


def _rate(flags: np.ndarray, cond: np.ndarray, w2: np.ndarray, M2: int) -> dict:
    """Average over j of the conditional error rate, plus pooled counts for the CI."""
    rates, variances = [], []
    for j in range(1, M2 + 1):
        m = cond & (w2 == j)
        N = int(m.sum())
        if N == 0:
            continue
        p = float(flags[m].mean())
        rates.append(p)
        variances.append(p * (1 - p) / N)
    k, N = int(flags[cond].sum()), int(cond.sum())
    if not rates:
        return {"est": float("nan"), "se": float("nan"), "k": k, "N": N, "ci_low": float("nan"), "ci_high": float("nan")}
    ci = binomtest(k, N).proportion_ci(method="wilson") if N else None
    return {
        "est": float(np.mean(rates)),
        "se": math.sqrt(sum(variances)) / len(rates),
        "k": k,
        "N": N,
        "ci_low": float(ci.low),
        "ci_high": float(ci.high),
    }


def link_estimates(w1, w2, out, M2: int) -> dict:
    f = trial_flags(w1, w2, out)
    h0, h1 = w1 == 0, w1 != 0
    est = {
        "pe1_common_h0": _rate(f["bob_common_err"], h0, w2, M2),
        "pe1_common_h1": _rate(f["bob_common_err"], h1, w2, M2),
        "pe1_covert_h0": _rate(f["bob_covert_err"], h0 & f["covert_attributed"], w2, M2),
        "pe1_covert_h1": _rate(f["bob_covert_err"], h1 & f["covert_attributed"], w2, M2),
        "pe2_h0": _rate(f["willie_common_err"], h0, w2, M2),
        "pe2_h1": _rate(f["willie_common_err"], h1, w2, M2),
    }
    return est


# ---------------------------------------------------------------- shared setup


@dataclass(frozen=True)
class Setup:
    ch: BroadcastChannel
    analysis: ChannelAnalysis


def setup(config: ExperimentConfig) -> Setup:
    ch = config.broadcast_channel()
    return Setup(ch, analyze_channel(ch))


def sizes_for(config: ExperimentConfig, log_m1: float, log_m2: float) -> tuple[int, int]:
    M1 = config.M1_override or codebook_size(log_m1, config.M1_cap)
    M2 = config.M2_override or codebook_size(log_m2, config.M2_cap)
    return int(M1), int(M2)


def codebooks_at(config: ExperimentConfig, su: Setup, n: int):
    """Scheduled rates and a codebook realization at blocklength ``n``."""
    rates = schedule_at(n, config.schedule, su.analysis)
    M1, M2 = sizes_for(config, rates.log_m1, rates.log_m2)
    seed = int(rng_for(config.seed, n, 0, _CODEBOOK).integers(2**63))
    cb = generate_codebooks(M1, M2, n, su.analysis.lambda_star, config.schedule.epsilon_typ, rates.params, seed)
    return rates, cb


def _base_row(config: ExperimentConfig, n: int) -> dict:
    return {"schema_version": CSV_SCHEMA_VERSION, "config_hash": config.config_hash(), "n": n}


def _infeasible_row(config, n, exc) -> dict:
    row = _base_row(config, n)
    row.update({"status": "infeasible", "message": str(exc)})
    return row


# ---------------------------------------------------------------- reliability


def run_reliability(config: ExperimentConfig) -> tuple[list[dict], list[TrialRecord]]:
    """Per-n estimates of every error addend at Bob and Willie, with binomial intervals."""
    su = setup(config)

    def one(n):
        try:
            rates, cb = codebooks_at(config, su, n)
        except InfeasibleSchedule as exc:
            log.warning("n=%d: %s", n, exc)
            return _infeasible_row(config, n, exc), []
        rng = rng_for(config.seed, n, 0, _TRIALS)
        w1, w2 = allocate_trials(config.trials, cb.M1, cb.M2, rng)
        out = simulate_link(cb, su.ch, w1, w2, config.schedule.delta, rng)
        est = link_estimates(w1, w2, out, cb.M2)
        row = _base_row(config, n)
        row.update({
            "status": "ok", "alpha": cb.params.alpha, "beta": cb.params.beta,
            "M1": cb.M1, "M2": cb.M2, "log_m1": rates.log_m1, "log_m2": rates.log_m2,
            "trials": config.trials,
        })
        for name in ADDENDS:
            e = est[name]
            row[name] = e["est"]
            row[name + "_se"] = e["se"]
            row[name + "_ci_low"] = e["ci_low"]
            row[name + "_ci_high"] = e["ci_high"]
        row["pe1"] = sum(est[a]["est"] for a in ADDENDS[:4])
        row["pe2"] = est["pe2_h0"]["est"] + est["pe2_h1"]["est"]
        f = trial_flags(w1, w2, out)
        recs = [
            TrialRecord(
                n=n, trial=t, j=int(w2[t]), w1_true=int(w1[t]), w1_hat=int(out["w1_hat"][t]),
                w2_hat_bob=int(out["w2_bob"][t]), w2_hat_willie=int(out["w2_willie"][t]),
                ambiguous=bool(out["ambiguous"][t]),
                bob_common_err=bool(f["bob_common_err"][t]),
                willie_common_err=bool(f["willie_common_err"][t]),
                covert_attributed=bool(f["covert_attributed"][t]),
                bob_covert_err=bool(f["bob_covert_err"][t]),
            )
            for t in range(len(w1))
        ]
        return row, recs

    results = _map(one, config.n_grid)
    _check_any_feasible([r for r, _ in results])
    rows = [r for r, _ in results]
    records = [rec for _, recs in results for rec in recs]
    return rows, records


def _check_any_feasible(rows: list[dict]) -> None:
    if rows and all(r.get("status") == "infeasible" for r in rows):
        raise AllInfeasible(rows[0]["message"])


# ---------------------------------------------------------------- scaling


def run_scaling(config: ExperimentConfig) -> list[dict]:
    """log M1 / sqrt(n KL) along the grid, for the square-root schedule and a negative control.

    The KL column is the exact covert-process divergence at weight fraction
    lambda*. The band columns are the limits bracketing the ratio:
    the resolvability coefficient below and the reliability coefficient above,
    both at the schedule's flip ratio.
    """
    su = setup(config)
    a = su.analysis
    coeffs = optimize_gamma(a)
    g = config.schedule.gamma
    band_low = resolvability_coefficient(a, g)
    band_high = covert_coefficient(a, g)
    tasks = []
    for t_rate in config.t_rates:
        for label, expo in (("sqrt", config.schedule.exponent), ("neg_control", config.negative_control_exponent)):
            for n in config.n_grid:
                tasks.append((t_rate, label, expo, n))

    def one(task):
        t_rate, label, expo, n = task
        sched = replace(config.schedule, t_rate=t_rate, exponent=expo)
        row = _base_row(config, n)
        row.update({"schedule": label, "exponent": expo, "t_rate": t_rate})
        try:
            r = schedule_at(n, sched, a)
        except InfeasibleSchedule as exc:
            row.update({"status": "infeasible", "message": str(exc)})
            return row
        kl_val = exact_covert_kl(a.lambda_star, n, r.params, su.ch.z_rows)
        ratio = r.log_m1 / math.sqrt(n * kl_val)
        row.update({
            "status": "ok", "alpha": r.params.alpha, "beta": r.params.beta,
            "log_m1": r.log_m1, "floor": r.floor, "ceiling": r.ceiling,
            "kl": kl_val, "ratio": ratio,
            "gamma_star": coeffs.gamma_star, "achievable_ub": coeffs.achievable_ub,
            "converse_floor": coeffs.converse_floor, "band_low": band_low, "band_high": band_high,
            "in_band": bool(band_low <= ratio <= band_high),
            "codebook_kl": float("nan"), "codebook_kl_se": float("nan"),
        })
        if label == "sqrt" and n <= config.scaling_mc_max_n and r.log_m1 <= math.log(4096):
            M1 = codebook_size(r.log_m1)
            seed = int(rng_for(config.seed, n, 0, _SCALING).integers(2**63))
            cb = generate_codebooks(M1, 1, n, a.lambda_star, config.schedule.epsilon_typ, r.params, seed)
            rep = covertness_kl(cb, 1, su.ch.z_rows, "monte_carlo", config.kl_samples, seed + 1)
            row["codebook_kl"] = rep.kl_estimate
            row["codebook_kl_se"] = rep.kl_stderr
        return row

    rows = _map(one, tasks)
    _check_any_feasible(rows)
    return rows


# ---------------------------------------------------------------- detection


def run_detection(config: ExperimentConfig) -> list[dict]:
    """Divergence of the induced law and LRT errors for every (n, j, threshold).

    KL is enumerated exactly when ``covertness_exact`` is among the modes and
    the output space fits the enumeration budget; otherwise it is estimated by
    Monte Carlo under the induced law.
    """
    su = setup(config)
    k = len(su.ch.q0)
    prepared = []
    rows_out = []
    for n in config.n_grid:
        try:
            rates, cb = codebooks_at(config, su, n)
        except InfeasibleSchedule as exc:
            rows_out.append(_infeasible_row(config, n, exc))
            continue
        prepared.append((n, cb))
    if not prepared:
        raise AllInfeasible(rows_out[0]["message"])

    def one(task):
        n, cb, j = task
        exact = "covertness_exact" in config.modes and k**n <= EXACT_BUDGET
        if exact:
            rep = covertness_kl(cb, j, su.ch.z_rows, "exact")
        else:
            kseed = int(rng_for(config.seed, n, j, _KL).integers(2**63))
            rep = covertness_kl(cb, j, su.ch.z_rows, "monte_carlo", config.kl_samples, kseed)
        lseed = int(rng_for(config.seed, n, j, _LRT).integers(2**63))
        s0, s1 = lrt_statistics(cb, j, su.ch.z_rows, config.trials, lseed)
        process_kl = exact_covert_kl(cb.weight_frac(j), n, cb.params, su.ch.z_rows)
        out = []
        for thr in config.thresholds:
            a_hat, b_hat, se = errors_at(s0, s1, thr)
            rep.threshold, rep.alpha_hat, rep.beta_hat = thr, a_hat, b_hat
            rep.alpha_plus_beta, rep.ab_stderr, rep.trials = a_hat + b_hat, se, config.trials
            row = _base_row(config, n)
            d = rep.to_dict()
            d.pop("n")
            row.update(d)
            row.update({
                "status": "ok", "alpha": cb.params.alpha, "beta": cb.params.beta, "M2": cb.M2,
                "weight_frac": cb.weight_frac(j), "covert_process_kl": process_kl,
                "bound_sigma": rep.bound_sigma(), "bound_ok": rep.satisfies_bound(3.0),
            })
            out.append(row)
        return out

    tasks = [(n, cb, j) for n, cb in prepared for j in range(1, cb.M2 + 1)]
    rows = [r for group in _map(one, tasks) for r in group]
    by_n: dict[int, float] = {}
    for r in rows:
        by_n[r["n"]] = max(by_n.get(r["n"], -math.inf), r["kl_estimate"])
    for r in rows:
        r["is_max_kl_j"] = r["kl_estimate"] == by_n[r["n"]]
    rows = rows_out + rows
    rows.sort(key=lambda r: (r["n"], r.get("j", 0), r.get("threshold", 0.0)))
    return rows
