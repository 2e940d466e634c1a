"""Willie's view: divergence of the codebook-induced output law and the LRT detector.

For a fixed common message j, Willie observes either the innocent product law
Qbar_j = W^n(.|x0j) or the uniform mixture Qhat_j over the covert
sub-codebook. Willie knows the codebook, so the likelihood ratio between
those two laws is the optimal test statistic.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .channels import ImpossibleObservation, Rows, loglik_matrix, sample_output
from .codec import Codebooks

EXACT_BUDGET = 2**24
_CHUNK = 1 << 14
_CELLS = 1 << 22  # symbols per sampled batch
# statistics within this of the threshold are ties (exact ties are common on
# symmetric channels and only differ by rounding); ties go to H0
STAT_TOL = 1e-9


class BudgetExceeded(ValueError):
    pass


@dataclass
class DetectionReport:
    n: int
    j: int
    M1: int
    kl_estimate: float = float("nan")
    kl_stderr: float = 0.0
    kl_mode: str = "exact"
    threshold: float = 0.0
    alpha_hat: float = float("nan")
    beta_hat: float = float("nan")
    alpha_plus_beta: float = float("nan")
    ab_stderr: float = 0.0
    trials: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def pinsker_floor(self) -> float:
        if not math.isfinite(self.kl_estimate):
            return float("nan")
        return min(1.0, max(0.0, 1.0 - math.sqrt(max(self.kl_estimate, 0.0))))

    def bound_sigma(self) -> float:
        """Std. error of (alpha_hat + beta_hat) - (1 - sqrt(KL)) from both MC sources."""
        s_sqrt = 0.0
        if self.kl_stderr > 0 and self.kl_estimate > 0:
            s_sqrt = self.kl_stderr / (2.0 * math.sqrt(self.kl_estimate))
        return math.hypot(self.ab_stderr, s_sqrt)

    def satisfies_bound(self, n_sigma: float = 3.0) -> bool:
        return self.alpha_plus_beta >= 1.0 - math.sqrt(max(self.kl_estimate, 0.0)) - n_sigma * self.bound_sigma()

    def to_dict(self) -> dict:
        d = asdict(self)
        extra = d.pop("extra")
        d["pinsker_floor"] = self.pinsker_floor
        d.update(extra)
        return d


def induced_logprob(cb: Codebooks, j: int, z, q_rows: Rows) -> np.ndarray | float:
    """log Qhat_j(z): log-sum-exp over the M1 covert codewords of sub-codebook j."""
    z = np.asarray(z)
    ll = loglik_matrix(q_rows, cb.covert[j - 1], np.atleast_2d(z))
    out = logsumexp(ll, axis=1) - math.log(cb.M1)
    if np.any(np.isneginf(out)):
        raise ImpossibleObservation("observation impossible under every covert codeword")
    return float(out[0]) if z.ndim == 1 else out


def innocent_logprob(cb: Codebooks, j: int, z, q_rows: Rows) -> np.ndarray | float:
    """log Qbar_j(z) = log W^n(z | x0j)."""
    z = np.asarray(z)
    out = loglik_matrix(q_rows, cb.innocent[j - 1][None, :], np.atleast_2d(z))[:, 0]
    return float(out[0]) if z.ndim == 1 else out


def log_ratio(cb: Codebooks, j: int, z, q_rows: Rows) -> np.ndarray:
    """LRT statistic log Qhat_j(z) - log Qbar_j(z) for a batch (T, n)."""
    z = np.atleast_2d(np.asarray(z))
    return induced_logprob(cb, j, z, q_rows) - innocent_logprob(cb, j, z, q_rows)


def enumerate_outputs(n: int, k: int, chunk: int = _CHUNK):
    """Yield every sequence in {0..k-1}^n in lexicographic order, in (<= chunk, n) blocks."""
    total = k**n
    if total > EXACT_BUDGET:
        raise BudgetExceeded(f"{k}^{n} = {total} outputs exceeds the enumeration budget {EXACT_BUDGET}")
    powers = k ** np.arange(n - 1, -1, -1)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        yield ((idx[:, None] // powers) % k).astype(np.uint8)


def _rows_per_chunk(n: int) -> int:
    return max(64, _CELLS // max(1, n))


def _sample_induced(cb: Codebooks, j: int, q_rows: Rows, count: int, rng) -> np.ndarray:
    i = rng.integers(0, cb.M1, size=count)
    return sample_output(q_rows, cb.covert[j - 1][i], rng)


def covertness_kl(cb: Codebooks, j: int, q_rows: Rows, mode: str = "exact",
                  samples: int = 100_000, seed: int = 0) -> DetectionReport:
    """D(Qhat_j || Qbar_j), by exhaustive enumeration or Monte Carlo under Qhat_j."""
    rep = DetectionReport(n=cb.n, j=j, M1=cb.M1, kl_mode=mode)
    if mode == "exact":
        k = len(q_rows[0])
        acc = []
        for zs in enumerate_outputs(cb.n, k):
            lhat = loglik_matrix(q_rows, cb.covert[j - 1], zs)
            lmix = logsumexp(lhat, axis=1) - math.log(cb.M1)
            lbar = innocent_logprob(cb, j, zs, q_rows)
            live = np.isfinite(lmix)
            if np.any(live & ~np.isfinite(lbar)):
                raise ImpossibleObservation("induced law not absolutely continuous w.r.t. the innocent law")
            acc.append(np.sum(np.exp(lmix[live]) * (lmix[live] - lbar[live])))
        rep.kl_estimate = max(0.0, math.fsum(acc))
        rep.kl_stderr = 0.0
    elif mode == "monte_carlo":
        rng = np.random.default_rng(seed)
        vals = []
        step = _rows_per_chunk(cb.n)
        for start in range(0, samples, step):
            m = min(step, samples - start)
            vals.append(log_ratio(cb, j, _sample_induced(cb, j, q_rows, m, rng), q_rows))
        v = np.concatenate(vals)
        rep.kl_estimate = float(v.mean())
        rep.kl_stderr = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("inf")
        rep.extra["kl_samples"] = int(v.size)
    else:
        raise ValueError(f"unknown mode {mode!r}; use 'exact' or 'monte_carlo'")
    return rep


def exact_test_errors(cb: Codebooks, j: int, q_rows: Rows, threshold: float = 0.0) -> tuple[float, float]:
    """Type I and II errors of the rule 'declare covert iff log ratio > threshold', by enumeration."""
    k = len(q_rows[0])
    a_terms, b_terms = [], []
    for zs in enumerate_outputs(cb.n, k):
        lhat = induced_logprob_unchecked(cb, j, zs, q_rows)
        lbar = innocent_logprob(cb, j, zs, q_rows)
        with np.errstate(invalid="ignore"):
            reject = (lhat - lbar) > threshold + STAT_TOL
        a_terms.append(np.exp(lbar[reject]).sum())
        b_terms.append(np.exp(lhat[~reject]).sum())
    return math.fsum(a_terms), math.fsum(b_terms)


def induced_logprob_unchecked(cb: Codebooks, j: int, zs, q_rows: Rows) -> np.ndarray:
    ll = loglik_matrix(q_rows, cb.covert[j - 1], np.atleast_2d(zs))
    return logsumexp(ll, axis=1) - math.log(cb.M1)


def lrt_statistics(cb: Codebooks, j: int, q_rows: Rows, trials: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Log-ratio statistics under H0 (innocent) and H1 (uniform covert codeword)."""
    rng = np.random.default_rng(seed)
    s0, s1 = [], []
    step = _rows_per_chunk(cb.n)
    for start in range(0, trials, step):
        m = min(step, trials - start)
        z0 = sample_output(q_rows, np.broadcast_to(cb.innocent[j - 1], (m, cb.n)), rng)
        z1 = _sample_induced(cb, j, q_rows, m, rng)
        s0.append(log_ratio(cb, j, z0, q_rows))
        s1.append(log_ratio(cb, j, z1, q_rows))
    return np.concatenate(s0), np.concatenate(s1)


def errors_at(s0: np.ndarray, s1: np.ndarray, threshold: float) -> tuple[float, float, float]:
    """(alpha_hat, beta_hat, stderr of their sum) for one threshold."""
    a = float(np.mean(s0 > threshold + STAT_TOL))
    b = float(np.mean(s1 <= threshold + STAT_TOL))
    se = math.sqrt(a * (1 - a) / s0.size + b * (1 - b) / s1.size)
    return a, b, se


def lrt_detect(cb: Codebooks, j: int, q_rows: Rows, threshold: float = 0.0, trials: int = 2000,
               seed: int = 0) -> DetectionReport:
    """Monte Carlo Type I/II errors of Willie's likelihood-ratio test.

    Willie declares a covert transmission when log Qhat_j(z) - log Qbar_j(z)
    exceeds ``threshold``; 0 is the minimum-error rule for equal priors.
    The KL fields are left for the caller to fill.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    s0, s1 = lrt_statistics(cb, j, q_rows, trials, seed)
    a, b, se = errors_at(s0, s1, threshold)
    return DetectionReport(
        n=cb.n, j=j, M1=cb.M1, kl_mode="none", threshold=threshold,
        alpha_hat=a, beta_hat=b, alpha_plus_beta=a + b, ab_stderr=se, trials=trials,
    )
