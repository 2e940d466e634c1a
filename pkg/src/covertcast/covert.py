"""Covert process: asymmetric perturbation of innocent codewords.

Each innocent symbol passes through a binary asymmetric channel that flips
0 -> 1 with probability ``alpha`` and 1 -> 0 with probability ``beta``. The
warden's output law under this process is a product distribution, so its
divergence from the innocent output law splits per symbol and depends on the
innocent codeword only through its weight.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .channels import Rows, mix
from .infotheory import ChannelAnalysis, chi_k, eta_k

# The chi-squared sandwich is a small-flip statement: it needs the cubic
# correction alpha * |chi3| / (3 chi2) to stay under sqrt(alpha). Rows with
# tiny entries make chi3 large, so the valid range is channel dependent and
# found by scanning this grid (BSC pW=0.05 holds up to alpha ~ 0.115, pW=0.01
# only up to ~ 0.00104).
SANDWICH_SCAN = np.logspace(-8, math.log10(0.5), 400)


class InfeasibleSchedule(ValueError):
    """The covert rate interval [resolvability floor, reliability ceiling] is empty."""


@dataclass(frozen=True)
class CovertParams:
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")

    @property
    def gamma(self) -> float:
        return self.beta / self.alpha

    def flip_rows(self) -> np.ndarray:
        """V(x | xbar) as a (2, 2) matrix indexed [xbar, x]."""
        a, b = self.alpha, self.beta
        return np.array([[1 - a, a], [b, 1 - b]])


def effective_rows(rows: Rows, params: CovertParams) -> Rows:
    """Output rows seen through the perturbation: W(.|xbar) = sum_x W(.|x) V(x|xbar)."""
    r0, r1 = rows
    return mix(r0, r1, params.alpha), mix(r1, r0, params.beta)


@dataclass(frozen=True)
class Schedule:
    """Parameters of the covert schedule alpha_n = a_alpha * n^(-exponent), beta_n = gamma * alpha_n.

    ``mu`` and ``nu`` are the rate slacks under the reliability ceiling and
    above the resolvability floor, ``delta`` the covert decoder's threshold
    slack, ``epsilon_typ`` the typical-set half-width for innocent codewords
    and ``t_rate`` where log M1 sits between floor (0) and ceiling (1).
    """

    a_alpha: float = 0.5
    gamma: float = 1.0
    mu: float = 0.1
    nu: float = 0.1
    delta: float = 0.1
    epsilon_typ: float = 0.1
    t_rate: float = 0.5
    exponent: float = 0.5

    def __post_init__(self):
        if self.a_alpha <= 0:
            raise ValueError("a_alpha must be > 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        for name in ("mu", "nu", "delta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.epsilon_typ <= 0:
            raise ValueError("epsilon_typ must be > 0")
        if not 0.0 <= self.t_rate <= 1.0:
            raise ValueError("t_rate must lie in [0, 1]")
        if self.exponent <= 0:
            raise ValueError("exponent must be > 0")

    def alpha_at(self, n: int) -> float:
        return self.a_alpha * float(n) ** (-self.exponent)

    def params_at(self, n: int) -> CovertParams:
        a = self.alpha_at(n)
        return CovertParams(a, self.gamma * a)

    def to_dict(self) -> dict:
        return asdict(self)


def perturb(x_bar, params: CovertParams, rng: np.random.Generator) -> np.ndarray:
    """Draw x from the covert process around ``x_bar`` (any leading batch shape)."""
    x_bar = np.asarray(x_bar, dtype=np.uint8)
    if x_bar.size == 0:
        raise ValueError("empty codeword")
    flip_p = np.where(x_bar == 1, params.beta, params.alpha)
    flips = rng.random(x_bar.shape) < flip_p
    return x_bar ^ flips.astype(np.uint8)


_SERIES_K = np.arange(2, 13)
_SERIES_C = ((-1.0) ** _SERIES_K) / (_SERIES_K * (_SERIES_K - 1.0))


def _one_plus_x_log_minus_x(x: np.ndarray) -> np.ndarray:
    # (1 + x) log1p(x) - x = sum_{k>=2} (-1)^k x^k / (k (k-1)), cancellation-free near 0
    x = np.asarray(x, dtype=float)
    out = (1.0 + x) * np.log1p(x) - x
    small = np.abs(x) < 1e-2
    if np.any(small):
        xs = x[small][:, None]
        out[small] = (_SERIES_C * xs**_SERIES_K).sum(axis=1)
    return out


def mixture_kl(target, base, t: float) -> float:
    """D((1 - t) base + t target || base), accurate down to t ~ 1e-8.

    Direct summation of p log(p/q) cancels to first order in ``t``; rewriting
    each term as q [(1 + x) log(1 + x) - x] with x = t (target - base) / base
    keeps every term nonnegative.
    """
    p = np.asarray(target, dtype=float)
    q = np.asarray(base, dtype=float)
    if np.any((p > 0) & (q <= 0)):
        raise ValueError("perturbed law is not absolutely continuous w.r.t. the base row")
    s = q > 0
    x = t * (p[s] - q[s]) / q[s]
    return max(0.0, math.fsum(q[s] * _one_plus_x_log_minus_x(x)))


def per_symbol_kl(params: CovertParams, z_rows: Rows) -> tuple[float, float]:
    """D(Qbar_0 || Q0) and D(Qbar_1 || Q1) for the perturbed warden rows."""
    q0, q1 = z_rows
    return mixture_kl(q1, q0, params.alpha), mixture_kl(q0, q1, params.beta)


def exact_covert_kl(weight_frac: float, n: int, params: CovertParams, z_rows: Rows) -> float:
    """Exact divergence between the covert-process and innocent output laws at the warden."""
    if not 0.0 <= weight_frac <= 1.0:
        raise ValueError(f"weight fraction must lie in [0, 1], got {weight_frac}")
    d0, d1 = per_symbol_kl(params, z_rows)
    return n * (1.0 - weight_frac) * d0 + n * weight_frac * d1


def lemma1_bounds(weight_frac: float, n: int, params: CovertParams, z_rows: Rows) -> tuple[float, float]:
    """Chi-squared sandwich around :func:`exact_covert_kl`, returned as (lower, upper)."""
    q0, q1 = z_rows
    a, b = params.alpha, params.beta
    c10 = chi_k(q1, q0, 2)
    c01 = chi_k(q0, q1, 2)
    lam = weight_frac

    def side(sign):
        return n * (
            (1 - lam) * a * a / 2 * (1 + sign * math.sqrt(a)) * c10
            + lam * b * b / 2 * (1 + sign * math.sqrt(b)) * c01
        )

    return side(-1.0), side(+1.0)


def moment_bounds(weight_frac: float, n: int, params: CovertParams, z_rows: Rows) -> tuple[float, float]:
    """Sharper sandwich from the third and fourth divergence moments.

    Per symbol, with t the flip probability, P the flipped-to row and Q the
    base row::

        upper = t^2/2 chi2 - t^3/6 chi3 + t^4/3 chi4
        lower = t^2/2 chi2 - t^3 (chi3/2 - 2 eta3/3) + 2 t^4/3 eta4
    """
    q0, q1 = z_rows
    lam = weight_frac

    def terms(t, P, Q):
        c2, c3, c4 = chi_k(P, Q, 2), chi_k(P, Q, 3), chi_k(P, Q, 4)
        e3, e4 = eta_k(P, Q, 3), eta_k(P, Q, 4)
        up = t**2 / 2 * c2 - t**3 / 6 * c3 + t**4 / 3 * c4
        lo = t**2 / 2 * c2 - t**3 * (c3 / 2 - 2 * e3 / 3) + 2 * t**4 / 3 * e4
        return lo, up

    lo0, up0 = terms(params.alpha, q1, q0)
    lo1, up1 = terms(params.beta, q0, q1)
    return n * ((1 - lam) * lo0 + lam * lo1), n * ((1 - lam) * up0 + lam * up1)


def sandwich_alpha_limit(z_rows: Rows) -> float:
    """Largest flip probability t such that the sandwich holds for every grid point <= t.

    Checked separately for both flip directions with alpha = beta = t.
    """
    limit = 0.0
    for t in SANDWICH_SCAN:
        p = CovertParams(float(t), float(t))
        ok = True
        for lam in (0.0, 1.0):
            lo, up = lemma1_bounds(lam, 1, p, z_rows)
            ex = exact_covert_kl(lam, 1, p, z_rows)
            ok &= lo <= ex <= up
        if not ok:
            break
        limit = float(t)
    return limit


def sandwich_min_n(schedule: "Schedule", z_rows: Rows) -> int:
    """Blocklength from which alpha_n and beta_n fall inside :func:`sandwich_alpha_limit`."""
    t = sandwich_alpha_limit(z_rows)
    if t <= 0.0:
        raise ValueError("sandwich fails even for the smallest scanned flip probability")
    top = schedule.a_alpha * max(1.0, schedule.gamma)
    return max(1, math.ceil((top / t) ** (1.0 / schedule.exponent)))


@dataclass(frozen=True)
class ScheduledRates:
    n: int
    params: CovertParams
    log_m1: float
    log_m2: float
    floor: float
    ceiling: float


def schedule_at(n: int, schedule: Schedule, analysis: ChannelAnalysis) -> ScheduledRates:
    """Covert flip probabilities and codebook log-sizes at blocklength ``n``.

    Raises
    ------
    InfeasibleSchedule
        When the reliability ceiling falls below the resolvability floor.
    """
    params = schedule.params_at(n)
    a, b = params.alpha, params.beta
    lam = analysis.lambda_star
    floor = (1 + schedule.nu) * n * ((1 - lam) * a * analysis.dq10 + lam * b * analysis.dq01)
    ceiling = (1 - schedule.mu) * n * ((1 - lam) * a * analysis.dp10 + lam * b * analysis.dp01)
    if ceiling < floor:
        raise InfeasibleSchedule(
            f"covert rate interval empty at n={n}: floor {floor:.4g} > ceiling {ceiling:.4g} nats; "
            "increase n or check feasibility"
        )
    log_m1 = floor + schedule.t_rate * (ceiling - floor)
    log_m2 = (1 - schedule.mu) * n * analysis.capacity_willie
    return ScheduledRates(n, params, log_m1, log_m2, floor, ceiling)


def codebook_size(log_m: float, cap: int | None = None) -> int:
    """floor(exp(log_m)) clamped to >= 2, and to ``cap`` when given."""
    if cap is not None and log_m >= math.log(cap):
        return int(cap)
    return max(2, int(math.floor(math.exp(log_m))))
