"""Divergences, binary-input mutual information and covert-throughput coefficients.

All logarithms are natural; divide by ``ln 2`` for bits.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .channels import BroadcastChannel, ChannelError, Rows, mix

LAMBDA_XTOL = 1e-12
MIN_CAPACITY = 1e-12


def _pair(P, Q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(P, dtype=float)
    q = np.asarray(Q, dtype=float)
    if p.shape != q.shape:
        raise ChannelError(f"alphabet mismatch: {p.shape} vs {q.shape}")
    return p, q


def _check_ac(p: np.ndarray, q: np.ndarray) -> None:
    if np.any((p > 0) & (q <= 0)):
        raise ChannelError("P is not absolutely continuous w.r.t. Q")


def kl(P, Q) -> float:
    """Kullback-Leibler divergence D(P||Q) in nats, with 0 log 0 = 0."""
    p, q = _pair(P, Q)
    _check_ac(p, q)
    s = p > 0
    return max(0.0, math.fsum(p[s] * np.log(p[s] / q[s])))


def chi_k(P, Q, k: int = 2) -> float:
    """Sum over z of (P(z) - Q(z))^k / Q(z)^(k-1); ``k=2`` is the chi-squared distance."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    p, q = _pair(P, Q)
    _check_ac(p, q)
    s = q > 0
    d = p[s] - q[s]
    return math.fsum(d**k / q[s] ** (k - 1))


def eta_k(P, Q, k: int = 2) -> float:
    """Same as :func:`chi_k` restricted to symbols where P(z) < Q(z)."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    p, q = _pair(P, Q)
    _check_ac(p, q)
    s = (q > 0) & (p < q)
    d = p[s] - q[s]
    return math.fsum(d**k / q[s] ** (k - 1))


def variational(P, Q) -> float:
    p, q = _pair(P, Q)
    return 0.5 * math.fsum(np.abs(p - q))


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy needs x in [0, 1], got {x}")
    h = 0.0
    for t in (x, 1.0 - x):
        if t > 0:
            h -= t * math.log(t)
    return h


def mutual_information(lam: float, rows: Rows) -> float:
    """I(X; Y) for input law Bernoulli(``lam``) over the channel ``rows``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    r0, r1 = rows
    m = mix(r0, r1, lam)
    total = 0.0
    if lam < 1.0:
        total += (1.0 - lam) * kl(r0, m)
    if lam > 0.0:
        total += lam * kl(r1, m)
    return max(0.0, total)


def mutual_information_slope(lam: float, rows: Rows) -> float:
    """Derivative of :func:`mutual_information` in ``lam``: D(W1||mix) - D(W0||mix)."""
    r0, r1 = rows
    m = mix(r0, r1, lam)
    return kl(r1, m) - kl(r0, m)


def capacity_input(rows: Rows) -> tuple[float, float]:
    """Capacity-achieving P(X=1) and the capacity in nats.

    The objective is concave in the input probability, so the maximizer is
    the unique root of its slope, which runs from D(W1||W0) > 0 at 0 down
    to -D(W0||W1) < 0 at 1.
    """
    r0, r1 = rows
    if np.max(np.abs(np.asarray(r0) - np.asarray(r1))) <= 1e-12:
        raise ChannelError("degenerate channel: both rows coincide")

    def slope(t):
        try:
            return mutual_information_slope(t, rows)
        except ChannelError:
            # rows not mutually continuous: the slope diverges at the boundary
            return math.inf if t < 0.5 else -math.inf

    lam = brentq(slope, 0.0, 1.0, xtol=LAMBDA_XTOL, rtol=4 * np.finfo(float).eps)
    cap = mutual_information(lam, rows)
    if cap < MIN_CAPACITY:
        raise ChannelError(f"degenerate channel: capacity {cap:.3e} nats")
    return float(lam), cap


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-9) -> float:
    """Maximize a unimodal ``f`` on [lo, hi]; used as an independent cross-check."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class ChannelAnalysis:
    lambda_star: float
    capacity_willie: float
    dp10: float
    dp01: float
    dq10: float
    dq01: float
    chi10: float
    chi01: float
    capacity_bob_at_lambda: float = float("nan")

    def to_dict(self, bits: bool = False) -> dict:
        d = asdict(self)
        if bits:
            for key in ("capacity_willie", "dp10", "dp01", "dq10", "dq01", "capacity_bob_at_lambda"):
                d[key] /= math.log(2)
        return d


def analyze_channel(ch: BroadcastChannel) -> ChannelAnalysis:
    lam, cap = capacity_input(ch.z_rows)
    return ChannelAnalysis(
        lambda_star=lam,
        capacity_willie=cap,
        dp10=kl(ch.p1, ch.p0),
        dp01=kl(ch.p0, ch.p1),
        dq10=kl(ch.q1, ch.q0),
        dq01=kl(ch.q0, ch.q1),
        chi10=chi_k(ch.q1, ch.q0, 2),
        chi01=chi_k(ch.q0, ch.q1, 2),
        capacity_bob_at_lambda=mutual_information(lam, ch.y_rows),
    )


def _abcd(a: ChannelAnalysis) -> tuple[float, float, float, float]:
    lam = a.lambda_star
    return (1 - lam) * a.dp10, lam * a.dp01, (1 - lam) * a.chi10, lam * a.chi01


def covert_coefficient(a: ChannelAnalysis, gamma: float) -> float:
    """sqrt(2) (A + B gamma) / sqrt(C + D gamma^2): covert bits per sqrt(n KL) at flip ratio ``gamma``."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    A, B, C, D = _abcd(a)
    return math.sqrt(2.0) * (A + B * gamma) / math.sqrt(C + D * gamma * gamma)


def resolvability_coefficient(a: ChannelAnalysis, gamma: float) -> float:
    """Same denominator as :func:`covert_coefficient` with the warden divergences on top."""
    lam = a.lambda_star
    C, D = (1 - lam) * a.chi10, lam * a.chi01
    num = (1 - lam) * a.dq10 + lam * gamma * a.dq01
    return math.sqrt(2.0) * num / math.sqrt(C + D * gamma * gamma)


@dataclass(frozen=True)
class CovertCoefficients:
    gamma_star: float
    achievable_ub: float
    converse_floor: float
    feasible: bool

    def to_dict(self) -> dict:
        return asdict(self)


def optimal_gamma(a: ChannelAnalysis) -> float:
    # d/dg (A + Bg)/sqrt(C + Dg^2) vanishes only at g = BC/(AD), a maximum
    A, B, C, D = _abcd(a)
    if A <= 0.0 or B <= 0.0 or D <= 0.0:
        return 0.0
    return max(0.0, B * C / (A * D))


def optimize_gamma(a: ChannelAnalysis) -> CovertCoefficients:
    g = optimal_gamma(a)
    lam = a.lambda_star
    bob = (1 - lam) * a.dp10 + lam * g * a.dp01
    willie = (1 - lam) * a.dq10 + lam * g * a.dq01
    return CovertCoefficients(
        gamma_star=g,
        achievable_ub=covert_coefficient(a, g),
        converse_floor=resolvability_coefficient(a, g),
        feasible=bool(bob > willie),
    )


def bsc_closed_forms(pB: float, pW: float) -> dict:
    """Closed-form BSC quantities: divergences, chi-squared, coefficient bounds, feasibility."""
    d_bob = (1 - 2 * pB) * math.log((1 - pB) / pB)
    d_willie = (1 - 2 * pW) * math.log((1 - pW) / pW)
    return {
        "pB": pB,
        "pW": pW,
        "d_bob": d_bob,
        "d_willie": d_willie,
        "chi2_willie": (1 - 2 * pW) ** 2 / (pW * (1 - pW)),
        "upper_coefficient": math.sqrt(2 * pW * (1 - pW)) * (1 - 2 * pB) / (1 - 2 * pW) * math.log((1 - pB) / pB),
        "lower_coefficient": math.sqrt(2 * pW * (1 - pW)) * math.log((1 - pW) / pW),
        "keyless_feasible": d_bob > d_willie,
    }
