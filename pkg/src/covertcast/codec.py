"""Random codebooks, encoding, and the receivers' decoders.

Innocent codewords are drawn i.i.d. Bernoulli(lambda*) conditioned on their
weight fraction lying within ``epsilon`` of lambda*. Each innocent codeword
x0j owns a covert sub-codebook whose M1 codewords are independent draws of
the covert process around x0j. Bob first ML-decodes the common message
against the perturbed channel, then runs a threshold test over the covert
sub-codebook of the decoded index.

Indices follow the message convention: common messages are 1..M2, covert
messages 1..M1, and covert index 0 means "no covert message". Arrays are
stored 0-based (``innocent[j - 1]``, ``covert[j - 1, i - 1]``).
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp
from scipy.stats import binom

from .channels import Rows, loglik_matrix
from .covert import CovertParams, effective_rows, perturb
from .infotheory import mutual_information

_MAGIC = b"CVCB"
_VERSION = 1
TIE_TOL = 1e-12


class CodebookError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Codebooks:
    innocent: np.ndarray  # (M2, n) uint8
    covert: np.ndarray  # (M2, M1, n) uint8
    params: CovertParams
    seed: int
    lambda_star: float = float("nan")
    epsilon_typ: float = float("nan")

    @property
    def n(self) -> int:
        return self.innocent.shape[1]

    @property
    def M1(self) -> int:
        return self.covert.shape[1]

    @property
    def M2(self) -> int:
        return self.innocent.shape[0]

    def weight_frac(self, j: int) -> float:
        return float(self.innocent[j - 1].sum()) / self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Codebooks):
            return NotImplemented
        return (
            self.params == other.params
            and self.seed == other.seed
            and np.array_equal(self.innocent, other.innocent)
            and np.array_equal(self.covert, other.covert)
        )


def typical_weights(n: int, lambda_star: float, epsilon: float) -> np.ndarray:
    """Integer weights w with |w/n - lambda_star| < epsilon."""
    w = np.arange(n + 1)
    return w[np.abs(w / n - lambda_star) < epsilon]


def sample_typical_codewords(count: int, n: int, lambda_star: float, epsilon: float, rng) -> np.ndarray:
    """Draw ``count`` codewords from Bernoulli(lambda_star)^n conditioned on typicality.

    Given its weight, an i.i.d. Bernoulli sequence is uniform over the
    placements of its ones, so drawing the weight from the truncated
    binomial and then a uniform placement is exact.
    """
    support = typical_weights(n, lambda_star, epsilon)
    if support.size == 0:
        raise CodebookError(f"typical set empty for n={n}, lambda*={lambda_star}, epsilon={epsilon}")
    logpmf = binom.logpmf(support, n, lambda_star)
    pmf = np.exp(logpmf - logsumexp(logpmf))
    weights = rng.choice(support, size=count, p=pmf / pmf.sum())
    out = np.zeros((count, n), dtype=np.uint8)
    for r, w in enumerate(weights):
        out[r, rng.permutation(n)[:w]] = 1
    return out


def generate_codebooks(M1: int, M2: int, n: int, lambda_star: float, epsilon_typ: float,
                       params: CovertParams, seed: int) -> Codebooks:
    if M1 < 1 or M2 < 1 or n < 1:
        raise CodebookError(f"need M1, M2, n >= 1, got {M1}, {M2}, {n}")
    rng = np.random.default_rng(seed)
    innocent = sample_typical_codewords(M2, n, lambda_star, epsilon_typ, rng)
    covert = perturb(np.broadcast_to(innocent[:, None, :], (M2, M1, n)), params, rng)
    return Codebooks(innocent, covert, params, int(seed), float(lambda_star), float(epsilon_typ))


def encode(cb: Codebooks, w1: int, w2: int) -> np.ndarray:
    if not 1 <= w2 <= cb.M2:
        raise IndexError(f"common index {w2} outside [1, {cb.M2}]")
    if not 0 <= w1 <= cb.M1:
        raise IndexError(f"covert index {w1} outside [0, {cb.M1}]")
    if w1 == 0:
        return cb.innocent[w2 - 1]
    return cb.covert[w2 - 1, w1 - 1]


def decode_common(cb: Codebooks, y, rows_effective: Rows) -> np.ndarray | int:
    """ML estimate of the common message against the perturbed channel.

    ``y`` may be one observation (n,) or a batch (T, n); ties go to the lowest
    index. Returns 1-based indices.
    """
    y = np.asarray(y)
    single = y.ndim == 1
    ll = loglik_matrix(rows_effective, cb.innocent, np.atleast_2d(y))
    # exact ties (equal type counts) come out of the matmul differing by rounding only
    top = ll.max(axis=1, keepdims=True)
    idx = np.argmax(ll >= top - TIE_TOL * np.maximum(1.0, np.abs(top)), axis=1) + 1
    return int(idx[0]) if single else idx


def threshold_gamma_j(x0j, params: CovertParams, p_rows: Rows, delta: float) -> float:
    """(1 - delta) times the summed per-position mutual information between x and y given x0j."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    x0j = np.asarray(x0j)
    n1 = int(x0j.sum())
    n0 = x0j.size - n1
    i0, i1 = per_position_information(params, p_rows)
    return (1.0 - delta) * (n0 * i0 + n1 * i1)


def per_position_information(params: CovertParams, p_rows: Rows) -> tuple[float, float]:
    """I(X; Y | Xbar = 0) and I(X; Y | Xbar = 1) for the covert process over Bob's rows."""
    p0, p1 = p_rows
    i0 = mutual_information(params.alpha, (p0, p1))
    i1 = mutual_information(params.beta, (p1, p0))
    return i0, i1


@dataclass(frozen=True)
class DecodeResult:
    w2_hat: int
    w1_hat: int
    ambiguous: bool = False


def covert_scores(cb: Codebooks, j: int, y, params: CovertParams, p_rows: Rows) -> np.ndarray:
    """Information densities log W(y|x_ij) - log Pbar(y | x0j) for every covert codeword.

    Shape (M1,) for one observation, (T, M1) for a batch.
    """
    y = np.asarray(y)
    ys = np.atleast_2d(y)
    lw = loglik_matrix(p_rows, cb.covert[j - 1], ys)
    lbar = loglik_matrix(effective_rows(p_rows, params), cb.innocent[j - 1][None, :], ys)
    scores = lw - lbar
    return scores[0] if y.ndim == 1 else scores


def decide_covert(scores: np.ndarray, gamma_j: float) -> tuple[np.ndarray, np.ndarray]:
    """Threshold rule on a (T, M1) score matrix: (w1_hat, ambiguous) per row."""
    hits = scores >= gamma_j
    count = hits.sum(axis=1)
    w1 = np.where(count == 1, np.argmax(hits, axis=1) + 1, 0)
    return w1, count > 1


def decode_covert(cb: Codebooks, j: int, y, params: CovertParams, p_rows: Rows, delta: float,
                  gamma_j: float | None = None) -> DecodeResult:
    """Covert decision for one observation, given Bob's common estimate ``j``.

    ``gamma_j`` overrides the threshold (tests pass ``-inf``).
    """
    if gamma_j is None:
        gamma_j = threshold_gamma_j(cb.innocent[j - 1], params, p_rows, delta)
    scores = covert_scores(cb, j, np.asarray(y).reshape(-1), params, p_rows)
    w1, amb = decide_covert(scores[None, :], gamma_j)
    return DecodeResult(w2_hat=j, w1_hat=int(w1[0]), ambiguous=bool(amb[0]))


def save_codebooks(cb: Codebooks, path: str | Path) -> None:
    """Binary layout: magic, version, M1, M2, n, seed, alpha, beta, lambda*, epsilon, packed bits."""
    header = struct.pack(
        "<4sHIIIQdddd", _MAGIC, _VERSION, cb.M1, cb.M2, cb.n, cb.seed & (2**64 - 1),
        cb.params.alpha, cb.params.beta, cb.lambda_star, cb.epsilon_typ,
    )
    buf = io.BytesIO()
    buf.write(header)
    buf.write(np.packbits(cb.innocent, axis=-1).tobytes())
    buf.write(np.packbits(cb.covert, axis=-1).tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_codebooks(path: str | Path) -> Codebooks:
    data = Path(path).read_bytes()
    fmt = "<4sHIIIQdddd"
    size = struct.calcsize(fmt)
    if len(data) < size:
        raise CodebookError(f"truncated codebook file ({len(data)} bytes)")
    magic, version, M1, M2, n, seed, alpha, beta, lam, eps = struct.unpack_from(fmt, data)
    if magic != _MAGIC or version != _VERSION:
        raise CodebookError(f"not a codebook file (magic={magic!r}, version={version})")
    row = math.ceil(n / 8)
    if len(data) != size + (M2 + M2 * M1) * row:
        raise CodebookError(f"codebook payload has {len(data) - size} bytes, expected {(M2 + M2 * M1) * row}")
    off = size
    inn = np.frombuffer(data, np.uint8, M2 * row, off).reshape(M2, row)
    off += M2 * row
    cov = np.frombuffer(data, np.uint8, M2 * M1 * row, off).reshape(M2, M1, row)
    innocent = np.unpackbits(inn, axis=-1, count=n)
    covert = np.unpackbits(cov, axis=-1, count=n)
    return Codebooks(innocent, covert, CovertParams(alpha, beta), int(seed), lam, eps)
