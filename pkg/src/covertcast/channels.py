"""Finite-alphabet distributions and binary-input channel marginals.

A broadcast channel is stored through its two marginals only: the rows
``p0, p1`` seen by the legitimate receiver (Bob) and ``q0, q1`` seen by the
warden (Willie). Every quantity computed in this package is a functional of
those marginals, so the joint law of (Y, Z) given X is never materialized and
the two outputs are sampled independently given the input.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

PROB_TOL = 1e-12


class ChannelError(ValueError):
    """Raised when a distribution or channel violates the model assumptions."""


class ImpossibleObservation(ValueError):
    """Raised when an observation has zero probability under the channel."""


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector over alphabet indices ``0..K-1``."""

    probs: np.ndarray

    def __init__(self, probs):
        p = np.array(probs, dtype=float).reshape(-1)
        if p.size < 2:
            raise ChannelError(f"alphabet size must be >= 2, got {p.size}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ChannelError(f"probabilities must be finite and nonnegative: {p}")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ChannelError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def size(self) -> int:
        return self.probs.size

    def __len__(self) -> int:
        return self.probs.size

    def __getitem__(self, k):
        return self.probs[k]

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.size == other.size and bool(np.all(self.probs == other.probs))

    def __hash__(self) -> int:
        return hash(self.probs.tobytes())

    def __repr__(self) -> str:
        return f"Distribution({self.probs.tolist()})"

    def support(self) -> np.ndarray:
        return self.probs > 0

    def log(self) -> np.ndarray:
        """Elementwise natural log, ``-inf`` on zero entries."""
        with np.errstate(divide="ignore"):
            return np.log(self.probs)


Rows = Tuple[Distribution, Distribution]


def _as_dist(d) -> Distribution:
    return d if isinstance(d, Distribution) else Distribution(d)


def mix(d0, d1, w: float) -> Distribution:
    """Return ``(1 - w) * d0 + w * d1``.

    The mixture is renormalized only through the constructor check; for
    ``w`` in [0, 1] the affine combination of two distributions is already
    a distribution up to rounding.
    """
    d0, d1 = _as_dist(d0), _as_dist(d1)
    if d0.size != d1.size:
        raise ChannelError(f"alphabet mismatch: {d0.size} vs {d1.size}")
    if not 0.0 <= w <= 1.0:
        raise ChannelError(f"mixing weight must lie in [0, 1], got {w}")
    if w == 0.0:
        return d0
    if w == 1.0:
        return d1
    return Distribution((1.0 - w) * d0.probs + w * d1.probs)


@dataclass(frozen=True)
class BroadcastChannel:
    """Binary-input broadcast channel given by its marginal rows.

    ``p0, p1`` are the output laws at Bob for inputs 0 and 1, ``q0, q1`` the
    ones at Willie. Both pairs must be mutually absolutely continuous and the
    warden rows must differ.
    """

    p0: Distribution
    p1: Distribution
    q0: Distribution
    q1: Distribution

    def __post_init__(self):
        for name in ("p0", "p1", "q0", "q1"):
            object.__setattr__(self, name, _as_dist(getattr(self, name)))
        if self.p0.size != self.p1.size:
            raise ChannelError("Bob rows must share an alphabet")
        if self.q0.size != self.q1.size:
            raise ChannelError("Willie rows must share an alphabet")
        if np.any(self.p0.support() != self.p1.support()):
            raise ChannelError("Bob rows are not mutually absolutely continuous")
        if np.any(self.q0.support() != self.q1.support()):
            raise ChannelError("Willie rows are not mutually absolutely continuous")
        if np.max(np.abs(self.q0.probs - self.q1.probs)) <= PROB_TOL:
            raise ChannelError("Willie rows must differ (Q0 == Q1 makes the problem trivial)")

    @property
    def y_rows(self) -> Rows:
        return (self.p0, self.p1)

    @property
    def z_rows(self) -> Rows:
        return (self.q0, self.q1)

    def to_json(self) -> dict:
        return {
            "y_rows": [self.p0.probs.tolist(), self.p1.probs.tolist()],
            "z_rows": [self.q0.probs.tolist(), self.q1.probs.tolist()],
        }


def bsc_rows(p: float) -> Rows:
    return Distribution([1.0 - p, p]), Distribution([p, 1.0 - p])


def make_bsc_broadcast(pB: float, pW: float) -> BroadcastChannel:
    """Two binary symmetric channels with crossovers ``pB`` (Bob) and ``pW`` (Willie)."""
    for name, p in (("pB", pB), ("pW", pW)):
        if not (isinstance(p, (int, float)) and 0.0 < p < 0.5):
            raise ChannelError(f"{name} must lie in the open interval (0, 0.5), got {p!r}")
    p0, p1 = bsc_rows(pB)
    q0, q1 = bsc_rows(pW)
    return BroadcastChannel(p0, p1, q0, q1)


def channel_from_spec(spec: dict) -> BroadcastChannel:
    """Build a channel from its JSON form.

    Accepts ``{"bsc": {"pB": .., "pW": ..}}`` or
    ``{"y_rows": [[..], [..]], "z_rows": [[..], [..]]}``.
    """
    if not isinstance(spec, dict):
        raise ChannelError(f"channel spec must be an object, got {type(spec).__name__}")
    if "bsc" in spec:
        b = spec["bsc"]
        try:
            return make_bsc_broadcast(float(b["pB"]), float(b["pW"]))
        except (KeyError, TypeError) as exc:
            raise ChannelError(f"bad bsc spec {b!r}") from exc
    try:
        y_rows, z_rows = spec["y_rows"], spec["z_rows"]
    except KeyError as exc:
        raise ChannelError("channel spec needs 'bsc' or both 'y_rows' and 'z_rows'") from exc
    if len(y_rows) != 2 or len(z_rows) != 2:
        raise ChannelError("binary input: exactly two rows per receiver")
    return BroadcastChannel(*y_rows, *z_rows)


def load_channel(source: str | Path) -> BroadcastChannel:
    """Load a channel from a JSON file, or from the shorthand ``bsc:pB,pW``."""
    text = str(source)
    if text.startswith("bsc:"):
        try:
            pB, pW = (float(v) for v in text[4:].split(","))
        except ValueError as exc:
            raise ChannelError(f"expected bsc:pB,pW, got {text!r}") from exc
        return make_bsc_broadcast(pB, pW)
    with open(source) as fh:
        return channel_from_spec(json.load(fh))


def log_table(rows: Rows) -> np.ndarray:
    """(2, K) array of log-probabilities, ``-inf`` where a row is zero."""
    r0, r1 = rows
    with np.errstate(divide="ignore"):
        return np.log(np.vstack([np.asarray(r0, dtype=float), np.asarray(r1, dtype=float)]))


def sample_output(rows: Rows, x, rng: np.random.Generator) -> np.ndarray:
    """Pass bit sequence(s) ``x`` through the memoryless channel ``rows``.

    ``x`` may be a single codeword of shape (n,) or a batch (..., n). One
    uniform draw per symbol is inverted through the CDF of the selected row.
    """
    x = np.asarray(x, dtype=np.uint8)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise ChannelError("codeword must have length >= 1")
    cdf = np.cumsum(np.vstack([np.asarray(rows[0]), np.asarray(rows[1])]), axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(x.shape)
    k = cdf.shape[1]
    out = np.zeros(x.shape, dtype=np.int64)
    for s in range(k - 1):
        out += u >= cdf[x, s]
    return out.astype(np.uint8 if k <= 256 else np.int64)


def loglik(rows: Rows, x, y) -> float:
    """Return ``log W^n(y | x)`` in nats for one codeword and one observation."""
    x = np.asarray(x, dtype=np.intp)
    y = np.asarray(y, dtype=np.intp)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: x {x.shape} vs y {y.shape}")
    terms = log_table(rows)[x, y]
    if np.any(np.isneginf(terms)):
        raise ImpossibleObservation("observation has zero probability under the channel")
    return float(math.fsum(terms))


def loglik_matrix(rows: Rows, codewords, ys) -> np.ndarray:
    """Log-likelihoods of every observation against every codeword.

    Parameters
    ----------
    rows : pair of Distribution
    codewords : array, shape (M, n)
    ys : array, shape (T, n)

    Returns
    -------
    ndarray, shape (T, M)
        ``out[t, m] = log W^n(ys[t] | codewords[m])``; entries are ``-inf``
        where an observation is impossible for that codeword.
    """
    tab = log_table(rows)
    cw = np.atleast_2d(np.asarray(codewords, dtype=np.uint8))
    ys = np.atleast_2d(np.asarray(ys, dtype=np.intp))
    if np.all(np.isfinite(tab)):
        # binary input: log W(y|x) = l0[y] + x * (l1[y] - l0[y])
        base = tab[0][ys]
        diff = tab[1][ys] - base
        return base.sum(axis=1)[:, None] + diff @ cw.T.astype(float)
    out = np.empty((ys.shape[0], cw.shape[0]))
    for m in range(cw.shape[0]):
        out[:, m] = tab[cw[m][None, :], ys].sum(axis=1)
    return out
