"""Windowed (constrained) alignments of X against Y.

X is cut into m consecutive pieces of length 2d; a partition
``r = (0 = r_0 <= r_1 <= ... <= r_m = n)`` assigns Y[r_i : r_{i+1}] to piece i.
The score of a partition is the sum of the piecewise LCS lengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lcsfluct.errors import ShapeError, ValidationError
from lcsfluct.lcs import _encode, lcs_with_masks, match_masks
from lcsfluct.model import ModelParams, ReplacementDraw, StringSample

NEG = -(1 << 40)
_TOL = 1e-9


@dataclass(frozen=True)
class Partition:
    r: tuple

    def __post_init__(self):
        r = tuple(int(v) for v in self.r)
        object.__setattr__(self, "r", r)
        if len(r) < 2 or r[0] != 0:
            raise ShapeError(f"partition must start at 0 and have >= 2 endpoints: {r}")
        if any(b < a for a, b in zip(r, r[1:])):
            raise ShapeError(f"partition endpoints must be non-decreasing: {r}")

    @property
    def m(self) -> int:
        return len(self.r) - 1

    @property
    def n(self) -> int:
        return self.r[-1]

    def gaps(self):
        return [b - a for a, b in zip(self.r, self.r[1:])]

    def __str__(self):
        return ",".join(str(v) for v in self.r)

    @classmethod
    def parse(cls, text: str) -> "Partition":
        return cls(tuple(int(tok) for tok in text.split(",")))


@dataclass(frozen=True)
class GapInterval:
    lo: float
    hi: float
    q_e: float

    @classmethod
    def for_window(cls, d, q_e):
        if not 0.0 < q_e < 1.0:
            raise ValidationError("q_e", f"must lie in (0, 1), got {q_e}")
        return cls(lo=2 * d * (1 - q_e) / (1 + q_e), hi=2 * d * (1 + q_e) / (1 - q_e), q_e=q_e)

    def contains(self, gap) -> bool:
        return self.lo - _TOL <= gap <= self.hi + _TOL

    def good_mask(self, n):
        """Boolean table over (s, t): piece Y[s:t] has an admissible length (t >= s)."""
        gaps = np.arange(n + 1)[None, :] - np.arange(n + 1)[:, None]
        return (gaps >= 0) & (gaps >= self.lo - _TOL) & (gaps <= self.hi + _TOL)


@dataclass(frozen=True)
class PartitionDiagnostics:
    bad_count: int
    threshold: float
    in_R_eps: bool


@dataclass(frozen=True)
class DeltaBreakdown:
    per_piece: tuple
    total: int


def _check_shapes(x, y, d):
    if len(x) != len(y):
        raise ShapeError(f"x and y must have equal length, got {len(x)} and {len(y)}")
    n = len(x)
    if d < 1 or n == 0 or n % (2 * d):
        raise ShapeError(f"length {n} is not a positive multiple of 2d = {2 * d}")
    return n // (2 * d)


def score_partition(x, y, part: Partition, d) -> int:
    m = _check_shapes(x, y, d)
    if part.m != m or part.n != len(y):
        raise ShapeError(f"partition {part} does not match m={m}, n={len(y)}")
    ex, ey = _encode(x, y)
    total = 0
    for i in range(m):
        piece = ey[part.r[i]:part.r[i + 1]]
        total += lcs_with_masks(ex[2 * d * i:2 * d * (i + 1)], match_masks(piece), len(piece))
    return total


def _popcount_rows(v):
    return np.bitwise_count(v).sum(axis=1, dtype=np.int64)


def substring_scores(xwin, y):
    """Table ``L[s, t] = |LCS(xwin, y[s:t])|`` for 0 <= s <= t <= |y|, NEG below the diagonal.

    Runs the bit-vector recurrence (bits over ``xwin``) for every start s at once;
    words are uint64 with explicit carry so any window width works.
    """
    ex, ey = _encode(xwin, y)
    w, n = len(ex), len(ey)
    table = np.full((n + 1, n + 1), NEG, dtype=np.int64)
    idx = np.arange(n + 1)
    table[idx, idx] = 0
    if n == 0:
        return table
    if w == 0:
        table[np.triu_indices(n + 1)] = 0
        return table
    n_words = (w + 63) // 64
    full = np.full(n_words, np.iinfo(np.uint64).max, dtype=np.uint64)
    if w % 64:
        full[-1] = np.uint64((1 << (w % 64)) - 1)
    masks = {}
    for c in np.unique(ex):
        bits = np.zeros(n_words * 64, dtype=bool)
        bits[:w] = ex == c
        masks[int(c)] = np.packbits(bits, bitorder="little").view("<u8").astype(np.uint64)
    zero = np.zeros(n_words, dtype=np.uint64)
    v = np.tile(full, (n, 1))
    for t in range(1, n + 1):
        mask = masks.get(int(ey[t - 1]), zero)
        vs = v[:t]
        u = vs & mask
        if n_words == 1:
            total = vs + u
        else:
            total = np.empty_like(vs)
            carry = np.zeros(t, dtype=np.uint64)
            for j in range(n_words):
                s1 = vs[:, j] + u[:, j]
                c1 = s1 < vs[:, j]
                s2 = s1 + carry
                c2 = s2 < s1
                total[:, j] = s2
                carry = (c1 | c2).astype(np.uint64)
        vs = (total | (vs & ~mask)) & full
        v[:t] = vs
        table[:t, t] = w - _popcount_rows(vs)
    return table


def piece_tables(x, y, d):
    m = _check_shapes(x, y, d)
    ex, ey = _encode(x, y)
    return [substring_scores(ex[2 * d * i:2 * d * (i + 1)], ey) for i in range(m)]


def _maxplus(vec, table):
    """out[t] = max_s vec[s] + table[s, t], clamped at NEG."""
    return np.maximum((vec[:, None] + table).max(axis=0), NEG)


def optimal_partition(x, y, d, tables=None):
    """Best partition score and the lexicographically smallest maximiser."""
    m = _check_shapes(x, y, d)
    n = len(y)
    tables = piece_tables(x, y, d) if tables is None else tables
    # tail[i][s]: best score of pieces i..m-1 when piece i starts at y-position s
    tail = [None] * (m + 1)
    tail[m] = np.full(n + 1, NEG, dtype=np.int64)
    tail[m][n] = 0
    for i in range(m - 1, -1, -1):
        tail[i] = np.maximum((tables[i] + tail[i + 1][None, :]).max(axis=1), NEG)
    best = int(tail[0][0])
    r = [0]
    for i in range(m):
        s = r[-1]
        cand = tables[i][s] + tail[i + 1]
        r.append(int(np.flatnonzero(cand == tail[i][s])[0]))
    return best, Partition(tuple(r))


def partition_diagnostics(part: Partition, params: ModelParams, q_e, eps) -> PartitionDiagnostics:
    if eps <= 0:
        raise ValidationError("eps", f"must be > 0, got {eps}")
    if part.m != params.m or part.n != params.n:
        raise ShapeError(f"partition {part} does not match m={params.m}, n={params.n}")
    interval = GapInterval.for_window(params.d, q_e)
    bad = sum(not interval.contains(g) for g in part.gaps())
    threshold = 2 * params.m * params.p * eps
    return PartitionDiagnostics(bad_count=bad, threshold=threshold, in_R_eps=bad <= threshold + _TOL)


def outside_cap(params: ModelParams, eps) -> int:
    """Smallest bad-gap count that places a partition outside R^n(eps)."""
    return math.floor(2 * params.m * params.p * eps + _TOL) + 1


def max_score_outside_R(x, y, params: ModelParams, q_e, eps, tables=None):
    """Best score over partitions with more than 2mp*eps inadmissible piece lengths, or None."""
    if eps <= 0:
        raise ValidationError("eps", f"must be > 0, got {eps}")
    m = _check_shapes(x, y, params.d)
    if m != params.m:
        raise ShapeError(f"strings have {m} windows, params say {params.m}")
    n = len(y)
    cap = outside_cap(params, eps)
    if cap > m:
        return None
    good = GapInterval.for_window(params.d, q_e).good_mask(n)
    if good[np.triu_indices(n + 1)].all():
        return None
    tables = piece_tables(x, y, params.d) if tables is None else tables
    # state[b][t]: best score so far ending at t with min(bad count, cap) == b
    state = np.full((cap + 1, n + 1), NEG, dtype=np.int64)
    state[0, 0] = 0
    for table in tables:
        good_tab = np.where(good, table, NEG)
        bad_tab = np.where(good, NEG, table)
        new = np.full_like(state, NEG)
        for b in range(cap + 1):
            if state[b].max() <= NEG:
                continue
            new[b] = np.maximum(new[b], _maxplus(state[b], good_tab))
            nb = min(b + 1, cap)
            new[nb] = np.maximum(new[nb], _maxplus(state[b], bad_tab))
        state = new
    value = int(state[cap, n])
    return None if value <= NEG // 2 else value


def decide_K(x, y, params: ModelParams, q_e, eps, tables=None, lcs_value=None) -> bool:
    """True iff every optimal partition lies in R^n(eps)."""
    tables = piece_tables(x, y, params.d) if tables is None else tables
    outside = max_score_outside_R(x, y, params, q_e, eps, tables=tables)
    if outside is None:
        return True
    if lcs_value is None:
        lcs_value, _ = optimal_partition(x, y, params.d, tables=tables)
    return outside < lcs_value


def delta_scores(sample: StringSample, draw: ReplacementDraw, part: Partition) -> DeltaBreakdown:
    params = sample.params
    if len(draw.x_tilde) != params.n or part.m != params.m or part.n != params.n:
        raise ShapeError("sample, replacement and partition dimensions disagree")
    ex, ey = _encode(sample.x, sample.y)
    et, _ = _encode(draw.x_tilde, sample.y)
    per_piece = []
    for i in range(params.m):
        piece = ey[part.r[i]:part.r[i + 1]]
        masks = match_masks(piece)
        sl = params.piece_slice(i)
        per_piece.append(lcs_with_masks(et[sl], masks, len(piece)) - lcs_with_masks(ex[sl], masks, len(piece)))
    return DeltaBreakdown(per_piece=tuple(per_piece), total=sum(per_piece))
