"""LCS length engines.

Four independent routes to the same number. ``lcs_bitparallel`` is the Monte
Carlo workhorse; the other three exist to check it and each other.
"""

from itertools import combinations

import numpy as np

from lcsfluct.errors import InvalidAlphabetError, SizeCapError

ORACLE_CAP = 14


def _as_list(a):
    if isinstance(a, np.ndarray):
        return a.tolist()
    return list(a)


def _encode(a, b):
    """Map both sequences onto a shared integer code."""
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray) and a.dtype.kind in "iu" and b.dtype.kind in "iu":
        return a.astype(np.int64), b.astype(np.int64)
    codes = {}
    ea = [codes.setdefault(c, len(codes)) for c in _as_list(a)]
    eb = [codes.setdefault(c, len(codes)) for c in _as_list(b)]
    return np.array(ea, dtype=np.int64), np.array(eb, dtype=np.int64)


def lcs_dp(a, b):
    """Quadratic DP with two rolling rows over the shorter string."""
    ea, eb = _encode(a, b)
    if len(eb) > len(ea):
        ea, eb = eb, ea
    if len(eb) == 0:
        return 0
    row = np.zeros(len(eb) + 1, dtype=np.int64)
    for c in ea:
        # L[i][j] = max(L[i][j-1], L[i-1][j], L[i-1][j-1] + [a_i == b_j]); the L[i][j-1] term is a prefix max
        t = np.maximum(row[1:], row[:-1] + (eb == c))
        np.maximum.accumulate(t, out=row[1:])
    return int(row[-1])


def match_masks(b, k=None):
    """Per-letter bitmasks of ``b``: bit j of ``masks[c]`` is set iff b[j] == c."""
    if isinstance(b, np.ndarray) and k is not None and b.dtype.kind in "iu" and (b.size == 0 or int(b.max()) < k):
        return {
            c: int.from_bytes(np.packbits(b == c, bitorder="little").tobytes(), "little")
            for c in range(k)
        }
    masks = {}
    for j, c in enumerate(_as_list(b)):
        masks[c] = masks.get(c, 0) | (1 << j)
    return masks


def lcs_with_masks(a, masks, width):
    """Bit-parallel LCS of ``a`` against the string whose masks are given (width = its length)."""
    if width == 0:
        return 0
    full = (1 << width) - 1
    v = full
    get = masks.get
    for c in _as_list(a):
        u = v & get(c, 0)
        v = ((v + u) | (v - u)) & full
    return width - v.bit_count()


def lcs_bitparallel(a, b, k=2):
    """Bit-vector LCS (one big-int word per row): zeros of V count the matched columns."""
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 2:
        raise InvalidAlphabetError(k)
    if len(a) == 0 or len(b) == 0:
        return 0
    return lcs_with_masks(a, match_masks(b, k), len(b))


def is_subsequence(s, t):
    it = iter(_as_list(t))
    return all(any(c == u for u in it) for c in _as_list(s))


def lcs_oracle(a, b):
    """Exhaustive search: the longest subsequence of the shorter string that embeds in the other."""
    a, b = _as_list(a), _as_list(b)
    if len(a) > len(b):
        a, b = b, a
    if len(a) > ORACLE_CAP:
        raise SizeCapError(f"lcs_oracle handles min length <= {ORACLE_CAP}, got {len(a)}")
    for size in range(len(a), 0, -1):
        for idx in combinations(range(len(a)), size):
            if is_subsequence([a[i] for i in idx], b):
                return size
    return 0


def lcs_lpp_oracle(a, b):
    """Heaviest path from (0,0) to (|a|,|b|) on the directed grid.

    Horizontal and vertical edges weigh 0; the diagonal out of (i,j) weighs 1
    when a[i] == b[j] and -inf otherwise. Vertices are relaxed by anti-diagonal.
    """
    ea, eb = _encode(a, b)
    na, nb = len(ea), len(eb)
    w = np.full((na + 1, nb + 1), -np.inf)
    w[0, 0] = 0.0
    diag_weight = np.where(ea[:, None] == eb[None, :], 1.0, -np.inf)
    for s in range(1, na + nb + 1):
        i = np.arange(max(0, s - nb), min(na, s) + 1)
        j = s - i
        best = np.full(len(i), -np.inf)
        has_left = i > 0
        best[has_left] = np.maximum(best[has_left], w[i[has_left] - 1, j[has_left]])
        has_down = j > 0
        best[has_down] = np.maximum(best[has_down], w[i[has_down], j[has_down] - 1])
        both = has_left & has_down
        ii, jj = i[both], j[both]
        best[both] = np.maximum(best[both], w[ii - 1, jj - 1] + diag_weight[ii - 1, jj - 1])
        w[i, j] = best
    return int(w[na, nb])
