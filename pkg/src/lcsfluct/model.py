"""Random strings of the long-block model.

Positions are documented 1-indexed so that the window of block ``i`` reads
``J_i = [(2i-1)d - ell/2, (2i-1)d + ell/2]``; arrays are stored 0-indexed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lcsfluct.errors import InvalidAlphabetError, NoBlockError, ShapeError, ValidationError
from lcsfluct.seeding import check_seed, derive_seed, rng_for

DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"

# sub-streams of sample_pair; fixed so forcing one source never shifts another
_X_STAR, _Z, _SYMBOLS, _Y = range(4)


def _check_k(k):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 2:
        raise InvalidAlphabetError(k)
    return int(k)


def letter_dtype(k):
    return np.uint8 if k <= 256 else np.int64


def block_length(d, beta):
    """Smallest even integer >= d**beta (absorbing float noise at exact powers)."""
    target = d ** beta
    ell = math.ceil(target - 1e-9 * max(1.0, target))
    return ell + (ell % 2)


@dataclass(frozen=True)
class ModelParams:
    k: int
    d: int
    beta: float
    p: float
    m: int

    def __post_init__(self):
        _check_k(self.k)
        for name in ("d", "m"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValidationError(name, f"must be an integer, got {value!r}")
        if self.d < 2:
            raise ValidationError("d", f"half-window must be >= 2, got {self.d}")
        if self.m < 1:
            raise ValidationError("m", f"number of windows must be >= 1, got {self.m}")
        if not 0.5 < self.beta < 1.0:
            raise ValidationError("beta", f"block exponent must lie in (1/2, 1), got {self.beta}")
        if not 0.0 < self.p < 1.0:
            raise ValidationError("p", f"block probability must lie in (0, 1), got {self.p}")
        if not 2 <= self.ell < 2 * self.d:
            raise ValidationError("d", f"block length {self.ell} does not fit a window of {2 * self.d}")

    @property
    def n(self) -> int:
        return 2 * self.d * self.m

    @property
    def ell(self) -> int:
        return block_length(self.d, self.beta)

    def window_slice(self, i: int) -> slice:
        """0-indexed half-open slice of ``J_{i+1}`` for 0-based window ``i``."""
        centre = (2 * i + 1) * self.d
        half = self.ell // 2
        return slice(centre - half - 1, centre + half)

    def window(self, i: int) -> tuple[int, int]:
        """``J_i`` for 1-based ``i`` as 1-indexed inclusive bounds."""
        centre = (2 * i - 1) * self.d
        half = self.ell // 2
        return centre - half, centre + half

    def piece_slice(self, i: int) -> slice:
        """0-based ``i``-th length-2d piece of X."""
        return slice(2 * self.d * i, 2 * self.d * (i + 1))

    def to_dict(self):
        return {"k": self.k, "d": self.d, "beta": self.beta, "p": self.p, "m": self.m}


def _frozen(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StringSample:
    x_star: np.ndarray
    z: np.ndarray
    x: np.ndarray
    y: np.ndarray
    block_symbols: np.ndarray
    params: ModelParams = field(repr=False)

    @property
    def n_blocks(self) -> int:
        return int(self.z.sum())

    def block_windows(self) -> list[int]:
        """0-based indices of windows carrying a block, in increasing order."""
        return [int(i) for i in np.flatnonzero(self.z)]


@dataclass(frozen=True)
class ReplacementDraw:
    m_index: int
    block_index: int
    block_window: tuple[int, int]
    x_tilde: np.ndarray


@dataclass(frozen=True)
class CouplingChain:
    """``levels[l]`` is X(l): the string carrying exactly ``l`` blocks."""

    levels: list
    removal_order: list
    x_star: np.ndarray
    block_symbols: np.ndarray
    params: ModelParams = field(repr=False)


def gen_iid(length, k, seed):
    k = _check_k(k)
    if length < 0:
        raise ValidationError("length", f"must be >= 0, got {length}")
    rng = rng_for(seed)
    return _frozen(rng.integers(0, k, size=int(length), dtype=letter_dtype(k)))


def place_blocks(x_star, z, block_symbols, params: ModelParams):
    x_star = np.asarray(x_star)
    z = np.asarray(z)
    block_symbols = np.asarray(block_symbols)
    if x_star.shape != (params.n,):
        raise ShapeError(f"x_star has shape {x_star.shape}, expected ({params.n},)")
    if z.shape != (params.m,) or block_symbols.shape != (params.m,):
        raise ShapeError(f"z and block_symbols must have shape ({params.m},)")
    x = x_star.copy()
    for i in np.flatnonzero(z):
        x[params.window_slice(int(i))] = block_symbols[i]
    return _frozen(x)


def sample_pair(params: ModelParams, seed, force_z=None) -> StringSample:
    """Draw (X*, Z, X, Y). ``force_z`` pins the block indicators, leaving the other streams intact."""
    seed = check_seed(seed)
    x_star = gen_iid(params.n, params.k, derive_seed(seed, _X_STAR))
    if force_z is None:
        z = rng_for(seed, _Z).random(params.m) < params.p
    else:
        z = np.asarray(force_z, dtype=bool)
        if z.shape != (params.m,):
            raise ShapeError(f"force_z must have shape ({params.m},)")
    z = _frozen(z.astype(np.uint8))
    symbols = gen_iid(params.m, params.k, derive_seed(seed, _SYMBOLS))
    y = gen_iid(params.n, params.k, derive_seed(seed, _Y))
    x = place_blocks(x_star, z, symbols, params)
    return StringSample(x_star=x_star, z=z, x=x, y=y, block_symbols=symbols, params=params)


def replace_random_block(sample: StringSample, seed) -> ReplacementDraw:
    """Revert one uniformly chosen block of ``sample.x`` to its iid content from ``x_star``."""
    blocks = sample.block_windows()
    if not blocks:
        raise NoBlockError("sample has no long block to replace")
    rng = rng_for(seed)
    j = int(rng.integers(len(blocks)))
    i = blocks[j]
    sl = sample.params.window_slice(i)
    x_tilde = sample.x.copy()
    x_tilde[sl] = sample.x_star[sl]
    return ReplacementDraw(
        m_index=j + 1,
        block_index=i + 1,
        block_window=sample.params.window(i + 1),
        x_tilde=_frozen(x_tilde),
    )


def resample_block_content(sample: StringSample, seed) -> StringSample:
    """Fresh iid letters for ``x_star`` on every block-carrying window.

    ``x`` does not depend on ``x_star`` there, so the result has the law of
    ``sample`` conditional on (X, Y).
    """
    x_star = sample.x_star.copy()
    rng = rng_for(seed)
    for i in sample.block_windows():
        sl = sample.params.window_slice(i)
        x_star[sl] = rng.integers(0, sample.params.k, size=sl.stop - sl.start, dtype=x_star.dtype)
    return StringSample(
        x_star=_frozen(x_star),
        z=sample.z,
        x=sample.x,
        y=sample.y,
        block_symbols=sample.block_symbols,
        params=sample.params,
    )


def build_coupling_chain(params: ModelParams, seed) -> CouplingChain:
    seed = check_seed(seed)
    x_star = gen_iid(params.n, params.k, derive_seed(seed, _X_STAR))
    symbols = gen_iid(params.m, params.k, derive_seed(seed, _SYMBOLS))
    order = [int(i) for i in rng_for(seed, _Z).permutation(params.m)]
    current = place_blocks(x_star, np.ones(params.m, dtype=np.uint8), symbols, params)
    levels = [current]
    for i in order:
        nxt = current.copy()
        sl = params.window_slice(i)
        nxt[sl] = x_star[sl]
        current = _frozen(nxt)
        levels.append(current)
    levels.reverse()
    return CouplingChain(
        levels=levels, removal_order=order, x_star=x_star, block_symbols=symbols, params=params
    )


def to_text(seq, k):
    if k > len(DIGITS):
        raise ValidationError("k", f"text dumps support k <= {len(DIGITS)}")
    return "".join(DIGITS[int(c)] for c in seq)


def from_text(line, k):
    if k > len(DIGITS):
        raise ValidationError("k", f"text dumps support k <= {len(DIGITS)}")
    values = [DIGITS.index(ch) for ch in line.strip()]
    if any(v >= k for v in values):
        raise ValidationError("text", f"letter out of range for k={k}")
    return np.array(values, dtype=letter_dtype(k))


def dump_sample(sample: StringSample) -> str:
    """Lines: x_star, z, block_symbols, x, y."""
    k = sample.params.k
    lines = [
        to_text(sample.x_star, k),
        to_text(sample.z, 2),
        to_text(sample.block_symbols, k),
        to_text(sample.x, k),
        to_text(sample.y, k),
    ]
    return "\n".join(lines) + "\n"


def load_sample(text: str, params: ModelParams) -> StringSample:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != 5:
        raise ShapeError(f"expected 5 lines, got {len(lines)}")
    k = params.k
    x_star = from_text(lines[0], k)
    z = from_text(lines[1], 2).astype(np.uint8)
    symbols = from_text(lines[2], k)
    x = place_blocks(x_star, z, symbols, params)
    if not np.array_equal(x, from_text(lines[3], k)):
        raise ShapeError("x line is inconsistent with x_star, z and block_symbols")
    y = from_text(lines[4], k)
    if y.shape != (params.n,):
        raise ShapeError(f"y has length {len(y)}, expected {params.n}")
    return StringSample(
        x_star=_frozen(x_star), z=_frozen(z), x=x, y=_frozen(y),
        block_symbols=_frozen(symbols), params=params,
    )
