"""Monte Carlo estimators for the mean curve, the replacement bias, variance and events."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from lcsfluct.errors import FitError, NoSolutionError, ValidationError
from lcsfluct.lcs import lcs_with_masks, match_masks
from lcsfluct.model import (
    ModelParams,
    _check_k,
    build_coupling_chain,
    gen_iid,
    letter_dtype,
    place_blocks,
    replace_random_block,
    resample_block_content,
    sample_pair,
)
from lcsfluct.parallel import map_replicates
from lcsfluct.partition import decide_K, delta_scores, optimal_partition, piece_tables
from lcsfluct.seeding import check_seed, derive_seed, rng_for

Z95 = 1.959963984540054
MAX_REJECTIONS = 100_000

# stream labels under a replicate seed
_S_A, _S_B, _S_BOOT, _S_OUTER, _S_CONTENT, _S_CHOICE = range(6)


def _lcs(a, b, k):
    return lcs_with_masks(a, match_masks(b, k), len(b))


def _mean_stderr(values):
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


@dataclass(frozen=True)
class IidSpec:
    """Plain model: two independent uniform iid strings of length ``n``."""

    k: int
    n: int

    def __post_init__(self):
        _check_k(self.k)
        if self.n < 1:
            raise ValidationError("n", f"must be >= 1, got {self.n}")


# ---------------------------------------------------------------- mean curve


@dataclass(frozen=True)
class MeanCurvePoint:
    q: float
    n: int
    reps: int
    gamma_hat: float
    stderr: float


@dataclass(frozen=True)
class GammaStarFit:
    k: int
    points: list
    gamma_star_hat: float
    gamma_star_stderr: float
    rate_coef: float


@dataclass(frozen=True)
class MeanCurveEstimate:
    points: list
    gamma_star_hat: float
    gamma_star_stderr: float
    derivative_probe: list = field(default_factory=list)

    def branch(self):
        """Points with q >= 0 sorted by q."""
        return sorted((p for p in self.points if p.q >= -1e-12), key=lambda p: p.q)

    def at(self, q):
        for p in self.points:
            if abs(p.q - q) < 1e-9:
                return p
        raise KeyError(q)


def string_lengths(n, q):
    """Lengths ``(n - t, n + t)`` with ``t = n*q`` truncated toward zero."""
    if not -1.0 <= q <= 1.0:
        raise ValidationError("q", f"must lie in [-1, 1], got {q}")
    t = math.trunc(round(n * q, 9))
    return n - t, n + t


def _gamma_replicate(seed, k, la, lb, n):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, k, la, dtype=letter_dtype(k))
    b = rng.integers(0, k, lb, dtype=letter_dtype(k))
    return _lcs(a, b, k) / n


def gamma_values(k, n, q, reps, seed, workers=1):
    la, lb = string_lengths(n, q)
    fn = partial(_gamma_replicate, k=k, la=la, lb=lb, n=n)
    return np.array(map_replicates(fn, reps, seed, workers))


def estimate_gamma_point(k, n, q, reps, seed, workers=1) -> MeanCurvePoint:
    _check_k(k)
    if n < 1:
        raise ValidationError("n", f"must be >= 1, got {n}")
    if reps < 2:
        raise ValidationError("reps", f"need at least 2 replicates, got {reps}")
    mean, se = _mean_stderr(gamma_values(k, n, q, reps, seed, workers))
    return MeanCurvePoint(q=float(q), n=int(n), reps=int(reps), gamma_hat=mean, stderr=se)


def estimate_mean_curve(k, n, q_grid, reps, seed, workers=1, gamma_star=None) -> MeanCurveEstimate:
    """Curve over a symmetric q-grid. ``gamma_star`` (value, stderr) overrides the q=0 point."""
    q_grid = [float(q) for q in q_grid]
    qs = sorted(round(q, 9) for q in q_grid)
    if qs != sorted(round(-q, 9) for q in q_grid):
        raise ValidationError("q_grid", "grid must be symmetric about 0")
    if not any(abs(q) < 1e-12 for q in q_grid):
        raise ValidationError("q_grid", "grid must contain q = 0")
    points = [estimate_gamma_point(k, n, q, reps, derive_seed(seed, i), workers) for i, q in enumerate(q_grid)]
    centre = next(p for p in points if abs(p.q) < 1e-12)
    star, star_se = gamma_star if gamma_star is not None else (centre.gamma_hat, centre.stderr)
    by_q = {round(p.q, 9): p for p in points}
    probe = []
    for h in sorted(q for q in by_q if q > 0):
        right = (by_q[h].gamma_hat - centre.gamma_hat) / h
        left = (centre.gamma_hat - by_q[-h].gamma_hat) / h
        probe.append({"h": h, "right_slope": right, "left_slope": left})
    return MeanCurveEstimate(points=points, gamma_star_hat=star, gamma_star_stderr=star_se, derivative_probe=probe)


def fit_rate_curve(ns, values):
    """Least squares of ``values = a - b*sqrt(log n / n)``; returns ``(a, b)``."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(ns) < 3:
        raise FitError(f"need at least 3 grid points, got {len(ns)}")
    rate = np.sqrt(np.log(ns) / ns)
    design = np.column_stack([np.ones_like(rate), -rate])
    (a, b), *_ = np.linalg.lstsq(design, values, rcond=None)
    return float(a), float(b)


def fit_gamma_star(k, n_grid, reps, seed, workers=1, n_boot=400) -> GammaStarFit:
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 3:
        raise FitError(f"need at least 3 grid points, got {len(n_grid)}")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValidationError("n_grid", "grid must be strictly increasing")
    samples = [gamma_values(k, n, 0.0, reps, derive_seed(seed, i), workers) for i, n in enumerate(n_grid)]
    points = []
    for n, vals in zip(n_grid, samples):
        mean, se = _mean_stderr(vals)
        points.append(MeanCurvePoint(q=0.0, n=n, reps=reps, gamma_hat=mean, stderr=se))
    a, b = fit_rate_curve(n_grid, [p.gamma_hat for p in points])
    rng = rng_for(seed, len(n_grid), _S_BOOT)
    boots = np.empty(n_boot)
    for j in range(n_boot):
        means = [vals[rng.integers(0, len(vals), len(vals))].mean() for vals in samples]
        boots[j] = fit_rate_curve(n_grid, means)[0]
    return GammaStarFit(k=k, points=points, gamma_star_hat=a, gamma_star_stderr=float(boots.std(ddof=1)), rate_coef=b)


def solve_q_e(curve: MeanCurveEstimate, gamma_e) -> float:
    """Invert the q >= 0 branch by linear interpolation on its running minimum."""
    if gamma_e >= curve.gamma_star_hat:
        raise NoSolutionError(f"gamma_e={gamma_e} must be below gamma* estimate {curve.gamma_star_hat}")
    branch = curve.branch()
    if len(branch) < 2 or abs(branch[0].q) > 1e-12:
        raise NoSolutionError("curve must cover q = 0 and at least one q > 0")
    qs = np.array([p.q for p in branch])
    vals = np.minimum.accumulate(np.array([p.gamma_hat for p in branch]))
    if gamma_e >= vals[0]:
        raise NoSolutionError(f"gamma_e={gamma_e} is not below the curve value at q=0 ({vals[0]})")
    if gamma_e < vals[-1]:
        raise NoSolutionError(f"curve does not reach down to gamma_e={gamma_e} (min {vals[-1]})")
    for i in range(1, len(qs)):
        if vals[i] <= gamma_e:
            if vals[i] == gamma_e or vals[i - 1] == vals[i]:
                return float(qs[i])
            frac = (vals[i - 1] - gamma_e) / (vals[i - 1] - vals[i])
            return float(qs[i - 1] + frac * (qs[i] - qs[i - 1]))
    raise NoSolutionError("no crossing found")  # unreachable given the range checks


def symmetry_probe(curve: MeanCurveEstimate):
    rows = []
    for p in curve.points:
        if p.q <= 0:
            continue
        mirror = curve.at(-p.q)
        diff = abs(p.gamma_hat - mirror.gamma_hat)
        bound = 3 * (p.stderr + mirror.stderr)
        rows.append({"q": p.q, "diff": diff, "bound": bound, "ok": diff <= bound})
    return rows


def concavity_probe(curve: MeanCurveEstimate):
    branch = curve.branch()
    rows = []
    for lo, mid, hi in zip(branch, branch[1:], branch[2:]):
        w = (mid.q - lo.q) / (hi.q - lo.q)
        chord = (1 - w) * lo.gamma_hat + w * hi.gamma_hat
        slack = 3 * math.sqrt(mid.stderr**2 + ((1 - w) * lo.stderr) ** 2 + (w * hi.stderr) ** 2)
        rows.append({"q": mid.q, "mid": mid.gamma_hat, "chord": chord, "slack": slack,
                     "ok": mid.gamma_hat >= chord - slack})
    return rows


def subadditivity_probe(short: MeanCurveEstimate, long: MeanCurveEstimate):
    """gamma_hat(n, q) should not fall below gamma_hat(2n, q) beyond noise; compare matched q."""
    rows = []
    for p in short.points:
        try:
            other = long.at(p.q)
        except KeyError:
            continue
        bound = 3 * math.sqrt(p.stderr**2 + other.stderr**2)
        rows.append({"q": p.q, "short": p.gamma_hat, "long": other.gamma_hat,
                     "ok": p.gamma_hat <= other.gamma_hat + bound})
    return rows


# -------------------------------------------------------------------- bias


@dataclass(frozen=True)
class BiasEstimate:
    d: int
    mean_delta: float
    ci95: tuple
    kappa_hat: float
    reps: int
    inner_reps: int = 0
    rejections: int = 0
    max_abs_delta: int = 0


def _bias_replicate(seed, params, inner_reps):
    for attempt in range(MAX_REJECTIONS):
        sample = sample_pair(params, derive_seed(seed, _S_OUTER, attempt))
        if sample.n_blocks:
            break
    else:
        raise RuntimeError("no block drawn; p too small for rejection sampling")
    masks = match_masks(sample.y, params.k)
    base = lcs_with_masks(sample.x, masks, params.n)
    deltas = []
    for r in range(inner_reps):
        fresh = resample_block_content(sample, derive_seed(seed, _S_CONTENT, r))
        draw = replace_random_block(fresh, derive_seed(seed, _S_CHOICE, r))
        deltas.append(lcs_with_masks(draw.x_tilde, masks, params.n) - base)
    return float(np.mean(deltas)), attempt, int(np.max(np.abs(deltas)))


def estimate_bias(params: ModelParams, reps, inner_reps, seed, workers=1) -> BiasEstimate:
    """Mean over (X, Y) of the Monte Carlo conditional gain E(LCS(X~,Y) - LCS(X,Y) | X, Y), given N >= 1."""
    if reps < 1 or inner_reps < 1:
        raise ValidationError("reps", "reps and inner_reps must be >= 1")
    out = map_replicates(partial(_bias_replicate, params=params, inner_reps=inner_reps), reps, seed, workers)
    gains = np.array([o[0] for o in out])
    mean, se = _mean_stderr(gains)
    return BiasEstimate(
        d=params.d,
        mean_delta=mean,
        ci95=(mean - Z95 * se, mean + Z95 * se),
        kappa_hat=mean / params.d ** params.beta,
        reps=reps,
        inner_reps=inner_reps,
        rejections=int(sum(o[1] for o in out)),
        max_abs_delta=int(max(o[2] for o in out)),
    )


def _one_block_replicate(seed, params, j):
    rng = np.random.default_rng(seed)
    dtype = letter_dtype(params.k)
    x_star = rng.integers(0, params.k, params.n, dtype=dtype)
    symbol = rng.integers(0, params.k, 1, dtype=dtype)
    x = place_blocks(x_star, np.ones(1, dtype=np.uint8), symbol, params)
    y = rng.integers(0, params.k, j, dtype=dtype)
    masks = match_masks(y, params.k)
    return lcs_with_masks(x_star, masks, j) - lcs_with_masks(x, masks, j)


def one_block_increases(d, k, beta, j, reps, seed, workers=1):
    """Per-sample gain from reverting the single centred block of a length-2d string, against iid Y of length j."""
    params = ModelParams(k=k, d=d, beta=beta, p=0.5, m=1)
    if j < 0:
        raise ValidationError("j", f"must be >= 0, got {j}")
    return np.array(map_replicates(partial(_one_block_replicate, params=params, j=j), reps, seed, workers))


def estimate_one_block_bias(d, k, beta, j, kappa_guess, reps, seed, q_e=None, workers=1) -> float:
    if q_e is not None:
        from lcsfluct.partition import GapInterval

        if not GapInterval.for_window(d, q_e).contains(j):
            raise ValidationError("j", f"length {j} is outside the admissible gap interval for q_e={q_e}")
    gains = one_block_increases(d, k, beta, j, reps, seed, workers)
    return float(np.mean(gains >= kappa_guess * d ** beta))


# ---------------------------------------------------------------- variance


@dataclass(frozen=True)
class VarianceEstimate:
    n: int
    var_hat: float
    stderr: float
    reps: int
    mean: float = 0.0


def variance_from_values(values, n, seed, n_boot=500) -> VarianceEstimate:
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        raise ValidationError("reps", "need at least 2 values for a variance")
    rng = rng_for(seed, _S_BOOT)
    boots = np.empty(n_boot)
    for j in range(n_boot):
        boots[j] = values[rng.integers(0, len(values), len(values))].var(ddof=1)
    return VarianceEstimate(n=int(n), var_hat=float(values.var(ddof=1)), stderr=float(boots.std(ddof=1)),
                            reps=len(values), mean=float(values.mean()))


def _variance_replicate(seed, model):
    if isinstance(model, ModelParams):
        s = sample_pair(model, seed)
        return _lcs(s.x, s.y, model.k)
    a = gen_iid(model.n, model.k, derive_seed(seed, _S_A))
    b = gen_iid(model.n, model.k, derive_seed(seed, _S_B))
    return _lcs(a, b, model.k)


def estimate_variance(model, reps, seed, workers=1, n_boot=500) -> VarianceEstimate:
    """Sample variance of LC_n under ``model`` (ModelParams or IidSpec), bootstrap stderr."""
    if reps < 30:
        raise ValidationError("reps", f"need at least 30 replicates, got {reps}")
    values = map_replicates(partial(_variance_replicate, model=model), reps, seed, workers)
    return variance_from_values(values, model.n, seed, n_boot=n_boot)


def fit_scaling_slope(pairs):
    """Weighted least squares of log var on log n; returns (slope, intercept, slope_stderr)."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise FitError(f"need at least 3 points, got {len(pairs)}")
    n = np.array([p[0] for p in pairs], dtype=float)
    var = np.array([p[1] for p in pairs], dtype=float)
    se = np.array([p[2] for p in pairs], dtype=float)
    if np.any(var <= 0):
        raise FitError("variances must be positive for a log-log fit")
    sigma = se / var  # delta method: sd(log V) ~ sd(V) / V
    if np.all(sigma == 0):
        sigma = np.ones_like(sigma)
    elif np.any(sigma <= 0):
        raise FitError("stderr must be positive for every point (or zero for all)")
    w = 1.0 / sigma**2
    design = np.column_stack([np.ones_like(n), np.log(n)])
    cov = np.linalg.inv(design.T @ (design * w[:, None]))
    intercept, slope = cov @ (design.T @ (w * np.log(var)))
    return float(slope), float(intercept), float(math.sqrt(cov[1, 1]))


# ------------------------------------------------------------------ events


@dataclass(frozen=True)
class EventFrequencies:
    freq_O: float
    freq_K: float
    freq_Q_at_opt: float
    eps: float
    q_e: float
    reps: int
    binom_tail_O: float = 0.0
    kappa_hat: float | None = None


def binomial_tail_at_least(m, p, threshold):
    """P(Bin(m, p) >= threshold) exactly."""
    lo = max(0, math.ceil(threshold - 1e-12))
    return float(sum(math.comb(m, j) * p**j * (1 - p) ** (m - j) for j in range(lo, m + 1)))


def _event_replicate(seed, params, q_e, eps, kappa_hat, inner_reps):
    sample = sample_pair(params, seed)
    has_o = sample.n_blocks >= params.m * params.p / 2
    tables = piece_tables(sample.x, sample.y, params.d)
    score, r_hat = optimal_partition(sample.x, sample.y, params.d, tables=tables)
    has_k = decide_K(sample.x, sample.y, params, q_e, eps, tables=tables, lcs_value=score)
    has_q = False
    if kappa_hat is not None and sample.n_blocks:
        gains = []
        for r in range(inner_reps):
            fresh = resample_block_content(sample, derive_seed(seed, _S_CONTENT, r))
            gains.append(delta_scores(fresh, replace_random_block(fresh, derive_seed(seed, _S_CHOICE, r)), r_hat).total)
        target = params.d ** params.beta * (kappa_hat * (1 - 2 * eps) - 2 * eps)
        has_q = float(np.mean(gains)) >= target
    return has_o, has_k, has_q


def event_frequencies(params: ModelParams, q_e, eps, reps, seed, kappa_hat=None, inner_reps=8, workers=1):
    """Frequencies of O^n, K^n(eps), and the Q-condition evaluated at the observed optimal partition."""
    if reps < 1:
        raise ValidationError("reps", f"must be >= 1, got {reps}")
    if eps <= 0:
        raise ValidationError("eps", f"must be > 0, got {eps}")
    if not 0 < q_e < 1:
        raise ValidationError("q_e", f"must lie in (0, 1), got {q_e}")
    fn = partial(_event_replicate, params=params, q_e=q_e, eps=eps, kappa_hat=kappa_hat, inner_reps=inner_reps)
    out = np.array(map_replicates(fn, reps, seed, workers), dtype=float).reshape(reps, 3)
    freq_q = float(out[:, 2].mean()) if kappa_hat is not None else float("nan")
    return EventFrequencies(
        freq_O=float(out[:, 0].mean()),
        freq_K=float(out[:, 1].mean()),
        freq_Q_at_opt=freq_q,
        eps=eps,
        q_e=q_e,
        reps=reps,
        binom_tail_O=binomial_tail_at_least(params.m, params.p, params.m * params.p / 2),
        kappa_hat=kappa_hat,
    )


# ---------------------------------------------------------- coupling path


@dataclass(frozen=True)
class CouplingPathStats:
    levels: list  # (level, mean, stderr) for level = 0..m
    increments: list  # (level, mean of LC(level-1) - LC(level), stderr) for level = 1..m
    reps: int
    max_abs_increment: int = 0


def _coupling_replicate(seed, params):
    chain = build_coupling_chain(params, derive_seed(seed, _S_A))
    y = gen_iid(params.n, params.k, derive_seed(seed, _S_B))
    masks = match_masks(y, params.k)
    return [lcs_with_masks(level, masks, params.n) for level in chain.levels]


def coupling_path_stats(params: ModelParams, reps, seed, workers=1) -> CouplingPathStats:
    if reps < 30:
        raise ValidationError("reps", f"need at least 30 replicates, got {reps}")
    values = np.array(map_replicates(partial(_coupling_replicate, params=params), reps, seed, workers))
    levels = [(lvl, *_mean_stderr(values[:, lvl])) for lvl in range(params.m + 1)]
    inc = values[:, :-1] - values[:, 1:]
    increments = [(lvl, *_mean_stderr(inc[:, lvl - 1])) for lvl in range(1, params.m + 1)]
    return CouplingPathStats(levels=levels, increments=increments, reps=reps,
                             max_abs_increment=int(np.abs(inc).max()) if inc.size else 0)


def variance_floor_diagnostic(mean_increment, params: ModelParams):
    """(mean per-block gain)^2 * m p (1-p): the linear-in-n variance floor implied by a steady gain."""
    return mean_increment**2 * params.m * params.p * (1 - params.p)
