import math
from itertools import product

import numpy as np
import pytest

from lcsfluct import FitError, ModelParams, NoSolutionError, ValidationError, lcs_oracle
from lcsfluct import estimators as est
from lcsfluct.estimators import MeanCurveEstimate, MeanCurvePoint


def test_string_lengths_truncate_toward_zero():
    assert est.string_lengths(2000, 0.3) == (1400, 2600)
    assert est.string_lengths(2000, -0.3) == (2600, 1400)
    assert est.string_lengths(10, 0.25) == (8, 12)
    assert est.string_lengths(10, -0.25) == (12, 8)
    assert est.string_lengths(7, 1.0) == (0, 14)


def test_gamma_point_empty_string():
    p = est.estimate_gamma_point(2, 50, 1.0, 5, seed=1)
    assert p.gamma_hat == 0.0 and p.stderr == 0.0


def test_gamma_point_matches_enumeration():
    pairs = list(product(product(range(2), repeat=2), repeat=2))
    exact = sum(lcs_oracle(a, b) for a, b in pairs) / len(pairs) / 2
    assert exact == 9 / 16
    p = est.estimate_gamma_point(2, 2, 0.0, 20000, seed=3)
    assert abs(p.gamma_hat - exact) <= 4 * p.stderr


def test_gamma_point_bounds():
    for q in (-0.5, 0.0, 0.3):
        p = est.estimate_gamma_point(3, 40, q, 30, seed=4)
        la, lb = est.string_lengths(40, q)
        assert 0 <= p.gamma_hat * p.n <= min(la, lb)


def test_mean_curve_grid_validation():
    with pytest.raises(ValidationError):
        est.estimate_mean_curve(2, 50, [0.0, 0.1], 4, seed=0)
    with pytest.raises(ValidationError):
        est.estimate_mean_curve(2, 50, [-0.1, 0.1], 4, seed=0)


def test_mean_curve_shape_probes():
    grid = [round(0.1 * i, 1) for i in range(-6, 7)]
    curve = est.estimate_mean_curve(2, 300, grid, 60, seed=5)
    assert all(r["ok"] for r in est.symmetry_probe(curve))
    assert all(r["ok"] for r in est.concavity_probe(curve))
    assert len(curve.derivative_probe) == 6
    longer = est.estimate_mean_curve(2, 600, grid, 60, seed=6)
    assert all(r["ok"] for r in est.subadditivity_probe(curve, longer))


def test_fit_rate_curve_exact():
    ns = np.array([100, 400, 1600, 6400])
    a, b = 0.8, 0.37
    values = a - b * np.sqrt(np.log(ns) / ns)
    fa, fb = est.fit_rate_curve(ns, values)
    assert abs(fa - a) < 1e-10 and abs(fb - b) < 1e-10
    with pytest.raises(FitError):
        est.fit_rate_curve([10, 20], [0.5, 0.6])
    with pytest.raises(FitError):
        est.fit_gamma_star(2, [10, 20], 5, seed=0)


def synthetic_curve(values, star=None):
    points = [MeanCurvePoint(q=q, n=100, reps=10, gamma_hat=v, stderr=0.0) for q, v in values]
    centre = dict(values)[0.0]
    return MeanCurveEstimate(points=points, gamma_star_hat=centre if star is None else star, gamma_star_stderr=0.0)


def tent(q):
    return 0.8 - 0.5 * abs(q)


def test_solve_q_e_knot_and_inverse():
    grid = [round(0.1 * i, 1) for i in range(-10, 11)]
    curve = synthetic_curve([(q, tent(q)) for q in grid])
    assert est.solve_q_e(curve, tent(0.4)) == pytest.approx(0.4, abs=1e-12)
    for target in (0.77, 0.61, 0.43, 0.31):
        assert est.solve_q_e(curve, target) == pytest.approx((0.8 - target) / 0.5, abs=1e-12)


def test_solve_q_e_monotone_and_errors():
    grid = [round(0.1 * i, 1) for i in range(-10, 11)]
    curve = synthetic_curve([(q, 0.8 - 0.3 * q * q - 0.2 * abs(q)) for q in grid])
    assert est.solve_q_e(curve, 0.5) > est.solve_q_e(curve, 0.6) > est.solve_q_e(curve, 0.7)
    with pytest.raises(NoSolutionError):
        est.solve_q_e(curve, 0.8)
    with pytest.raises(NoSolutionError):
        est.solve_q_e(curve, 0.1)


def test_fit_scaling_slope_exact():
    ns = [256, 512, 1024, 2048]
    slope, intercept, se = est.fit_scaling_slope([(n, 0.35 * n, 0.01 * 0.35 * n) for n in ns])
    assert abs(slope - 1.0) < 1e-10 and abs(intercept - math.log(0.35)) < 1e-10
    assert se > 0
    slope, _, _ = est.fit_scaling_slope([(n, 2.0 * n ** (2 / 3), 0.1) for n in ns])
    assert abs(slope - 2 / 3) < 1e-10


def test_fit_scaling_slope_noisy():
    rng = np.random.default_rng(9)
    ns = np.array([128, 256, 512, 1024, 2048, 4096])
    hits = 0
    for _ in range(200):
        var = 0.4 * ns * (1 + 0.05 * rng.standard_normal(len(ns)))
        slope, _, se = est.fit_scaling_slope([(n, v, 0.05 * v) for n, v in zip(ns, var)])
        hits += abs(slope - 1.0) <= 3 * se
    assert hits >= 196  # 3-sigma coverage ~ 99.7%


def test_fit_scaling_slope_errors():
    with pytest.raises(FitError):
        est.fit_scaling_slope([(1, 1, 0.1), (2, 2, 0.1)])
    with pytest.raises(FitError):
        est.fit_scaling_slope([(1, 1, 0.1), (2, 0, 0.1), (4, 3, 0.1)])


def test_bias_small_config():
    params = ModelParams(k=2, d=16, beta=0.75, p=0.5, m=6)
    b = est.estimate_bias(params, 60, 4, seed=2)
    assert b.ci95[0] <= b.mean_delta <= b.ci95[1]
    assert b.max_abs_delta <= params.ell + 1
    assert b.kappa_hat == pytest.approx(b.mean_delta / 16**0.75)
    with pytest.raises(ValidationError):
        est.estimate_bias(params, 0, 4, seed=2)


def test_bias_zero_probability_rejected():
    with pytest.raises(ValidationError):
        est.estimate_bias(ModelParams(k=2, d=16, beta=0.75, p=0.0, m=6), 10, 2, seed=0)


def test_one_block_monotone_in_threshold():
    gains = est.one_block_increases(16, 2, 0.75, 32, 500, seed=4)
    freqs = [np.mean(gains >= kg * 16**0.75) for kg in (0.0, 0.1, 0.2, 0.4)]
    assert all(a >= b for a, b in zip(freqs, freqs[1:]))
    assert est.estimate_one_block_bias(16, 2, 0.75, 32, 0.0, 500, seed=4) == freqs[0]


def test_one_block_bias_trend_in_d():
    reps = 2000
    freqs = [est.estimate_one_block_bias(d, 2, 0.75, 2 * d, 0.1, reps, seed=11) for d in (16, 32, 64)]
    sig = [math.sqrt(f * (1 - f) / reps) for f in freqs]
    for i in range(2):
        assert freqs[i + 1] >= freqs[i] - 3 * math.hypot(sig[i], sig[i + 1])
    assert freqs[2] - freqs[0] > 3 * math.hypot(sig[0], sig[2])


def test_one_block_bias_gap_interval_check():
    with pytest.raises(ValidationError):
        est.estimate_one_block_bias(8, 2, 0.75, 60, 0.1, 10, seed=0, q_e=0.2)


def test_one_block_bias_seed_consistency():
    reps = 10**5
    a = est.estimate_one_block_bias(8, 2, 0.75, 16, 0.3, reps, seed=101)
    b = est.estimate_one_block_bias(8, 2, 0.75, 16, 0.3, reps, seed=202)
    pool = (a + b) / 2
    assert abs(a - b) <= 3 * math.sqrt(2 * pool * (1 - pool) / reps)


def test_variance_degenerate_constant_strings():
    n = 64
    values = [est._lcs(np.zeros(n, dtype=np.uint8), np.zeros(n, dtype=np.uint8), 2) for _ in range(40)]
    v = est.variance_from_values(values, n, seed=0)
    assert v.var_hat == 0.0 and v.stderr == 0.0


def test_variance_steele_and_validation():
    v = est.estimate_variance(est.IidSpec(k=2, n=128), 200, seed=3)
    assert 0 <= v.var_hat <= v.n + 3 * v.stderr
    with pytest.raises(ValidationError):
        est.estimate_variance(est.IidSpec(k=2, n=128), 10, seed=3)


def test_binomial_tail_against_scipy():
    from scipy.stats import binom

    for m, p in ((10, 0.3), (16, 0.5), (7, 0.9)):
        t = math.ceil(m * p / 2)
        assert est.binomial_tail_at_least(m, p, m * p / 2) == pytest.approx(binom.sf(t - 1, m, p), abs=1e-12)


def test_event_frequencies():
    params = ModelParams(k=2, d=4, beta=0.75, p=0.3, m=6)
    reps = 400
    ev = est.event_frequencies(params, 0.4, 0.1, reps, seed=1, kappa_hat=0.1, inner_reps=2)
    sigma = math.sqrt(ev.binom_tail_O * (1 - ev.binom_tail_O) / reps)
    assert abs(ev.freq_O - ev.binom_tail_O) <= 4 * sigma
    assert 1 - ev.freq_O <= math.exp(-params.m * params.p**2 / 2) + 4 * sigma
    for f in (ev.freq_O, ev.freq_K, ev.freq_Q_at_opt):
        assert 0 <= f <= 1
    vacuous = est.event_frequencies(params, 0.4, 100.0, 50, seed=2)
    assert vacuous.freq_K == 1.0
    assert math.isnan(vacuous.freq_Q_at_opt)


def test_coupling_path_stats():
    params = ModelParams(k=2, d=16, beta=0.75, p=0.5, m=6)
    stats = est.coupling_path_stats(params, 40, seed=3)
    assert [lvl for lvl, *_ in stats.levels] == list(range(7))
    assert len(stats.increments) == 6
    assert stats.max_abs_increment <= params.ell + 1
    other = est.coupling_path_stats(ModelParams(k=2, d=16, beta=0.75, p=0.1, m=6), 40, seed=3)
    assert other.levels == stats.levels  # the chain never looks at p


def test_workers_do_not_change_results():
    params = ModelParams(k=2, d=8, beta=0.75, p=0.5, m=4)
    assert est.estimate_bias(params, 12, 2, seed=5, workers=1) == est.estimate_bias(params, 12, 2, seed=5, workers=3)
