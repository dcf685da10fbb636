"""Built-in oracle-agreement and invariant checks, run by ``lcsfluct selftest``."""

from itertools import combinations_with_replacement

import numpy as np

from lcsfluct.lcs import lcs_bitparallel, lcs_dp, lcs_lpp_oracle, lcs_oracle
from lcsfluct.model import ModelParams, build_coupling_chain, place_blocks, replace_random_block, sample_pair
from lcsfluct.partition import (
    Partition,
    decide_K,
    max_score_outside_R,
    optimal_partition,
    partition_diagnostics,
    score_partition,
)
from lcsfluct.seeding import derive_seed, rng_for


def all_partitions(n, m):
    for inner in combinations_with_replacement(range(n + 1), m - 1):
        yield Partition((0, *inner, n))


def _worked_examples(seed, reps):
    x, y = "101010111111", "001010011110"
    got = (lcs_dp("heinrich", "enerico"), lcs_dp(x, y), score_partition(x, y, Partition((0, 2, 12)), 3),
           optimal_partition(x, y, 3)[0])
    return got == (5, 9, 8, 9), f"got {got}"


def _engines(seed, reps):
    rng = rng_for(seed, 1)
    for _ in range(reps):
        k = int(rng.choice([2, 4, 20]))
        a = rng.integers(0, k, int(rng.integers(0, 97)))
        b = rng.integers(0, k, int(rng.integers(0, 97)))
        ref = lcs_dp(a, b)
        if not ref == lcs_bitparallel(a, b, k) == lcs_lpp_oracle(a, b):
            return False, f"disagreement on k={k}, |a|={len(a)}, |b|={len(b)}"
        a, b = a[:10], b[:10]
        if lcs_oracle(a, b) != lcs_dp(a, b):
            return False, "exhaustive oracle disagreement"
    return True, f"{reps} pairs"


def _partitions(seed, reps):
    rng = rng_for(seed, 2)
    for _ in range(max(1, reps // 2)):
        d = int(rng.choice([2, 3]))
        m = int(rng.integers(1, 4))
        n = 2 * d * m
        x, y = rng.integers(0, 2, n), rng.integers(0, 2, n)
        params = ModelParams(k=2, d=d, beta=0.75, p=float(rng.uniform(0.2, 0.8)), m=m)
        q_e, eps = float(rng.uniform(0.05, 0.6)), float(rng.uniform(0.05, 0.6))
        parts = list(all_partitions(n, m))
        scores = [score_partition(x, y, r, d) for r in parts]
        best = max(scores)
        outside = [s for s, r in zip(scores, parts) if not partition_diagnostics(r, params, q_e, eps).in_R_eps]
        brute_k = all(partition_diagnostics(r, params, q_e, eps).in_R_eps for s, r in zip(scores, parts) if s == best)
        if optimal_partition(x, y, d)[0] != best or best != lcs_dp(x, y):
            return False, "optimal_partition mismatch"
        if max_score_outside_R(x, y, params, q_e, eps) != (max(outside) if outside else None):
            return False, "max_score_outside_R mismatch"
        if decide_K(x, y, params, q_e, eps) != brute_k:
            return False, "decide_K mismatch"
    return True, f"{max(1, reps // 2)} instances"


def _model(seed, reps):
    params = ModelParams(k=2, d=5, beta=0.8, p=0.5, m=2)
    x_star = [int(c) for c in "01010100010100101110"]
    x = place_blocks(x_star, [1, 0], [0, 0], params)
    if "".join(map(str, x)) != "01000000010100101110":
        return False, "worked block-placement example"
    params = ModelParams(k=3, d=8, beta=0.75, p=0.4, m=6)
    for i in range(reps):
        s = sample_pair(params, derive_seed(seed, 3, i))
        if np.count_nonzero(s.x != s.x_star) > s.n_blocks * (params.ell + 1):
            return False, "too many changed letters"
        if s.n_blocks:
            draw = replace_random_block(s, derive_seed(seed, 4, i))
            diff = np.flatnonzero(draw.x_tilde != s.x)
            lo, hi = draw.block_window
            if diff.size and (diff.min() + 1 < lo or diff.max() + 1 > hi):
                return False, "replacement escaped its window"
        chain = build_coupling_chain(params, derive_seed(seed, 5, i))
        if not np.array_equal(chain.levels[0], chain.x_star):
            return False, "chain endpoint"
    return True, f"{reps} samples"


CHECKS = [
    ("worked_examples", _worked_examples),
    ("engine_agreement", _engines),
    ("partition_dp_vs_enumeration", _partitions),
    ("model_invariants", _model),
]


def run_checks(seed=0, reps=50):
    results = []
    for name, check in CHECKS:
        try:
            ok, detail = check(seed, reps)
        except Exception as exc:  # a crash is a failed check, not a harness error
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
