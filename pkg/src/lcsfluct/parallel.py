"""Replicate fan-out. Replicate ``i`` always receives ``derive_seed(seed, i)``."""

from concurrent.futures import ProcessPoolExecutor
import multiprocessing as mp

from lcsfluct.seeding import derive_seed


def _run_chunk(fn, seeds):
    return [fn(s) for s in seeds]


def replicate_seeds(seed, reps, *stream):
    return [derive_seed(seed, *stream, i) for i in range(reps)]


def map_replicates(fn, reps, seed, workers=1, stream=()):
    """``[fn(seed_i) for i in range(reps)]``, optionally spread over processes.

    Output order is replicate order, so any reduction over it is independent of
    ``workers``. ``fn`` must be picklable when ``workers > 1``.
    """
    seeds = replicate_seeds(seed, reps, *stream)
    workers = max(1, int(workers or 1))
    if workers == 1 or reps < 2:
        return [fn(s) for s in seeds]
    n_chunks = min(reps, workers * 4)
    bounds = [round(i * reps / n_chunks) for i in range(n_chunks + 1)]
    chunks = [seeds[a:b] for a, b in zip(bounds, bounds[1:]) if b > a]
    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        parts = list(pool.map(_run_chunk, [fn] * len(chunks), chunks))
    return [v for part in parts for v in part]
