"""Reproducible random streams.

Every stochastic routine in the package takes a ``numpy.random.Generator``.
Experiments build those generators from a 128-bit seed, given as a pair of
unsigned 64-bit words, plus an integer stream id (by convention the trial
index). The bit generator is Philox, a counter-based generator, so distinct
streams are independent and a trial's draws do not depend on which worker
thread happens to run it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

Seed = tuple[int, int]
T = TypeVar("T")

_U64 = (1 << 64) - 1


def normalize_seed(seed) -> Seed:
    """Accept an int, a pair of ints or a ``"hi,lo"`` string."""
    if isinstance(seed, str):
        parts = [p for p in seed.replace(" ", "").split(",") if p]
        if len(parts) == 1:
            seed = int(parts[0], 0)
        elif len(parts) == 2:
            seed = (int(parts[0], 0), int(parts[1], 0))
        else:
            raise ValueError(f"seed must be 'int' or 'hi,lo', got {seed!r}")
    if isinstance(seed, (int, np.integer)):
        seed = int(seed)
        if seed < 0 or seed >> 128:
            raise ValueError("seed must fit in 128 unsigned bits")
        return (seed >> 64, seed & _U64)
    hi, lo = (int(s) for s in seed)
    for w in (hi, lo):
        if w < 0 or w > _U64:
            raise ValueError("seed words must be unsigned 64-bit integers")
    return (hi, lo)


def make_rng(seed=(0, 0), stream: int = 0) -> np.random.Generator:
    """Generator for one ``(seed, stream)`` pair."""
    hi, lo = normalize_seed(seed)
    if stream < 0:
        raise ValueError("stream id must be nonnegative")
    ss = np.random.SeedSequence(entropy=(hi << 64) | lo, spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def map_streams(
    fn: Callable[[np.random.Generator, int], T],
    count: int,
    seed=(0, 0),
    threads: int = 1,
    offset: int = 0,
) -> list[T]:
    """Run ``fn(rng, i)`` for ``i in range(count)`` on stream ``offset + i``.

    Results come back in index order whatever the thread count, so any
    reduction over the returned list is reproducible.
    """
    seed = normalize_seed(seed)

    def task(i: int) -> T:
        return fn(make_rng(seed, offset + i), i)

    if threads <= 1 or count <= 1:
        return [task(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, range(count)))


def tree_sum(values: Sequence[float]) -> float:
    """Pairwise sum in a fixed association order."""
    vals = [float(v) for v in values]
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]
