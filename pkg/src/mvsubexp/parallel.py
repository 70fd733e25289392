"""Block-parallel map over sample blocks with per-block random streams.

Block ``b`` always covers the same sample indices and draws from
``stream.spawn(b)``, so results do not depend on the number of workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .streams import RngStream

DEFAULT_BLOCK = 1 << 16


def default_threads() -> int:
    return os.cpu_count() or 1


def block_sizes(n: int, block: int = DEFAULT_BLOCK) -> list[int]:
    if n < 1:
        raise ValueError("need at least one sample")
    full, rest = divmod(n, block)
    return [block] * full + ([rest] if rest else [])


def map_blocks(fn, n: int, stream: RngStream, block: int = DEFAULT_BLOCK, threads: int | None = None) -> list:
    """Return ``[fn(stream.spawn(b).generator(), size_b) for each block b]`` in block order."""
    sizes = block_sizes(n, block)
    jobs = [(stream.spawn(b), size) for b, size in enumerate(sizes)]
    threads = threads or default_threads()
    if threads == 1 or len(jobs) == 1:
        return [fn(s.generator(), size) for s, size in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(job[0].generator(), job[1]), jobs))
