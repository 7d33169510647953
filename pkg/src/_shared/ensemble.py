import logging
import math
import os
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from pydantic import BaseModel, ConfigDict

from .errors import InvalidInputError

logger = logging.getLogger(__name__)

# Chunk boundaries never depend on the worker count, so BLAS sees the same
# shapes (and rounds the same way) for any --jobs value.
CHUNK_SIZE = 256


class Estimate(BaseModel):
    """Sample mean with its standard error."""

    model_config = ConfigDict(frozen=True)

    mean: float
    se: float
    n: int

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "Estimate":
        samples = np.asarray(samples, dtype=float)
        n = samples.shape[0]
        se = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(mean=float(samples.mean()), se=se, n=n)


def resolve_jobs(jobs: int | None = None) -> int:
    """Explicit value first, then ``FHL_JOBS``, then one worker."""
    if jobs is None:
        jobs = int(os.environ.get("FHL_JOBS", "1"))
    return max(1, jobs)


def run_chunked[T](
    work: Callable[[int, int], T],
    n_items: int,
    *,
    jobs: int | None = None,
    chunk_size: int = CHUNK_SIZE,
) -> list[T]:
    """Run ``work(start, stop)`` over fixed chunks of ``range(n_items)``.

    Results come back in chunk order whatever the number of workers.
    """
    if n_items < 1:
        raise InvalidInputError(f"Ensemble needs at least one item, got {n_items}")
    bounds = [
        (start, min(start + chunk_size, n_items))
        for start in range(0, n_items, chunk_size)
    ]
    workers = min(resolve_jobs(jobs), max(1, len(bounds)))
    logger.debug(
        "Running %d items in %d chunks on %d workers", n_items, len(bounds), workers
    )

    if workers == 1:
        return [work(start, stop) for start, stop in bounds]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: work(*b), bounds))


def concat_chunks(parts: list[tuple[np.ndarray, ...]]) -> tuple[np.ndarray, ...]:
    """Concatenate per-chunk tuples of arrays along the leading axis."""
    return tuple(np.concatenate(column, axis=0) for column in zip(*parts, strict=True))
