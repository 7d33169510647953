import logging
from pathlib import Path

import numpy as np

from .._shared.errors import DomainError
from .models import FbmPath

logger = logging.getLogger(__name__)


def holder_norm(path: FbmPath, lam: float) -> float:
    """Largest ``|f(t) - f(s)| / |t - s|^lam`` over all node pairs.

    The increment is measured in the Euclidean norm across components.
    """
    if not 0.0 < lam <= 1.0:
        raise DomainError(f"Holder exponent must lie in (0, 1], got {lam}")
    t = path.grid.nodes
    x = path.values
    best = 0.0
    for i in range(t.size - 1):
        jumps = np.linalg.norm(x[i + 1 :] - x[i], axis=1)
        best = max(best, float(np.max(jumps / (t[i + 1 :] - t[i]) ** lam)))
    return best


def write_csv(path: FbmPath, target: Path) -> Path:
    """Write ``t, b1, ..., bd`` rows for plotting or debugging."""
    header = ",".join(["t", *(f"b{i + 1}" for i in range(path.dim))])
    np.savetxt(
        target,
        np.column_stack([path.grid.nodes, path.values]),
        delimiter=",",
        header=header,
        comments="",
    )
    logger.info("Wrote %d fBm nodes to %s", path.grid.size, target)
    return target
