"""Pure-numpy implementations of the hot per-step kernels."""

from __future__ import annotations

import numpy as np

NAME = "py"


def mix(W: np.ndarray, X: np.ndarray) -> np.ndarray:
    """One neighbor-averaging round: W @ X for W (n, n), X (n, d)."""
    return W @ X


def prob_quantize(x: np.ndarray, delta_p: float, u: np.ndarray) -> np.ndarray:
    """Randomized rounding of each entry to the 1/delta_p grid.

    Rounds up with probability equal to the fractional position on the grid
    (``u`` supplies one uniform per entry), so the output is unbiased.
    Entries already on the grid pass through unchanged.
    """
    scaled = x * delta_p
    lo = np.floor(scaled)
    up = u < (scaled - lo)
    return (lo + up) / delta_p
