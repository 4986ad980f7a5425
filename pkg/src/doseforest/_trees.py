"""Shared array-backed tree helpers.

Trees are stored as parallel node arrays: `feature[i] == -1` marks a leaf;
internal nodes route rows with ``x[feature] <= threshold`` to ``left``.
"""

from __future__ import annotations

import numpy as np

from ._fast import route_rows


def route(
    feature: np.ndarray,
    threshold: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    x: np.ndarray,
) -> np.ndarray:
    """Leaf node id for every row of x."""
    return route_rows(
        feature, threshold, left, right, np.ascontiguousarray(x, dtype=np.float64)
    )


def depth_of(feature: np.ndarray, left: np.ndarray, right: np.ndarray) -> int:
    """Maximum root-to-leaf depth (0 for a root-only tree)."""
    depth = np.zeros(feature.size, dtype=np.intp)
    out = 0
    for i in range(feature.size):
        if feature[i] >= 0:
            depth[left[i]] = depth[i] + 1
            depth[right[i]] = depth[i] + 1
        else:
            out = max(out, int(depth[i]))
    return out
