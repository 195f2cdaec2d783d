import numpy as np

from superframe.utils import reflect_index

__all__ = ["neighbor_offsets", "neighbor_indices", "neighbor_table"]


def neighbor_offsets(n_neighbors: int) -> list[int]:
    """
    Temporal offsets of the neighbors of a target frame, past first and
    alternating outwards: ``-1, +1, -2, +2, ...``.
    """
    if n_neighbors < 1:
        raise ValueError(f"n_neighbors must be at least 1, got {n_neighbors}")
    return [(k // 2 + 1) * (-1 if k % 2 == 0 else 1) for k in range(n_neighbors)]


def neighbor_indices(t: int, length: int, n_neighbors: int) -> list[int]:
    """
    Frame indices of the neighbors of frame ``t`` in a clip of ``length``
    frames. Indices outside the clip are reflected back without repeating the
    edge frame, so duplicates are possible near the boundaries (for ``t = 0``
    and two neighbors the result is ``[1, 1]``).
    """
    if not 0 <= t < length:
        raise ValueError(f"Frame index {t} outside a clip of {length} frames")
    return [reflect_index(t + o, length) for o in neighbor_offsets(n_neighbors)]


def neighbor_table(length: int, n_neighbors: int) -> np.ndarray:
    """``neighbor_indices`` for every frame, as an int array of shape `(T N)`."""
    return np.array(
        [neighbor_indices(t, length, n_neighbors) for t in range(length)], dtype=np.int32
    ).reshape(length, n_neighbors)
