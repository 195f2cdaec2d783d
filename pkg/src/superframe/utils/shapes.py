from jax import Array

__all__ = [
    "_check_frame",
    "_check_flow",
    "_check_same_spatial",
    "_spatial_shape",
]


def _spatial_shape(x: Array) -> tuple[int, int]:
    """Height and width of an array of shape `(B... H W C)`."""
    return (x.shape[-3], x.shape[-2])


def _check_frame(x: Array, name: str = "frame") -> None:
    """Raises ``ValueError`` unless ``x`` has shape `(B... H W 3)` with H, W >= 1."""
    if x.ndim < 3 or x.shape[-1] != 3:
        raise ValueError(f"{name} must have shape (B... H W 3), got {x.shape}")
    if x.shape[-3] < 1 or x.shape[-2] < 1:
        raise ValueError(f"{name} must have non-empty spatial dims, got {x.shape}")


def _check_flow(x: Array, name: str = "flow") -> None:
    """Raises ``ValueError`` unless ``x`` has shape `(B... H W 2)`."""
    if x.ndim < 3 or x.shape[-1] != 2:
        raise ValueError(f"{name} must have shape (B... H W 2), got {x.shape}")


def _check_same_spatial(*arrays: Array, names: tuple[str, ...] | None = None) -> None:
    """Raises ``ValueError`` if the arrays do not share their `(H W)` dims."""
    shapes = [_spatial_shape(a) for a in arrays]
    if any(s != shapes[0] for s in shapes[1:]):
        labels = names if names is not None else tuple(f"arg{i}" for i in range(len(arrays)))
        desc = ", ".join(f"{n}={s}" for n, s in zip(labels, shapes))
        raise ValueError(f"Spatial dims must match: {desc}")
