from jax import Array
from numpy import ndarray

ArrayLike = Array | ndarray
ScalarLike = ArrayLike | float | int

# A frame is an RGB raster of shape `(B... H W 3)` with values in [0, 1].
Frame = Array
# A flow field has shape `(B... H W 2)`: channel 0 is dx, channel 1 is dy.
FlowField = Array
