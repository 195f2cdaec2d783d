from superframe.ops import bicubic_downsample, bicubic_upsample, gaussian_blur

from .degradation import *
from .io import *
from .sampler import BatchSampler
from .synthetic import *
