from .filters import *
from .resample import *
