from .shapes import *
from .utils import *
