from .config import *
from .state import *
from .trainer import *
