from .discriminator import *
from .flow import *
from .generator import *
from .losses import *
from .metrics import *
from .protocol import *
