from .discriminator import *
from .flow import *
from .generator import *
from .perceptual import *
