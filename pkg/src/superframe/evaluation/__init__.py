from .evaluate import *
from .render import *
from .report import *
