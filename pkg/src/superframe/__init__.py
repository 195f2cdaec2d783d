from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("superframe")
except PackageNotFoundError:
    __version__ = "0.0.0+unknown"

from .clip import LRHRPair, VideoClip
from .errors import DataError, FormatError, ProtocolError, SuperframeError
from .systems import VideoSuperResolver
