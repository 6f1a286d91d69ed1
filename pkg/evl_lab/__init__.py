from evl_lab.constants import __version__

__all__ = [
    "__version__",
]
