from __future__ import annotations

from importlib import metadata
from typing import Final

PACKAGE_NAME = "evl-lab"
__version__ = metadata.version(PACKAGE_NAME)

THREADS_ENVVAR = "EVL_LAB_THREADS"

SPEC_FORMAT: Final = 1
CHECKPOINT_FORMAT: Final = 1
MANIFEST_FORMAT: Final = 1
