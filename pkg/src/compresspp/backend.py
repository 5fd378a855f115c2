"""Numeric backend selection.

Every hot kernel in this package ships twice: a numba-jitted scalar loop and
a vectorized pure-numpy fallback. The environment variable COMPRESSPP_BACKEND
("numba" or "numpy") selects the implementation at import time; the default is
numba whenever it is importable. `set_backend` switches at runtime, which the
backend benchmark and the cross-checking tests rely on.
"""

from __future__ import annotations

import logging
import os

logger = logging.getLogger("compresspp")

ENV_VAR = "COMPRESSPP_BACKEND"
BACKENDS = ("numba", "numpy")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    HAVE_NUMBA = False


def _initial_backend() -> str:
    requested = os.environ.get(ENV_VAR, "").strip().lower()
    if requested and requested not in BACKENDS:
        raise ValueError(
            f"{ENV_VAR}={requested!r}: expected one of {BACKENDS}"
        )
    if not requested:
        requested = "numba" if HAVE_NUMBA else "numpy"
    if requested == "numba" and not HAVE_NUMBA:
        logger.warning("numba backend requested but numba is not importable; "
                       "falling back to numpy")
        requested = "numpy"
    return requested


_active = _initial_backend()


def active_backend() -> str:
    """Name of the backend currently answering hot-kernel calls."""
    return _active


def set_backend(name: str) -> None:
    """Switch hot kernels to `name` ("numba" or "numpy") for this process."""
    global _active
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}: expected one of {BACKENDS}")
    if name == "numba" and not HAVE_NUMBA:
        raise ValueError("numba backend unavailable: numba is not importable")
    _active = name


def use_numba() -> bool:
    return _active == "numba"
