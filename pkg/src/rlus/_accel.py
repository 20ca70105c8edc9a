"""Kernel backend selection.

The hot numeric loops (entropic coupling solver, stage-A candidate scoring)
exist in two builds: a numba ``@njit`` build and a pure-numpy build.  The
environment variable ``RLUS_BACKEND`` picks one:

* ``auto`` (default, or unset): numba when importable, else numpy.
* ``numba``: require numba; raise if it is not installed.
* ``numpy``: force the pure-numpy path even when numba is present.

The variable is read at call time so tests can flip it per-case.
"""

from __future__ import annotations

import os

ENV_VAR = "RLUS_BACKEND"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via RLUS_BACKEND=numpy
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        """Stand-in decorator so jitted twins stay importable without numba."""

        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def backend() -> str:
    """Resolve the active backend name, ``"numba"`` or ``"numpy"``."""
    choice = os.environ.get(ENV_VAR, "auto").strip().lower()
    if choice in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not HAVE_NUMBA:
            raise ImportError(
                f"{ENV_VAR}=numba but numba is not installed; "
                "install the 'accel' extra or use RLUS_BACKEND=numpy"
            )
        return "numba"
    raise ValueError(f"unknown {ENV_VAR}={choice!r}; expected auto, numba or numpy")


def use_numba() -> bool:
    return backend() == "numba"
