"""Numeric kernel backends.

Two interchangeable implementations of the hot loops: a numba-jitted one
and a pure-numpy one. Selection happens once at import time from the
TWISTCOACH_KERNELS environment variable:

  auto   use numba when importable, else numpy (default)
  numba  require numba, fail loudly if missing
  numpy  force the pure-numpy path

Both backends are kept operation-for-operation identical so a stream
conditioned on one machine replays bit-exactly on another regardless of
which backend happened to be active.
"""

from __future__ import annotations

import os

from . import _numpy

STATUS_OK = _numpy.STATUS_OK
STATUS_DROPOUT = _numpy.STATUS_DROPOUT
STATUS_EXHAUSTED = _numpy.STATUS_EXHAUSTED
DEGEN_SHOULDER = _numpy.DEGEN_SHOULDER
DEGEN_HIP = _numpy.DEGEN_HIP
DEGEN_TORSO = _numpy.DEGEN_TORSO

_choice = os.environ.get("TWISTCOACH_KERNELS", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"TWISTCOACH_KERNELS must be auto, numba or numpy (got {_choice!r})"
    )

if _choice == "numpy":
    _impl = _numpy
    _backend = "numpy"
else:
    try:
        from . import _numba as _impl  # noqa: F401

        _backend = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        _impl = _numpy
        _backend = "numpy"

condition_batch = _impl.condition_batch
torso_metrics_batch = _impl.torso_metrics_batch


def active_backend() -> str:
    return _backend


def warmup() -> None:
    """Pre-compile jitted kernels so first-frame latency is not a compile."""
    if _backend == "numba":
        _impl.warmup()
