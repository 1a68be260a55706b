"""Backend selection for the decode hot loop.

The compiled extension is preferred when importable; PERFRL_BACKEND=py or
PERFRL_BACKEND=c forces a choice (forcing "c" when the extension is missing
is an error rather than a silent fallback).
"""

from __future__ import annotations

import os

from . import _py_kernels

_forced = os.environ.get("PERFRL_BACKEND", "").lower()

if _forced == "py":
    _impl = _py_kernels
elif _forced == "c":
    from . import _c_kernels as _impl  # type: ignore[no-redef]
else:
    try:
        from . import _c_kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _py_kernels

step_log_probs = _impl.step_log_probs
BACKEND_NAME = _impl.BACKEND_NAME


def available_backends():
    backends = {"numpy": _py_kernels.step_log_probs}
    try:
        from . import _c_kernels

        backends["c"] = _c_kernels.step_log_probs
    except ImportError:
        pass
    return backends
