"""Backend selection for the hot MLP kernels.

The compiled Cython core is preferred when importable; otherwise the
pure-NumPy fallback is used. Set PARS_KERNELS=numpy or PARS_KERNELS=compiled
to force a backend (forcing "compiled" raises if the extension is missing).
"""

import os

from . import _numpy

_BACKENDS = {"numpy": _numpy}

try:
    from . import _core

    _BACKENDS["compiled"] = _core
except ImportError:
    _core = None


def available_backends():
    """Mapping of backend name to backend module, for benchmarks and tests."""
    return dict(_BACKENDS)


def _select():
    forced = os.environ.get("PARS_KERNELS", "").strip().lower()
    if forced:
        if forced not in _BACKENDS:
            raise ImportError(
                f"PARS_KERNELS={forced!r} requested but only "
                f"{sorted(_BACKENDS)} are available"
            )
        return _BACKENDS[forced]
    return _BACKENDS.get("compiled", _numpy)


backend = _select()
BACKEND_NAME = backend.NAME

softmax_batch = backend.softmax_batch
forward_batch = backend.forward_batch
backward_batch = backend.backward_batch
