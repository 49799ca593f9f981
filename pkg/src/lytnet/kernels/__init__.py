"""Backend selection for the convolution hot kernels.

The compiled Cython extension is preferred when it imported cleanly; the
numpy fallback is always available. Selection happens once at import and can
be forced with the ``LYTNET_KERNELS`` environment variable (``cython`` or
``numpy``); ``use_backend`` overrides it temporarily, which is how the
benchmark compares both in one process. Both backends are bit-identical.
"""

import os
from contextlib import contextmanager

from . import _numpy

BACKENDS = {"numpy": _numpy}

try:
    from . import _patches_cy

    BACKENDS["cython"] = _patches_cy
except ImportError:
    _patches_cy = None

_env = os.environ.get("LYTNET_KERNELS")
if _env:
    if _env not in BACKENDS:
        raise ImportError(
            f"LYTNET_KERNELS={_env!r} but available backends are {sorted(BACKENDS)}"
        )
    _default = _env
else:
    _default = "cython" if "cython" in BACKENDS else "numpy"

_stack = [_default]


def available_backends():
    return sorted(BACKENDS)


def backend_name():
    """Name of the backend currently in effect."""
    return _stack[-1]


def active():
    """Module implementing im2col/col2im for the current backend."""
    return BACKENDS[_stack[-1]]


def get_backend(name):
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown kernel backend {name!r}; available: {sorted(BACKENDS)}"
        ) from None


@contextmanager
def use_backend(name):
    """Temporarily route the hot kernels through a specific backend."""
    get_backend(name)
    _stack.append(name)
    try:
        yield
    finally:
        _stack.pop()
