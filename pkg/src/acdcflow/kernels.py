"""Numeric kernel dispatch.

Two interchangeable backends implement the same kernels with the same
floating-point operation order: a jit-compiled one (default when numba is
importable) and a pure-numpy one. Select explicitly with the
ACDCFLOW_BACKEND environment variable ("numba" or "numpy"). Results are
deterministic within a backend for any thread count; bitwise equality
across backends is not guaranteed.
"""

import os

_BACKENDS = ("numba", "numpy")
_active = None
_modules = {}


def _load(name):
    if name not in _modules:
        if name == "numba":
            from . import _kernels_numba as mod
        else:
            from . import _kernels_numpy as mod
        _modules[name] = mod
    return _modules[name]


def _default_name():
    env = os.environ.get("ACDCFLOW_BACKEND", "").strip().lower()
    if env:
        if env not in _BACKENDS:
            raise ValueError(
                f"ACDCFLOW_BACKEND must be one of {_BACKENDS}, got {env!r}"
            )
        return env
    try:
        import numba  # noqa: F401
        return "numba"
    except ImportError:
        return "numpy"


def get_backend(name=None):
    """Return the kernel module for `name` (default: active backend)."""
    global _active
    if name is None:
        if _active is None:
            _active = _default_name()
        name = _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}")
    return _load(name)


def set_backend(name):
    """Switch the active backend; returns the previous name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}")
    prev = active_backend()
    _active = name
    return prev


def active_backend():
    global _active
    if _active is None:
        _active = _default_name()
    return _active
