"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when importable; otherwise the
numpy fallback. Setting ``DIFFORENSICS_BACKEND=python`` forces the fallback.
"""
import importlib
import os

_MODULES = {"cython": "._ckernels", "python": "._pykernels"}


def _load(name):
    return importlib.import_module(_MODULES[name], __package__)


def available_backends():
    names = []
    for name in _MODULES:
        try:
            _load(name)
        except ImportError:
            continue
        names.append(name)
    return names


def get_kernels(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    if name is None:
        return kernels
    if name not in _MODULES:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(_MODULES)}")
    return _load(name)


def _select():
    wanted = os.environ.get("DIFFORENSICS_BACKEND", "auto").lower()
    if wanted == "python":
        return "python", _load("python")
    try:
        return "cython", _load("cython")
    except ImportError:
        if wanted == "cython":
            raise
        return "python", _load("python")


BACKEND, kernels = _select()
