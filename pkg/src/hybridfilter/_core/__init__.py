"""Integration kernels: compiled extension when built, numpy fallback otherwise.

Set ``HYBRIDFILTER_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback
from ._common import IntegrationError

try:
    if os.environ.get("HYBRIDFILTER_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
        raise ImportError("pure-python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_active = _compiled if _compiled is not None else _fallback


def get_backend(name=None):
    """Kernel module by name (``"compiled"`` or ``"python"``); default is the active one."""
    if name is None:
        return _active
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available; build the extension first")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    return ["python"] + (["compiled"] if _compiled is not None else [])


def integrate_sme(*args, **kwargs):
    return _active.integrate_sme(*args, **kwargs)


def integrate_qekf(*args, **kwargs):
    return _active.integrate_qekf(*args, **kwargs)


__all__ = [
    "BACKEND",
    "IntegrationError",
    "available_backends",
    "get_backend",
    "integrate_qekf",
    "integrate_sme",
]
