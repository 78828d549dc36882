"""Kernel selection.

The compiled extension is preferred; ``RERE_BACKEND`` (``auto``, ``compiled``
or ``python``) overrides the choice at import time.
"""

from __future__ import annotations

import importlib
import os
from types import ModuleType

_CACHE: dict[str, ModuleType] = {}


def _load(name: str) -> ModuleType:
    if name not in _CACHE:
        mod = "rere._lstm_ext" if name == "compiled" else "rere._lstm_py"
        _CACHE[name] = importlib.import_module(mod)
    return _CACHE[name]


def available() -> list[str]:
    names = ["python"]
    try:
        _load("compiled")
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


def get(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` (``None`` means the default)."""
    if name is None or name == "auto":
        return DEFAULT
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    return _load(name)


def _select() -> ModuleType:
    want = os.environ.get("RERE_BACKEND", "auto").lower()
    if want == "python":
        return _load("python")
    try:
        return _load("compiled")
    except ImportError:
        if want == "compiled":
            raise
        return _load("python")


DEFAULT = _select()
