"""
Debug breadcrumbs for volterra_lab.

Ensemble paths run numpy/scipy extension code inside worker processes. When
one of them dies on a fatal signal, Python never sees an exception, but
`faulthandler` still writes the traceback of every thread to the log. On
POSIX, `kill -USR1 <pid>` dumps the tracebacks of a stuck worker without
stopping it.

Everything here is a no-op unless VOLTERRA_LAB_DEBUG is truthy.
"""

from __future__ import annotations

import faulthandler
import os
import platform
import signal
import sys
import time
from typing import Optional, TextIO

ENV_FLAG = "VOLTERRA_LAB_DEBUG"
ENV_LOG = "VOLTERRA_LAB_DEBUG_LOG"

_LOG_FH: Optional[TextIO] = None


def debug_enabled() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "y", "on"}


def default_log_path() -> str:
    override = os.environ.get(ENV_LOG, "").strip()
    if override:
        return override
    cache = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return os.path.join(cache, "volterra_lab", "debug.log")


def _versions() -> str:
    parts = [f"python {platform.python_version()}"]
    for name in ("numpy", "scipy"):
        mod = sys.modules.get(name)
        if mod is not None:
            parts.append(f"{name} {getattr(mod, '__version__', '?')}")
    return ", ".join(parts)


def _open(path: str) -> TextIO:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fh = open(path, "a", buffering=1, encoding="utf-8", errors="replace")
    fh.write(f"\n--- volterra_lab pid={os.getpid()} {time.strftime('%Y-%m-%d %H:%M:%S %z')}\n")
    fh.write(f"--- {_versions()} on {platform.platform()}\n")
    fh.write(f"--- argv {sys.argv!r}\n")
    return fh


def enable_debug_trace() -> Optional[str]:
    """Open the log and install faulthandler; returns the log path, or None when disabled."""
    global _LOG_FH
    if _LOG_FH is not None:
        return _LOG_FH.name
    if not debug_enabled():
        return None
    try:
        _LOG_FH = _open(default_log_path())
    except OSError:
        # A run must not fail because its debug log cannot be opened.
        return None
    faulthandler.enable(file=_LOG_FH, all_threads=True)
    if hasattr(signal, "SIGUSR1"):
        faulthandler.register(signal.SIGUSR1, file=_LOG_FH, all_threads=True, chain=False)
    return _LOG_FH.name


def debug_log(msg: str, **fields) -> None:
    """One breadcrumb line; keyword fields are appended as key=value."""
    if _LOG_FH is None and enable_debug_trace() is None:
        return
    extra = "".join(f" {k}={v}" for k, v in fields.items())
    try:
        _LOG_FH.write(f"[{time.strftime('%H:%M:%S')} pid={os.getpid()}] {msg}{extra}\n")
    except (OSError, ValueError):
        pass
