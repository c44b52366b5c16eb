"""
Centralised logging helper.

Every command uses `log_event()` to report progress.  Each log type can be
routed to an append-only file with `set_log_channel()`; stdout always gets
the event unless CFPL_QUIET=1.

Log types:
  runs      – command start / finish, artefact paths
  training  – per-epoch training objective
  csgd      – CSGD iteration progress
  data      – dataset writes and reads
"""
from __future__ import annotations

import os
import pathlib
from datetime import datetime
from typing import Optional

from utils import constants

LOG_TYPES = ("runs", "training", "csgd", "data")

_channels: dict[str, Optional[pathlib.Path]] = {lt: None for lt in LOG_TYPES}


def _check_type(log_type: str) -> None:
    if log_type not in LOG_TYPES:
        raise ValueError(f"unknown log type {log_type!r} (expected one of {LOG_TYPES})")


def get_log_channel(log_type: str) -> Optional[pathlib.Path]:
    """Return the file configured for *log_type*, or ``None``."""
    _check_type(log_type)
    return _channels[log_type]


def set_log_channel(log_type: str, path: str | os.PathLike | None) -> None:
    """Route *log_type* to *path* (``None`` turns the file off)."""
    _check_type(log_type)
    _channels[log_type] = pathlib.Path(path) if path is not None else None


def get_all_log_channels() -> dict[str, Optional[pathlib.Path]]:
    """Return a dict of log_type → file (or None) for all types."""
    return dict(_channels)


def log_event(log_type: str, message: str, ok: Optional[bool] = None) -> None:
    """Print *message* with a status marker and append it to the channel file."""
    _check_type(log_type)
    if ok is True:
        line = f"✅ {message}"
    elif ok is False:
        line = f"❌ {message}"
    else:
        line = f"   {message}"

    if not constants.QUIET:
        print(line, flush=True)

    path = _channels[log_type]
    if path is None:
        return
    stamp = datetime.now(constants.TZ_LOG).isoformat(timespec="seconds")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as f:
            f.write(f"{stamp} [{log_type}] {line.strip()}\n")
    except OSError as e:
        # best effort
        print(f"   Log channel {log_type} unwritable: {e}")
