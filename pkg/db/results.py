"""
Result tables: CSV files plus a JSON sidecar manifest.

CSV content is a pure function of the experiment spec and seed: floats are
written with repr(), rows keep sweep order, and nothing time-dependent goes
in.  Wall-clock times and timestamps live in the sidecar only.
"""
from __future__ import annotations

import csv
import json
import os
import pathlib
from datetime import datetime

from utils import constants
from utils.errors import StoreError


class Results:
    """CSV + sidecar persistence for experiment outputs."""

    @classmethod
    def sidecar_path(cls, csv_path) -> pathlib.Path:
        return pathlib.Path(csv_path).with_suffix(".json")

    @classmethod
    def write_csv(cls, path, rows: list[dict], columns: list[str] | None = None) -> pathlib.Path:
        path = pathlib.Path(path)
        columns = columns or (list(rows[0].keys()) if rows else [])
        try:
            os.makedirs(path.parent, exist_ok=True)
            with open(path, "w", newline="", encoding="utf-8") as f:
                writer = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
                writer.writeheader()
                for row in rows:
                    writer.writerow({c: _cell(row.get(c, "")) for c in columns})
        except OSError as e:
            raise StoreError(str(path), e) from e
        return path

    @classmethod
    def read_csv(cls, path) -> list[dict]:
        try:
            with open(path, newline="", encoding="utf-8") as f:
                return list(csv.DictReader(f))
        except OSError as e:
            raise StoreError(str(path), e) from e

    @classmethod
    def write_sidecar(cls, csv_path, manifest: dict) -> pathlib.Path:
        path = cls.sidecar_path(csv_path)
        payload = dict(manifest)
        payload.setdefault("written_at", datetime.now(constants.TZ_LOG).isoformat(timespec="seconds"))
        payload.setdefault("csv", pathlib.Path(csv_path).name)
        try:
            os.makedirs(path.parent, exist_ok=True)
            path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n",
                            encoding="utf-8")
        except OSError as e:
            raise StoreError(str(path), e) from e
        return path

    @classmethod
    def read_sidecar(cls, csv_path) -> dict:
        path = cls.sidecar_path(csv_path)
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise StoreError(str(path), e) from e


def _cell(value):
    if isinstance(value, float):
        return repr(float(value))
    return value
