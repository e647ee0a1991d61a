"""Localisation error metrics over files of true/predicted positions.

Each row is ``x,y,z,x_pred,y_pred,z_pred``.  A header row is allowed and is
recognised by its first field not being a number.
"""

from __future__ import annotations

import csv
import io
import math
from typing import Iterable

import numpy as np


class MalformedRow(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


def read_prediction_rows(text: str) -> np.ndarray:
    """``(n, 6)`` array of the rows in ``text``; blank lines are skipped."""
    rows = []
    first = True
    for lineno, fields in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not fields or all(not f.strip() for f in fields):
            continue
        if first:
            first = False
            try:
                float(fields[0])
            except ValueError:
                continue
        if len(fields) != 6:
            raise MalformedRow(lineno, f"expected 6 fields, got {len(fields)}")
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise MalformedRow(lineno, str(exc)) from None
        if not all(math.isfinite(v) for v in values):
            raise MalformedRow(lineno, "non-finite value")
        rows.append(values)
    if not rows:
        raise MalformedRow(1, "no data rows")
    return np.asarray(rows, dtype=np.float64)


def distance_errors(rows: Iterable[Iterable[float]]) -> np.ndarray:
    arr = np.asarray(rows, dtype=np.float64).reshape(-1, 6)
    return np.linalg.norm(arr[:, :3] - arr[:, 3:], axis=1)


def mde_rmse(rows: Iterable[Iterable[float]]) -> tuple[float, float]:
    """Mean distance error and root-mean-square distance error, in input units."""
    d = distance_errors(rows)
    if d.size == 0:
        raise ValueError("need at least one row")
    mde = float(np.mean(d))
    rmse = float(np.sqrt(np.mean(d * d)))
    return mde, rmse


def evaluate_predictions(text: str) -> tuple[float, float]:
    return mde_rmse(read_prediction_rows(text))
