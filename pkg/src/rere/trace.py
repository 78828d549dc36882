"""JSON Lines trace records.

One object per time point, fixed key order::

    t, timestamp, value, phase,
    predicted1, aare1, thd1, abnormal1, retrained1,
    [predicted2, aare2, thd2, abnormal2, retrained2,]   # dual mode only
    anomaly, elapsed_ms

Probation rows carry the shared forecaster's prediction and AARE (for both
detectors) and ``null`` for every verdict field.
"""

from __future__ import annotations

import json
from typing import IO, Iterable, Iterator

from .detector import FinalRecord, ProbationRecord, StepVerdict

DETECTOR_FIELDS = ("predicted", "aare", "thd", "abnormal", "retrained")


def _det(v: StepVerdict) -> tuple:
    return v.predicted, v.aare, v.threshold, v.is_abnormal, v.retrained


def to_row(rec: ProbationRecord | FinalRecord, dual: bool, timestamp=None,
           timing: bool = True) -> dict:
    row = {"t": rec.t, "timestamp": timestamp, "value": rec.value}
    if isinstance(rec, ProbationRecord):
        row["phase"] = "probation"
        vals = {1: (rec.predicted, rec.aare, None, None, None)}
        vals[2] = vals[1]
        anomaly = None
    else:
        row["phase"] = "detecting"
        vals = {1: _det(rec.verdict1)}
        if rec.verdict2 is not None:
            vals[2] = _det(rec.verdict2)
        anomaly = rec.anomaly
    for d in (1, 2) if dual else (1,):
        for name, v in zip(DETECTOR_FIELDS, vals[d]):
            row[f"{name}{d}"] = v
    row["anomaly"] = anomaly
    row["elapsed_ms"] = rec.elapsed * 1000.0 if timing else None
    return row


def dumps(row: dict) -> str:
    return json.dumps(row, separators=(",", ":"), allow_nan=False)


def write_rows(rows: Iterable[dict], out: IO[str]) -> int:
    n = 0
    for row in rows:
        out.write(dumps(row) + "\n")
        n += 1
    return n


def read_trace(stream: IO[str]) -> Iterator[dict]:
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"trace line {lineno}: {exc.msg}") from None
