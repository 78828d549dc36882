"""Reading time series and label files.

Three layouts are understood:

* ``nab``   -- header ``timestamp,value``; timestamps like ``2014-04-10 00:04:00``
* ``yahoo`` -- header ``timestamp,value,is_anomaly``; integer timestamps
* ``plain`` -- one value per line, the line order is the index

The engine only ever sees integer indices 0, 1, 2, ...; timestamps ride
along as metadata and are used to resolve label files.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import IO, Iterator, Sequence

from .errors import LabelRangeError, OrderingError, ParseError, ResolutionError
from .eval import LabelSet

log = logging.getLogger(__name__)

_TS_FORMATS = ("%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%d")


class DatasetFormat(enum.Enum):
    NAB = "nab"
    YAHOO = "yahoo"
    PLAIN = "plain"


@dataclass
class Series:
    timestamps: list
    values: list[float]
    interval: timedelta | float | None = None

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)

    def timestamp_text(self, i: int) -> str | int:
        ts = self.timestamps[i]
        if isinstance(ts, datetime):
            return ts.strftime("%Y-%m-%d %H:%M:%S")
        return ts


def _text(stream: IO | bytes | str) -> str:
    if isinstance(stream, bytes):
        return stream.decode("utf-8-sig")
    if isinstance(stream, str):
        return stream
    data = stream.read()
    return data.decode("utf-8-sig") if isinstance(data, bytes) else data


def parse_timestamp(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    for fmt in _TS_FORMATS:
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise ValueError(f"unrecognised timestamp {text!r}") from None


def _value(text: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text.strip()!r}", line) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {text.strip()!r}", line)
    return v


def infer_interval(ts: list) -> timedelta | float | None:
    if len(ts) < 2:
        return None
    diffs = [b - a for a, b in zip(ts, ts[1:])]
    interval = sorted(diffs)[(len(diffs) - 1) // 2]
    gaps = sum(1 for d in diffs if d != interval)
    if gaps:
        log.warning("%d irregular interval(s) in series; indices are used as-is", gaps)
    return interval


_HEADERS = {
    DatasetFormat.NAB: ["timestamp", "value"],
    DatasetFormat.YAHOO: ["timestamp", "value", "is_anomaly"],
}


def parse_series(stream, fmt: DatasetFormat | str = DatasetFormat.NAB
                 ) -> tuple[Series, LabelSet | None]:
    """Parse a whole file; Yahoo files also yield their ``is_anomaly`` labels."""
    fmt = DatasetFormat(fmt)
    text = _text(stream)
    if fmt is DatasetFormat.PLAIN:
        values = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            values.append(_value(s, lineno))
        return Series(list(range(len(values))), values, 1 if len(values) > 1 else None), None

    rows = csv.reader(io.StringIO(text))
    want = _HEADERS[fmt]
    header = next(rows, None)
    if header is None or [h.strip().lower() for h in header] != want:
        raise ParseError(f"expected header {','.join(want)}, got {header!r}", 1)
    timestamps, values, flagged = [], [], []
    for row in rows:
        lineno = rows.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(want):
            raise ParseError(f"expected {len(want)} fields, got {len(row)}", lineno)
        try:
            ts = parse_timestamp(row[0])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        v = _value(row[1], lineno)
        if timestamps:
            try:
                ordered = ts > timestamps[-1]
            except TypeError:
                raise ParseError("mixed timestamp kinds", lineno) from None
            if not ordered:
                raise OrderingError(f"timestamp {row[0].strip()!r} does not increase", lineno)
        if fmt is DatasetFormat.YAHOO:
            flag = row[2].strip()
            if flag not in ("0", "1"):
                raise ParseError(f"is_anomaly must be 0 or 1, got {flag!r}", lineno)
            if flag == "1":
                flagged.append(len(values))
        timestamps.append(ts)
        values.append(v)
    series = Series(timestamps, values, infer_interval(timestamps))
    labels = None
    if fmt is DatasetFormat.YAHOO:
        labels = LabelSet(tuple(flagged), tuple(timestamps[i] for i in flagged))
    return series, labels


def resolve_timestamp(series: Series, ts) -> int:
    """Nearest index to ``ts``; more than half an interval away is an error."""
    stamps = series.timestamps
    if not stamps or not isinstance(stamps[0], type(ts)):
        raise ResolutionError(f"cannot resolve {ts!r} against this series")
    lo, hi = 0, len(stamps)
    while lo < hi:
        mid = (lo + hi) // 2
        if stamps[mid] < ts:
            lo = mid + 1
        else:
            hi = mid
    cands = [i for i in (lo - 1, lo) if 0 <= i < len(stamps)]
    best = min(cands, key=lambda i: abs(stamps[i] - ts))
    half = series.interval / 2 if series.interval is not None else None
    if half is None or abs(stamps[best] - ts) > half:
        raise ResolutionError(f"timestamp {ts!r} is not within half an interval of any point")
    return best


def load_labels(stream, series: Series) -> LabelSet:
    """Read a label file (one index or timestamp per line).

    Bare integers are series indices; anything else is parsed as a timestamp
    and resolved to the nearest index.
    """
    out: set[int] = set()
    for lineno, line in enumerate(_text(stream).splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        try:
            idx = int(s)
        except ValueError:
            try:
                ts = parse_timestamp(s)
            except ValueError:
                raise ResolutionError(f"line {lineno}: cannot parse label {s!r}") from None
            idx = resolve_timestamp(series, ts)
        if not 0 <= idx < len(series):
            raise LabelRangeError(f"line {lineno}: label {idx} outside series of {len(series)} points")
        out.add(idx)
    idx = tuple(sorted(out))
    return LabelSet(idx, tuple(series.timestamps[i] for i in idx))


def format_value(v: float) -> str:
    # repr round-trips; integral floats print without the trailing .0
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


def write_series(series: Series | Sequence[float], out: IO[str],
                 fmt: DatasetFormat | str = DatasetFormat.PLAIN,
                 labels: LabelSet | None = None) -> None:
    fmt = DatasetFormat(fmt)
    if not isinstance(series, Series):
        vals = [float(v) for v in series]
        series = Series(list(range(len(vals))), vals, 1)
    if fmt is DatasetFormat.PLAIN:
        for v in series.values:
            out.write(format_value(v) + "\n")
        return
    flagged = set(labels.indices) if labels is not None else set()
    out.write(",".join(_HEADERS[fmt]) + "\n")
    for i, v in enumerate(series.values):
        row = [str(series.timestamp_text(i)), format_value(v)]
        if fmt is DatasetFormat.YAHOO:
            row.append("1" if i in flagged else "0")
        out.write(",".join(row) + "\n")
