"""Scoring detection traces against labelled anomalies.

An anomaly at ``t`` counts as detected when any detection falls in
``[t - K, t + K]``; a detection counts as matched when it falls in some
anomaly's window. Precision is matched detections over all detections.
In event mode, runs of consecutive detections are merged first and each
run is scored once.
"""

from __future__ import annotations

import bisect
import enum
import math
import statistics
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .errors import InvalidInputError, UndefinedMetricError


class MatchMode(enum.Enum):
    POINT = "point"
    EVENT = "event"


@dataclass(frozen=True)
class LabelSet:
    indices: tuple[int, ...]
    timestamps: tuple | None = None

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidInputError("label indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)


@dataclass(frozen=True)
class EvalConfig:
    k: int = 0
    mode: MatchMode = MatchMode.POINT
    allow_empty_labels: bool = False

    def __post_init__(self):
        if self.k < 0:
            raise InvalidInputError("K must be >= 0")
        if isinstance(self.mode, str):
            object.__setattr__(self, "mode", MatchMode(self.mode))


@dataclass
class Metrics:
    k: int
    mode: str
    n_labels: int
    n_detections: int
    tp_anomalies: int
    matched_detections: int
    unmatched_detections: int
    missed_anomalies: int
    precision: float | None
    recall: float | None
    fscore: float | None
    retraining_ratio: float | None = None
    retraining_ratio1: float | None = None
    retraining_ratio2: float | None = None
    mean_detection_time: float | None = None
    std_detection_time: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TraceStats:
    steps: int
    retrain_steps1: int
    retrain_steps2: int | None
    retrain_steps: int
    retraining_ratio1: float
    retraining_ratio2: float | None
    retraining_ratio: float
    mean_time: float
    std_time: float


def fscore(precision: float | None, recall: float | None) -> float | None:
    """Harmonic mean of precision and recall; ``None`` when undefined."""
    if precision is None or recall is None:
        return None
    for name, v in (("precision", precision), ("recall", recall)):
        if not 0.0 <= v <= 1.0:
            raise InvalidInputError(f"{name} {v!r} outside [0, 1]")
    if precision + recall == 0:
        return None
    return 2 * precision * recall / (precision + recall)


def _events(points: Sequence[int]) -> list[tuple[int, int]]:
    runs: list[tuple[int, int]] = []
    for p in points:
        if runs and p == runs[-1][1] + 1:
            runs[-1] = (runs[-1][0], p)
        else:
            runs.append((p, p))
    return runs


def _hits(lo: int, hi: int, sorted_points: Sequence[int]) -> bool:
    i = bisect.bisect_left(sorted_points, lo)
    return i < len(sorted_points) and sorted_points[i] <= hi


def score_detections(detections: Iterable[int], labels: LabelSet | Sequence[int],
                     cfg: EvalConfig | None = None) -> Metrics:
    """Score a set of detected time indices."""
    cfg = cfg or EvalConfig()
    if not isinstance(labels, LabelSet):
        labels = LabelSet(tuple(labels))
    if len(labels) == 0 and not cfg.allow_empty_labels:
        raise UndefinedMetricError("recall is undefined for an empty label set")
    det = sorted(set(int(d) for d in detections))
    lab = list(labels.indices)
    k = cfg.k

    units = _events(det) if cfg.mode is MatchMode.EVENT else [(d, d) for d in det]
    matched = sum(1 for a, b in units if _hits(a - k, b + k, lab))
    tp = sum(1 for a in lab if _hits(a - k, a + k, det))

    recall = tp / len(lab) if lab else None
    precision = matched / len(units) if units else None
    return Metrics(
        k=k, mode=cfg.mode.value, n_labels=len(lab), n_detections=len(units),
        tp_anomalies=tp, matched_detections=matched,
        unmatched_detections=len(units) - matched, missed_anomalies=len(lab) - tp,
        precision=precision, recall=recall, fscore=fscore(precision, recall),
    )


def _is_final(rec) -> bool:
    return hasattr(rec, "verdict1")


def _is_row(rec) -> bool:
    return isinstance(rec, dict)


def trace_stats(trace: Iterable) -> TraceStats:
    """Retraining ratios and step-time statistics over post-probation steps.

    Accepts :class:`~rere.detector.FinalRecord` objects or trace dicts as
    written by the CLI; probation entries are skipped.
    """
    n = r1 = r2 = either = 0
    dual = False
    times = []
    for rec in trace:
        if _is_final(rec):
            a = rec.verdict1.retrained
            b = rec.verdict2.retrained if rec.verdict2 is not None else None
            el = rec.elapsed
        else:
            if not _is_row(rec) or rec.get("phase") != "detecting":
                continue
            a = bool(rec["retrained1"])
            b = bool(rec["retrained2"]) if "retrained2" in rec else None
            el = rec["elapsed_ms"] / 1000.0 if rec.get("elapsed_ms") is not None else None
        n += 1
        r1 += a
        if b is not None:
            dual = True
            r2 += b
        either += a or bool(b)
        if el is not None:
            times.append(el)
    if n == 0:
        raise InvalidInputError("trace has no post-probation steps")
    mean = statistics.fmean(times) if times else math.nan
    std = statistics.pstdev(times) if times else math.nan
    return TraceStats(
        steps=n, retrain_steps1=r1, retrain_steps2=r2 if dual else None,
        retrain_steps=either, retraining_ratio1=r1 / n,
        retraining_ratio2=r2 / n if dual else None, retraining_ratio=either / n,
        mean_time=mean, std_time=std,
    )


def detections_of(trace: Iterable) -> list[int]:
    out = []
    for rec in trace:
        if _is_final(rec):
            if rec.anomaly:
                out.append(rec.t)
        elif _is_row(rec) and rec.get("anomaly"):
            out.append(int(rec["t"]))
    return out


def evaluate(trace: Sequence, labels: LabelSet | Sequence[int],
             cfg: EvalConfig | None = None) -> Metrics:
    """Score a trace and attach its retraining/timing statistics."""
    trace = list(trace)
    ts = [r.get("t") if _is_row(r) else r.t for r in trace]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise InvalidInputError("trace time indices must be strictly increasing")
    m = score_detections(detections_of(trace), labels, cfg)
    try:
        st = trace_stats(trace)
    except InvalidInputError:
        return m
    m.retraining_ratio = st.retraining_ratio
    m.retraining_ratio1 = st.retraining_ratio1
    m.retraining_ratio2 = st.retraining_ratio2
    if not math.isnan(st.mean_time):
        m.mean_detection_time = st.mean_time
        m.std_detection_time = st.std_time
    return m


def format_metrics(m: Metrics) -> str:
    """Aligned two-column text; undefined values print as ``n/a``."""
    def fmt(v):
        if v is None:
            return "n/a"
        if isinstance(v, float):
            return f"{v:.4f}" if abs(v) >= 1e-3 or v == 0 else f"{v:.3e}"
        return str(v)

    rows = list(m.to_dict().items())
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {fmt(v)}" for k, v in rows)
