import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import run_engine
from rere import synth
from rere.detector import ReReConfig
from rere.errors import InvalidInputError, UndefinedMetricError
from rere.eval import (
    EvalConfig,
    LabelSet,
    MatchMode,
    detections_of,
    evaluate,
    format_metrics,
    fscore,
    score_detections,
    trace_stats,
)


def _row(t, anomaly, r1=False, r2=False, elapsed_ms=1.0):
    return {"t": t, "phase": "detecting", "anomaly": anomaly,
            "retrained1": r1, "retrained2": r2, "elapsed_ms": elapsed_ms}


class TestFscore:
    def test_values(self):
        assert fscore(0.5263, 1) == pytest.approx(0.6896, abs=1e-4)
        assert fscore(1, 1) == 1
        assert fscore(0.174, 1) == pytest.approx(0.2964, abs=1e-3)

    def test_undefined(self):
        assert fscore(0, 0) is None
        assert fscore(None, 1) is None

    def test_range(self):
        with pytest.raises(InvalidInputError):
            fscore(1.2, 0.5)
        with pytest.raises(InvalidInputError):
            fscore(0.5, -0.1)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_symmetric_and_bounded(self, p, r):
        f = fscore(p, r)
        assert f == fscore(r, p)
        if f is not None:
            assert 0 <= f <= 2 * min(p, r) + 1e-15


class TestScoring:
    def test_window_boundary(self):
        m = score_detections([93], LabelSet((100,)), EvalConfig(k=7))
        assert (m.tp_anomalies, m.recall, m.precision) == (1, 1.0, 1.0)
        m = score_detections([92], LabelSet((100,)), EvalConfig(k=7))
        assert (m.tp_anomalies, m.recall, m.precision) == (0, 0.0, 0.0)
        assert m.fscore is None

    def test_two_labels_and_37_false_alarms(self):
        labels = LabelSet((1000, 3000))
        dets = [1000, 3000] + [10 + 50 * i for i in range(37)]
        m = score_detections(dets, labels, EvalConfig(k=0))
        assert m.precision == 2 / 39
        assert round(m.precision, 4) == 0.0513
        assert m.recall == 1
        assert m.fscore == pytest.approx(0.0976, abs=1e-4)
        assert (m.matched_detections, m.unmatched_detections, m.missed_anomalies) == (2, 37, 0)

    def test_no_detections(self):
        m = score_detections([], LabelSet((100,)), EvalConfig(k=3))
        assert m.recall == 0 and m.precision is None and m.fscore is None
        assert "n/a" in format_metrics(m)

    def test_empty_labels(self):
        with pytest.raises(UndefinedMetricError):
            score_detections([5], LabelSet(()))
        m = score_detections([5], LabelSet(()), EvalConfig(allow_empty_labels=True))
        assert m.recall is None and m.precision == 0.0

    def test_label_set_must_increase(self):
        with pytest.raises(InvalidInputError):
            LabelSet((5, 5))
        with pytest.raises(InvalidInputError):
            EvalConfig(k=-1)

    def test_event_mode_merges_runs(self):
        labels = LabelSet((100,))
        dets = [98, 99, 100, 101, 300, 301]
        point = score_detections(dets, labels, EvalConfig(k=0))
        event = score_detections(dets, labels, EvalConfig(k=0, mode=MatchMode.EVENT))
        assert point.precision == 1 / 6
        assert (event.n_detections, event.matched_detections) == (2, 1)
        assert event.precision == 0.5
        assert event.recall == point.recall == 1

    @given(
        st.sets(st.integers(0, 300), max_size=30),
        st.sets(st.integers(0, 300), min_size=1, max_size=6),
        st.integers(0, 20),
        st.integers(1, 20),
        st.sampled_from(list(MatchMode)),
    )
    def test_monotone_in_k(self, dets, labels, k, dk, mode):
        lab = LabelSet(tuple(sorted(labels)))
        a = score_detections(dets, lab, EvalConfig(k=k, mode=mode))
        b = score_detections(dets, lab, EvalConfig(k=k + dk, mode=mode))
        assert b.recall >= a.recall
        if a.precision is not None:
            assert b.precision >= a.precision

    @given(st.sets(st.integers(0, 100)), st.sets(st.integers(0, 100), min_size=1))
    def test_k0_point_is_exact_matching(self, dets, labels):
        m = score_detections(dets, sorted(labels), EvalConfig(k=0))
        assert m.tp_anomalies == len(dets & labels) == m.matched_detections


class TestTraceStats:
    def test_ratio(self):
        trace = [_row(t, False, r1=t < 356) for t in range(4028)]
        st_ = trace_stats(trace)
        assert st_.retraining_ratio1 == 356 / 4028
        assert f"{100 * st_.retraining_ratio1:.2f}%" == "8.84%"

    def test_zero_retraining(self):
        assert trace_stats([_row(t, False) for t in range(10)]).retraining_ratio == 0.0

    def test_elapsed(self):
        trace = [_row(t, False, elapsed_ms=ms) for t, ms in enumerate((10.0, 20.0, 30.0))]
        s = trace_stats(trace)
        assert s.mean_time == pytest.approx(0.02, abs=1e-15)
        assert s.std_time == pytest.approx(math.sqrt(2 / 3) * 0.01, abs=1e-15)
        assert s.std_time == pytest.approx(0.008165, abs=1e-6)

    def test_probation_rows_ignored(self):
        rows = [{"t": 0, "phase": "probation", "anomaly": None}] + [_row(1, True, r1=True)]
        s = trace_stats(rows)
        assert (s.steps, s.retrain_steps1) == (1, 1)

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            trace_stats([])


def test_evaluate_engine_trace():
    vals = synth.spike(300)
    _, recs, rows = run_engine(vals, ReReConfig(seed=1))
    labels = LabelSet((200,))
    m_obj = evaluate(recs, labels, EvalConfig(k=1))
    m_rows = evaluate(rows, labels, EvalConfig(k=1))
    assert m_obj.recall == m_rows.recall == 1.0
    assert m_obj.precision == m_rows.precision
    assert detections_of(recs) == detections_of(rows)
    assert m_obj.retraining_ratio == m_rows.retraining_ratio
    assert m_obj.mean_detection_time > 0


def test_evaluate_rejects_unordered_trace():
    with pytest.raises(InvalidInputError):
        evaluate([_row(5, True), _row(4, False)], [5])
