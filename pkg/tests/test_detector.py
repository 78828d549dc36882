import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import finals, run_engine
from oracles import brute_aare, brute_threshold, check_conformance, trace_aare_errors
from rere import synth
from rere.detector import (
    DetectorConfig,
    DetectorState,
    FinalRecord,
    Mode,
    Phase,
    Policy,
    ReRe,
    ReReConfig,
    RunningStats,
    StepVerdict,
    compute_aare,
    compute_threshold,
    derive_seed,
    detect,
    detector_step,
    rere_step,
)
from rere.errors import (
    EmptyHistoryError,
    InternalStateError,
    InvalidConfigError,
    InvalidInputError,
    SequencingError,
)
from rere.lstm import LstmModel, init_model


class TestAare:
    def test_perfect(self):
        assert compute_aare((10, 10, 10), (10, 10, 10)) == 0.0

    def test_symmetric_misses(self):
        assert compute_aare((10, 10, 10), (9, 11, 10)) == pytest.approx(0.2 / 3, abs=1e-15)

    def test_mixed_scales(self):
        assert compute_aare((100, 50, 25), (110, 45, 30)) == pytest.approx(0.4 / 3, abs=1e-15)

    def test_zero_guard(self):
        got = compute_aare((0, 10, 10), (1, 10, 10), epsilon=1e-7)
        assert got == pytest.approx(1 / 1e-7 / 3, rel=1e-12)

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            compute_aare((1, 2), (1, 2, 3))
        with pytest.raises(InvalidInputError):
            compute_aare((1, math.nan), (1, 2))
        with pytest.raises(InvalidInputError):
            compute_aare((1, 2), (1, math.inf))

    @given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)), min_size=1, max_size=8))
    def test_matches_oracle(self, pairs):
        obs, pred = zip(*pairs)
        got = compute_aare(obs, pred)
        want = brute_aare(obs, pred)
        assert got >= 0
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


class TestThreshold:
    def test_zero_variance(self):
        assert compute_threshold([0.1, 0.1, 0.1]) == pytest.approx(0.1, abs=1e-15)

    def test_three_sigma(self):
        assert compute_threshold([0.1, 0.1, 0.4]) == pytest.approx(0.2 + 3 * math.sqrt(0.02), abs=1e-12)
        assert compute_threshold([0.1, 0.1, 0.4]) == pytest.approx(0.624264, abs=1e-6)

    def test_normal_only_filter(self):
        assert compute_threshold([0.1, 0.9, 0.1], [True, False, True]) == pytest.approx(0.1, abs=1e-15)

    def test_empty(self):
        with pytest.raises(EmptyHistoryError):
            compute_threshold([])
        with pytest.raises(EmptyHistoryError):
            compute_threshold([0.3], [False])
        with pytest.raises(EmptyHistoryError):
            RunningStats().threshold(3.0)

    def test_flag_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            compute_threshold([0.1, 0.2], [True])

    @given(st.lists(st.floats(0, 1e3), min_size=1, max_size=50), st.floats(0, 5))
    def test_running_stats_match_brute_force(self, values, sigma):
        rs = RunningStats(values)
        assert rs.threshold(sigma) == pytest.approx(brute_threshold(values, sigma), rel=1e-9, abs=1e-9)
        assert compute_threshold(values, sigma_multiplier=sigma) == pytest.approx(
            brute_threshold(values, sigma), rel=1e-9, abs=1e-9)

    def test_extra_does_not_commit(self):
        rs = RunningStats([0.1, 0.2])
        rs.threshold(3.0, extra=5.0)
        assert rs.count == 2


def test_derive_seed_is_disjoint_and_stable():
    seeds = {derive_seed(1, d, t) for d in (0, 1, 2) for t in range(200)}
    assert len(seeds) == 600
    assert derive_seed(1, 1, 7) == derive_seed(1, 1, 7)
    assert derive_seed(1, 1, 7) != derive_seed(2, 1, 7)


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        ReReConfig(lookback=1)
    with pytest.raises(InvalidConfigError):
        ReReConfig(epsilon=0)
    with pytest.raises(InvalidConfigError):
        ReReConfig(sigma_multiplier=-1)
    assert ReReConfig(mode="single").mode is Mode.SINGLE


T = 30


def _state(policy=Policy.ALL, b=3, **kw):
    """A detector that has seen a constant stream of 10 up to ``T - 1``.

    Detector 1 counts the current AARE in its own threshold, and one value
    among n sits at most sqrt(n - 1) deviations above their mean, so an
    outlier needs more than ten AAREs of history to get flagged.
    """
    preds = {y: 10.0 for y in range(b, T + 1)}
    aares = {t: 0.0 for t in range(2 * b - 1, T)}
    cfg = DetectorConfig(lookback=b, **kw)
    return DetectorState(1 if policy is Policy.ALL else 2, policy, init_model(0, 10), preds, aares, cfg)


class TestDetectorStep:
    def test_constant_is_normal_without_retraining(self):
        s = _state()
        v = detector_step(s, T, 10.0, (10.0,) * 4)
        assert isinstance(v, StepVerdict)
        assert (v.is_abnormal, v.retrained, v.aare) == (False, False, 0.0)
        assert s.retrain_count == 0
        assert T + 1 in s.prediction_log

    def test_jump_is_abnormal_after_retraining(self):
        for policy in Policy:
            s = _state(policy)
            before = s.model
            v = detector_step(s, T, 1000.0, (10.0, 10.0, 10.0, 1000.0))
            assert v.retrained and v.is_abnormal
            assert v.aare > v.threshold
            assert s.retrain_count == 1
            assert s.model is before
            assert T in s.initial_aare_log
            if policy is Policy.NORMAL_ONLY:
                assert s.normal_flags[T] is False

    def test_keep_retrained_switch(self):
        s = _state(keep_retrained_on_abnormal=True)
        before = s.model
        v = detector_step(s, T, 1000.0, (10.0, 10.0, 10.0, 1000.0))
        assert v.is_abnormal
        assert s.model is not before
        assert s.model.init_seed == derive_seed(1, 1, T)

    def test_short_history_cannot_flag_under_policy_all(self):
        b = 3
        preds = {y: 10.0 for y in range(b, 8)}
        s = DetectorState(1, Policy.ALL, init_model(0, 10), preds, {5: 0.0, 6: 0.0}, DetectorConfig())
        v = detector_step(s, 7, 1000.0, (10.0, 10.0, 10.0, 1000.0))
        assert not v.is_abnormal and not v.retrained

    def test_missing_prediction(self):
        s = _state()
        del s.prediction_log[T - 1]
        with pytest.raises(InternalStateError):
            detector_step(s, T, 10.0, (10.0,) * 4)

    def test_rejects_probation_time_and_bad_window(self):
        s = _state()
        with pytest.raises(InternalStateError):
            detector_step(s, 6, 10.0, (10.0,) * 4)
        with pytest.raises(InternalStateError):
            detector_step(s, T, 10.0, (10.0,) * 3)

    def test_gradual_shift_retrains_to_normal_and_replaces_model(self):
        values = synth.level_shift(300, 10, 12, 150, ramp=50, noise=0.03, seed=3)
        engine = ReRe(ReReConfig(seed=1, mode=Mode.SINGLE))
        hits = []
        for t, v in enumerate(values):
            before = engine.detector1.model if engine.detector1 else None
            rec = engine.advance(t, v)
            if isinstance(rec, FinalRecord) and rec.verdict1.retrained and not rec.verdict1.is_abnormal:
                assert engine.detector1.model is not before
                assert engine.detector1.model.init_seed == derive_seed(1, 1, t)
                assert rec.verdict1.initial_aare > rec.verdict1.threshold >= rec.verdict1.aare
                hits.append(t)
        assert hits, "no retrain-then-normal step on the gradual shift"


class TestEngine:
    def test_probation_is_silent(self):
        e = ReRe()
        for t in range(7):
            assert e.phase is Phase.PROBATION
            assert rere_step(e, t, 10.0) is None
        assert e.phase is Phase.DETECTING
        rec = rere_step(e, 7, 10.0)
        assert isinstance(rec, FinalRecord) and rec.t == 7

    def test_sequencing(self):
        e = ReRe()
        e.step(0, 1.0)
        with pytest.raises(SequencingError):
            e.step(2, 1.0)
        with pytest.raises(SequencingError):
            e.step(0, 1.0)
        with pytest.raises(InvalidInputError):
            e.step(1, math.nan)

    def test_and_rule_with_stub_verdicts(self):
        e = ReRe()
        for t in range(7):
            e.push(10.0)

        def fake(flag):
            def step(t, v, recent):
                return StepVerdict(t, v, v, 0.0, 0.0, flag, flag)
            return step

        for a, b, want in [(True, False, False), (False, True, False), (True, True, True), (False, False, False)]:
            e.detector1.step = fake(a)
            e.detector2.step = fake(b)
            rec = e.push(10.0)
            assert rec.anomaly is want

    def test_sink_receives_every_final_record(self):
        got = []
        e = ReRe(sink=got.append)
        out = [e.push(v) for v in synth.sine(40)]
        assert got == [r for r in out if r is not None]
        assert len(got) == 40 - 7

    def test_single_mode(self):
        recs = detect(synth.spike(260), ReReConfig(mode=Mode.SINGLE))
        assert all(r.verdict2 is None for r in recs)
        assert all(r.anomaly == r.verdict1.is_abnormal for r in recs)

    def test_determinism(self):
        vals = synth.nab_like(400, seed=2)
        a = detect(vals, ReReConfig(seed=5))
        b = detect(vals, ReReConfig(seed=5))
        strip = lambda rs: [(r.t, r.verdict1, r.verdict2, r.anomaly) for r in rs]
        assert strip(a) == strip(b)
        c = detect(vals, ReReConfig(seed=6))
        assert [r.verdict1.predicted for r in a] != [r.verdict1.predicted for r in c]

    def test_parallel_matches_sequential(self):
        vals = synth.nab_like(300, seed=4)
        seq = detect(vals, ReReConfig())
        par = detect(vals, ReReConfig(parallel=True))
        assert [(r.verdict1, r.verdict2) for r in seq] == [(r.verdict1, r.verdict2) for r in par]

    def test_other_lookback(self):
        _, recs, rows = run_engine(synth.spike(260), ReReConfig(lookback=5))
        assert check_conformance(rows, 5) == []
        assert finals(recs)[0].t == 11


@pytest.fixture(scope="module")
def run():
    vals = synth.nab_like(500, seed=1)
    return run_engine(vals, ReReConfig(seed=3))


class TestInvariants:
    def test_conformance(self, run):
        _, _, rows = run
        assert check_conformance(rows, 3) == []

    def test_aare_oracle(self, run):
        _, _, rows = run
        for d in (1, 2):
            worst, count = trace_aare_errors(rows, 3, d)
            assert count == 500 - 5
            assert worst <= 1e-12

    def test_threshold_oracle(self, run):
        engine, recs, _ = run
        d1, d2 = engine.detector1, engine.detector2
        for rec in finals(recs):
            t = rec.t
            past = range(5, t)
            v1 = rec.verdict1
            cur = v1.initial_aare if v1.retrained else v1.aare
            want1 = brute_threshold([d1.aare_log[y] for y in past] + [cur])
            assert abs(v1.threshold - want1) <= 1e-12
            included = [d2.aare_log[y] for y in past if d2.normal_flags[y]]
            assert abs(rec.verdict2.threshold - brute_threshold(included)) <= 1e-12

    def test_detector2_set_is_normal_subset(self, run):
        engine, recs, _ = run
        d2 = engine.detector2
        for rec in finals(recs):
            assert d2.normal_flags[rec.t] == (not rec.verdict2.is_abnormal)
        assert all(d2.normal_flags[t] for t in (5, 6))

    def test_retrain_counts(self, run):
        engine, recs, _ = run
        fr = finals(recs)
        assert engine.detector1.retrain_count == sum(r.verdict1.retrained for r in fr)
        assert engine.detector2.retrain_count == sum(r.verdict2.retrained for r in fr)
        assert len(engine.detector1.initial_aare_log) == engine.detector1.retrain_count

    def test_abnormal_requires_retraining(self, run):
        for rec in finals(run[1]):
            for v in (rec.verdict1, rec.verdict2):
                assert v.retrained or not v.is_abnormal
                assert v.retrained == (v.epochs_used is not None)


@settings(max_examples=15, deadline=None)
@given(
    vals=st.lists(st.floats(0.5, 100), min_size=8, max_size=30),
    seed=st.integers(0, 1000),
    b=st.integers(2, 4),
)
def test_conformance_property(vals, seed, b):
    _, recs, rows = run_engine(vals, ReReConfig(seed=seed, lookback=b))
    assert check_conformance(rows, b) == []
    for d in (1, 2):
        worst, _ = trace_aare_errors(rows, b, d)
        assert worst <= 1e-12
