"""Two-detector streaming anomaly engine.

The engine bootstraps a single forecaster during a probation period of
``2b + 1`` points, then hands identical copies of everything to two
detectors. Both judge every later point with an AARE check against a
three-sigma threshold, retrain on a miss, and judge again. A point is an
anomaly only when both detectors call it abnormal.

The detectors differ only in which past AARE values feed their threshold:
detector 1 uses all of them, detector 2 only those of points it judged
normal.
"""

from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    EmptyHistoryError,
    InternalStateError,
    InvalidConfigError,
    InvalidInputError,
    SequencingError,
)
from .lstm import LstmModel, TrainConfig, TrainingWindow, predict_next, train_window


class Policy(enum.Enum):
    ALL = "all"
    NORMAL_ONLY = "normal_only"


class Mode(enum.Enum):
    DUAL = "dual"
    SINGLE = "single"


class Phase(enum.Enum):
    PROBATION = "probation"
    DETECTING = "detecting"


PROBATION_ID = 0


def derive_seed(base: int, detector_id: int, t: int) -> int:
    """Seed for the model trained by ``detector_id`` at time ``t``.

    Streams for different detectors (and for the shared probation pipeline,
    id 0) never collide for a given base seed.
    """
    ss = np.random.SeedSequence([int(base), int(detector_id), int(t)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def compute_aare(observed: Sequence[float], predicted: Sequence[float],
                 epsilon: float = 1e-7) -> float:
    """Average absolute relative error of ``predicted`` against ``observed``.

    Denominators smaller than ``epsilon`` in magnitude are clamped to it.
    """
    if len(observed) != len(predicted):
        raise InvalidInputError(
            f"length mismatch: {len(observed)} observed vs {len(predicted)} predicted"
        )
    if not observed:
        raise InvalidInputError("empty AARE window")
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be > 0")
    total = 0.0
    for v, p in zip(observed, predicted):
        if not (math.isfinite(v) and math.isfinite(p)):
            raise InvalidInputError("non-finite value in AARE window")
        total += abs(v - p) / max(abs(v), epsilon)
    return total / len(observed)


def compute_threshold(aare_history: Sequence[float], include_flags: Sequence[bool] | None = None,
                      sigma_multiplier: float = 3.0) -> float:
    """Mean plus ``sigma_multiplier`` population standard deviations.

    Only entries whose flag is true take part; ``None`` includes everything.
    """
    if include_flags is None:
        chosen = list(aare_history)
    else:
        if len(include_flags) != len(aare_history):
            raise InvalidInputError("flags and history differ in length")
        chosen = [a for a, keep in zip(aare_history, include_flags) if keep]
    if not chosen:
        raise EmptyHistoryError("no AARE value eligible for the threshold")
    n = len(chosen)
    mu = sum(chosen) / n
    var = sum((a - mu) ** 2 for a in chosen) / n
    return mu + sigma_multiplier * math.sqrt(var)


class RunningStats:
    """Welford mean/variance accumulator (population variance)."""

    __slots__ = ("count", "mean", "m2")

    def __init__(self, values: Iterable[float] = ()):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0
        for v in values:
            self.push(v)

    def push(self, x: float) -> None:
        self.count += 1
        d = x - self.mean
        self.mean += d / self.count
        self.m2 += d * (x - self.mean)

    def copy(self) -> "RunningStats":
        other = RunningStats()
        other.count, other.mean, other.m2 = self.count, self.mean, self.m2
        return other

    def threshold(self, sigma_multiplier: float, extra: float | None = None) -> float:
        s = self
        if extra is not None:
            s = self.copy()
            s.push(extra)
        if s.count == 0:
            raise EmptyHistoryError("no AARE value eligible for the threshold")
        return s.mean + sigma_multiplier * math.sqrt(max(s.m2, 0.0) / s.count)


@dataclass(frozen=True)
class DetectorConfig:
    lookback: int = 3
    sigma_multiplier: float = 3.0
    epsilon: float = 1e-7
    seed: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    include_current: bool = True
    keep_retrained_on_abnormal: bool = False
    backend: str | None = None


@dataclass(frozen=True)
class StepVerdict:
    t: int
    value: float
    predicted: float
    aare: float
    threshold: float
    is_abnormal: bool
    retrained: bool
    epochs_used: int | None = None
    initial_aare: float | None = None
    next_predicted: float | None = None


@dataclass(frozen=True)
class FinalRecord:
    t: int
    value: float
    verdict1: StepVerdict
    verdict2: StepVerdict | None
    anomaly: bool
    elapsed: float


@dataclass(frozen=True)
class ProbationRecord:
    t: int
    value: float
    predicted: float | None
    aare: float | None
    trained: bool
    elapsed: float


class DetectorState:
    """One detector: its model, logs and threshold bookkeeping."""

    def __init__(self, detector_id: int, policy: Policy, model: LstmModel,
                 prediction_log: dict[int, float], aare_log: dict[int, float],
                 cfg: DetectorConfig):
        self.detector_id = detector_id
        self.policy = policy
        self.model = model
        self.prediction_log = dict(prediction_log)
        self.aare_log = dict(aare_log)
        self.cfg = cfg
        self.normal_flags: dict[int, bool] = {}
        self.threshold_log: dict[int, float] = {}
        self.initial_aare_log: dict[int, float] = {}
        self.retrain_count = 0
        if policy is Policy.NORMAL_ONLY:
            # bootstrap AAREs carry no verdict and count as normal
            self.normal_flags = {t: True for t in self.aare_log}
        self._stats = RunningStats(self.aare_log[t] for t in sorted(self.aare_log))

    def _aare(self, t: int, recent: Sequence[float]) -> float:
        b = self.cfg.lookback
        try:
            preds = [self.prediction_log[y] for y in range(t - b + 1, t + 1)]
        except KeyError as exc:
            raise InternalStateError(
                f"detector {self.detector_id}: no prediction logged for t={exc.args[0]}"
            ) from None
        return compute_aare(recent[-b:], preds, self.cfg.epsilon)

    def step(self, t: int, v_t: float, recent: Sequence[float]) -> StepVerdict:
        return detector_step(self, t, v_t, recent)


def detector_step(state: DetectorState, t: int, v_t: float,
                  recent: Sequence[float]) -> StepVerdict:
    """Judge ``v_t``; ``recent`` holds ``v_{t-b} .. v_t`` (``b + 1`` values)."""
    cfg = state.cfg
    b = cfg.lookback
    if len(recent) != b + 1 or recent[-1] != v_t:
        raise InternalStateError(f"expected the last {b + 1} values ending at v_t")
    if t < 2 * b + 1:
        raise InternalStateError(f"detector step at t={t} falls inside probation")

    aare = state._aare(t, recent)
    thd = state._stats.threshold(cfg.sigma_multiplier, aare if cfg.include_current else None)
    state.aare_log[t] = aare
    state.threshold_log[t] = thd

    retrained = False
    epochs = None
    initial = None
    abnormal = False
    if aare > thd:
        initial = aare
        state.initial_aare_log[t] = aare
        prev_window = TrainingWindow(tuple(recent[:-1]))
        seed = derive_seed(cfg.seed, state.detector_id, t)
        new_model, epochs = train_window(seed, prev_window, cfg.train, cfg.backend)
        retrained = True
        state.retrain_count += 1
        state.prediction_log[t] = predict_next(new_model, prev_window, cfg.backend)
        aare = state._aare(t, recent)
        state.aare_log[t] = aare
        if aare <= thd:
            state.model = new_model
        else:
            abnormal = True
            if cfg.keep_retrained_on_abnormal:
                state.model = new_model

    cur_window = TrainingWindow(tuple(recent[1:]))
    state.prediction_log[t + 1] = predict_next(state.model, cur_window, cfg.backend)

    if state.policy is Policy.NORMAL_ONLY:
        state.normal_flags[t] = not abnormal
        if not abnormal:
            state._stats.push(aare)
    else:
        state._stats.push(aare)

    return StepVerdict(
        t=t, value=v_t, predicted=state.prediction_log[t], aare=aare, threshold=thd,
        is_abnormal=abnormal, retrained=retrained, epochs_used=epochs,
        initial_aare=initial, next_predicted=state.prediction_log[t + 1],
    )


@dataclass(frozen=True)
class ReReConfig:
    lookback: int = 3
    sigma_multiplier: float = 3.0
    epsilon: float = 1e-7
    seed: int = 1
    mode: Mode = Mode.DUAL
    train: TrainConfig = field(default_factory=TrainConfig)
    include_current_aare1: bool = True
    include_current_aare2: bool = False
    keep_retrained_on_abnormal: bool = False
    backend: str | None = None
    parallel: bool = False

    def __post_init__(self):
        if self.lookback < 2:
            raise InvalidConfigError("lookback must be >= 2")
        if not self.sigma_multiplier >= 0:
            raise InvalidConfigError("sigma_multiplier must be >= 0")
        if not self.epsilon > 0:
            raise InvalidConfigError("epsilon must be > 0")
        if self.seed < 0:
            raise InvalidConfigError("seed must be >= 0")
        if isinstance(self.mode, str):
            object.__setattr__(self, "mode", Mode(self.mode))

    def detector_config(self, detector_id: int) -> DetectorConfig:
        return DetectorConfig(
            lookback=self.lookback,
            sigma_multiplier=self.sigma_multiplier,
            epsilon=self.epsilon,
            seed=self.seed,
            train=self.train,
            include_current=self.include_current_aare1 if detector_id == 1 else self.include_current_aare2,
            keep_retrained_on_abnormal=self.keep_retrained_on_abnormal,
            backend=self.backend,
        )


class ReRe:
    """Streaming engine; feed one value per time step.

    Args:
        cfg: engine configuration.
        sink: optional callable receiving every :class:`FinalRecord`.
    """

    def __init__(self, cfg: ReReConfig | None = None,
                 sink: Callable[[FinalRecord], None] | None = None):
        self.cfg = cfg or ReReConfig()
        self.sink = sink
        self.t = 0  # next expected index
        self.b = self.cfg.lookback
        self._recent: list[float] = []
        self._model: LstmModel | None = None
        self._pred: dict[int, float] = {}
        self._aare: dict[int, float] = {}
        self.probation_trainings = 0
        self.detector1: DetectorState | None = None
        self.detector2: DetectorState | None = None
        self._pool = None

    @property
    def phase(self) -> Phase:
        return Phase.PROBATION if self.t <= 2 * self.b else Phase.DETECTING

    @property
    def detectors(self) -> list[DetectorState]:
        return [d for d in (self.detector1, self.detector2) if d is not None]

    def _probation(self, t: int, v: float) -> ProbationRecord:
        b, cfg = self.b, self.cfg
        trained = False
        if t >= 2 * b - 1:
            obs = self._recent[-b:]
            preds = [self._pred[y] for y in range(t - b + 1, t + 1)]
            self._aare[t] = compute_aare(obs, preds, cfg.epsilon)
        if t >= b - 1:
            window = TrainingWindow(tuple(self._recent[-b:]))
            seed = derive_seed(cfg.seed, PROBATION_ID, t)
            self._model, _ = train_window(seed, window, cfg.train, cfg.backend)
            self._pred[t + 1] = predict_next(self._model, window, cfg.backend)
            self.probation_trainings += 1
            trained = True
        if t == 2 * b:
            self.detector1 = DetectorState(1, Policy.ALL, self._model, self._pred,
                                           self._aare, cfg.detector_config(1))
            if cfg.mode is Mode.DUAL:
                self.detector2 = DetectorState(2, Policy.NORMAL_ONLY, self._model, self._pred,
                                               self._aare, cfg.detector_config(2))
        return ProbationRecord(t, v, self._pred.get(t), self._aare.get(t), trained, 0.0)

    def _detect(self, t: int, v: float) -> tuple[StepVerdict, StepVerdict | None]:
        recent = tuple(self._recent)
        if self.detector2 is None:
            return self.detector1.step(t, v, recent), None
        if self.cfg.parallel:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(max_workers=2)
            f1 = self._pool.submit(self.detector1.step, t, v, recent)
            f2 = self._pool.submit(self.detector2.step, t, v, recent)
            return f1.result(), f2.result()
        return self.detector1.step(t, v, recent), self.detector2.step(t, v, recent)

    def advance(self, t: int, v_t: float) -> ProbationRecord | FinalRecord:
        """Process ``v_t`` and return what happened at this step."""
        if t != self.t:
            raise SequencingError(f"expected t={self.t}, got t={t}")
        v_t = float(v_t)
        if not math.isfinite(v_t):
            raise InvalidInputError(f"non-finite value at t={t}")
        start = time.perf_counter()
        self._recent.append(v_t)
        if len(self._recent) > self.b + 1:
            del self._recent[0]
        if t <= 2 * self.b:
            rec = self._probation(t, v_t)
            rec = replace(rec, elapsed=time.perf_counter() - start)
        else:
            v1, v2 = self._detect(t, v_t)
            anomaly = v1.is_abnormal if v2 is None else (v1.is_abnormal and v2.is_abnormal)
            rec = FinalRecord(t, v_t, v1, v2, anomaly, time.perf_counter() - start)
            if self.sink is not None:
                self.sink(rec)
        self.t = t + 1
        return rec

    def step(self, t: int, v_t: float) -> FinalRecord | None:
        rec = self.advance(t, v_t)
        return rec if isinstance(rec, FinalRecord) else None

    def push(self, v_t: float) -> FinalRecord | None:
        return self.step(self.t, v_t)

    def run(self, values: Iterable[float]) -> Iterator[ProbationRecord | FinalRecord]:
        for v in values:
            yield self.advance(self.t, v)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def rere_step(state: ReRe, t: int, v_t: float) -> FinalRecord | None:
    return state.step(t, v_t)


def detect(values: Iterable[float], cfg: ReReConfig | None = None) -> list[FinalRecord]:
    """Run a whole series and return the post-probation records."""
    engine = ReRe(cfg)
    out = [r for r in engine.run(values) if isinstance(r, FinalRecord)]
    engine.close()
    return out
