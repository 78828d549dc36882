"""Single-hidden-layer LSTM used as the one-step forecaster.

Each window of ``b`` observations is min-max normalised on its own, the
model is trained on the ``b - 1`` shifted pairs inside the window, and the
next value is read out after feeding the whole window. Models are small
(10 hidden units by default) and are rebuilt from scratch on every
retraining, so nothing here needs to be fast except the kernels in
:mod:`rere._backend`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _backend
from .errors import InvalidConfigError, InvalidInputError

GATES = ("input", "forget", "output", "cell")


def n_params(hidden_units: int) -> int:
    return 4 * hidden_units * hidden_units + 9 * hidden_units + 1


@dataclass(frozen=True, eq=False)
class LstmModel:
    """Trained (or freshly initialised) LSTM parameters.

    ``theta`` is the flat parameter vector in the kernel layout (see
    :mod:`rere._lstm_py`); it is made read-only on construction.
    """

    hidden_units: int
    theta: np.ndarray
    init_seed: int | None = None
    loss_history: tuple[float, ...] = ()

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64)
        if theta.shape != (n_params(self.hidden_units),):
            raise InvalidConfigError(
                f"expected {n_params(self.hidden_units)} parameters, got {theta.shape}"
            )
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)

    @property
    def input_weights(self) -> np.ndarray:
        """Shape ``(4, H)``: one input-weight column per gate."""
        h = self.hidden_units
        return self.theta[: 4 * h].reshape(4, h)

    @property
    def recurrent_weights(self) -> np.ndarray:
        h = self.hidden_units
        return self.theta[4 * h : 4 * h + 4 * h * h].reshape(4, h, h)

    @property
    def gate_biases(self) -> np.ndarray:
        h = self.hidden_units
        o = 4 * h + 4 * h * h
        return self.theta[o : o + 4 * h].reshape(4, h)

    @property
    def readout_weights(self) -> np.ndarray:
        h = self.hidden_units
        o = 8 * h + 4 * h * h
        return self.theta[o : o + h]

    @property
    def readout_bias(self) -> float:
        return float(self.theta[-1])

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.theta).all())

    def same_as(self, other: "LstmModel") -> bool:
        """Bit-level equality of parameters."""
        return (
            self.hidden_units == other.hidden_units
            and self.theta.tobytes() == other.theta.tobytes()
        )

    @classmethod
    def from_parts(cls, input_weights, recurrent_weights, gate_biases,
                   readout_weights, readout_bias, init_seed=None) -> "LstmModel":
        W = np.asarray(input_weights, dtype=np.float64)
        h = W.shape[-1]
        theta = np.concatenate([
            W.ravel(),
            np.asarray(recurrent_weights, dtype=np.float64).ravel(),
            np.asarray(gate_biases, dtype=np.float64).ravel(),
            np.asarray(readout_weights, dtype=np.float64).ravel(),
            [float(readout_bias)],
        ])
        return cls(h, theta, init_seed)

    @classmethod
    def zeros(cls, hidden_units: int = 10) -> "LstmModel":
        return cls(hidden_units, np.zeros(n_params(hidden_units)))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.15
    max_epochs: int = 50
    min_epochs: int = 1
    patience: int = 3
    rel_improvement_tol: float = 1e-3
    clip_norm: float = 5.0
    hidden_units: int = 10
    seed: int = 1

    def __post_init__(self):
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise InvalidConfigError("learning_rate must be a positive finite number")
        if not 1 <= self.min_epochs <= self.max_epochs:
            raise InvalidConfigError("need 1 <= min_epochs <= max_epochs")
        if self.patience < 1:
            raise InvalidConfigError("patience must be >= 1")
        if self.rel_improvement_tol < 0:
            raise InvalidConfigError("rel_improvement_tol must be >= 0")
        if not self.clip_norm > 0:
            raise InvalidConfigError("clip_norm must be > 0")
        if self.hidden_units < 1:
            raise InvalidConfigError("hidden_units must be >= 1")


@dataclass(frozen=True)
class TrainingWindow:
    """``b`` consecutive observations plus their min-max scaling."""

    values: tuple[float, ...]
    norm_min: float = field(init=False)
    norm_max: float = field(init=False)

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise InvalidInputError(f"window needs at least 2 values, got {len(vals)}")
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError("window contains a non-finite value")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "norm_min", min(vals))
        object.__setattr__(self, "norm_max", max(vals))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def degenerate(self) -> bool:
        return self.norm_max == self.norm_min

    @property
    def scale(self) -> float:
        # constant windows map to 0 and come back with unit scale
        return 1.0 if self.degenerate else self.norm_max - self.norm_min

    def normalize(self, v: float) -> float:
        if self.degenerate:
            return 0.0
        return (v - self.norm_min) / self.scale

    def denormalize(self, y: float) -> float:
        if self.degenerate:
            return y + self.norm_min
        # exact at both ends of the window
        return y * self.norm_max + (1.0 - y) * self.norm_min

    def normalized(self) -> np.ndarray:
        return np.array([self.normalize(v) for v in self.values])


def as_window(values: TrainingWindow | Sequence[float]) -> TrainingWindow:
    if isinstance(values, TrainingWindow):
        return values
    return TrainingWindow(tuple(values))


def init_model(seed: int, hidden_units: int = 10) -> LstmModel:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero biases."""
    if hidden_units < 1:
        raise InvalidConfigError("hidden_units must be >= 1")
    h = hidden_units
    s = 1.0 / math.sqrt(h)
    rng = np.random.default_rng(seed)
    theta = np.zeros(n_params(h))
    n_w, n_u = 4 * h, 4 * h * h
    theta[: n_w + n_u] = rng.uniform(-s, s, n_w + n_u)
    o = 8 * h + 4 * h * h
    theta[o : o + h] = rng.uniform(-s, s, h)
    return LstmModel(h, theta, init_seed=seed)


def training_pairs(window: TrainingWindow) -> tuple[np.ndarray, np.ndarray]:
    z = window.normalized()
    return z[:-1], z[1:]


def loss_and_grad(model: LstmModel, window, backend: str | None = None):
    """MSE over the window's one-step pairs and its gradient w.r.t. ``theta``."""
    xs, ts = training_pairs(as_window(window))
    return _backend.get(backend).loss_grad(model.theta, model.hidden_units, xs, ts)


def train_window(
    model_or_seed: LstmModel | int,
    window,
    cfg: TrainConfig | None = None,
    backend: str | None = None,
) -> tuple[LstmModel, int]:
    """Train on one window and return ``(model, epochs_used)``.

    An integer builds a fresh model from that seed; a model is used as the
    starting point as-is.
    """
    cfg = cfg or TrainConfig()
    window = as_window(window)
    if isinstance(model_or_seed, LstmModel):
        start = model_or_seed
    else:
        start = init_model(int(model_or_seed), cfg.hidden_units)
    xs, ts = training_pairs(window)
    kern = _backend.get(backend)
    theta, epochs, losses = kern.train(
        start.theta, start.hidden_units, xs, ts,
        cfg.learning_rate, cfg.max_epochs, cfg.min_epochs,
        cfg.patience, cfg.rel_improvement_tol, cfg.clip_norm,
    )
    model = LstmModel(
        start.hidden_units, theta, init_seed=start.init_seed,
        loss_history=tuple(float(v) for v in losses),
    )
    return model, int(epochs)


def predict_next(model: LstmModel, window, backend: str | None = None) -> float:
    """Forecast the value following ``window`` in original units."""
    window = as_window(window)
    y = _backend.get(backend).predict(model.theta, model.hidden_units, window.normalized())
    return window.denormalize(float(y))
