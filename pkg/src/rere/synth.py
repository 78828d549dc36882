"""Deterministic synthetic streams for tests, demos and benchmarks."""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidConfigError

KINDS = ("constant", "sine", "level-shift", "spike", "nab")


def _noise(n: int, sd: float, seed: int) -> np.ndarray:
    if sd < 0:
        raise InvalidConfigError("noise must be >= 0")
    if sd == 0:
        return np.zeros(n)
    return sd * np.random.default_rng(seed).standard_normal(n)


def _check_n(n: int, min_n: int = 1):
    if n < min_n:
        raise InvalidConfigError(f"n must be >= {min_n}")


def constant(n: int, value: float = 10.0) -> np.ndarray:
    _check_n(n)
    return np.full(n, float(value))


def sine(n: int, offset: float = 10.0, amplitude: float = 1.0, period: float = 50.0,
         noise: float = 0.0, seed: int = 0) -> np.ndarray:
    _check_n(n)
    if period <= 0:
        raise InvalidConfigError("period must be > 0")
    t = np.arange(n)
    return offset + amplitude * np.sin(2 * math.pi * t / period) + _noise(n, noise, seed)


def level_shift(n: int, start: float = 10.0, end: float = 12.0, at: int = 150,
                ramp: int = 0, amplitude: float = 0.0, period: float = 50.0,
                noise: float = 0.0, seed: int = 0) -> np.ndarray:
    """Mean moves from ``start`` to ``end`` beginning at ``at``.

    With ``ramp > 0`` the move is linear over ``ramp`` steps and reaches
    ``end`` at index ``at + ramp - 1``. ``amplitude`` adds a sine baseline.
    """
    _check_n(n)
    if not 0 <= at < n:
        raise InvalidConfigError("shift index outside the series")
    if ramp < 0:
        raise InvalidConfigError("ramp must be >= 0")
    t = np.arange(n)
    level = np.full(n, float(start))
    if ramp == 0:
        level[at:] = end
    else:
        frac = np.clip((t - at + 1) / ramp, 0.0, 1.0)
        level = start + (end - start) * frac
        level[:at] = start
    base = sine(n, 0.0, amplitude, period) if amplitude else 0.0
    return level + base + _noise(n, noise, seed)


def spike(n: int, at: int = 200, magnitude: float = 10.0, offset: float = 10.0,
          amplitude: float = 1.0, period: float = 50.0, noise: float = 0.0,
          seed: int = 0) -> np.ndarray:
    """Sine baseline with the value at ``at`` multiplied by ``magnitude``."""
    if not 0 <= at < n:
        raise InvalidConfigError("spike index outside the series")
    x = sine(n, offset, amplitude, period, noise, seed)
    x[at] *= magnitude
    return x


def nab_like(n: int = 4032, seed: int = 0, level: float = 40.0) -> np.ndarray:
    """CPU-utilisation-like series: AR(1) jitter around a daily cycle.

    Five-minute cadence (288 points a day), a couple of short bursts and one
    lasting level change, loosely modelled on the cloud-watch traces the
    detector was designed for. Values stay strictly positive.
    """
    _check_n(n)
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    daily = 2.0 * np.sin(2 * math.pi * t / 288.0)
    ar = np.empty(n)
    prev = 0.0
    eps = rng.normal(0.0, 0.6, n)
    for i in range(n):
        prev = 0.8 * prev + eps[i]
        ar[i] = prev
    x = level + daily + ar
    for frac in (0.3, 0.75):
        k = int(frac * n)
        x[k: k + 3] += level * 0.8
    shift_at = int(0.55 * n)
    x[shift_at:] += level * 0.15
    return np.maximum(x, 0.5)


def generate(kind: str, n: int, **params) -> np.ndarray:
    if kind == "constant":
        return constant(n, **params)
    if kind == "sine":
        return sine(n, **params)
    if kind == "level-shift":
        return level_shift(n, **params)
    if kind == "spike":
        return spike(n, **params)
    if kind == "nab":
        return nab_like(n, **params)
    raise InvalidConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
