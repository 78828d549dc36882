"""Timing harness comparing the compiled and pure-Python kernels."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .detector import FinalRecord, ReRe, ReReConfig
from .eval import trace_stats
from .lstm import TrainConfig, TrainingWindow, init_model, train_window
from .synth import nab_like


@dataclass
class KernelTiming:
    backend: str
    train_ms: float
    epochs: float


@dataclass
class EngineTiming:
    backend: str
    points: int
    wall_s: float
    mean_step_ms: float
    std_step_ms: float
    retraining_ratio: float
    anomalies: int


def time_training(backend: str, repeats: int = 200, lookback: int = 3,
                  hidden_units: int = 10, seed: int = 0) -> KernelTiming:
    """Average wall time of one full ``train_window`` call (max 50 epochs)."""
    rng = np.random.default_rng(seed)
    windows = [TrainingWindow(tuple(rng.uniform(1, 10, lookback))) for _ in range(16)]
    cfg = TrainConfig(hidden_units=hidden_units)
    epochs = []
    start = time.perf_counter()
    for i in range(repeats):
        _, e = train_window(init_model(i, hidden_units), windows[i % 16], cfg, backend)
        epochs.append(e)
    elapsed = time.perf_counter() - start
    return KernelTiming(backend, 1000 * elapsed / repeats, statistics.fmean(epochs))


def time_engine(backend: str, values, cfg: ReReConfig | None = None) -> EngineTiming:
    cfg = replace(cfg or ReReConfig(), backend=backend)
    engine = ReRe(cfg)
    start = time.perf_counter()
    finals = [r for r in engine.run(values) if isinstance(r, FinalRecord)]
    wall = time.perf_counter() - start
    st = trace_stats(finals)
    return EngineTiming(
        backend, len(values), wall, 1000 * st.mean_time, 1000 * st.std_time,
        st.retraining_ratio, sum(r.anomaly for r in finals),
    )


def run(n: int = 4032, seed: int = 0, backends: list[str] | None = None,
        repeats: int = 200) -> dict:
    backends = backends or _backend.available()
    values = nab_like(n, seed=seed)
    out = {"kernel": [], "engine": []}
    for name in backends:
        out["kernel"].append(time_training(name, repeats=repeats))
        out["engine"].append(time_engine(name, values, ReReConfig(seed=seed)))
    return out


def render(result: dict) -> str:
    lines = ["training kernel (one window, b=3, H=10)",
             f"  {'backend':<10}{'ms/train':>12}{'epochs':>10}"]
    for k in result["kernel"]:
        lines.append(f"  {k.backend:<10}{k.train_ms:>12.4f}{k.epochs:>10.1f}")
    lines.append("engine on NAB-like stream")
    lines.append(f"  {'backend':<10}{'points':>8}{'wall s':>10}{'ms/step':>10}"
                 f"{'std ms':>10}{'retrain':>9}{'anom':>6}")
    for e in result["engine"]:
        lines.append(f"  {e.backend:<10}{e.points:>8}{e.wall_s:>10.2f}{e.mean_step_ms:>10.4f}"
                     f"{e.std_step_ms:>10.4f}{e.retraining_ratio:>9.2%}{e.anomalies:>6}")
    ks = {k.backend: k.train_ms for k in result["kernel"]}
    if "compiled" in ks and "python" in ks and ks["compiled"] > 0:
        lines.append(f"speedup (training): {ks['python'] / ks['compiled']:.1f}x")
    return "\n".join(lines)
