"""Command-line entry point.

    rere detect   INPUT [options]        stream a series through the engine
    rere evaluate TRACE LABELS [options] score a trace against labels
    rere synth    KIND [options]         print a synthetic series
    rere bench    [options]              compare compiled vs Python kernels

Every option can also be set through an environment variable named
``RERE_<OPTION>`` (upper case, dashes as underscores), e.g. ``RERE_LOOKBACK=5``.
Command-line flags win over the environment.

Exit codes: 0 success (anomalies found is still success), 2 input error,
3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager

from . import __version__
from .detector import FinalRecord, Mode, ReRe, ReReConfig
from .errors import InvalidConfigError, ReReError
from .eval import EvalConfig, LabelSet, evaluate, format_metrics, trace_stats
from .ingest import (
    DatasetFormat,
    Series,
    infer_interval,
    load_labels,
    parse_series,
    parse_timestamp,
    write_series,
)
from .lstm import TrainConfig
from .trace import dumps, read_trace, to_row

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3

ENV_PREFIX = "RERE_"


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _env(dest: str, default, conv=str):
    raw = os.environ.get(ENV_PREFIX + dest.upper())
    if raw is None:
        return default
    try:
        return conv(raw)
    except (ValueError, argparse.ArgumentTypeError):
        raise ConfigError(f"bad value {raw!r} for {ENV_PREFIX}{dest.upper()}") from None


def _opt(p, *flags, dest, default=None, type=str, **kw):
    p.add_argument(*flags, dest=dest, type=type, default=_env(dest, default, type), **kw)


def _add_engine_opts(p):
    _opt(p, "--lookback", "-b", dest="lookback", default=3, type=int, help="look-back length b")
    _opt(p, "--sigma", dest="sigma", default=3.0, type=float, help="threshold sigma multiplier")
    _opt(p, "--hidden-units", dest="hidden_units", default=10, type=int)
    _opt(p, "--learning-rate", dest="learning_rate", default=0.15, type=float)
    _opt(p, "--max-epochs", dest="max_epochs", default=50, type=int)
    _opt(p, "--epsilon", dest="epsilon", default=1e-7, type=float, help="AARE denominator guard")
    _opt(p, "--seed", dest="seed", default=1, type=int)
    _opt(p, "--mode", dest="mode", default="dual", choices=["dual", "single"])
    _opt(p, "--include-current-aare", dest="include_current_aare", default=True, type=_bool,
         metavar="BOOL", help="detector 1 threshold includes the AARE being judged")
    _opt(p, "--backend", dest="backend", default="auto", choices=["auto", "compiled", "python"])


def _add_eval_opts(p):
    _opt(p, "--k", "-k", dest="k", default=0, type=int, help="match window half-width")
    _opt(p, "--match", dest="match", default="point", choices=["point", "event"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rere", description="Streaming anomaly detection with two online LSTMs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    d = sub.add_parser("detect", help="run detection over a series")
    d.add_argument("input", nargs="?", default="-", help="series file, '-' for stdin")
    _opt(d, "--format", dest="format", default="auto", choices=["auto", "nab", "yahoo", "plain"])
    _opt(d, "--labels", dest="labels", default=None, help="label file to score the run against")
    _opt(d, "--output", "-o", dest="output", default=None, help="trace path (default stdout)")
    _opt(d, "--no-timing", dest="no_timing", default=False, type=_bool, nargs="?", const=True,
         metavar="BOOL", help="write elapsed_ms as null for reproducible traces")
    _add_engine_opts(d)
    _add_eval_opts(d)

    e = sub.add_parser("evaluate", help="score a JSON Lines trace")
    e.add_argument("trace")
    e.add_argument("labels_file", nargs="?", default=None)
    _opt(e, "--labels", dest="labels", default=None)
    _opt(e, "--output", "-o", dest="output", default=None, help="also write metrics JSON here")
    _add_eval_opts(e)

    s = sub.add_parser("synth", help="print a synthetic series (plain format)")
    s.add_argument("kind", choices=["constant", "sine", "level-shift", "spike", "nab"])
    _opt(s, "--n", "-n", dest="n", default=300, type=int)
    _opt(s, "--value", dest="value", default=10.0, type=float, help="constant level")
    _opt(s, "--offset", dest="offset", default=10.0, type=float, help="sine offset")
    _opt(s, "--amplitude", dest="amplitude", default=None, type=float)
    _opt(s, "--period", dest="period", default=50.0, type=float)
    _opt(s, "--at", dest="at", default=None, type=int, help="spike / shift index")
    _opt(s, "--magnitude", dest="magnitude", default=10.0, type=float, help="spike factor")
    _opt(s, "--from", dest="start", default=10.0, type=float, help="level before the shift")
    _opt(s, "--to", dest="end", default=12.0, type=float, help="level after the shift")
    _opt(s, "--ramp", dest="ramp", default=0, type=int, help="shift duration in steps")
    _opt(s, "--noise", dest="noise", default=0.0, type=float, help="gaussian noise sd")
    _opt(s, "--seed", dest="seed", default=0, type=int)
    _opt(s, "--lookback", "-b", dest="lookback", default=3, type=int)
    _opt(s, "--output", "-o", dest="output", default=None)

    bn = sub.add_parser("bench", help="time compiled vs pure-Python kernels")
    _opt(bn, "--n", "-n", dest="n", default=4032, type=int)
    _opt(bn, "--seed", dest="seed", default=0, type=int)
    _opt(bn, "--repeats", dest="repeats", default=200, type=int)
    bn.add_argument("--backends", default=None, help="comma-separated subset")
    return parser


@contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _read_input(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8-sig", newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def sniff_format(text: str) -> DatasetFormat:
    first = text.lstrip("﻿").split("\n", 1)[0].strip().lower().replace(" ", "")
    if first == "timestamp,value":
        return DatasetFormat.NAB
    if first == "timestamp,value,is_anomaly":
        return DatasetFormat.YAHOO
    return DatasetFormat.PLAIN


def engine_config(args) -> ReReConfig:
    try:
        train = TrainConfig(
            learning_rate=args.learning_rate,
            max_epochs=args.max_epochs,
            hidden_units=args.hidden_units,
        )
        return ReReConfig(
            lookback=args.lookback, sigma_multiplier=args.sigma, epsilon=args.epsilon,
            seed=args.seed, mode=Mode(args.mode), train=train,
            include_current_aare1=args.include_current_aare,
            backend=None if args.backend == "auto" else args.backend,
        )
    except InvalidConfigError as exc:
        raise ConfigError(str(exc)) from None


def _eval_config(args) -> EvalConfig:
    if args.k < 0:
        raise ConfigError("--k must be >= 0")
    return EvalConfig(k=args.k, mode=args.match)


def _summary(finals, n_points, out):
    anomalies = [r.t for r in finals if r.anomaly]
    print(f"points           {n_points}", file=out)
    print(f"verdicts         {len(finals)}", file=out)
    print(f"anomalies        {len(anomalies)}", file=out)
    if finals:
        st = trace_stats(finals)
        print(f"retrain ratio 1  {st.retraining_ratio1:.2%} ({st.retrain_steps1}/{st.steps})", file=out)
        if st.retraining_ratio2 is not None:
            print(f"retrain ratio 2  {st.retraining_ratio2:.2%} ({st.retrain_steps2}/{st.steps})", file=out)
            print(f"retrain ratio    {st.retraining_ratio:.2%} ({st.retrain_steps}/{st.steps})", file=out)
        print(f"step time        {1000 * st.mean_time:.3f} ms (std {1000 * st.std_time:.3f} ms)", file=out)


def _metrics_json(m) -> str:
    return json.dumps({k: ("n/a" if v is None else v) for k, v in m.to_dict().items()}, indent=2)


def cmd_detect(args) -> int:
    cfg = engine_config(args)
    text = _read_input(args.input)
    fmt = sniff_format(text) if args.format == "auto" else DatasetFormat(args.format)
    series, labels = parse_series(text, fmt)
    if len(series) == 0:
        raise InputError("input series is empty")
    if args.labels:
        labels = load_labels(_read_input(args.labels), series)
    eval_cfg = _eval_config(args) if labels is not None else None

    dual = cfg.mode is Mode.DUAL
    engine = ReRe(cfg)
    finals: list[FinalRecord] = []
    with _open_out(args.output) as out:
        for i, v in enumerate(series.values):
            rec = engine.advance(i, v)
            if isinstance(rec, FinalRecord):
                finals.append(rec)
            out.write(dumps(to_row(rec, dual, series.timestamp_text(i), not args.no_timing)) + "\n")
    engine.close()

    report = sys.stdout if args.output not in (None, "-") else sys.stderr
    _summary(finals, len(series), report)
    if labels is not None and len(labels):
        m = evaluate(finals, labels, eval_cfg)
        print(format_metrics(m), file=report)
    return EXIT_OK


def _trace_series(rows) -> Series:
    stamps = []
    for r in rows:
        ts = r.get("timestamp")
        if ts is None:
            stamps.append(r["t"])
        else:
            try:
                stamps.append(parse_timestamp(str(ts)))
            except ValueError:
                stamps.append(r["t"])
    return Series(stamps, [r["value"] for r in rows], infer_interval(stamps))


def cmd_evaluate(args) -> int:
    eval_cfg = _eval_config(args)
    labels_path = args.labels_file or args.labels
    if not labels_path:
        raise ConfigError("a label file is required")
    text = _read_input(args.trace)
    try:
        rows = list(read_trace(text.splitlines()))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if not rows:
        raise InputError("trace is empty")
    labels = load_labels(_read_input(labels_path), _trace_series(rows))
    if len(labels) == 0:
        raise InputError(f"label file {labels_path} contains no labels")
    m = evaluate(rows, labels, eval_cfg)
    payload = _metrics_json(m)
    print(payload)
    print(format_metrics(m))
    if args.output:
        with _open_out(args.output) as fh:
            fh.write(payload + "\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    from . import synth

    if args.n < 2 * args.lookback + 2:
        raise ConfigError(f"n must be >= 2b+2 = {2 * args.lookback + 2}")
    kind = args.kind
    try:
        if kind == "constant":
            xs = synth.constant(args.n, args.value)
        elif kind == "sine":
            xs = synth.sine(args.n, args.offset, 1.0 if args.amplitude is None else args.amplitude,
                            args.period, args.noise, args.seed)
        elif kind == "spike":
            xs = synth.spike(args.n, args.n * 2 // 3 if args.at is None else args.at, args.magnitude,
                             args.offset, 1.0 if args.amplitude is None else args.amplitude,
                             args.period, args.noise, args.seed)
        elif kind == "level-shift":
            xs = synth.level_shift(args.n, args.start, args.end,
                                   args.n // 2 if args.at is None else args.at, args.ramp,
                                   args.amplitude or 0.0, args.period, args.noise, args.seed)
        else:
            xs = synth.nab_like(args.n, args.seed)
    except InvalidConfigError as exc:
        raise ConfigError(str(exc)) from None
    with _open_out(args.output) as out:
        write_series(xs, out)
    return EXIT_OK


def cmd_bench(args) -> int:
    from . import _backend, bench

    names = args.backends.split(",") if args.backends else _backend.available()
    for name in names:
        if name not in ("compiled", "python"):
            raise ConfigError(f"unknown backend {name!r}")
        if name not in _backend.available():
            raise ConfigError(f"backend {name!r} is not available in this install")
    result = bench.run(args.n, args.seed, names, args.repeats)
    print(bench.render(result))
    return EXIT_OK


COMMANDS = {"detect": cmd_detect, "evaluate": cmd_evaluate, "synth": cmd_synth, "bench": cmd_bench}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ConfigError("a command is required: " + ", ".join(COMMANDS))
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, ReReError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BrokenPipeError:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
