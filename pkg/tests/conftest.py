import json

import pytest

from rere import _backend
from rere.detector import FinalRecord, Mode, ReRe, ReReConfig
from rere.trace import to_row

BACKENDS = _backend.available()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def run_engine(values, cfg=None):
    """Run a series; return (engine, all records, trace rows)."""
    cfg = cfg or ReReConfig()
    engine = ReRe(cfg)
    recs = list(engine.run(values))
    dual = cfg.mode is Mode.DUAL
    rows = [json.loads(json.dumps(to_row(r, dual, r.t))) for r in recs]
    return engine, recs, rows


def finals(recs):
    return [r for r in recs if isinstance(r, FinalRecord)]


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
