import numpy as np
import pytest

from congestion_lab.sim import KIND_CODES, LABEL_CODES, EventLog


def make_log(events, horizon, initial_state=0, initial_label="+", mu=1.0, design=None):
    """EventLog from ``(t, kind, pre_state, label)`` tuples written with A/D/S and +/-/base/'' names."""
    t = np.array([e[0] for e in events], dtype=float)
    kind = np.array([KIND_CODES[e[1]] for e in events], dtype=np.int8)
    state = np.array([e[2] for e in events], dtype=np.int64)
    label = np.array([LABEL_CODES[e[3]] for e in events], dtype=np.int8)
    if design is None:
        design = {"kind": "user" if initial_label is None else "interval", "p": 1.0, "zeta": 0.1,
                  "interval_length": horizon}
    return EventLog(horizon=float(horizon), initial_state=initial_state, initial_label=initial_label, t=t,
                    kind=kind, pre_state=state, label=label, mu=mu, design=design)


@pytest.fixture
def toy_log():
    # switchback log: + on [0, 5), - on [5, 10)
    return make_log([(1.0, "A", 0, "+"), (2.0, "D", 1, ""), (5.0, "S", 0, "-"), (6.0, "A", 0, "-")], 10.0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
