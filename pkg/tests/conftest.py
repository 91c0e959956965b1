from __future__ import annotations

import pytest

from iaad_sim.core import Detection, PerceptionFrame, Source, Vec2


def det(oid, x, y, vx=0.0, vy=0.0, source=Source.SOV):
    return Detection(oid, Vec2(x, y), Vec2(vx, vy), source)


def frame(tick, dets, source=Source.SOV, period=100_000):
    return PerceptionFrame(tick, tick * period, source, tuple(dets))


@pytest.fixture
def make_det():
    return det


@pytest.fixture
def make_frame():
    return frame


# One line per acceptance criterion, repeated in the terminal summary.
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
