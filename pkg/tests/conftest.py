from pathlib import Path

import numpy as np
import pytest

from lanekit import EncoderConfig, ImageSpec, LaneCurve

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA


def vline(x=100.0, y0=0.0, y1=50.0, id=0):
    return LaneCurve(np.array([[x, y0], [x, y1]]), id=id)


def line(x0, slope, y0, y1, id=0):
    """Straight lane x = x0 + slope * y over rows [y0, y1]."""
    return LaneCurve(np.array([[x0 + slope * y0, y0], [x0 + slope * y1, y1]]), id=id)


@pytest.fixture
def enc_cfg():
    return EncoderConfig()


@pytest.fixture
def small_spec():
    return ImageSpec(64, 48)


ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(name, ok, detail)``."""
    def record(name, ok, detail=""):
        ACCEPTANCE.append((name, bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
