import sys
from pathlib import Path

import pytest
from hypothesis import settings

from virtualdepth.camera import Intrinsics

FIXTURES = Path(__file__).resolve().parent / "fixtures"

sys.path.insert(0, str(Path(__file__).resolve().parent))

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def simple_P():
    """Zero-affine camera used by many hand examples."""
    return Intrinsics(700.0, 700.0, 600.0, 180.0).to_projection()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
