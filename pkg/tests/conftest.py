from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(mod.RESULTS, key=lambda k: (int("".join(ch for ch in k.split()[0] if ch.isdigit())), k)):
        terminalreporter.write_line(mod.RESULTS[cid])
