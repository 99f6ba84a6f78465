import numpy as np
import pytest

from rirkit.acoustics import Rir

FS = 16000


def exponential_rir(alpha: float, seconds: float = 1.5, fs: int = FS) -> Rir:
    n = np.arange(int(seconds * fs))
    return Rir(np.exp(-alpha * n / fs), fs)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def record(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
