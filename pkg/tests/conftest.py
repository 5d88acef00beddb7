import numpy as np
import pytest

_LINES: list[str] = []


class Criteria:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def record(self, label: str, value: float, tol: float, ok: bool, note: str = "") -> bool:
        status = "PASS" if ok else "FAIL"
        line = f"{status} {label}: {value:.3e} (tol {tol:.1e})"
        if note:
            line += f"  [{note}]"
        _LINES.append(line)
        print(line)
        return ok

    def below(self, label: str, value: float, tol: float, note: str = "") -> bool:
        return self.record(label, float(value), tol, bool(value < tol), note)


@pytest.fixture(scope="session")
def criteria():
    return Criteria()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
