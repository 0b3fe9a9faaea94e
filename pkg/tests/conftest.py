import numpy as np
import pytest

from atomdrift.dictionary import Dictionary, normalize_atom

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        _CRITERIA[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])


def random_dictionary(rng, m=4, length=20) -> Dictionary:
    return Dictionary([normalize_atom(rng.standard_normal(length)) for _ in range(m)])


def brute_correlate(residual, atom):
    n, L = len(residual), len(atom)
    return np.array([sum(residual[t + k] * atom[k] for k in range(L)) for t in range(n - L + 1)])
