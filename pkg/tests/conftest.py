import numpy as np
import pytest
from hypothesis import strategies as st

from commonlines.sphere import normalize, sample_uniform

ACCEPTANCE_RESULTS = {}


def unit_vectors():
    return (
        st.tuples(*[st.floats(-1.0, 1.0, allow_nan=False) for _ in range(3)])
        .map(np.array)
        .filter(lambda v: np.linalg.norm(v) > 1e-3)
        .map(normalize)
    )


@pytest.fixture(scope="session")
def ds100():
    return sample_uniform(100, 1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0])):
        passed, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {key}: {detail}")
