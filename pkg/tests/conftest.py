import numpy as np
import pytest

from dashnas.verify import gradcheck


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def assert_gradcheck(f, arrays, tol=1e-4):
    err = gradcheck(f, arrays)
    assert err <= tol, f"gradient relative error {err:.3e} exceeds {tol}"


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
