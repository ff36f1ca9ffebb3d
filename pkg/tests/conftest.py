import numpy as np
import pytest

from cflab import scenarios as S

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def sin_sc():
    return S.build("sin2d")


@pytest.fixture(scope="session")
def lee_sc():
    return S.build("lee2d")


@pytest.fixture(scope="session")
def cot_sc():
    return S.build("cotangent_attractor")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
