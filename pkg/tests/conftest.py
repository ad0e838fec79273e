import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("signnet", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("signnet")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
