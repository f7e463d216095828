import numpy as np
import pytest

from drcsim.env import EnvConfig

# acceptance tests append (criterion, passed, detail) here
CRITERIA = []


class ScriptedRng:
    """Stand-in for a numpy Generator that replays fixed draws.

    ``uniforms`` rows feed ``random(6)`` calls; ``arrivals`` feed ``poisson``.
    """

    def __init__(self, uniforms, arrivals):
        self.uniforms = [np.asarray(u, dtype=float) for u in uniforms]
        self.arrivals = list(arrivals)

    def random(self, size):
        u = self.uniforms.pop(0)
        assert u.shape == (size,)
        return u

    def poisson(self, lam):
        return self.arrivals.pop(0)


@pytest.fixture
def cfg():
    return EnvConfig()


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in sorted(CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
