import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


class Manufactured:
    """u*(x, t) = (1 + t^2) sin(pi x) with g(x, w) = u*(x, 0) + lam (w - u*(x, T))."""

    def __init__(self, alpha=0.5, T=1.0, lam=0.5):
        self.alpha, self.T, self.lam = alpha, T, lam
        self._c = math.gamma(3.0) / math.gamma(3.0 - alpha)

    def exact(self, x, t):
        return (1.0 + np.asarray(t) ** 2) * np.sin(np.pi * np.asarray(x))

    def f(self, x, t):
        t = np.asarray(t, float)
        return (self._c * t ** (2.0 - self.alpha) + np.pi**2 * (1.0 + t**2)) * np.sin(np.pi * x)

    def g(self, x, w):
        return self.exact(x, 0.0) + self.lam * (w - self.exact(x, self.T))

    def spec(self):
        from nlsubdiff.solver import ProblemSpec

        return ProblemSpec(self.alpha, self.T, self.f, self.g, self.lam, label="manufactured")


@pytest.fixture
def manufactured():
    return Manufactured()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
