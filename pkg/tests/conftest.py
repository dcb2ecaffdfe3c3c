import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wbdg import GameConfig
from wbdg.scorer.synthetic import SyntheticSpec

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

# two clusters of two near-synonyms; at t=1 the generator ranks (0,1,2,3) and
# the verifier (1,0,3,2): same cluster mass, swapped within-cluster ranks
NEAR_SYNONYM_SPEC = SyntheticSpec(cluster_sizes=(2, 2), seed=3)


@pytest.fixture
def cfg():
    return GameConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def near_synonym_spec():
    return NEAR_SYNONYM_SPEC


# --------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion at the end of the run
# --------------------------------------------------------------------------

_ACCEPTANCE: dict[int, str] = {}


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.details: list[str] = []

    def note(self, text):
        self.details.append(text)

    def check(self, ok, text):
        self.details.append(("ok: " if ok else "FAILED: ") + text)
        return ok

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        failed = exc_type is not None or any(d.startswith("FAILED") for d in self.details)
        if exc_type is not None and not issubclass(exc_type, AssertionError):
            self.details.append(f"error: {exc_type.__name__}: {exc}")
        status = "FAIL" if failed else "PASS"
        _ACCEPTANCE[self.number] = f"[{status}] criterion {self.number}: {self.title} | " + "; ".join(self.details)
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
