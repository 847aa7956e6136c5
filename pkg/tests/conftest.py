import numpy as np
import pytest
from hypothesis import settings

from ruinlab.distributions import Exponential, IndependentMargins, Pareto
from ruinlab.geometry import Allocation, RuinSetSpec, build_gauge
from ruinlab.process import ExpArrivals, RiskModel

settings.register_profile("ruinlab", deadline=None, max_examples=50)
settings.load_profile("ruinlab")

HALF = Allocation((0.5, 0.5))


@pytest.fixture
def L1():
    return build_gauge(RuinSetSpec.sum_negative(2), HALF)


@pytest.fixture
def L2():
    return build_gauge(RuinSetSpec.any_negative(2), HALF)


@pytest.fixture
def pareto2():
    return IndependentMargins((Pareto(2.0), Pareto(2.0)))


@pytest.fixture
def cl_model():
    """Poisson(1) arrivals, Exp(1) claims, premium 1.25: psi(x) = 0.8 exp(-0.2 x)."""
    return RiskModel(IndependentMargins((Exponential(1.0),)), ExpArrivals(1.0), [1.25], Allocation((1.0,)))


@pytest.fixture
def pareto_walk(pareto2):
    """Two Pareto(2) lines with c = (0.5, 0.5)."""
    return RiskModel(pareto2, ExpArrivals(1.0), [2.5, 2.5], HALF)


def rng_np(seed=0):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------- acceptance summary

ACCEPTANCE: dict[str, list[tuple[bool, str]]] = {}


def record_acceptance(criterion: str, passed: bool, detail: str) -> None:
    """Store one sub-check of an acceptance criterion and echo it."""
    ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))
    print(f"{criterion} {'PASS' if passed else 'FAIL'}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[name]
        ok = all(p for p, _ in parts)
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}: " + "; ".join(d for _, d in parts))
