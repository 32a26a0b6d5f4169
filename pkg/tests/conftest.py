import itertools

import numpy as np
import pytest

from predclass import (
    BernoulliMeasure,
    LaplacePredictor,
    MarkovLaplacePredictor,
    MarkovMeasure,
    MixturePredictor,
    UniformMeasure,
    build_rho_r,
    point_mass,
    random_markov,
)


def all_strings(n, a=2):
    return list(itertools.product(range(a), repeat=n))


def zoo():
    """One of every measure family, including degenerate ones."""
    rng = np.random.default_rng(7)
    return {
        "bernoulli_0.3": BernoulliMeasure(0.3),
        "delta_0": point_mass(0),
        "delta_1": point_mass(1),
        "uniform": UniformMeasure(),
        "markov1": MarkovMeasure([[0.9, 0.1], [0.2, 0.8]]),
        "markov2_random": random_markov(2, rng),
        "markov1_sticky": MarkovMeasure([[1.0, 0.0], [0.5, 0.5]], initial=[0.25, 0.75]),
        "laplace": LaplacePredictor(),
        "laplace_kt": LaplacePredictor(alpha=0.5),
        "lambda_2": MarkovLaplacePredictor(2),
        "rho_r_3": build_rho_r(3),
        "mixture_deltas": MixturePredictor([point_mass(0), point_mass(1)], [0.5, 0.5]),
    }


ZOO = zoo()


@pytest.fixture(params=sorted(ZOO), ids=sorted(ZOO))
def any_measure(request):
    return ZOO[request.param]


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, whatever the verbosity."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion" in nodeid and rep.when == "call":
                lines.append((nodeid.split("::")[-1], outcome))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, outcome in sorted(lines):
            terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
