import numpy as np
import pytest

from mbss.lti import linearize
from mbss.plant import PlantParams, equilibrium


@pytest.fixture(scope="session")
def params():
    return PlantParams()


@pytest.fixture(scope="session")
def eq_exact(params):
    return equilibrium(params)


@pytest.fixture(scope="session")
def eq_rounded(params):
    return equilibrium(params, paper_rounding=True)


@pytest.fixture(scope="session")
def ss_exact(params, eq_exact):
    return linearize(params, eq_exact)


@pytest.fixture(scope="session")
def ss_rounded(params, eq_rounded):
    return linearize(params, eq_rounded)


def sorted_eigs(m):
    """Independent eigenvalue oracle, ordered like numkit.eigenvalues."""
    ev = np.linalg.eigvals(np.asarray(m, dtype=float))
    return np.array(sorted(ev, key=lambda c: (round(c.real, 9), c.imag)))


def match_multiset(got, want):
    """Largest distance after pairing two root sets greedily."""
    rest = [complex(w) for w in want]
    worst = 0.0
    for g in got:
        j = min(range(len(rest)), key=lambda i: abs(rest[i] - g))
        worst = max(worst, abs(rest.pop(j) - g))
    return worst


# -- acceptance summary --------------------------------------------------------

_criteria = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_criteria] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line; call with (number, title, failures)."""
    def record(number, title, failures):
        status = "PASS" if not failures else "FAIL"
        line = f"criterion {number:>2} {status}: {title}"
        if failures:
            line += "\n" + "\n".join(f"      - {f}" for f in failures)
        request.config.stash[_criteria][number] = line
        print(line)
        assert not failures, "; ".join(failures)
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_criteria, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
