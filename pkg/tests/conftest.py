import time
from pathlib import Path

import numpy as np
import pytest

from sharecap.model import ProblemInstance, User, random_instance

FIXTURES = Path(__file__).parent / "fixtures"

# lines collected by the acceptance suite, echoed in the terminal summary
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])


@pytest.fixture
def fixture_path():
    return lambda name: str(FIXTURES / f"{name}.json")


def u1_family(P_I: float, P_T: float = 1.0) -> ProblemInstance:
    """Rank-one main channel along (1, 1)/sqrt(2) with gain 2, W2 = diag(1, 4)."""
    u = np.array([1.0, 1.0]) / np.sqrt(2.0)
    return ProblemInstance(2.0 * np.outer(u, u), P_T, [(np.diag([1.0, 4.0]), P_I)])


def batch_instances(seed: int = 20240601, n: int = 200) -> list[ProblemInstance]:
    """Random instances over the sizes, ranks and power ranges of the oracle batch.

    One cap in ten is set to exactly zero so the zero-forcing path is hit.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        m = int(rng.choice([2, 3, 4, 6, 8]))
        K = int(rng.integers(1, 4))
        inst = random_instance(rng, m, K)
        users = tuple(User(u.W2, 0.0) if rng.random() < 0.1 else u for u in inst.users)
        out.append(ProblemInstance(inst.W1, inst.P_T, users))
    return out


@pytest.fixture(scope="session")
def solved_batch():
    """The 200-instance batch with closed-form solutions and solve times."""
    from sharecap.solver import solve

    rows = []
    for inst in batch_instances():
        t = time.perf_counter()
        sol = solve(inst)
        rows.append((inst, sol, time.perf_counter() - t))
    return rows
