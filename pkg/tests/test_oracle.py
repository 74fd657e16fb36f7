import math

import numpy as np
import pytest

from conftest import u1_family
from sharecap.model import ProblemInstance, is_feasible, random_instance
from sharecap.oracle import (
    OracleSettings,
    _power_cone,
    compare,
    oracle_bruteforce_2x2,
    oracle_projected_gradient,
)
from sharecap.solver import solve


def test_power_cone_projection():
    # eigenvalues (3, -1) -> (3, 0) -> shifted to budget 2 -> (2, 0)
    X = np.array([[1.0, 2.0], [2.0, 1.0]])
    P = _power_cone(X, 2.0)
    assert np.allclose(P, np.ones((2, 2)), atol=1e-14)
    assert np.allclose(_power_cone(np.diag([0.5, -1.0]), 2.0), np.diag([0.5, 0.0]))


def test_projected_gradient_on_waterfilling():
    inst = ProblemInstance(np.diag([4.0, 1.0]), 1.0)
    sol = oracle_projected_gradient(inst)
    assert sol.capacity_nats == pytest.approx(math.log(4.5 * 1.125), abs=1e-10)
    assert sol.method == "oracle"


def test_projected_gradient_never_exceeds_caps():
    rng = np.random.default_rng(4)
    for _ in range(10):
        inst = random_instance(rng, int(rng.choice([2, 3, 4])), int(rng.integers(1, 4)))
        orc = oracle_projected_gradient(inst)
        assert is_feasible(inst, orc.R)[0]
        ref = solve(inst)
        assert orc.capacity_nats <= ref.capacity_nats + 1e-6
        assert ref.capacity_nats - orc.capacity_nats <= 1e-4


def test_projected_gradient_zero_cap_subspace():
    inst = ProblemInstance(np.diag([1.0, 3.0]), 2.0, [(np.diag([1.0, 0.0]), 0.0)])
    assert oracle_projected_gradient(inst).capacity_nats == pytest.approx(math.log(7.0), abs=1e-9)
    dead = ProblemInstance(np.diag([1.0, 0.0]), 2.0, [(np.eye(2), 0.0)])
    assert oracle_projected_gradient(dead).capacity_nats == 0.0


@pytest.mark.parametrize("P_I, expected", [(1.0, math.log(2.25)), (1.8, 1.0593284430304253), (3.0, math.log(3.0))])
def test_grid_oracle_on_rank1_channel_family(P_I, expected):
    sol = oracle_bruteforce_2x2(u1_family(P_I))
    assert sol.capacity_nats == pytest.approx(expected, abs=2e-3)
    assert is_feasible(u1_family(P_I), sol.R)[0]


def test_grid_oracle_needs_two_antennas():
    with pytest.raises(ValueError):
        oracle_bruteforce_2x2(ProblemInstance(np.eye(3), 1.0))


def test_oracle_settings_validation():
    with pytest.raises(ValueError):
        OracleSettings(max_iters=0)


def test_compare_report():
    inst = ProblemInstance(np.eye(2), 4.0, [(np.diag([1.0, 2.0]), 3.0)])
    a, b = solve(inst), oracle_projected_gradient(inst)
    rep = compare(a, b, 1e-4, inst)
    assert rep.passed and rep.capacity_gap < 1e-8
    d = rep.to_dict()
    assert set(d) >= {"capacity_gap", "passed", "tol"}
    assert not compare(a, solve(inst.with_cap(0, 1.5)), 1e-4, inst).passed
