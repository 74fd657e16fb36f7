import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharecap.linalg import eigh
from sharecap.model import DualVariables, ProblemInstance, is_feasible, mutual_information, random_instance
from sharecap.solver import (
    DualInconsistencyError,
    DualSearchSettings,
    covariance_for_duals,
    dual_search,
    kkt_residuals,
    solve,
    waterfilling,
)


def kkt_ok(inst, sol, bound=1e-6):
    return sol.kkt.worst() <= bound * max(1.0, float(eigh(inst.W1).values[0]))


def test_waterfilling_fixture():
    sol = waterfilling(np.diag([4.0, 1.0]), 1.0)
    assert np.allclose(sol.R, np.diag([0.875, 0.125]), atol=1e-14)
    assert sol.capacity_nats == pytest.approx(math.log(4.5 * 1.125), abs=1e-14)
    # water level 1.125, so the TPC multiplier is its inverse
    assert sol.duals.mu1 == pytest.approx(1 / 1.125)


def test_waterfilling_drops_weak_mode():
    sol = waterfilling(np.diag([4.0, 1.0]), 0.5)
    assert np.allclose(sol.R, np.diag([0.5, 0.0]), atol=1e-14)
    assert sol.capacity_nats == pytest.approx(math.log(3.0))


def test_closed_form_for_given_duals():
    inst = ProblemInstance(np.eye(2), 4.0, [(np.diag([1.0, 2.0]), 3.0)])
    R = covariance_for_duals(inst, DualVariables(0.0, (1.0 / 3.0,)))
    assert np.allclose(R, np.diag([2.0, 0.5]), atol=1e-12)
    with pytest.raises(DualInconsistencyError):
        covariance_for_duals(inst, DualVariables(0.0, (0.0,)))
    # mu1 = 0 with an interferer blind to a direction W1 sees
    blind = ProblemInstance(np.eye(2), 1.0, [(np.diag([1.0, 0.0]), 1.0)])
    with pytest.raises(DualInconsistencyError):
        covariance_for_duals(blind, DualVariables(0.0, (1.0,)))


@pytest.mark.parametrize("method", ["auto", "bisection", "newton"])
def test_dual_search_recovers_notched_waterfilling(method):
    # both constraints tight: R = diag(0.4, 1.6)
    inst = ProblemInstance(np.eye(2), 2.0, [(np.diag([1.0, 0.0]), 0.4)])
    duals, sol = dual_search(inst, DualSearchSettings(method=method))
    assert np.allclose(sol.R, np.diag([0.4, 1.6]), atol=1e-7)
    assert duals.mu1 == pytest.approx(1 / 2.6, rel=1e-6)
    assert duals.mu2[0] == pytest.approx(1 / 1.4 - 1 / 2.6, rel=1e-6)
    assert sol.method == "general" and all(sol.active)


def test_dual_search_settings_validation():
    with pytest.raises(ValueError):
        DualSearchSettings(max_iters=0)
    with pytest.raises(ValueError):
        DualSearchSettings(residual_tol=0.0)
    inst = ProblemInstance(np.eye(2), 1.0, [(np.eye(2), 1.0), (np.eye(2), 1.0)])
    with pytest.raises(ValueError):
        dual_search(inst, DualSearchSettings(method="bisection"))


def test_solve_dispatch_tags():
    assert solve(ProblemInstance(np.diag([4.0, 1.0]), 1.0)).method == "waterfilling"
    assert solve(ProblemInstance(np.eye(2), 4.0, [(np.diag([1.0, 2.0]), 3.0)])).method == "prop4"
    assert solve(ProblemInstance(np.zeros((2, 2)), 1.0)).method == "prop2"
    # loose cap: water-filling already feasible
    assert solve(ProblemInstance(np.eye(3), 1.0, [(np.eye(3), 10.0)])).method in ("waterfilling", "prop4", "prop5")


def test_general_matches_auto_on_closed_form_fixtures():
    u = np.array([1.0, 1.0]) / np.sqrt(2.0)
    fixtures = [
        ProblemInstance(np.eye(2), 4.0, [(np.diag([1.0, 2.0]), 3.0)]),
        ProblemInstance(np.eye(2), 2.0, [(np.diag([1.0, 0.0]), 0.4)]),
        ProblemInstance(2 * np.outer(u, u), 1.0, [(np.diag([1.0, 4.0]), 1.8)]),
        ProblemInstance(2 * np.outer(u, u), 1.0, [(np.diag([1.0, 4.0]), 1.0)]),
    ]
    for inst in fixtures:
        a, g = solve(inst), solve(inst, method="general")
        assert g.capacity_nats == pytest.approx(a.capacity_nats, abs=1e-8)
        assert kkt_ok(inst, g)


def test_zero_forcing_reduces_to_free_subspace():
    # the only usable direction is e2, worth log(1 + 3 P_T)
    inst = ProblemInstance(np.diag([1.0, 3.0]), 2.0, [(np.diag([1.0, 0.0]), 0.0)])
    sol = solve(inst)
    assert sol.capacity_nats == pytest.approx(math.log(7.0), abs=1e-12)
    assert abs(sol.R[0, 0]) < 1e-12
    assert sol.info["zero_forcing"] == [1]
    assert kkt_ok(inst, sol)


def test_zero_capacity_certificate():
    inst = ProblemInstance(np.diag([2.0, 0.0]), 1.0, [(np.diag([1.0, 0.0]), 0.0)])
    sol = solve(inst)
    assert sol.capacity_nats == 0.0 and sol.method == "prop2"
    # mu2 = 2 makes mu2 W2 - W1 PSD
    assert sol.duals.mu2[0] == pytest.approx(2.0)
    assert sol.kkt.dual_feas >= -1e-12


def test_kkt_residuals_flag_wrong_multipliers():
    inst = ProblemInstance(np.diag([4.0, 1.0]), 1.0)
    sol = waterfilling(inst.W1, 1.0)
    assert kkt_residuals(inst, sol).worst() < 1e-12
    wrong = sol.__class__(sol.R, sol.capacity_nats, DualVariables(0.5), sol.active, sol.kkt, "x")
    assert kkt_residuals(inst, wrong).worst() > 0.1


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), m=st.sampled_from([2, 3, 4]), K=st.integers(1, 3))
def test_random_instances_are_feasible_and_certified(seed, m, K):
    inst = random_instance(np.random.default_rng(seed), m, K)
    sol = solve(inst)
    assert is_feasible(inst, sol.R)[0]
    assert kkt_ok(inst, sol)
    assert sol.capacity_nats == pytest.approx(mutual_information(inst, sol.R), abs=1e-9)
    assert sol.capacity_bits == pytest.approx(sol.capacity_nats / math.log(2.0))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), m=st.sampled_from([2, 3]), K=st.integers(1, 2))
def test_capacity_is_monotone_in_every_cap(seed, m, K):
    inst = random_instance(np.random.default_rng(seed), m, K)
    base = solve(inst).capacity_nats
    assert solve(inst.with_power(2 * inst.P_T)).capacity_nats >= base - 1e-9
    assert solve(inst.with_cap(0, 2 * inst.users[0].P_I + 0.1)).capacity_nats >= base - 1e-9
