"""Regime classification and single-user closed-form solutions."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .linalg import (
    TOL,
    Tolerances,
    as_hermitian,
    eigh,
    null_basis,
    nullspace_contained,
    pinv,
    rank_eps,
)
from .model import DualVariables, ProblemInstance, Solution
from .solver import build_solution

log = logging.getLogger(__name__)

__all__ = [
    "RegimeReport",
    "classify",
    "solve_full_rank_interference_limited",
    "solve_rank1_interferer",
    "solve_rank1_channel",
    "check_rank_bound",
]

# Relative distance to a window edge below which closed forms are skipped.
EDGE = 1e-9


@dataclass(frozen=True)
class RegimeReport:
    """How the capacity behaves for the instance's channels and caps.

    ``certifying_vector`` is a unit vector that every ``W2k`` annihilates but
    ``W1`` does not; transmitting all power along it is always feasible, so
    it exists exactly when capacity grows without bound in ``P_T``.
    """

    unbounded_growth: bool
    zero_capacity: bool
    tpc_redundancy_possible: bool
    favorable_rank: bool
    capacity_upper_bound_nats: float | None
    certifying_vector: np.ndarray | None
    zero_cap_users: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        vec = None
        if self.certifying_vector is not None:
            vec = [[float(z.real), float(z.imag)] for z in self.certifying_vector]
        return {
            "unbounded_growth": self.unbounded_growth,
            "zero_capacity": self.zero_capacity,
            "tpc_redundancy_possible": self.tpc_redundancy_possible,
            "favorable_rank": self.favorable_rank,
            "capacity_upper_bound_nats": self.capacity_upper_bound_nats,
            "certifying_vector": vec,
            "zero_cap_users": [k + 1 for k in self.zero_cap_users],
        }


def classify(instance: ProblemInstance, tol: Tolerances = TOL) -> RegimeReport:
    S = instance.W2_sum()
    W1 = instance.W1
    r1 = rank_eps(W1, tol)
    contained = nullspace_contained(S, W1, tol)

    vec = None
    if not contained:
        N = null_basis(S, tol)
        w, Y = eigh(N.conj().T @ W1 @ N)
        vec = N @ Y[:, 0]
        vec = vec / np.linalg.norm(vec)

    k0 = tuple(k for k, u in enumerate(instance.users) if u.P_I == 0)
    if r1 == 0:
        zero = True
    elif k0:
        zero = nullspace_contained(instance.W2_sum(k0), W1, tol)
    else:
        zero = False

    bound = None
    if contained:
        if r1 == 0:
            bound = 0.0
        else:
            # every eigenvalue of W1 R is capped once range(W1) <= range(S)
            w2 = eigh(S).values
            pos = w2[w2 > tol.rank * max(float(w2[0]), 1.0)]
            total_cap = float(sum(u.P_I for u in instance.users))
            lam1 = float(eigh(W1).values[0])
            bound = instance.m * math.log1p(lam1 * total_cap / float(pos[-1]))

    return RegimeReport(
        unbounded_growth=not contained,
        zero_capacity=zero,
        tpc_redundancy_possible=contained,
        favorable_rank=r1 > rank_eps(S, tol),
        capacity_upper_bound_nats=bound,
        certifying_vector=vec,
        zero_cap_users=k0,
    )


def _near(x: float, edge: float) -> bool:
    return abs(x - edge) <= EDGE * max(1.0, abs(x), abs(edge))


def _logdet(A: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(A)
    return float(val)


def solve_full_rank_interference_limited(instance: ProblemInstance, tol: Tolerances = TOL) -> Solution | None:
    """Closed form when both channels are full rank and only the IPC binds.

    Applies for ``P_I`` strictly inside

        m lambda_1(W2 W1^-1) - tr(W2 W1^-1) < P_I
            <= m (P_T + tr W1^-1) / tr W2^-1 - tr(W2 W1^-1)

    and returns ``R = W2^-1 / mu2 - W1^-1`` with
    ``1/mu2 = (P_I + tr(W2 W1^-1)) / m``. Returns ``None`` otherwise.
    """
    if instance.K != 1:
        return None
    m = instance.m
    W1 = instance.W1
    W2 = instance.users[0].W2
    P_I, P_T = instance.users[0].P_I, instance.P_T
    if rank_eps(W1, tol) < m or rank_eps(W2, tol) < m:
        return None
    W1inv = as_hermitian(np.linalg.inv(W1))
    W2inv = as_hermitian(np.linalg.inv(W2))
    cross = float(np.real(np.trace(W2 @ W1inv)))
    L = np.linalg.cholesky(W1)
    Li = np.linalg.inv(L)
    top = float(eigh(Li @ W2 @ Li.conj().T).values[0])
    lower = m * top - cross
    upper = m / float(np.real(np.trace(W2inv))) * (P_T + float(np.real(np.trace(W1inv)))) - cross
    if not (lower < P_I <= upper) or _near(P_I, lower) or _near(P_I, upper):
        return None
    water = (P_I + cross) / m
    R = as_hermitian(water * W2inv - W1inv)
    if eigh(R).values[-1] <= 0:
        return None
    capacity = m * math.log(water) + _logdet(W1) - _logdet(W2)
    duals = DualVariables(0.0, (1.0 / water,))
    return build_solution(instance, R, duals, "prop4", capacity, tol, window=(lower, upper))


def solve_rank1_interferer(instance: ProblemInstance, tol: Tolerances = TOL) -> Solution | None:
    """Closed forms for a full-rank main channel and a rank-one interferer.

    Either the IPC is redundant and plain full-rank water-filling is optimal,
    or both constraints bind and the water-filling covariance is corrected
    by a rank-one notch along the interferer's direction.
    """
    if instance.K != 1:
        return None
    m = instance.m
    W1 = instance.W1
    W2 = instance.users[0].W2
    P_I, P_T = instance.users[0].P_I, instance.P_T
    if rank_eps(W1, tol) < m or rank_eps(W2, tol) != 1:
        return None
    w2, U2 = eigh(W2)
    lam2, u2 = float(w2[0]), U2[:, 0]
    W1inv = as_hermitian(np.linalg.inv(W1))
    tr_inv = float(np.real(np.trace(W1inv)))
    q = float(np.real(u2.conj() @ W1inv @ u2))
    top_inv = float(eigh(W1inv).values[0])
    P_th = lam2 * (P_T + tr_inv) / m - lam2 * q
    pt_full = m * top_inv - tr_inv

    if P_I >= P_th and P_T > pt_full and not _near(P_T, pt_full):
        water = (P_T + tr_inv) / m
        R = as_hermitian(water * np.eye(m) - W1inv)
        capacity = _logdet(np.eye(m) + W1 @ R)
        return build_solution(instance, R, DualVariables(1.0 / water, (0.0,)), "prop5", capacity, tol, branch="a")

    lo = lam2 * top_inv - lam2 * q
    pt_min = m * P_I / lam2 + m * q - tr_inv
    if m < 2 or not (lo < P_I < P_th and P_T > pt_min):
        return None
    if _near(P_I, lo) or _near(P_I, P_th) or _near(P_T, pt_min):
        return None
    mu1 = (m - 1) / (P_T - P_I / lam2 - q + tr_inv)
    mu2 = 1.0 / (P_I + lam2 * q) - mu1 / lam2
    if not (mu1 > 0 and mu2 > 0):
        return None
    alpha = 1.0 / mu1 - 1.0 / (mu1 + lam2 * mu2)
    R = as_hermitian(np.eye(m) / mu1 - W1inv - alpha * np.outer(u2, u2.conj()))
    if eigh(R).values[-1] <= 0:
        return None
    capacity = _logdet(np.eye(m) + W1 @ R)
    return build_solution(instance, R, DualVariables(mu1, (mu2,)), "prop5", capacity, tol, branch="b", alpha=alpha)


def _beam(x: np.ndarray, power: float) -> np.ndarray:
    return as_hermitian(power * np.outer(x, x.conj()) / float(np.real(x.conj() @ x)))


def solve_rank1_channel(instance: ProblemInstance, tol: Tolerances = TOL) -> Solution | None:
    """Beamforming solutions for a rank-one main channel ``W1 = l1 u1 u1^H``.

    With ``g_I = P_I / P_T``, ``g1 = u1^H W2^+ u1 / u1^H (W2^+)^2 u1`` and
    ``g2 = u1^H W2 u1``:

    * ``g_I >= g2``: the unconstrained beam ``P_T u1 u1^H`` already meets
      the cap (``prop7-case2``);
    * ``g_I <= g1`` and ``u1`` in the range of ``W2``: beam along
      ``W2^+ u1`` at full interference, spare power (``prop7-case1``);
    * otherwise both constraints bind; the beam is along
      ``(I + mu W2)^-1 u1`` with ``mu`` tuned to the cap (``prop7-case3``).

    The power-loss factor ``alpha`` is stored in ``info``.
    """
    if instance.K != 1 or rank_eps(instance.W1, tol) != 1:
        return None
    w1, U1 = eigh(instance.W1)
    lam1, u1 = float(w1[0]), U1[:, 0]
    W2 = instance.users[0].W2
    P_I, P_T = instance.users[0].P_I, instance.P_T
    g_I = P_I / P_T
    g2 = float(np.real(u1.conj() @ W2 @ u1))

    def cap(alpha: float) -> float:
        return math.log1p(lam1 * alpha * P_T)

    if g_I >= g2:
        R = _beam(u1, P_T)
        duals = DualVariables(lam1 / (1.0 + lam1 * P_T), (0.0,))
        return build_solution(instance, R, duals, "prop7-case2", cap(1.0), tol, alpha=1.0, gammas=(None, g2))

    W2p = pinv(W2, tol)
    x = W2p @ u1
    a = float(np.real(u1.conj() @ x))
    b = float(np.real(x.conj() @ x))
    g1 = a / b if b > 0 else math.inf
    in_range = np.linalg.norm(W2 @ x - u1) <= math.sqrt(tol.rank) * (1.0 + float(eigh(W2).values[0]))

    if in_range and g_I <= g1:
        R = as_hermitian(P_I * np.outer(x, x.conj()) / a)
        if float(np.real(np.trace(R))) <= P_T * (1.0 + 1e-12):
            alpha = g_I * a
            duals = DualVariables(0.0, (lam1 * a / (1.0 + lam1 * a * P_I),))
            return build_solution(instance, R, duals, "prop7-case1", cap(alpha), tol, alpha=alpha, gammas=(g1, g2))
        log.info("rank-1 channel case 1 exceeds the power budget; trying case 3")

    w, U = eigh(W2)
    w = np.clip(w, 0.0, None)
    c2 = np.abs(U.conj().T @ u1) ** 2

    def interference(mu: float) -> float:
        d = 1.0 / (1.0 + mu * w)
        return P_T * float(np.sum(w * c2 * d * d) / np.sum(c2 * d * d))

    hi = 1.0 / max(float(w[0]), 1e-300)
    n = 0
    while interference(hi) >= P_I:
        hi *= 4.0
        n += 1
        if n > 400:
            return None
    lo = hi * 1e-30
    if not interference(lo) > P_I:
        return None
    t = brentq(lambda s: interference(math.exp(s)) - P_I, math.log(lo), math.log(hi), xtol=1e-15, rtol=4 * np.finfo(float).eps)
    mu = math.exp(t)
    d = 1.0 / (1.0 + mu * w)
    y = U @ (d * (U.conj().T @ u1))
    R = _beam(y, P_T)
    s = float(np.sum(c2 * d))
    n2 = float(np.sum(c2 * d * d))
    alpha = s * s / n2
    rho = n2 / s
    mu1 = rho / (P_T + rho / (lam1 * s))
    duals = DualVariables(mu1, (mu1 * mu,))
    return build_solution(instance, R, duals, "prop7-case3", cap(alpha), tol, alpha=alpha, gammas=(g1, g2))


def check_rank_bound(instance: ProblemInstance, solution: Solution, tol: Tolerances = TOL) -> bool:
    """``rank(R) <= rank(W1)`` for the returned covariance."""
    return rank_eps(solution.R, tol) <= rank_eps(instance.W1, tol)
