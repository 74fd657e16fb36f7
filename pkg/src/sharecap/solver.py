"""Optimal transmit covariance under a power budget and interference caps.

For fixed multipliers ``mu = (mu1, mu2_1..mu2_K)`` the optimal covariance is

    R(mu) = W^+ (I - W W1^-1 W)_+ W^+,   W = (mu1 I + sum_k mu2_k W2k)^(1/2)

evaluated without inverting ``W1``: with ``W1 = F F^H`` the positive modes
come from the small Gram matrix ``(W^+ F)^H (W^+ F)``.  The multipliers are
then found by minimising the convex dual function

    g(mu) = max_R [C(R) - tr(W^2 R)] + mu1 P_T + sum_k mu2_k P_Ik,

whose gradient is the vector of constraint slacks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import brentq

from .linalg import (
    TOL,
    Tolerances,
    as_hermitian,
    eigh,
    null_basis,
    nullspace_contained,
    range_factor,
    rank_eps,
)
from .model import (
    DualVariables,
    KktResiduals,
    ProblemInstance,
    Solution,
    User,
    constraint_values,
    mutual_information,
)

log = logging.getLogger(__name__)

__all__ = [
    "DualSearchSettings",
    "DualSearchError",
    "DualInconsistencyError",
    "waterfilling",
    "covariance_for_duals",
    "dual_search",
    "solve",
    "kkt_residuals",
    "build_solution",
]

# Smallest TPC multiplier tried when the TPC cannot be redundant.
MU_FLOOR = 1e-14


class DualSearchError(RuntimeError):
    """Raised when the multiplier search does not converge."""

    def __init__(self, msg: str, mu: np.ndarray | None = None, slack: np.ndarray | None = None):
        super().__init__(msg)
        self.mu = mu
        self.slack = slack


class DualInconsistencyError(ValueError):
    """Multipliers for which the closed form is undefined."""


@dataclass(frozen=True)
class DualSearchSettings:
    """Knobs for the multiplier search.

    ``method`` selects nested bisection (``K == 1`` only), projected Newton,
    or ``"auto"`` (bisection for one user, Newton otherwise, each falling
    back on the other strategy when it fails).
    """

    max_iters: int = 200
    residual_tol: float = 1e-9
    method: Literal["auto", "bisection", "newton"] = "auto"
    mu_upper_bound: float | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be > 0")


# --------------------------------------------------------------------------
# audit


def _gradient(F: np.ndarray, R: np.ndarray) -> np.ndarray:
    r = F.shape[1]
    if r == 0:
        return np.zeros((F.shape[0],) * 2, dtype=complex)
    inner = np.eye(r) + F.conj().T @ R @ F
    return as_hermitian(F @ np.linalg.solve(inner, F.conj().T))


def _scale(instance: ProblemInstance) -> float:
    return float(max(1.0, np.max(instance.caps)))


def _kkt(instance: ProblemInstance, R: np.ndarray, duals: DualVariables, tol: Tolerances = TOL) -> KktResiduals:
    F = range_factor(instance.W1, tol)
    mu = duals.as_array()
    M = mu[0] * np.eye(instance.m) - _gradient(F, R)
    for k, u in enumerate(instance.users):
        M = M + mu[k + 1] * u.W2
    M = as_hermitian(M)
    Rc = R
    zf = [k for k, u in enumerate(instance.users) if u.P_I == 0 and rank_eps(u.W2, tol) > 0]
    if zf:
        # a zero cap leaves no interior point, so multipliers need not exist in
        # the full space; audit the equivalent problem on the allowed subspace
        V = null_basis(instance.W2_sum(zf), tol)
        if V.shape[1]:
            M = as_hermitian(V.conj().T @ M @ V)
            Rc = V.conj().T @ R @ V
    stationarity = float(np.max(np.abs(M @ Rc))) if Rc.size else 0.0
    dual_feas = min(float(eigh(M).values[-1]), 0.0)
    vals = constraint_values(instance, R)
    slack = instance.caps - vals
    scale = _scale(instance)
    comp = np.abs(mu * slack) / scale
    psd_violation = max(-float(eigh(R).values[-1]), 0.0)
    primal = max(float(np.max(-slack)), psd_violation, 0.0) + 0.0
    return KktResiduals(
        stationarity=stationarity,
        comp_slack_tpc=float(comp[0]),
        comp_slack_ipc=tuple(float(c) for c in comp[1:]),
        dual_feas=dual_feas,
        primal_feas=primal,
    )


def kkt_residuals(instance: ProblemInstance, solution: Solution, tol: Tolerances = TOL) -> KktResiduals:
    """Audit a solution against the optimality conditions.

    The PSD multiplier is recovered as
    ``M = mu1 I + sum_k mu2_k W2k - (I + W1 R)^-1 W1``, which makes the
    gradient equation hold identically; what remains is ``|M R|``, the most
    negative eigenvalue of ``M``, the complementary-slackness products
    (divided by ``max(1, P_T, P_Ik)``) and the primal excesses.

    With zero caps present, ``M R`` and the eigenvalue test are taken on the
    common null space of those users' channels, where the problem lives.
    """
    return _kkt(instance, np.asarray(solution.R), solution.duals, tol)


def build_solution(
    instance: ProblemInstance,
    R: np.ndarray,
    duals: DualVariables,
    method: str,
    capacity: float | None = None,
    tol: Tolerances = TOL,
    **info,
) -> Solution:
    """Package a covariance and its multipliers into an audited Solution."""
    R = as_hermitian(R)
    mi = mutual_information(instance, R, tol)
    if capacity is None:
        capacity = mi
    info.setdefault("capacity_check", mi)
    kkt = _kkt(instance, R, duals, tol)
    slack = instance.caps - constraint_values(instance, R)
    mu = duals.as_array()
    thresh = 1e-6 * np.maximum(1.0, instance.caps)
    active = tuple(bool(mu[j] > 0 and abs(slack[j]) <= thresh[j]) for j in range(len(mu)))
    return Solution(
        R=R,
        capacity_nats=float(max(capacity, 0.0)),
        duals=duals,
        active=active,
        kkt=kkt,
        method=method,
        info=info,
    )


# --------------------------------------------------------------------------
# water-filling


def _waterfill(W1: np.ndarray, P_T: float, tol: Tolerances = TOL):
    w, U = eigh(W1)
    pos = w > tol.rank * max(float(w[0]), 1.0)
    lam = w[pos]
    if lam.size == 0:
        return np.zeros_like(W1), math.inf, 0.0
    inv = 1.0 / lam
    n = lam.size
    while n > 1:
        level = (P_T + inv[:n].sum()) / n
        if level > inv[n - 1]:
            break
        n -= 1
    level = (P_T + inv[:n].sum()) / n
    p = level - inv[:n]
    Un = U[:, :n]
    R = as_hermitian((Un * p) @ Un.conj().T)
    capacity = float(np.sum(np.log(lam[:n] * level)))
    return R, level, capacity


def waterfilling(W1, P_T: float, tol: Tolerances = TOL) -> Solution:
    """Classical water-filling over the eigenmodes of ``W1``.

    Powers are ``(level - 1/lambda_i)_+`` with the level set so that the
    total power is exactly ``P_T``; the returned TPC multiplier is
    ``1/level``. A zero channel gives ``R = 0`` and zero capacity.
    """
    inst = ProblemInstance(W1, P_T)
    R, level, capacity = _waterfill(inst.W1, inst.P_T, tol)
    mu1 = 0.0 if math.isinf(level) else 1.0 / level
    return build_solution(inst, R, DualVariables(mu1), "waterfilling", capacity, tol)


# --------------------------------------------------------------------------
# closed form for fixed multipliers


@dataclass
class _Point:
    mu: np.ndarray
    g: float
    slack: np.ndarray
    R: np.ndarray | None
    capacity: float


class _DualModel:
    """Evaluates ``R(mu)``, the dual function and its gradient."""

    def __init__(self, instance: ProblemInstance, tol: Tolerances = TOL):
        self.instance = instance
        self.tol = tol
        self.F = range_factor(instance.W1, tol)
        self.W2 = [u.W2 for u in instance.users]
        self.caps = instance.caps
        self.W1_norm = float(eigh(instance.W1).values[0])
        self.calls = 0

    def covariance(self, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``R(mu)`` and the eigenvalues above one that define it."""
        mu = np.asarray(mu, dtype=float)
        m = self.instance.m
        S = np.zeros((m, m), dtype=complex)
        for k, W2 in enumerate(self.W2):
            if mu[k + 1] != 0.0:
                S = S + mu[k + 1] * W2
        s, U = eigh(S)
        top = float(s[0]) if s.size else 0.0
        cutoff = self.tol.rank * top
        s = np.where(s > cutoff, s, 0.0)
        w = mu[0] + s
        if not np.any(w > 0):
            raise DualInconsistencyError("duals identically zero")
        ft = U.conj().T @ self.F
        nonsingular = w > 0
        if not np.all(nonsingular):
            # null directions of W must also be null directions of W1
            leak = np.linalg.norm(ft[~nonsingular], axis=1)
            if np.any(leak > np.sqrt(self.tol.rank * (1.0 + self.W1_norm))):
                raise DualInconsistencyError(
                    "TPC multiplier zero is inconsistent: N(sum mu2k W2k) not inside N(W1)"
                )
        winv = np.zeros_like(w)
        winv[nonsingular] = 1.0 / np.sqrt(w[nonsingular])
        Bt = winv[:, None] * ft
        self.calls += 1
        if Bt.shape[1] == 0:
            return np.zeros((m, m), dtype=complex), np.zeros(0)
        lam, Y = eigh(Bt.conj().T @ Bt)
        act = lam > 1.0
        lam = lam[act]
        if lam.size == 0:
            return np.zeros((m, m), dtype=complex), lam
        V = (Bt @ Y[:, act]) / np.sqrt(lam)
        Vw = winv[:, None] * V
        Rt = (Vw * (1.0 - 1.0 / lam)) @ Vw.conj().T
        R = as_hermitian(U @ Rt @ U.conj().T)
        return R, lam

    def point(self, mu) -> _Point:
        mu = np.maximum(np.asarray(mu, dtype=float), 0.0)
        try:
            R, lam = self.covariance(mu)
        except DualInconsistencyError:
            return _Point(mu, math.inf, np.full(mu.size, -math.inf), None, math.inf)
        vals = constraint_values(self.instance, R)
        slack = self.caps - vals
        g = float(np.sum(np.log(lam) - 1.0 + 1.0 / lam) + mu @ self.caps)
        return _Point(mu, g, slack, R, float(np.sum(np.log(lam))))


def covariance_for_duals(instance: ProblemInstance, duals: DualVariables, tol: Tolerances = TOL) -> np.ndarray:
    """Optimal covariance of the Lagrangian for fixed multipliers.

    When ``mu1 == 0`` and ``sum mu2k W2k`` is singular the problem is solved
    on the range of that sum and embedded back with zero off-range blocks;
    this needs the null space of the weighted sum to lie inside ``N(W1)``.

    Raises
    ------
    DualInconsistencyError
        If all multipliers vanish, or if ``mu1 == 0`` while the null-space
        containment fails (the TPC cannot be redundant then).
    """
    R, _ = _DualModel(instance, tol).covariance(duals.as_array())
    return R


# --------------------------------------------------------------------------
# multiplier search


def _targets(model: _DualModel) -> np.ndarray:
    return 1e-10 * np.maximum(1.0, model.caps)


def _converged(model: _DualModel, p: _Point, settings: DualSearchSettings) -> bool:
    if p.R is None:
        return False
    tau = _targets(model)
    scale = float(max(1.0, np.max(model.caps)))
    s, mu = p.slack, p.mu
    if np.any(s < -tau):
        return False
    if np.any(mu * np.abs(s) > settings.residual_tol * scale):
        return False
    tight = 1e-8 * np.maximum(1.0, model.caps)
    return bool(np.all((mu <= settings.residual_tol) | (np.abs(s) <= tight)))


def _mu_hi(model: _DualModel, settings: DualSearchSettings) -> float:
    if settings.mu_upper_bound is not None:
        return settings.mu_upper_bound
    return max(model.W1_norm, 1e-300)


def _coordinate_min(model: _DualModel, mu: np.ndarray, j: int, hi0: float) -> _Point:
    """Exactly minimise the dual along coordinate ``j``.

    The slack of constraint ``j`` is nondecreasing in ``mu_j`` (the dual is
    convex), so the minimiser is ``0`` when that slack is already
    nonnegative there, and otherwise a sign change of the slack that is
    bracketed, verified, and located with Brent's method on ``log mu_j``.
    """
    mu = mu.copy()
    mu[j] = 0.0
    p0 = model.point(mu)
    if p0.R is not None and p0.slack[j] >= 0:
        return p0

    def at(t: float) -> _Point:
        x = mu.copy()
        x[j] = math.exp(t)
        return model.point(x)

    hi = max(hi0, 1e-300)
    p_hi = at(math.log(hi))
    grow = 0
    while not p_hi.slack[j] >= 0:
        hi *= 4.0
        grow += 1
        if grow > 200:
            raise DualSearchError(f"cannot bracket multiplier {j}")
        p_hi = at(math.log(hi))
    lo = hi * 1e-2
    p_lo = at(math.log(lo))
    shrink = 0
    while p_lo.slack[j] >= 0:
        hi, p_hi = lo, p_lo
        lo *= 1e-2
        shrink += 1
        if lo < MU_FLOOR * max(hi0, 1.0) or shrink > 200:
            return p_hi
        p_lo = at(math.log(lo))
    if not (p_lo.slack[j] < 0 <= p_hi.slack[j]):
        raise DualSearchError(f"no sign change for multiplier {j}")

    cache: dict[float, _Point] = {}

    def f(t: float) -> float:
        p = at(t)
        cache[t] = p
        v = p.slack[j]
        return -1e300 if math.isinf(v) else v

    t = brentq(f, math.log(lo), math.log(hi), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return cache.get(t) or at(t)


def _nested_bisection(model: _DualModel, settings: DualSearchSettings) -> _Point:
    """Single-user search: outer root-finding on ``mu1``, inner on ``mu2``."""
    hi = _mu_hi(model, settings)
    W2 = model.W2[0]
    inner_hi = hi / max(_smallest_positive(W2, model.tol), model.tol.rank)

    def inner(mu1: float) -> _Point:
        return _coordinate_min(model, np.array([mu1, 0.0]), 1, inner_hi)

    if nullspace_contained(W2, model.instance.W1, model.tol):
        p = inner(0.0)
        if p.R is not None and p.slack[0] >= 0:
            return p

    def at(t: float) -> _Point:
        return inner(math.exp(t))

    p_hi = at(math.log(hi))
    while p_hi.slack[0] < 0:
        hi *= 4.0
        p_hi = at(math.log(hi))
    lo = max(MU_FLOOR * hi, MU_FLOOR)
    p_lo = at(math.log(lo))
    if p_lo.slack[0] >= 0:
        return p_lo

    cache: dict[float, _Point] = {}

    def f(t: float) -> float:
        p = at(t)
        cache[t] = p
        return p.slack[0]

    t = brentq(f, math.log(lo), math.log(hi), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return cache.get(t) or at(t)


def _smallest_positive(A: np.ndarray, tol: Tolerances) -> float:
    w = eigh(A).values
    pos = w[w > tol.rank * max(float(w[0]), 1.0)]
    return float(pos[-1]) if pos.size else 0.0


def _fd_hessian(model: _DualModel, p: _Point, free: np.ndarray) -> np.ndarray:
    n = p.mu.size
    H = np.zeros((n, n))
    ref = max(model.W1_norm, 1e-12)
    for j in np.flatnonzero(free):
        h = 1e-6 * max(p.mu[j], 1e-6 * ref)
        up = p.mu.copy()
        up[j] += h
        pu = model.point(up)
        if p.mu[j] - h > 0:
            dn = p.mu.copy()
            dn[j] -= h
            pd = model.point(dn)
            if pd.R is not None and pu.R is not None:
                H[:, j] = (pu.slack - pd.slack) / (2 * h)
                continue
        H[:, j] = (pu.slack - p.slack) / h
    H = 0.5 * (H + H.T)
    return H


def _projected_newton(model: _DualModel, p: _Point, settings: DualSearchSettings) -> _Point:
    """Projected Newton on the dual over the nonnegative orthant."""
    for _ in range(settings.max_iters):
        if _converged(model, p, settings):
            return p
        s = p.slack
        bound = (p.mu <= 0) & (s > 0)
        free = ~bound
        H = _fd_hessian(model, p, free)
        idx = np.flatnonzero(free)
        Hf = H[np.ix_(idx, idx)]
        reg = 1e-12 * max(float(np.max(np.abs(np.diag(Hf)))) if idx.size else 0.0, 1e-300)
        d = np.zeros_like(p.mu)
        try:
            d[idx] = -np.linalg.lstsq(Hf + reg * np.eye(idx.size), s[idx], rcond=1e-13)[0]
        except np.linalg.LinAlgError:
            d[idx] = -s[idx]
        if not np.all(np.isfinite(d)) or s @ d >= 0:
            d = np.where(free, -s, 0.0)
        step = 1.0
        best = None
        norm0 = np.linalg.norm(np.where(free, s, np.minimum(s, 0)))
        for _ in range(60):
            q = model.point(np.maximum(p.mu + step * d, 0.0))
            if q.R is not None:
                armijo = q.g <= p.g + 1e-4 * (s @ (q.mu - p.mu))
                qs = q.slack
                qfree = ~((q.mu <= 0) & (qs > 0))
                norm1 = np.linalg.norm(np.where(qfree, qs, np.minimum(qs, 0)))
                if armijo or norm1 < 0.5 * norm0:
                    best = q
                    break
            step *= 0.5
        if best is None:
            break
        p = best
    if _converged(model, p, settings):
        return p
    raise DualSearchError("projected Newton did not converge", p.mu, p.slack)


def _initial_point(model: _DualModel) -> _Point:
    inst = model.instance
    _, level, _ = _waterfill(inst.W1, inst.P_T, model.tol)
    mu = np.zeros(inst.K + 1)
    mu[0] = 1.0 / level if np.isfinite(level) else 1.0
    return model.point(mu)


def _newton_search(model: _DualModel, settings: DualSearchSettings) -> _Point:
    p = _initial_point(model)
    try:
        return _projected_newton(model, p, settings)
    except DualSearchError:
        log.info("Newton from water-filling start failed; running coordinate sweeps")
    hi = _mu_hi(model, settings)
    mu = p.mu.copy()
    for _ in range(settings.max_iters):
        for j in range(mu.size):
            hj = hi if j == 0 else hi / max(_smallest_positive(model.W2[j - 1], model.tol), model.tol.rank)
            q = _coordinate_min(model, mu, j, max(mu[j], hj))
            mu = q.mu
        if _converged(model, q, settings):
            return q
        try:
            return _projected_newton(model, q, settings)
        except DualSearchError:
            continue
    raise DualSearchError("dual search did not converge", q.mu, q.slack)


def dual_search(
    instance: ProblemInstance,
    settings: DualSearchSettings = DualSearchSettings(),
    tol: Tolerances = TOL,
) -> tuple[DualVariables, Solution]:
    """Find multipliers satisfying complementary slackness and feasibility.

    Assumes the instance has positive capacity and no zero interference
    caps (``solve`` handles those first).
    """
    model = _DualModel(instance, tol)
    method = settings.method
    if method == "bisection" and instance.K != 1:
        raise ValueError("nested bisection needs exactly one user")
    order = []
    if method in ("auto", "bisection") and instance.K == 1:
        order.append(_nested_bisection)
    if method in ("auto", "newton"):
        order.append(_newton_search)
    last: Exception | None = None
    for fn in order:
        try:
            p = fn(model, settings)
        except (DualSearchError, ValueError) as exc:
            log.info("%s failed: %s", fn.__name__, exc)
            last = exc
            continue
        if not _converged(model, p, settings):
            # bisection stops on interval width; polish with Newton
            try:
                p = _projected_newton(model, p, settings)
            except DualSearchError as exc:
                last = exc
                continue
        duals = DualVariables.from_array(p.mu)
        sol = build_solution(
            instance, p.R, duals, "general", p.capacity, tol,
            search=fn.__name__.lstrip("_"), evaluations=model.calls,
        )
        return duals, sol
    if isinstance(last, DualSearchError):
        raise last
    raise DualSearchError(f"dual search failed: {last}")


# --------------------------------------------------------------------------
# dispatch


def _zero_solution(instance: ProblemInstance, zf: list[int], tol: Tolerances) -> Solution:
    """``R = 0`` with multipliers certifying optimality when possible."""
    m = instance.m
    mu2 = np.zeros(instance.K)
    if zf:
        S = instance.W2_sum(zf)
        Sf = range_factor(S, tol)
        if Sf.shape[1]:
            # smallest t with t S >= W1 on range(S)
            Sp = np.linalg.pinv(Sf)
            t = float(eigh(Sp @ instance.W1 @ Sp.conj().T).values[0]) if Sp.size else 0.0
            mu2[zf] = max(t, 0.0)
    return build_solution(instance, np.zeros((m, m), dtype=complex), DualVariables(0.0, tuple(mu2)), "prop2", 0.0, tol)


def _zf_multiplier(instance: ProblemInstance, R: np.ndarray, mu: np.ndarray, zf: list[int], tol: Tolerances) -> np.ndarray:
    """Common multiplier for the zero-cap users making ``M`` PSD if it can."""
    F = range_factor(instance.W1, tol)
    M0 = mu[0] * np.eye(instance.m) - _gradient(F, R)
    for k, u in enumerate(instance.users):
        M0 = M0 + mu[k + 1] * u.W2
    S = instance.W2_sum(zf)
    scale = max(float(eigh(instance.W1).values[0]), 1.0)

    def lmin(t: float) -> float:
        return float(eigh(M0 + t * S).values[-1])

    if lmin(0.0) >= -tol.psd * scale:
        return mu
    t = 1.0
    prev = lmin(t)
    while prev < -tol.psd * scale and t < 1e8 * scale:
        t *= 2.0
        cur = lmin(t)
        if abs(cur - prev) <= 1e-12 * scale:
            break
        prev = cur
    if lmin(t) >= -tol.psd * scale:
        lo, hi = 0.0, t
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if lmin(mid) >= -tol.psd * scale:
                hi = mid
            else:
                lo = mid
        t = hi
    out = mu.copy()
    out[[k + 1 for k in zf]] = t
    return out


def solve(
    instance: ProblemInstance,
    method: Literal["auto", "general"] = "auto",
    settings: DualSearchSettings = DualSearchSettings(),
    tol: Tolerances = TOL,
) -> Solution:
    """Capacity-achieving covariance for the instance.

    Order of dispatch: zero capacity, elimination of zero-cap users by
    restricting to the common null space of their channels, trivially
    vacuous constraints (plain water-filling), single-user closed forms
    (``method="auto"`` only), water-filling when it already meets every
    cap, and finally the general multiplier search.
    """
    from . import regimes

    if rank_eps(instance.W1, tol) == 0:
        return _zero_solution(instance, [], tol)
    zf = [k for k, u in enumerate(instance.users) if u.P_I == 0 and rank_eps(u.W2, tol) > 0]
    if zf:
        S = instance.W2_sum(zf)
        if nullspace_contained(S, instance.W1, tol):
            return _zero_solution(instance, zf, tol)
        V = null_basis(S, tol)
        keep = [k for k in range(instance.K) if k not in zf]
        sub = ProblemInstance(
            V.conj().T @ instance.W1 @ V,
            instance.P_T,
            tuple(User(V.conj().T @ instance.users[k].W2 @ V, instance.users[k].P_I) for k in keep),
        )
        inner = solve(sub, method, settings, tol)
        R = as_hermitian(V @ inner.R @ V.conj().T)
        mu = np.zeros(instance.K + 1)
        mu[0] = inner.duals.mu1
        for i, k in enumerate(keep):
            mu[k + 1] = inner.duals.mu2[i]
        mu = _zf_multiplier(instance, R, mu, zf, tol)
        return build_solution(
            instance, R, DualVariables.from_array(mu), inner.method, inner.capacity_nats, tol,
            zero_forcing=[k + 1 for k in zf],
        )

    live = [k for k, u in enumerate(instance.users) if rank_eps(u.W2, tol) > 0]
    wf = None
    if not live or method == "auto":
        R, level, cap = _waterfill(instance.W1, instance.P_T, tol)
        wf = (R, level, cap)
        if not live:
            return build_solution(instance, R, DualVariables(1.0 / level, (0.0,) * instance.K), "waterfilling", cap, tol)

    if method == "auto" and instance.K == 1:
        for special in (regimes.solve_rank1_channel, regimes.solve_full_rank_interference_limited, regimes.solve_rank1_interferer):
            sol = special(instance, tol=tol)
            if sol is not None and _acceptable(instance, sol):
                return sol

    if wf is not None:
        R, level, cap = wf
        vals = constraint_values(instance, R)
        if np.all(vals[1:] <= instance.caps[1:]):
            return build_solution(instance, R, DualVariables(1.0 / level, (0.0,) * instance.K), "waterfilling", cap, tol)

    _, sol = dual_search(instance, settings, tol)
    return sol


def _acceptable(instance: ProblemInstance, sol: Solution) -> bool:
    bound = 1e-6 * max(1.0, float(eigh(instance.W1).values[0]))
    ok = sol.kkt.worst() <= bound
    if not ok:
        log.info("closed form %s rejected by audit (worst residual %.3g)", sol.method, sol.kkt.worst())
    return ok
