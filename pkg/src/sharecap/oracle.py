"""Independent numerical maximisers of the log-det objective.

Neither routine uses multipliers or the closed form; they exist to referee
the solver. ``oracle_projected_gradient`` is a spectral projected-gradient
ascent whose projection onto the feasible set is computed exactly through
its low-dimensional dual; ``oracle_bruteforce_2x2`` enumerates a grid of 2x2 covariances.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .linalg import TOL, Tolerances, as_hermitian, null_basis, range_factor
from .model import DualVariables, ProblemInstance, Solution, is_feasible
from .solver import build_solution

log = logging.getLogger(__name__)

__all__ = [
    "OracleSettings",
    "ComparisonReport",
    "oracle_projected_gradient",
    "oracle_bruteforce_2x2",
    "compare",
]


@dataclass(frozen=True)
class OracleSettings:
    max_iters: int = 5000
    step0: float = 1.0
    tol: float = 1e-13
    projection_iters: int = 500
    grid_points: int = 50

    def __post_init__(self):
        for name in ("max_iters", "step0", "tol", "projection_iters", "grid_points"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def _inner(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.real(np.vdot(A, B)))


def _power_cone(X: np.ndarray, budget: float) -> np.ndarray:
    """Euclidean projection onto ``{R >= 0, tr R <= budget}``.

    The set is unitarily invariant, so only the eigenvalues move: they are
    clipped at zero, and if that overspends the budget they are shifted down
    by the common amount that makes the total exactly ``budget``.
    """
    w, U = np.linalg.eigh(as_hermitian(X))
    p = np.clip(w, 0.0, None)
    if p.sum() > budget:
        srt = np.sort(w)[::-1]
        csum = np.cumsum(srt)
        ks = np.arange(1, srt.size + 1)
        shift = (csum - budget) / ks
        n = int(np.max(np.flatnonzero(srt - shift > 0))) + 1
        p = np.clip(w - shift[n - 1], 0.0, None)
    return as_hermitian((U * p) @ U.conj().T)


class _Feasible:
    """Constraint set ``{R >= 0, tr R <= P_T, <W2k, R> <= P_Ik}``.

    The PSD-with-budget part has a closed-form projection; the interference
    half-spaces are handled by maximising the concave dual of the projection
    over one nonnegative multiplier per user (L-BFGS-B).
    """

    def __init__(self, budget: float, mats: list[np.ndarray], caps: np.ndarray, settings: OracleSettings):
        self.budget = budget
        self.mats = mats
        self.caps = caps
        self.norms = [_inner(A, A) for A in mats]
        self.settings = settings
        self.sweeps = 0

    def _halfspace(self, j: int, X: np.ndarray) -> np.ndarray:
        A = self.mats[j]
        excess = _inner(A, X) - self.caps[j]
        if excess <= 0 or self.norms[j] == 0:
            return X
        return X - (excess / self.norms[j]) * A

    def restore(self, X: np.ndarray) -> np.ndarray:
        """Shrink a PSD matrix towards zero until every cap holds."""
        factor = 1.0
        a = float(np.real(np.trace(X)))
        if a > self.budget:
            factor = self.budget / a
        for A, b in zip(self.mats, self.caps):
            a = _inner(A, X)
            if a > b:
                factor = min(factor, b / a)
        return X * factor

    def project(self, X: np.ndarray) -> np.ndarray:
        X = as_hermitian(X)
        x = _power_cone(X, self.budget)
        n = len(self.mats)
        if n == 0 or all(_inner(A, x) <= b for A, b in zip(self.mats, self.caps)):
            return x
        # dual of the projection: one multiplier per interference half-space
        def neg_dual(nu):
            shifted = X - sum(v * A for v, A in zip(nu, self.mats))
            y = _power_cone(shifted, self.budget)
            lhs = np.array([_inner(A, y) for A in self.mats])
            val = 0.5 * _inner(y - X, y - X) + float(nu @ (lhs - self.caps))
            return -val, -(lhs - self.caps)

        scale = max(1.0, max(self.norms))
        res = optimize.minimize(
            neg_dual, np.zeros(n), jac=True, method="L-BFGS-B",
            bounds=[(0.0, None)] * n,
            options=dict(maxiter=self.settings.projection_iters, ftol=1e-16, gtol=1e-13 * scale),
        )
        self.sweeps += int(res.nfev)
        y = _power_cone(X - sum(v * A for v, A in zip(res.x, self.mats)), self.budget)
        return self.restore(y)


def _reduce_zero_caps(instance: ProblemInstance, tol: Tolerances):
    """Basis of the subspace every zero-cap user leaves untouched.

    ``tr(W R) = 0`` with both PSD forces ``W R = 0``, so these caps confine
    ``R`` to the common null space of the corresponding channels.
    """
    zero = [k for k, u in enumerate(instance.users) if u.P_I == 0]
    if not zero:
        return np.eye(instance.m, dtype=complex), list(range(instance.K))
    V = null_basis(instance.W2_sum(zero), tol)
    return V, [k for k in range(instance.K) if k not in zero]


def _logdet_obj(F: np.ndarray, R: np.ndarray) -> float:
    if F.shape[1] == 0:
        return 0.0
    lam = np.linalg.eigvalsh(as_hermitian(F.conj().T @ R @ F))
    return float(np.sum(np.log1p(np.clip(lam, 0.0, None))))


def _logdet_grad(F: np.ndarray, R: np.ndarray) -> np.ndarray:
    r = F.shape[1]
    if r == 0:
        return np.zeros((F.shape[0],) * 2, dtype=complex)
    return as_hermitian(F @ np.linalg.solve(np.eye(r) + F.conj().T @ R @ F, F.conj().T))


def oracle_projected_gradient(
    instance: ProblemInstance,
    settings: OracleSettings = OracleSettings(),
    tol: Tolerances = TOL,
) -> Solution:
    """Maximise ``log det(I + W1 R)`` over the feasible set by projected ascent.

    Barzilai-Borwein steps with a nonmonotone Armijo search; every iterate is
    projected and then shrunk until exactly feasible, so the
    returned covariance never exceeds a cap. Stops when the relative
    objective change stays below ``settings.tol`` for 20 iterations.
    """
    if instance.m > 32:
        raise ValueError("oracle is meant for m <= 32")
    V, keep = _reduce_zero_caps(instance, tol)
    d = V.shape[1]
    if d == 0:
        R = np.zeros((instance.m, instance.m), dtype=complex)
        return build_solution(instance, R, DualVariables(0.0, (0.0,) * instance.K), "oracle", tol=tol, iterations=0)

    W1 = V.conj().T @ instance.W1 @ V
    mats = [V.conj().T @ instance.users[k].W2 @ V for k in keep]
    caps = np.array([instance.users[k].P_I for k in keep])
    feas = _Feasible(instance.P_T, mats, caps, settings)
    F = range_factor(W1, tol)

    R = feas.restore(np.eye(d, dtype=complex) * (instance.P_T / d))
    f = _logdet_obj(F, R)
    G = _logdet_grad(F, R)
    step = settings.step0
    history = [f]
    quiet = 0
    it = 0
    for it in range(1, settings.max_iters + 1):
        D = feas.project(R + step * G) - R
        slope = _inner(G, D)
        if slope <= 1e-15 * max(1.0, abs(f)):
            # no ascent left at this step length; retry shorter before giving up
            if step < 1e-8:
                break
            step *= 0.1
            continue
        ref = max(history[-10:])
        t = 1.0
        while True:
            R_new = R + t * D
            f_new = _logdet_obj(F, R_new)
            if f_new >= ref + 1e-4 * t * slope or t < 1e-10:
                break
            t *= 0.5
        G_new = _logdet_grad(F, R_new)
        S = R_new - R
        Y = G_new - G
        sy = _inner(S, Y)
        step = _inner(S, S) / -sy if sy < 0 else 1e6 * settings.step0
        step = min(max(step, 1e-10), 1e10)
        change = abs(f_new - f) / max(1.0, abs(f))
        R, f, G = R_new, f_new, G_new
        history.append(f)
        quiet = quiet + 1 if change < settings.tol else 0
        if quiet >= 20:
            break
    else:
        log.info("projected gradient hit max_iters=%d", settings.max_iters)

    R = feas.restore(_power_cone(R, instance.P_T))
    R_full = as_hermitian(V @ R @ V.conj().T)
    ok, _ = is_feasible(instance, R_full, tol)
    return build_solution(
        instance, R_full, DualVariables(0.0, (0.0,) * instance.K), "oracle", tol=tol,
        iterations=it, projection_evals=feas.sweeps, feasible=ok, converged=quiet >= 20,
    )


def _grid_capacity(W1: np.ndarray, W2s: list[np.ndarray], caps: np.ndarray, a, rho, theta):
    """Best capacity along each trace-one 2x2 shape, scaled to the boundary."""
    a = np.asarray(a, dtype=float)
    b = 1.0 - a
    off = rho * np.sqrt(np.clip(a * b, 0.0, None)) * np.exp(1j * theta)

    def lin(W):
        return np.real(W[0, 0]) * a + np.real(W[1, 1]) * b + 2.0 * np.real(W[1, 0] * off)

    scale = np.full(a.shape, caps[0])
    for W, c in zip(W2s, caps[1:]):
        load = lin(W)
        with np.errstate(divide="ignore", invalid="ignore"):
            lim = np.where(load > 1e-15, c / load, np.inf)
        scale = np.minimum(scale, lim)
    det_s = a * b - np.abs(off) ** 2
    det_w1 = float(np.real(np.linalg.det(W1)))
    val = 1.0 + scale * lin(W1) + scale**2 * det_w1 * det_s
    return np.log(np.clip(val, 1.0, None)), scale


def oracle_bruteforce_2x2(
    instance: ProblemInstance,
    settings: OracleSettings = OracleSettings(),
    tol: Tolerances = TOL,
) -> Solution:
    """Exhaustive search over 2x2 covariances.

    A 2x2 PSD matrix of unit trace is ``[[a, z], [z*, 1 - a]]`` with
    ``|z|^2 <= a (1 - a)``; the objective increases with the overall scale,
    so each such shape is scaled to the largest feasible multiple. The shape
    is gridded in ``(a, |z| / sqrt(a (1 - a)), arg z)``, then the best grid
    point is polished by coordinate descent with shrinking steps.
    """
    if instance.m != 2:
        raise ValueError(f"grid oracle needs m == 2, got m == {instance.m}")
    W1 = instance.W1
    W2s = [u.W2 for u in instance.users]
    caps = instance.caps
    n = settings.grid_points
    a = np.linspace(0.0, 1.0, n)
    rho = np.linspace(0.0, 1.0, n)
    theta = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    A, P, T = np.meshgrid(a, rho, theta, indexing="ij")
    vals, _ = _grid_capacity(W1, W2s, caps, A, P, T)
    best = np.unravel_index(int(np.argmax(vals)), vals.shape)  # first max in index order
    x = np.array([A[best], P[best], T[best]])
    fx = float(vals[best])

    # rank-one shapes inside a zero-cap null space have measure zero on the grid
    zero = [k for k, u in enumerate(instance.users) if u.P_I == 0]
    if zero:
        for v in null_basis(instance.W2_sum(zero), tol).T:
            aa = abs(v[0]) ** 2
            th = float(np.angle(v[0] * np.conj(v[1])))
            c, _ = _grid_capacity(W1, W2s, caps, np.array([aa]), np.array([1.0]), np.array([th]))
            if c[0] > fx:
                x, fx = np.array([aa, 1.0, th]), float(c[0])

    lower = np.array([0.0, 0.0, -np.inf])
    upper = np.array([1.0, 1.0, np.inf])
    h = np.array([1.0 / (n - 1), 1.0 / (n - 1), 2 * np.pi / n]) / 10.0
    while np.max(h) > 1e-10:
        improved = False
        for i in range(3):
            for sgn in (1.0, -1.0):
                y = x.copy()
                y[i] = min(max(y[i] + sgn * h[i], lower[i]), upper[i])
                c, _ = _grid_capacity(W1, W2s, caps, y[:1], y[1:2], y[2:])
                if c[0] > fx:
                    x, fx, improved = y, float(c[0]), True
        if not improved:
            h = h / 2.0

    _, s = _grid_capacity(W1, W2s, caps, x[:1], x[1:2], x[2:])
    aa, pp, tt = x
    z = pp * math.sqrt(max(aa * (1 - aa), 0.0)) * np.exp(1j * tt)
    R = float(s[0]) * np.array([[aa, z], [np.conj(z), 1 - aa]], dtype=complex)
    return build_solution(instance, R, DualVariables(0.0, (0.0,) * instance.K), "oracle", tol=tol, grid_value=fx)


@dataclass(frozen=True)
class ComparisonReport:
    capacity_a: float
    capacity_b: float
    capacity_gap: float
    covariance_max_diff: float
    feasible_a: bool
    feasible_b: bool
    tol: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def compare(a: Solution, b: Solution, tol: float, instance: ProblemInstance | None = None) -> ComparisonReport:
    """Compare two solutions of the same instance on capacity.

    The covariance difference is informational only, since optimal
    covariances need not be unique. Feasibility is taken from each
    solution's primal residual unless the instance is supplied.
    """
    gap = abs(a.capacity_nats - b.capacity_nats)
    diff = float(np.max(np.abs(a.R - b.R))) if a.R.shape == b.R.shape else math.inf
    if instance is not None:
        fa, fb = is_feasible(instance, a.R)[0], is_feasible(instance, b.R)[0]
    else:
        fa = a.kkt.primal_feas <= TOL.feas
        fb = b.kkt.primal_feas <= TOL.feas
    return ComparisonReport(
        capacity_a=a.capacity_nats,
        capacity_b=b.capacity_nats,
        capacity_gap=gap,
        covariance_max_diff=diff,
        feasible_a=bool(fa),
        feasible_b=bool(fb),
        tol=tol,
        passed=bool(gap <= tol and fa and fb),
    )
