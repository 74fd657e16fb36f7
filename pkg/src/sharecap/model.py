"""Problem data, objective and constraint evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .linalg import TOL, Tolerances, as_hermitian, eigh, range_factor

__all__ = [
    "User",
    "ProblemInstance",
    "DualVariables",
    "KktResiduals",
    "Solution",
    "gram_from_channel",
    "mutual_information",
    "interference_power",
    "is_feasible",
    "aggregate_total_ipc",
    "random_instance",
]


def gram_from_channel(H) -> np.ndarray:
    """``H^H H`` for an ``n x m`` channel matrix (Hermitian PSD by construction)."""
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    if H.size == 0:
        raise ValueError("channel matrix is empty")
    return as_hermitian(H.conj().T @ H)


@dataclass(frozen=True)
class User:
    """A primary user: Gram matrix of the channel towards it and its cap."""

    W2: np.ndarray
    P_I: float

    def __post_init__(self):
        object.__setattr__(self, "W2", as_hermitian(self.W2))
        if not self.P_I >= 0:
            raise ValueError(f"interference cap must be >= 0, got {self.P_I}")
        object.__setattr__(self, "P_I", float(self.P_I))


@dataclass(frozen=True)
class ProblemInstance:
    """Main-channel Gram ``W1``, per-user interference caps, power budget."""

    W1: np.ndarray
    P_T: float
    users: tuple[User, ...] = ()

    def __post_init__(self):
        W1 = as_hermitian(self.W1)
        object.__setattr__(self, "W1", W1)
        users = tuple(
            u if isinstance(u, User) else User(*u) for u in self.users
        )
        object.__setattr__(self, "users", users)
        if not self.P_T > 0:
            raise ValueError(f"total power must be > 0, got {self.P_T}")
        object.__setattr__(self, "P_T", float(self.P_T))
        for k, u in enumerate(users):
            if u.W2.shape != W1.shape:
                raise ValueError(
                    f"user {k + 1}: W2 shape {u.W2.shape} != W1 shape {W1.shape}"
                )

    @property
    def m(self) -> int:
        return self.W1.shape[0]

    @property
    def K(self) -> int:
        return len(self.users)

    @property
    def caps(self) -> np.ndarray:
        """Constraint right-hand sides, TPC first."""
        return np.array([self.P_T] + [u.P_I for u in self.users])

    def constraint_matrices(self) -> list[np.ndarray]:
        return [np.eye(self.m, dtype=complex)] + [u.W2 for u in self.users]

    def W2_sum(self, ks: Sequence[int] | None = None) -> np.ndarray:
        idx = range(self.K) if ks is None else ks
        out = np.zeros((self.m, self.m), dtype=complex)
        for k in idx:
            out = out + self.users[k].W2
        return out

    def with_power(self, P_T: float) -> "ProblemInstance":
        return replace(self, P_T=P_T)

    def with_cap(self, k: int, P_I: float) -> "ProblemInstance":
        users = list(self.users)
        users[k] = User(users[k].W2, P_I)
        return replace(self, users=tuple(users))


@dataclass(frozen=True)
class DualVariables:
    mu1: float
    mu2: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mu1", float(self.mu1))
        object.__setattr__(self, "mu2", tuple(float(x) for x in self.mu2))
        if self.mu1 < 0 or any(x < 0 for x in self.mu2):
            raise ValueError("dual variables must be nonnegative")

    def as_array(self) -> np.ndarray:
        return np.array((self.mu1,) + self.mu2)

    @classmethod
    def from_array(cls, mu) -> "DualVariables":
        mu = np.maximum(np.asarray(mu, dtype=float), 0.0)
        return cls(float(mu[0]), tuple(mu[1:]))


@dataclass(frozen=True)
class KktResiduals:
    """Magnitudes of the optimality-condition violations.

    ``dual_feas`` is the most negative eigenvalue of the PSD multiplier
    (zero when it is PSD); all other fields are nonnegative.
    """

    stationarity: float
    comp_slack_tpc: float
    comp_slack_ipc: tuple[float, ...]
    dual_feas: float
    primal_feas: float

    def worst(self) -> float:
        vals = [self.stationarity, self.comp_slack_tpc, -self.dual_feas, self.primal_feas]
        vals.extend(self.comp_slack_ipc)
        return float(max(vals))


@dataclass(frozen=True)
class Solution:
    R: np.ndarray
    capacity_nats: float
    duals: DualVariables
    active: tuple[bool, ...]
    kkt: KktResiduals
    method: str
    info: dict = field(default_factory=dict, compare=False)

    @property
    def capacity_bits(self) -> float:
        return self.capacity_nats / np.log(2.0)


def mutual_information(instance: ProblemInstance, R, tol: Tolerances = TOL) -> float:
    """``log det(I + W1 R)`` in nats.

    Evaluated through the Hermitian ``F^H R F`` with ``W1 = F F^H`` so the
    eigenvalues are real and nonnegative up to rounding.
    """
    R = as_hermitian(R)
    w = eigh(R).values
    if w.size and w[-1] < -tol.psd * max(float(np.max(np.abs(w))), 1.0):
        raise ValueError(f"covariance is not PSD (min eigenvalue {w[-1]:.3g})")
    F = range_factor(instance.W1, tol)
    if F.shape[1] == 0:
        return 0.0
    lam = eigh(F.conj().T @ R @ F).values
    return float(np.sum(np.log1p(np.clip(lam, 0.0, None))))


def interference_power(instance: ProblemInstance, R, k: int) -> float:
    """``tr(W2k R)`` for user index ``k`` (0-based)."""
    if not 0 <= k < instance.K:
        raise IndexError(f"user index {k} out of range for K={instance.K}")
    return float(np.real(np.sum(instance.users[k].W2.T * np.asarray(R))))


def constraint_values(instance: ProblemInstance, R) -> np.ndarray:
    """``[tr R, tr(W21 R), ..., tr(W2K R)]``."""
    R = np.asarray(R)
    return np.array([float(np.real(np.trace(R)))] + [
        float(np.real(np.sum(u.W2.T * R))) for u in instance.users
    ])


def is_feasible(
    instance: ProblemInstance, R, tol: Tolerances = TOL
) -> tuple[bool, list[tuple[str, float]]]:
    """Check ``R`` against the PSD cone, the TPC and every IPC.

    Returns the verdict and a list of ``(constraint, excess)`` pairs for the
    violated ones; names are ``"psd"``, ``"tpc"`` and ``"ipc<k>"`` (1-based).
    """
    R = as_hermitian(R)
    violations: list[tuple[str, float]] = []
    w = eigh(R).values
    scale = max(float(np.max(np.abs(w))), 1.0) if w.size else 1.0
    if w.size and w[-1] < -tol.psd * scale:
        violations.append(("psd", float(-w[-1])))
    vals = constraint_values(instance, R)
    excess = vals - instance.caps
    if excess[0] > tol.feas:
        violations.append(("tpc", float(excess[0])))
    for k, e in enumerate(excess[1:]):
        if e > tol.feas:
            violations.append((f"ipc{k + 1}", float(e)))
    return not violations, violations


def aggregate_total_ipc(instance: ProblemInstance, P_I: float | None = None) -> ProblemInstance:
    """Collapse per-user IPCs into one constraint on total interference.

    The single user gets ``W2 = sum_k W2k``; its cap is ``P_I`` if given,
    otherwise the sum of the individual caps.
    """
    if instance.K < 1:
        raise ValueError("need at least one user to aggregate")
    cap = sum(u.P_I for u in instance.users) if P_I is None else P_I
    return replace(instance, users=(User(instance.W2_sum(), cap),))


def _random_gram(rng: np.random.Generator, m: int, rank: int, scale: float = 1.0) -> np.ndarray:
    H = (rng.standard_normal((rank, m)) + 1j * rng.standard_normal((rank, m))) / np.sqrt(2.0)
    return scale * gram_from_channel(H)


def random_instance(
    rng: np.random.Generator,
    m: int,
    K: int,
    *,
    P_T: float | tuple[float, float] = (0.1, 100.0),
    P_I: float | tuple[float, float] = (0.0, 10.0),
    rank1: int | None = None,
    ranks: Sequence[int] | None = None,
) -> ProblemInstance:
    """Random instance from complex Gaussian channels.

    Ranks default to uniform draws from ``1..m``; scalar power arguments are
    used as given, pairs are sampled uniformly (``P_T`` log-uniformly).
    """
    r1 = int(rng.integers(1, m + 1)) if rank1 is None else rank1
    W1 = _random_gram(rng, m, r1)
    if isinstance(P_T, tuple):
        lo, hi = P_T
        P_T = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    users = []
    for k in range(K):
        r2 = int(rng.integers(1, m + 1)) if ranks is None else ranks[k]
        W2 = _random_gram(rng, m, r2)
        cap = float(rng.uniform(*P_I)) if isinstance(P_I, tuple) else float(P_I)
        users.append(User(W2, cap))
    return ProblemInstance(W1, P_T, tuple(users))
