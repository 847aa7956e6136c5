"""The renewal risk model with Brownian perturbation and its random-walk reduction.

Between claim epochs the surplus of line ``j`` earns premium at rate ``p_j``
and moves with ``delta_j * B_j``; at each epoch the claim vector is paid.
Ruin with initial capital ``x`` split by ``b`` is the event that the walk

    S_n = sum_{i<=n} W_i,   W_i = X_i - theta_i * p - delta * dB_i

enters ``x * A`` for some ``n`` (``dB_i`` is the Brownian increment over the
``i``-th inter-arrival interval).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _kernels as K
from .distributions import ClaimModel
from .geometry import Allocation, GaugeSet
from .rng import Stream, as_stream

__all__ = [
    "NetProfitViolation",
    "ExpArrivals",
    "ErlangArrivals",
    "FixedArrivals",
    "LogNormalArrivals",
    "RiskModel",
    "Increment",
    "WalkResult",
    "drift_c",
    "drift_c_star",
    "sample_increment",
    "sample_increments",
    "simulate_walk",
]


class NetProfitViolation(ValueError):
    """The walk increment does not have strictly negative mean in every line."""


@dataclass(frozen=True)
class ExpArrivals:
    """Poisson claim arrivals with intensity ``rate``."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def mean(self) -> float:
        return 1.0 / self.rate

    def _code(self):
        return np.array([K.IA_EXPONENTIAL, self.rate, 0.0])


@dataclass(frozen=True)
class ErlangArrivals:
    k: int
    rate: float

    def __post_init__(self):
        if not (1 <= int(self.k) <= K.SLOTS - 2) or not self.rate > 0:
            raise ValueError(f"Erlang needs 1 <= k <= {K.SLOTS - 2} and rate > 0")

    def mean(self) -> float:
        return self.k / self.rate

    def _code(self):
        return np.array([K.IA_ERLANG, self.rate, float(self.k)])


@dataclass(frozen=True)
class FixedArrivals:
    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")

    def mean(self) -> float:
        return self.theta

    def _code(self):
        return np.array([K.IA_DETERMINISTIC, self.theta, 0.0])


@dataclass(frozen=True)
class LogNormalArrivals:
    m: float
    s: float

    def __post_init__(self):
        if not self.s >= 0:
            raise ValueError("s must be nonnegative")

    def mean(self) -> float:
        return math.exp(self.m + 0.5 * self.s**2)

    def _code(self):
        return np.array([K.IA_LOGNORMAL, self.m, self.s])


Interarrival = Union[ExpArrivals, ErlangArrivals, FixedArrivals, LogNormalArrivals]


def _vec(v, d, name):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = np.full(d, float(arr))
    if arr.shape != (d,):
        raise ValueError(f"{name} must have length {d}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _factor(cov: np.ndarray) -> np.ndarray:
    if not np.any(cov):
        return np.zeros_like(cov)
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
        raise ValueError("Brownian covariance must be symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    w = np.linalg.eigvalsh(cov)
    if w.min() < -1e-12 * max(1.0, abs(w).max()):
        raise ValueError("Brownian covariance is not positive semi-definite")
    return np.linalg.cholesky(cov + 1e-12 * np.eye(cov.shape[0]))


@dataclass(frozen=True, eq=False)
class RiskModel:
    """Complete model: claims, arrivals, premiums, allocation and diffusion.

    The Brownian motion has drift ``brownian_drift`` and covariance
    ``brownian_cov`` per unit time.  Construction fails with
    :class:`NetProfitViolation` unless ``c* > 0`` componentwise.
    """

    claims: ClaimModel
    interarrival: Interarrival
    premium: np.ndarray
    allocation: Allocation
    delta: np.ndarray = None
    brownian_drift: np.ndarray = None
    brownian_cov: np.ndarray = None
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = self.claims.d
        if self.allocation.d != d:
            raise ValueError(f"allocation has d={self.allocation.d}, claims have d={d}")
        p = _vec(self.premium, d, "premium")
        if np.any(p <= 0):
            raise ValueError("premium rates must be positive")
        delta = _vec(0.0 if self.delta is None else self.delta, d, "delta")
        if np.any(delta < 0):
            raise ValueError("delta must be nonnegative")
        m = _vec(0.0 if self.brownian_drift is None else self.brownian_drift, d, "brownian_drift")
        if np.any(m < 0):
            raise ValueError("Brownian drift must be nonnegative")
        cov = np.zeros((d, d)) if self.brownian_cov is None else np.asarray(self.brownian_cov, dtype=float)
        if cov.shape != (d, d) or not np.all(np.isfinite(cov)):
            raise ValueError(f"brownian_cov must be a finite {d}x{d} matrix")
        for name, val in (("premium", p), ("delta", delta), ("brownian_drift", m), ("brownian_cov", cov)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        chol = _factor(cov)
        chol.setflags(write=False)
        object.__setattr__(self, "_chol", chol)
        drift_c_star(self)

    @property
    def d(self) -> int:
        return self.claims.d

    @property
    def diffuse(self) -> bool:
        return bool(np.any(self.delta > 0) and (np.any(self.brownian_cov != 0) or np.any(self.brownian_drift > 0)))

    def replace(self, **changes) -> "RiskModel":
        kw = dict(
            claims=self.claims, interarrival=self.interarrival, premium=self.premium,
            allocation=self.allocation, delta=self.delta, brownian_drift=self.brownian_drift,
            brownian_cov=self.brownian_cov,
        )
        kw.update(changes)
        return RiskModel(**kw)

    def _kernel_args(self):
        kinds, pars, variant, weight, dir_alpha = self.claims._encode()
        return (
            kinds, pars, variant, weight, dir_alpha, self.interarrival._code(),
            np.ascontiguousarray(self.premium), np.ascontiguousarray(self.delta),
            np.ascontiguousarray(self.brownian_drift), np.ascontiguousarray(self._chol),
            self.diffuse,
        )


def drift_c(model: RiskModel) -> np.ndarray:
    """``E[theta] * p - E[X]``, the drift of the unperturbed walk away from ruin."""
    return model.interarrival.mean() * model.premium - model.claims.mean_vector()


def drift_c_star(model: RiskModel) -> np.ndarray:
    """``-E[W] = c + delta * m * E[theta]``; raises unless strictly positive."""
    c_star = drift_c(model) + model.delta * model.brownian_drift * model.interarrival.mean()
    if np.any(c_star <= 0):
        raise NetProfitViolation(f"net profit condition fails: c* = {c_star.tolist()}")
    return c_star


@dataclass(frozen=True)
class Increment:
    """One walk increment, or a stack of them when fields are arrays."""

    X: np.ndarray
    theta: float | np.ndarray
    dB: np.ndarray
    Z: np.ndarray
    W: np.ndarray


def sample_increments(model: RiskModel, rng: Union[Stream, int], n: int) -> Increment:
    """``n`` i.i.d. increments; fields have a leading axis of length ``n``."""
    stream = as_stream(rng)
    args = model._kernel_args()
    X, theta, dB = K.sample_increments_kernel(*args, stream.key, 0, int(n))
    Z = X - theta[:, None] * model.premium
    W = Z - model.delta * dB
    return Increment(X, theta, dB, Z, W)


def sample_increment(model: RiskModel, rng: Union[Stream, int]) -> Increment:
    inc = sample_increments(model, rng, 1)
    return Increment(inc.X[0], float(inc.theta[0]), inc.dB[0], inc.Z[0], inc.W[0])


def projected_var_rates(model: RiskModel, A: GaugeSet) -> np.ndarray:
    """Variance per unit time of ``p_k . (delta * B(t))`` for each gauge direction."""
    Q = A.directions * model.delta
    return np.einsum("ki,ij,kj->k", Q, model.brownian_cov, Q)


def stop_parameters(model: RiskModel, A: GaugeSet, x_top: float, policy) -> tuple[float, float]:
    """Slack gap and budget rate for the path stopping rule.

    A path is abandoned (counted as surviving) once its gap below ``x_top``
    exceeds ``slack * (x_top + s)``, or exceeds ``slack * s`` per remaining
    step, where ``s`` is the typical upward move per step: the largest
    projected mean claim plus the projected Brownian scale.
    """
    mean_x = model.claims.mean_vector()
    s = float(np.max(A.directions @ mean_x))
    s += float(np.sqrt(np.max(projected_var_rates(model, A)) * model.interarrival.mean()))
    eta = float(policy.slack)
    return eta * (x_top + s), eta * s


@dataclass(frozen=True)
class WalkResult:
    ruined: bool
    steps: int
    max_projection: float
    stop_reason: str


_REASONS = {K.STOP_RUIN: "ruin", K.STOP_SLACK: "slack", K.STOP_BUDGET: "budget", K.STOP_MAX_STEPS: "max_steps"}


def simulate_walk(model: RiskModel, A: GaugeSet, x: float, horizon, rng: Union[Stream, int], path: int = 0) -> WalkResult:
    """Run one path of the walk until ruin or until the stopping rule fires.

    ``horizon`` is a :class:`ruinlab.montecarlo.HorizonPolicy`.  ``path``
    selects which path of the stream to run; ``estimate_ruin`` with the same
    stream runs paths ``0 .. n-1``.
    """
    if not x > 0:
        raise ValueError("x must be positive")
    stream = as_stream(rng)
    xs = np.array([float(x)])
    gap_stop, budget_rate = stop_parameters(model, A, x, horizon)
    d, Kd = model.d, A.n_directions
    mp, steps, reason = K.walk_path(
        *model._kernel_args(), np.ascontiguousarray(A.directions), xs, projected_var_rates(model, A),
        K.SKELETON, gap_stop, budget_rate, int(horizon.max_steps), int(horizon.check_stride),
        np.uint64(K.path_key(stream.key, np.int64(path))), np.empty(d), np.empty(d), np.zeros(d), np.empty(d + 1),
        np.empty(d), np.empty(2 * Kd), np.empty(1),
    )
    return WalkResult(bool(mp > x), int(steps), float(mp), _REASONS[int(reason)])
