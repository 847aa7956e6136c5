"""Monte Carlo estimation of infinite-horizon ruin probabilities.

Paths are simulated by the compiled walk kernel.  Every path is evaluated
against a whole grid of initial capitals through its running maximum, so
curve estimates share paths and are monotone in ``x`` by construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence, Union

import numpy as np

from . import _kernels as K
from .geometry import GaugeSet
from .process import RiskModel, drift_c_star, projected_var_rates, stop_parameters
from .rng import Stream, as_stream

__all__ = [
    "BridgeMode",
    "HorizonPolicy",
    "EstimateWithCI",
    "PathEnsemble",
    "bridge_crossing",
    "run_ensemble",
    "extend_horizon",
    "estimate_ruin",
    "estimate_curve",
    "cramer_lundberg_psi",
]

logger = logging.getLogger(__name__)

BATCH = 1024
TRUNCATION_WARN = 0.01


class BridgeMode(str, Enum):
    SKELETON = "skeleton"
    L1_EXACT = "l1"
    UNION = "union"

    @property
    def _code(self) -> int:
        return {"skeleton": K.SKELETON, "l1": K.BRIDGE_EXACT, "union": K.BRIDGE_UNION}[self.value]


@dataclass(frozen=True)
class HorizonPolicy:
    max_steps: int = 100_000
    slack: float = 30.0
    check_stride: int = 1

    def __post_init__(self):
        if int(self.max_steps) < 1 or int(self.check_stride) < 1:
            raise ValueError("max_steps and check_stride must be >= 1")
        if not self.slack > 0:
            raise ValueError("slack must be positive")

    def doubled(self) -> "HorizonPolicy":
        return HorizonPolicy(2 * self.max_steps, self.slack, self.check_stride)


@dataclass(frozen=True)
class EstimateWithCI:
    x: float
    estimate: float
    std_err: float
    n_paths: int
    truncation_bound: float
    seed: int
    bridge_mode: BridgeMode
    truncation_warning: bool = False

    def ci(self, z: float = 1.96) -> tuple[float, float]:
        return self.estimate - z * self.std_err, self.estimate + z * self.std_err


def bridge_crossing(start_proj: float, end_proj: float, x: float, var_rate: float, theta: float) -> float:
    """Probability that a Brownian bridge between the two projections reaches ``x``."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if var_rate < 0:
        raise ValueError("var_rate must be nonnegative")
    if theta == 0:
        return 1.0 if max(start_proj, end_proj) >= x else 0.0
    return float(K.bridge_hit(float(start_proj), float(end_proj), float(x), float(var_rate), float(theta)))


@dataclass(frozen=True)
class PathEnsemble:
    """Raw aggregates of one simulation run over a grid of ``x``.

    Skeleton and bridge outcomes come from the same paths, so the bridge
    estimate dominates the skeleton estimate path by path.
    """

    x_grid: np.ndarray
    n_paths: int
    skeleton_hits: np.ndarray
    bridge_sum: np.ndarray
    bridge_sumsq: np.ndarray
    truncated: int
    total_steps: int
    seed: int
    bridge_mode: BridgeMode
    policy: HorizonPolicy
    stream: Stream
    horizon_paths: np.ndarray
    model: RiskModel
    gauge: GaugeSet

    def estimates(self, mode: BridgeMode | None = None) -> list[EstimateWithCI]:
        mode = self.bridge_mode if mode is None else BridgeMode(mode)
        if mode is not BridgeMode.SKELETON and mode is not self.bridge_mode:
            raise ValueError(f"ensemble was run with bridge mode {self.bridge_mode.value}")
        n = self.n_paths
        trunc = self.truncated / n
        out = []
        for i, x in enumerate(self.x_grid):
            if mode is BridgeMode.SKELETON:
                est = self.skeleton_hits[i] / n
                se = math.sqrt(est * (1 - est) / n)
            else:
                est = self.bridge_sum[i] / n
                var = max(self.bridge_sumsq[i] - n * est * est, 0.0) / (n - 1)
                se = math.sqrt(var / n)
            out.append(EstimateWithCI(float(x), float(est), se, n, trunc, self.seed, mode, trunc > TRUNCATION_WARN))
        return out


def run_ensemble(
    model: RiskModel,
    A: GaugeSet,
    x_grid: Sequence[float],
    n_paths: int,
    policy: HorizonPolicy = HorizonPolicy(),
    bridge: Union[BridgeMode, str] = BridgeMode.SKELETON,
    seed: Union[int, Stream] = 0,
) -> PathEnsemble:
    """Simulate ``n_paths`` paths and score them against every ``x`` in the grid."""
    xs = np.asarray(x_grid, dtype=float)
    if xs.ndim != 1 or xs.size == 0:
        raise ValueError("x_grid must be a non-empty 1-d sequence")
    if np.any(xs <= 0) or np.any(np.diff(xs) <= 0):
        raise ValueError("x_grid must be positive and strictly increasing")
    if n_paths < 100:
        raise ValueError("n_paths must be >= 100")
    if model.d != A.d:
        raise ValueError("model and gauge dimensions differ")
    bridge = BridgeMode(bridge)
    if bridge is BridgeMode.L1_EXACT and not A.single_direction:
        raise ValueError("exact bridge correction needs a single-direction gauge; use 'union'")
    drift_c_star(model)
    stream = as_stream(seed)
    hits, bsum, bsq, trunc, steps, bound = K.run_paths(
        *_walk_args(model, A, xs, bridge, policy), stream.key, 0, int(n_paths), BATCH,
    )
    ens = PathEnsemble(
        xs, int(n_paths), hits.sum(axis=0), bsum.sum(axis=0), bsq.sum(axis=0),
        int(trunc.sum()), int(steps.sum()), stream.seed, bridge, policy, stream,
        np.flatnonzero(bound), model, A,
    )
    if ens.truncated / n_paths > TRUNCATION_WARN:
        logger.warning("%.2f%% of paths hit max_steps=%d", 100 * ens.truncated / n_paths, policy.max_steps)
    return ens


def _walk_args(model, A, xs, bridge, policy):
    gap_stop, budget_rate = stop_parameters(model, A, float(xs[-1]), policy)
    return (
        *model._kernel_args(), np.ascontiguousarray(A.directions), xs, projected_var_rates(model, A),
        bridge._code, gap_stop, budget_rate, int(policy.max_steps), int(policy.check_stride),
    )


def extend_horizon(ens: PathEnsemble, max_steps: int) -> PathEnsemble:
    """The ensemble that a run with a larger ``max_steps`` would have produced.

    Paths that stopped by ruin or by the slack rule follow the same course
    under any larger step budget, so only paths whose stop depended on
    ``max_steps`` are simulated again.  Hit counts equal those of a full
    rerun exactly; bridge sums agree up to summation order.
    """
    if max_steps < ens.policy.max_steps:
        raise ValueError("max_steps can only be increased")
    new_policy = HorizonPolicy(int(max_steps), ens.policy.slack, ens.policy.check_stride)
    paths = ens.horizon_paths.astype(np.int64)
    old = K.run_path_list(*_walk_args(ens.model, ens.gauge, ens.x_grid, ens.bridge_mode, ens.policy), ens.stream.key, paths)
    new = K.run_path_list(*_walk_args(ens.model, ens.gauge, ens.x_grid, ens.bridge_mode, new_policy), ens.stream.key, paths)
    return replace(
        ens,
        skeleton_hits=ens.skeleton_hits - old[0] + new[0],
        bridge_sum=ens.bridge_sum - old[1] + new[1],
        bridge_sumsq=ens.bridge_sumsq - old[2] + new[2],
        truncated=ens.truncated - old[3] + new[3],
        total_steps=ens.total_steps - old[4] + new[4],
        policy=new_policy,
        horizon_paths=paths[new[5]],
    )


def estimate_curve(
    model: RiskModel,
    A: GaugeSet,
    x_grid: Sequence[float],
    n_paths: int,
    policy: HorizonPolicy = HorizonPolicy(),
    bridge: Union[BridgeMode, str] = BridgeMode.SKELETON,
    seed: Union[int, Stream] = 0,
) -> list[EstimateWithCI]:
    """Ruin-probability estimates over ``x_grid`` from one shared path ensemble."""
    return run_ensemble(model, A, x_grid, n_paths, policy, bridge, seed).estimates()


def estimate_ruin(
    model: RiskModel,
    A: GaugeSet,
    x: float,
    n_paths: int,
    policy: HorizonPolicy = HorizonPolicy(),
    bridge: Union[BridgeMode, str] = BridgeMode.SKELETON,
    seed: Union[int, Stream] = 0,
) -> EstimateWithCI:
    return estimate_curve(model, A, [x], n_paths, policy, bridge, seed)[0]


def cramer_lundberg_psi(x, rate: float, beta: float, premium: float):
    """Exact ruin probability for Poisson arrivals and Exp(beta) claims."""
    if not premium * beta > rate:
        raise ValueError("net profit condition fails")
    x = np.asarray(x, dtype=float)
    return rate / (beta * premium) * np.exp(-(beta - rate / premium) * x)
