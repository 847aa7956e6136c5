"""Ruin sets, allocations and the polyhedral gauge sets built from them.

A ruin set ``L`` together with an allocation ``b`` yields the increasing set
``A = b - L``.  Every set handled here is polyhedral::

    A = {z : max_k p_k . z > 1}

with nonnegative, nonzero direction vectors ``p_k``.  The scalar gauge
``max_k p_k . z`` turns the event ``z in xA`` into the threshold test
``gauge > x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = [
    "RuinSetKind",
    "RuinSetSpec",
    "Allocation",
    "GaugeSet",
    "build_gauge",
    "gauge_project",
    "contains",
]

_SUM_TOL = 1e-12


class RuinSetKind(str, Enum):
    SUM_NEGATIVE = "L1"
    ANY_NEGATIVE = "L2"
    CUSTOM = "custom"


def _as_directions(directions, d: int | None = None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(directions, dtype=float))
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("directions must be a non-empty list of vectors")
    if d is not None and arr.shape[1] != d:
        raise ValueError(f"direction dimension {arr.shape[1]} does not match d={d}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("direction vectors must be finite")
    if np.any(arr < 0):
        raise ValueError("direction vectors must be nonnegative")
    if np.any(np.all(arr == 0, axis=1)):
        raise ValueError("direction vectors must be nonzero")
    return arr


@dataclass(frozen=True)
class RuinSetSpec:
    """Which ruin set ``L`` to use.

    ``L1`` is total deficit (sum of the lines negative), ``L2`` is any line in
    deficit.  ``custom`` takes explicit direction vectors; the complement of
    the resulting ``A`` is the polyhedron ``{z : p_k . z <= 1 for all k}``.
    """

    kind: RuinSetKind
    d: int
    directions: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", RuinSetKind(self.kind))
        if int(self.d) < 1:
            raise ValueError("dimension d must be >= 1")
        if self.kind is RuinSetKind.CUSTOM:
            if self.directions is None:
                raise ValueError("custom ruin set needs direction vectors")
            arr = _as_directions(self.directions, self.d)
            object.__setattr__(self, "directions", tuple(tuple(map(float, r)) for r in arr))

    @classmethod
    def sum_negative(cls, d: int) -> "RuinSetSpec":
        return cls(RuinSetKind.SUM_NEGATIVE, d)

    @classmethod
    def any_negative(cls, d: int) -> "RuinSetSpec":
        return cls(RuinSetKind.ANY_NEGATIVE, d)

    @classmethod
    def custom(cls, directions: Sequence[Sequence[float]]) -> "RuinSetSpec":
        arr = _as_directions(directions)
        return cls(RuinSetKind.CUSTOM, arr.shape[1], tuple(map(tuple, arr)))


@dataclass(frozen=True)
class Allocation:
    """Split of the initial capital over the ``d`` lines of business."""

    b: tuple[float, ...]

    def __post_init__(self):
        arr = np.asarray(self.b, dtype=float).ravel()
        if arr.size == 0:
            raise ValueError("allocation must have at least one weight")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValueError("allocation weights must be positive and finite")
        if abs(arr.sum() - 1.0) > _SUM_TOL:
            raise ValueError(f"allocation must sum to 1, got {arr.sum()!r}")
        object.__setattr__(self, "b", tuple(float(v) for v in arr))

    @property
    def d(self) -> int:
        return len(self.b)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.b)

    @classmethod
    def uniform(cls, d: int) -> "Allocation":
        # 1/d does not always sum to exactly 1 in floating point; within tolerance.
        return cls(tuple([1.0 / d] * d))


@dataclass(frozen=True, eq=False)
class GaugeSet:
    """Polyhedral set ``A = {z : max_k p_k . z > 1}``; immutable.

    ``directions`` is a read-only ``(K, d)`` array.  ``ruin_set`` and
    ``allocation`` record where the set came from.
    """

    directions: np.ndarray
    ruin_set: RuinSetSpec
    allocation: Allocation
    _axis: tuple = field(init=False, repr=False)

    def __post_init__(self):
        P = _as_directions(self.directions, self.allocation.d).copy()
        P.setflags(write=False)
        object.__setattr__(self, "directions", P)
        # (axis index, coefficient) per direction when every direction has a
        # single nonzero entry; enables closed-form tails for independent margins.
        nz = P > 0
        if np.all(nz.sum(axis=1) == 1):
            axis = tuple((int(np.argmax(row)), float(row.max())) for row in P)
        else:
            axis = ()
        object.__setattr__(self, "_axis", axis)

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    @property
    def n_directions(self) -> int:
        return self.directions.shape[0]

    @property
    def single_direction(self) -> bool:
        return self.n_directions == 1

    @property
    def axis_aligned(self) -> bool:
        return bool(self._axis)

    def axis_coefficients(self) -> np.ndarray:
        """Per-coordinate weight ``a_j`` with ``gauge(z) = max_j a_j z_j``.

        Only defined for axis-aligned gauges; coordinates not touched by any
        direction get weight 0.
        """
        if not self._axis:
            raise ValueError("gauge is not axis-aligned")
        a = np.zeros(self.d)
        for j, coef in self._axis:
            a[j] = max(a[j], coef)
        return a

    def __eq__(self, other):
        if not isinstance(other, GaugeSet):
            return NotImplemented
        return (
            np.array_equal(self.directions, other.directions)
            and self.ruin_set == other.ruin_set
            and self.allocation == other.allocation
        )

    def __hash__(self):
        return hash((self.directions.tobytes(), self.ruin_set, self.allocation))


def build_gauge(L: RuinSetSpec, b: Allocation) -> GaugeSet:
    """Build ``A = b - L`` as a gauge set with threshold normalized to 1."""
    if L.d != b.d:
        raise ValueError(f"ruin set has d={L.d} but allocation has d={b.d}")
    bv = b.vector
    if L.kind is RuinSetKind.SUM_NEGATIVE:
        P = np.ones((1, b.d))
    elif L.kind is RuinSetKind.ANY_NEGATIVE:
        P = np.diag(1.0 / bv)
    else:
        raw = _as_directions(L.directions, b.d)
        P = raw / (raw @ bv)[:, None]
    return GaugeSet(P, L, b)


def _check_dim(A: GaugeSet, z: np.ndarray) -> None:
    if z.shape[-1] != A.d:
        raise ValueError(f"vector dimension {z.shape[-1]} does not match gauge d={A.d}")


def gauge_project(A: GaugeSet, z) -> float | np.ndarray:
    """``max_k p_k . z``; works on a single vector or a stack of shape ``(..., d)``.

    Negative values are legitimate for signed random-walk states.
    """
    z = np.asarray(z, dtype=float)
    _check_dim(A, z)
    out = (z @ A.directions.T).max(axis=-1)
    return float(out) if out.ndim == 0 else out


def contains(A: GaugeSet, z, x: float, shift=None) -> bool | np.ndarray:
    """Is ``z`` in ``x*A + shift``?  Strict at the boundary since ``A`` is open."""
    if not x > 0:
        raise ValueError("x must be positive")
    z = np.asarray(z, dtype=float)
    if shift is not None:
        z = z - np.asarray(shift, dtype=float)
    out = gauge_project(A, z) > x
    return bool(out) if np.ndim(out) == 0 else out
