"""Asymptotic approximants of the ruin probability.

The central object is

    H(x) = int_0^inf P(X in x A + v c) dv,

the claim law integrated over drift-shifted copies of the ruin gauge.  For a
polyhedral gauge the set of ``v`` with ``X`` in ``x A + v c`` is the interval
``[0, max_k (p_k.X - x)^+ / (p_k.c))``, so ``H(x)`` is also the mean of that
interval length.  Both representations are used below: quadrature in ``v``
when the shifted tail has a closed form, the per-sample length otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Union

import numpy as np
from scipy import integrate

from .distributions import (
    ClaimModel,
    Degenerate,
    Exponential,
    IndependentMargins,
    InfiniteMeanError,
    Pareto,
    SpectralProduct,
    TailFunction,
    sample_claims,
)
from .geometry import GaugeSet
from .process import RiskModel, drift_c, drift_c_star
from .rng import Stream

__all__ = [
    "QuadratureSpec",
    "AsymptoticResult",
    "QuadratureError",
    "resolve_drift",
    "theta",
    "big_H",
    "shifted_integral",
    "integrated_tail",
    "univariate_H",
    "corollary_constant",
    "approx_ruin_mrv",
]

DriftVariant = Literal["c", "c_star"]


class QuadratureError(RuntimeError):
    """An improper integral did not settle within the subdivision budget."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for the improper integrals.

    Integrals to infinity are accumulated over geometrically growing
    segments; accumulation stops once the geometric extrapolation of the
    remaining increments falls below ``rel_tol`` times the running total.
    ``mc_paths`` and ``mc_seed`` are used only where no deterministic
    evaluation exists.
    """

    rel_tol: float = 1e-6
    abs_tol: float = 1e-12
    max_subdivisions: int = 400
    mc_paths: int = 10**6
    mc_seed: int = 0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 2 or self.mc_paths < 100:
            raise ValueError("max_subdivisions >= 2 and mc_paths >= 100 required")


@dataclass(frozen=True)
class AsymptoticResult:
    value: float
    error_bound: float
    backend: str

    def __post_init__(self):
        if not self.error_bound >= 0:
            raise ValueError("error_bound must be nonnegative")


# ---------------------------------------------------------------- integration helpers


def _quad(f, a, b, spec: QuadratureSpec, points=None):
    pts = None
    if points is not None:
        pts = sorted(p for p in points if a < p < b) or None
    val, err = integrate.quad(
        f, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol * 1e-2, limit=200, points=pts
    )
    return val, err


def _to_infinity(f: Callable[[float], float], a: float, spec: QuadratureSpec, points=(), scale=1.0):
    """``int_a^inf f`` for a nonnegative, eventually decreasing ``f``.

    Returns ``(value, error_bound)``.  Raises :class:`InfiniteMeanError` when
    the segment increments stop shrinking (a divergent tail integral) and
    :class:`QuadratureError` when the budget runs out first.
    """
    pts = sorted(p for p in points if p > a)
    last_kink = pts[-1] if pts else a
    hi = a + scale
    if hi <= 0:
        hi = 1.0
    lo = a
    total, err = 0.0, 0.0
    prev = None
    growth = 0
    for n in range(spec.max_subdivisions):
        inc, e = _quad(f, lo, hi, spec, pts)
        total += inc
        err += e
        # the first segment holds the bulk, so ratios are only meaningful between doubling
        # segments, and mass beyond the last kink has not been seen until we pass it
        if n >= 2 and prev > 0 and lo >= last_kink:
            r = inc / prev
            if r < 1.0:
                growth = 0
                resid = inc * r / (1.0 - r)
                if resid <= spec.rel_tol * total + spec.abs_tol:
                    # geometric extrapolation of the remaining segments; exact for power tails
                    return total + resid, err + resid
            else:
                growth += 1
                if growth >= 40:
                    raise InfiniteMeanError("tail integral does not converge")
        elif n >= 1 and inc == 0.0 and prev == 0.0 and lo >= last_kink:
            return total, err
        prev = inc
        lo, hi = hi, 2.0 * hi
    raise QuadratureError(f"improper integral not settled after {spec.max_subdivisions} segments")


def _closed_tail_integral(margin, t: float) -> float | None:
    """``E[(Y - t)^+]`` from a margin with an analytic integrated tail."""
    if isinstance(margin, (Pareto, Degenerate, Exponential)):
        return float(margin.integrated_tail(t))
    return None


# ---------------------------------------------------------------- drift


def resolve_drift(model: RiskModel, drift_variant: DriftVariant = "c") -> np.ndarray:
    if drift_variant == "c":
        c = drift_c(model)
        if np.any(c <= 0):
            raise ValueError(f"drift c must be positive, got {c.tolist()}")
        return c
    if drift_variant == "c_star":
        return drift_c_star(model)
    raise ValueError(f"unknown drift variant {drift_variant!r}")


def _as_drift(model, drift, drift_variant) -> tuple[ClaimModel, np.ndarray]:
    if isinstance(model, RiskModel):
        c = resolve_drift(model, drift_variant) if drift is None else np.asarray(drift, dtype=float)
        return model.claims, c
    if drift is None:
        raise ValueError("a bare claim model needs an explicit drift vector")
    return model, np.asarray(drift, dtype=float)


# ---------------------------------------------------------------- theta


def theta(model: Union[RiskModel, ClaimModel], drift=None, quad: QuadratureSpec = QuadratureSpec()) -> AsymptoticResult:
    """``E[min_j X_j / c_j]``, the integral of ``P(X_j > v c_j for all j)`` over ``v``."""
    claims, c = _as_drift(model, drift, "c")
    if c.shape != (claims.d,) or np.any(c <= 0):
        raise ValueError("drift must be a positive vector of matching dimension")
    mean = claims.mean_vector()
    if claims.d == 1:
        return AsymptoticResult(float(mean[0] / c[0]), 0.0, "Analytic")
    if isinstance(claims, IndependentMargins):
        ms = claims.margins
        f = lambda v: float(np.prod([m.tail(v * cj) for m, cj in zip(ms, c)]))
        kinks = [getattr(m, "lower", 0.0) / cj for m, cj in zip(ms, c)]
        val, err = _to_infinity(f, 0.0, quad, points=kinks, scale=max(kinks + [1.0]))
        return AsymptoticResult(val, err, "Quadrature+ClosedFormTail")
    X = sample_claims(claims, Stream(quad.mc_seed), quad.mc_paths)
    m = (X / c).min(axis=1)
    return AsymptoticResult(float(m.mean()), float(m.std(ddof=1) / math.sqrt(m.size)), f"MonteCarlo(n={m.size}, seed={quad.mc_seed})")


# ---------------------------------------------------------------- H


def shifted_integral(
    claims: ClaimModel, A: GaugeSet, x: float, drift, quad: QuadratureSpec = QuadratureSpec()
) -> AsymptoticResult:
    """``int_0^inf P(X in x A + v c) dv`` for an explicit drift vector ``c``."""
    if not x > 0:
        raise ValueError("x must be positive")
    c = np.asarray(drift, dtype=float)
    if c.shape != (claims.d,) or A.d != claims.d:
        raise ValueError("dimension mismatch between claims, gauge and drift")
    P = A.directions
    pc = P @ c
    if np.any(pc <= 0):
        raise ValueError("every gauge direction needs p.c > 0")
    if isinstance(claims, IndependentMargins):
        res = _independent_H(claims, A, x, c, quad)
        if res is not None:
            return res
    return _mc_H(claims, A, x, c, quad)


def _independent_H(claims, A, x, c, quad):
    ms = claims.margins
    P = A.directions
    if A.single_direction:
        p = P[0]
        pc = float(p @ c)
        nz = np.flatnonzero(p > 0)
        if nz.size == 1:
            j = nz[0]
            closed = _closed_tail_integral(ms[j], x / p[j]) is not None
            val = p[j] * float(ms[j].integrated_tail(x / p[j])) / pc
            return AsymptoticResult(val, 0.0 if closed else quad.rel_tol * val, "Analytic" if closed else "Quadrature+ClosedFormTail")
        if nz.size == 2:
            # E[(p1 X1 + p2 X2 - x)^+] conditioning on X2
            i, j = nz
            m1, m2 = ms[i], ms[j]
            g = lambda t: p[i] * m1.integrated_tail(t / p[i])
            if isinstance(m2, Degenerate):
                return AsymptoticResult(g(x - p[j] * m2.value) / pc, 0.0, "Analytic")
            f = lambda y: float(m2.density(y)) * g(x - p[j] * y)
            kinks = [x / p[j], (x - p[i] * getattr(m1, "lower", 0.0)) / p[j]]
            lo = getattr(m2, "lower", 0.0)
            # the density concentrates near its floor, so the ladder starts at unit width there
            val, err = _to_infinity(f, lo, quad, points=kinks, scale=max(lo, 1.0))
            return AsymptoticResult(val / pc, err / pc, "Quadrature+ClosedFormTail")
    if A.axis_aligned:
        a = A.axis_coefficients()
        keep = np.flatnonzero(a > 0)

        def f(v):
            tails = [float(ms[j].tail(x / a[j] + v * c[j])) for j in keep]
            if max(tails) >= 1.0:
                return 1.0
            return -math.expm1(sum(math.log1p(-t) for t in tails))

        # v at which each line's threshold leaves the support floor
        kinks = [(getattr(ms[j], "lower", 0.0) - x / a[j]) / c[j] for j in keep]
        scale = max([k for k in kinks if k > 0] + [x / max(a[j] * c[j] for j in keep)])
        val, err = _to_infinity(f, 0.0, quad, points=kinks, scale=scale)
        return AsymptoticResult(val, err, "Quadrature+ClosedFormTail")
    return None


def _mc_H(claims, A, x, c, quad):
    X = sample_claims(claims, Stream(quad.mc_seed), quad.mc_paths)
    P = A.directions
    pc = P @ c
    if isinstance(claims, SpectralProduct):
        # conditional on the direction the integrand is piecewise linear in the radius
        G = (X / X.sum(axis=1, keepdims=True)) @ P.T
        vals = _envelope_expectation(claims.radius, G / pc, np.broadcast_to(-x / pc, G.shape), np.zeros(G.shape[0]))
    elif isinstance(claims, IndependentMargins):
        vals = _conditional_excess(claims.margins, P, pc, X, x)
    else:
        vals = np.max(np.maximum(X @ P.T - x, 0.0) / pc, axis=1)
    n = vals.size
    return AsymptoticResult(
        float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n)), f"MonteCarlo(n={n}, seed={quad.mc_seed})"
    )


def _envelope_expectation(margin, s, r, m):
    """Per-row ``E[g(T) 1{T > m}]`` for ``T ~ margin`` and ``g(t) = max(0, max_l s_l t + r_l)``.

    ``g`` is convex and piecewise linear, so on each piece the integral is
    exact in terms of the tail and the integrated tail of ``margin``.
    """
    n = s.shape[0]
    S = np.concatenate([s, np.zeros((n, 1))], axis=1)
    R = np.concatenate([r, np.zeros((n, 1))], axis=1)
    L = S.shape[1]
    pts = [m]
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(L):
            for q in range(k + 1, L):
                t = (R[:, q] - R[:, k]) / (S[:, k] - S[:, q])
                pts.append(np.where(np.isfinite(t), np.maximum(t, m), m))
    T = np.sort(np.stack(pts, axis=1), axis=1)
    Fb = np.asarray(margin.tail(T), dtype=float)
    IT = np.asarray(margin.integrated_tail(T), dtype=float)
    rows = np.arange(n)
    total = np.zeros(n)
    for i in range(T.shape[1]):
        lo = T[:, i]
        last = i == T.shape[1] - 1
        mid = lo + 1.0 + np.abs(lo) if last else 0.5 * (lo + T[:, i + 1])
        k = np.argmax(S * mid[:, None] + R, axis=1)
        a, b = S[rows, k], R[rows, k]
        total += (a * lo + b) * Fb[:, i] + a * IT[:, i]
        if not last:
            hi = T[:, i + 1]
            total -= (a * hi + b) * Fb[:, i + 1] + a * IT[:, i + 1]
    return total


def _conditional_excess(margins, P, pc, X, x):
    """Per-row unbiased estimates of ``E[max_k (p_k.X - x)^+ / p_k.c]`` for independent margins.

    The expectation is split by which weighted coordinate ``w_j X_j`` is
    largest; on that piece ``X_j`` is integrated out exactly given the other
    coordinates, so a single large claim never has to be sampled.
    """
    Asl = P / pc[:, None]
    w = P.max(axis=0)
    active = [j for j in range(X.shape[1]) if w[j] > 0 and not isinstance(margins[j], Degenerate)]
    base = X @ Asl.T - x / pc
    if not active:
        return np.maximum(base.max(axis=1), 0.0)
    WX = X * w
    out = np.zeros(X.shape[0])
    for j in active:
        others = [i for i in active if i != j]
        m = WX[:, others].max(axis=1) / w[j] if others else np.full(X.shape[0], -np.inf)
        m = np.maximum(m, getattr(margins[j], "lower", 0.0) - 1.0)
        slopes = np.broadcast_to(Asl[:, j], base.shape)
        out += _envelope_expectation(margins[j], slopes, base - X[:, j : j + 1] * Asl[:, j], m)
    return out


def big_H(
    model: RiskModel,
    A: GaugeSet,
    x: float,
    drift_variant: DriftVariant = "c",
    quad: QuadratureSpec = QuadratureSpec(),
) -> AsymptoticResult:
    """``H(x)`` with the drift ``c`` (default) or ``c*`` of ``model``."""
    return shifted_integral(model.claims, A, x, resolve_drift(model, drift_variant), quad)


def integrated_tail(
    model: RiskModel,
    A: GaugeSet,
    x: float,
    drift_variant: DriftVariant = "c",
    quad: QuadratureSpec = QuadratureSpec(),
) -> AsymptoticResult:
    """``F_I(x A) = H(x) / Theta`` under the chosen drift."""
    c = resolve_drift(model, drift_variant)
    h = shifted_integral(model.claims, A, x, c, quad)
    t = theta(model.claims, c, quad)
    val = h.value / t.value
    err = val * (h.error_bound / h.value + t.error_bound / t.value) if h.value > 0 else h.error_bound / t.value
    backend = h.backend if h.backend == t.backend else f"{h.backend} / {t.backend}"
    return AsymptoticResult(val, err, backend)


def univariate_H(tail, c: float, x: float, quad: QuadratureSpec = QuadratureSpec()) -> AsymptoticResult:
    """``(1/c) int_x^inf tail(u) du`` for a one-dimensional tail.

    ``tail`` is a :class:`TailFunction`, a margin, or any callable.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    sf = tail.tail if hasattr(tail, "tail") and not isinstance(tail, TailFunction) else tail
    lower = float(getattr(tail, "lower", 0.0))
    f = lambda u: float(sf(u))
    val, err = _to_infinity(f, x, quad, points=[lower], scale=max(abs(x), lower, 1.0))
    return AsymptoticResult(val / c, err / c, "Quadrature+ClosedFormTail")


# ---------------------------------------------------------------- regular variation


def _common_alpha(claims) -> float:
    if not isinstance(claims, IndependentMargins) or not all(isinstance(m, Pareto) for m in claims.margins):
        raise ValueError("the limit-measure constant needs independent Pareto margins")
    alphas = {m.alpha for m in claims.margins}
    if len(alphas) != 1:
        raise ValueError(
            f"margins have different tail indices {sorted(alphas)}; the limit measure would ignore the lighter ones"
        )
    alpha = alphas.pop()
    if not alpha > 1:
        raise InfiniteMeanError(f"alpha={alpha} <= 1 gives an infinite mean")
    return alpha


def corollary_constant(
    model: Union[RiskModel, ClaimModel], A: GaugeSet, drift=None, quad: QuadratureSpec = QuadratureSpec()
) -> AsymptoticResult:
    """``int_0^inf mu(A + v c) dv`` for independent equal-index Pareto margins.

    The limit measure lives on the axes: ``mu({t e_j : t > s}) = w_j s^-alpha``
    with ``w_j = (sigma_j / sigma_1)^alpha``, the tail of the first margin
    being the reference.  Along axis ``j`` the shifted set is entered beyond
    ``t_j(v) = min_k (1 + v p_k.c) / p_kj`` over directions with ``p_kj > 0``.
    """
    claims, c = _as_drift(model, drift, "c")
    alpha = _common_alpha(claims)
    if np.any(c <= 0):
        raise ValueError("drift must be positive")
    P = A.directions
    pc = P @ c
    s1 = claims.margins[0].sigma
    total, err, analytic = 0.0, 0.0, True
    for j, m in enumerate(claims.margins):
        w = (m.sigma / s1) ** alpha
        ks = np.flatnonzero(P[:, j] > 0)
        if ks.size == 0:
            continue
        a = 1.0 / P[ks, j]
        b = pc[ks] / P[ks, j]
        # one candidate always attains the min when it is smallest in both intercept and slope
        best = np.flatnonzero((a <= a.min()) & (b <= b.min()))
        if best.size:
            k = best[0]
            total += w * a[k] ** (1 - alpha) / (b[k] * (alpha - 1))
            continue
        analytic = False
        cross = [(a[q] - a[r]) / (b[r] - b[q]) for q in range(a.size) for r in range(a.size) if b[r] != b[q]]
        f = lambda v: float(np.min(a + v * b)) ** -alpha
        val, e = _to_infinity(f, 0.0, quad, points=cross, scale=max([1.0] + [t for t in cross if t > 0]))
        total += w * val
        err += w * e
    if total == 0.0:
        raise ValueError("the gauge does not see any axis; the limit measure of A is zero")
    return AsymptoticResult(total, err, "Analytic" if analytic else "Quadrature")


def approx_ruin_mrv(
    model: RiskModel, A: GaugeSet, x: float, drift_variant: DriftVariant = "c", quad: QuadratureSpec = QuadratureSpec()
) -> AsymptoticResult:
    """``x * V(x) * corollary_constant`` with ``V`` the first margin's tail."""
    if not x > 0:
        raise ValueError("x must be positive")
    k = corollary_constant(model.claims, A, resolve_drift(model, drift_variant), quad)
    scale = x * float(model.claims.margins[0].tail(x))
    return AsymptoticResult(scale * k.value, scale * k.error_bound, k.backend)
