"""Finite-grid diagnostics for heavy-tail class membership.

Limits cannot be checked numerically, so every check evaluates a ratio on a
grid of ``x`` and returns a :class:`RatioReport` whose verdict follows fixed
rules:

* a ratio with a numeric target is ``CONVERGING`` when its last three values
  lie within ``target +- tol`` and their distances to the target do not
  increase (beyond the reported numerical error);
* a ratio that should stay bounded is ``BOUNDED`` when its maximum over the
  upper half of the grid is at most the bound and it does not grow steadily
  across the grid;
* grids that end below ``min_x`` give ``INCONCLUSIVE``;
* anything else is ``VIOLATED``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence, Union

import numpy as np
from scipy import signal, special

from .asymptotics import QuadratureSpec, resolve_drift, shifted_integral, theta
from .distributions import (
    ClaimModel,
    Degenerate,
    IndependentMargins,
    OscillatingPareto,
    Pareto,
    TailFunction,
    gauge_tail_function,
    sample_claims,
)
from .geometry import GaugeSet, gauge_project
from .process import RiskModel
from .rng import Stream

__all__ = [
    "Verdict",
    "RatioReport",
    "FFTConvolution",
    "MCRatio",
    "CoverageError",
    "lognormal_tail",
    "default_grid",
    "ratio_L",
    "ratio_D",
    "ratio_S",
    "lemma_ratio_check",
    "proposition41_suite",
    "suite_passed",
]

GROWTH_FACTOR = 10.0
# absolute round-off level of FFT convolution of probability vectors
FFT_FLOOR = 1e-12


class Verdict(str, Enum):
    CONVERGING = "Converging"
    BOUNDED = "Bounded"
    INCONCLUSIVE = "Inconclusive"
    VIOLATED = "Violated"


class CoverageError(ValueError):
    """The grid runs past what the tail evaluator or backend can resolve."""


@dataclass(frozen=True)
class RatioReport:
    x_grid: np.ndarray
    numerator: np.ndarray
    denominator: np.ndarray
    ratio: np.ndarray
    target: Union[float, str]
    verdict: Verdict
    tol: float
    ratio_error: np.ndarray = None
    method: dict = field(default_factory=dict)
    vacuous: bool = False

    @property
    def passed(self) -> bool:
        return self.verdict in (Verdict.CONVERGING, Verdict.BOUNDED)

    def rows(self):
        """``(x, numerator, denominator, ratio, target, verdict)`` per grid point."""
        for i, x in enumerate(self.x_grid):
            yield x, self.numerator[i], self.denominator[i], self.ratio[i], self.target, self.verdict.value


def default_grid(lo: float = 1e2, hi: float = 1e4, per_decade: int = 12) -> np.ndarray:
    """Geometric grid with ``per_decade`` points per decade, end points included."""
    n = int(round(per_decade * math.log10(hi / lo))) + 1
    return np.geomspace(lo, hi, n)


def lognormal_tail(m: float = 0.0, s: float = 1.0) -> TailFunction:
    """Tail of ``exp(m + s Z)``: long tailed but not dominatedly varying."""
    if not s > 0:
        raise ValueError("s must be positive")

    def z(x):
        with np.errstate(divide="ignore"):
            return (np.log(np.maximum(np.asarray(x, dtype=float), 0.0)) - m) / s

    def sf(x):
        out = np.asarray(special.ndtr(-z(x)))
        return out if out.ndim else float(out)

    def log_sf(x):
        out = np.asarray(special.log_ndtr(-z(x)))
        return out if out.ndim else float(out)

    return TailFunction(sf, 0.0, f"LogNormal({m}, {s})", log_sf)


def _as_tail(tail) -> tuple[Callable, float, Callable | None]:
    if isinstance(tail, TailFunction):
        return tail.sf, tail.lower, tail.log_sf
    if hasattr(tail, "tail"):
        return tail.tail, float(getattr(tail, "lower", 0.0)), getattr(tail, "log_tail", None)
    if callable(tail):
        return tail, 0.0, None
    raise TypeError("tail must be a TailFunction, a margin, or a callable")


def _grid(x_grid) -> np.ndarray:
    xs = np.asarray(x_grid, dtype=float)
    if xs.ndim != 1 or xs.size < 3:
        raise ValueError("x_grid needs at least three points")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("x_grid must be strictly increasing")
    return xs


def _eval(sf, xs) -> np.ndarray:
    vals = np.array([float(sf(x)) for x in xs])
    if np.any(vals <= 0):
        bad = xs[np.argmax(vals <= 0)]
        raise CoverageError(f"tail evaluates to 0 at x={bad:g}; the grid exceeds the numeric support")
    return vals


def _tail_ratio(tail, num_x, den_x):
    """Tails at both grids and their ratio, in log space when available."""
    sf, _, log_sf = _as_tail(tail)
    if log_sf is not None:
        ln = np.asarray(log_sf(num_x), dtype=float)
        ld = np.asarray(log_sf(den_x), dtype=float)
        if not (np.all(np.isfinite(ln)) and np.all(np.isfinite(ld))):
            raise CoverageError("log tail is not finite on the grid")
        return np.exp(ln), np.exp(ld), np.exp(ln - ld)
    num, den = _eval(sf, num_x), _eval(sf, den_x)
    return num, den, num / den


def _converging(xs, ratio, target, tol, min_x, err=None) -> Verdict:
    if xs[-1] < min_x:
        return Verdict.INCONCLUSIVE
    err = np.zeros_like(ratio) if err is None else err
    dev = np.abs(ratio[-3:] - target)
    e = err[-3:]
    if np.any(dev > tol + e):
        return Verdict.VIOLATED
    if np.any(dev[1:] > dev[:-1] + e[1:] + e[:-1]):
        return Verdict.VIOLATED
    return Verdict.CONVERGING


def _bounded(xs, ratio, bound, min_x) -> Verdict:
    if xs[-1] < min_x:
        return Verdict.INCONCLUSIVE
    upper = ratio[xs.size // 2:]
    if upper.max() > bound:
        return Verdict.VIOLATED
    if np.all(np.diff(ratio) > 0) and ratio[-1] > GROWTH_FACTOR * ratio[0]:
        return Verdict.VIOLATED
    return Verdict.BOUNDED


def ratio_L(tail, y: float, x_grid: Sequence[float], tol: float = 0.02, min_x: float = 100.0) -> RatioReport:
    """``tail(x - y) / tail(x)``; target 1."""
    if y < 0:
        raise ValueError("y must be nonnegative")
    _, lower, _ = _as_tail(tail)
    xs = _grid(x_grid)
    if xs[0] - y < lower:
        raise ValueError("x_grid must start above the support floor plus y")
    num, den, ratio = _tail_ratio(tail, xs - y, xs)
    verdict = _converging(xs, ratio, 1.0, tol, min_x)
    return RatioReport(xs, num, den, ratio, 1.0, verdict, tol, np.zeros_like(ratio), {"check": "L", "y": y})


def ratio_D(
    tail,
    b: float,
    x_grid: Sequence[float],
    alpha_hint: float | None = None,
    bound: float | None = None,
    min_x: float = 100.0,
) -> RatioReport:
    """``tail(b x) / tail(x)``; should stay bounded."""
    if not 0 < b < 1:
        raise ValueError("b must lie in (0, 1)")
    xs = _grid(x_grid)
    if bound is None:
        bound = 10.0 * b ** -alpha_hint if alpha_hint is not None else 1e3
    num, den, ratio = _tail_ratio(tail, b * xs, xs)
    verdict = _bounded(xs, ratio, bound, min_x)
    return RatioReport(xs, num, den, ratio, "bounded", verdict, bound, np.zeros_like(ratio), {"check": "D", "b": b, "bound": bound})


# ---------------------------------------------------------------- two-fold convolution


@dataclass(frozen=True)
class FFTConvolution:
    """Cell-mass discretization on ``[0, cutoff]``; ``cutoff`` defaults to the grid top."""

    step: float = 0.02
    cutoff: float | None = None


@dataclass(frozen=True)
class MCRatio:
    n: int = 2 * 10**6
    seed: int = 0


def _cell_masses(sf, scale: float, h: float, ncell: int) -> tuple[np.ndarray, float]:
    """Masses of ``scale * V`` on cells ``((k-1)h, kh]``, ``k = 0..ncell``, and the overflow."""
    edges = np.arange(-1, ncell + 1) * h
    t = np.asarray(sf(np.maximum(edges, 0.0) / scale), dtype=float)
    t[0] = 1.0
    return t[:-1] - t[1:], float(t[-1])


def _gauge_terms(model: ClaimModel, A: GaugeSet):
    """Independent nonnegative terms whose sum is the gauge projection.

    Returns a list of ``(survival function, scale)`` pairs.
    """
    if model.d == 1:
        return [(model.margins[0].tail if isinstance(model, IndependentMargins) else (lambda x: model.marginal_tail(0, x)), float(A.directions.max()))]
    if isinstance(model, IndependentMargins) and A.single_direction:
        p = A.directions[0]
        return [(model.margins[j].tail, float(p[j])) for j in np.flatnonzero(p > 0)]
    if isinstance(model, IndependentMargins) and A.axis_aligned:
        sf = gauge_tail_function(model, A)
        return [(sf, 1.0)]
    raise CoverageError("FFT backend needs independent margins with a single-direction or axis-aligned gauge")


def _fft_two_fold(model, A, xs, backend: FFTConvolution):
    h = float(backend.step)
    cutoff = float(backend.cutoff if backend.cutoff is not None else xs[-1])
    if cutoff < xs[-1]:
        raise CoverageError("FFT cutoff must reach the top of the grid")
    terms = _gauge_terms(model, A)
    n_terms = 2 * len(terms)
    ncell = int(math.ceil(cutoff / h))
    if ncell > 5 * 10**7:
        raise CoverageError("FFT grid too large; increase step")
    dens, log_keep = None, 0.0
    for sf, scale in terms + terms:
        m, over = _cell_masses(sf, scale, h, ncell)
        log_keep += math.log1p(-over) if over < 1.0 else -math.inf
        dens = m if dens is None else np.maximum(signal.fftconvolve(dens, m), 0.0)
    # some term beyond the cutoff puts the sum above every grid point
    overflow = -math.expm1(log_keep)
    floor = FFT_FLOOR * max(1.0, math.sqrt(dens.size) / 100.0)
    tail = np.concatenate([np.cumsum(dens[::-1])[::-1], [0.0]])
    s = np.arange(dens.size)
    lo = np.empty(xs.size)
    hi = np.empty(xs.size)
    for i, x in enumerate(xs):
        # a sum in cell s lies in ((s - n_terms) h, s h]
        first_sure = int(np.count_nonzero((s - n_terms) * h < x))
        first_maybe = int(np.count_nonzero(s * h <= x))
        lo[i] = tail[first_sure] + overflow
        hi[i] = tail[first_maybe] + overflow
        if lo[i] < floor:
            raise CoverageError(f"P(Y1 + Y2 > {x:g}) is below the FFT round-off floor")
    return 0.5 * (lo + hi), 0.5 * (hi - lo)


def ratio_S(
    model: ClaimModel,
    A: GaugeSet,
    x_grid: Sequence[float],
    backend: Union[FFTConvolution, MCRatio] = FFTConvolution(),
    tol: float = 0.1,
    min_x: float = 100.0,
) -> RatioReport:
    """``P(Y1 + Y2 > x) / P(Y > x)`` for ``Y`` the gauge projection; target 2."""
    xs = _grid(x_grid)
    if isinstance(model, IndependentMargins) and any(isinstance(m, Degenerate) for m in model.margins) and all(
        isinstance(m, Degenerate) for m in model.margins
    ):
        raise CoverageError("degenerate gauge projection has no tail to resolve")
    if isinstance(backend, FFTConvolution):
        num, num_err = _fft_two_fold(model, A, xs, backend)
        sf = gauge_tail_function(model, A)
        den = _eval(sf, xs)
        ratio = num / den
        err = num_err / den
        if np.any(err > tol / 2):
            raise CoverageError(f"FFT discretization bound {err.max():.3g} exceeds tol/2; decrease step")
        method = {"check": "S", "backend": "FFTConvolution", "step": backend.step}
    elif isinstance(backend, MCRatio):
        X = sample_claims(model, Stream(backend.seed), 2 * backend.n)
        Y = gauge_project(A, X)
        Y1, Y2 = Y[: backend.n], Y[backend.n:]
        tot = Y1 + Y2
        num = np.array([(tot > x).mean() for x in xs])
        hits = np.array([(Y > x).sum() for x in xs])
        if np.any(hits < 100):
            raise CoverageError(f"only {hits.min()} tail hits at the top of the grid; need >= 100")
        den = hits / Y.size
        ratio = num / den
        # delta method, treating numerator and denominator as independent
        err = ratio * np.sqrt((1 - num) / (num * backend.n) + (1 - den) / (den * Y.size))
        method = {"check": "S", "backend": "MCRatio", "n": backend.n, "seed": backend.seed}
    else:
        raise TypeError(f"unknown backend {backend!r}")
    verdict = _converging(xs, ratio, 2.0, tol, min_x, err)
    return RatioReport(xs, num, den, ratio, 2.0, verdict, tol, err, method)


# ---------------------------------------------------------------- lemma and suite


def lemma_ratio_check(
    model: RiskModel,
    A: GaugeSet,
    x_grid: Sequence[float],
    quad: QuadratureSpec = QuadratureSpec(),
    tol: float = 0.05,
    min_x: float = 100.0,
) -> RatioReport:
    """``H(x)`` computed with drift ``c*`` over ``H(x)`` with drift ``c``; target 1."""
    xs = _grid(x_grid)
    c = resolve_drift(model, "c")
    c_star = resolve_drift(model, "c_star")
    vacuous = bool(np.array_equal(c, c_star))
    num, den, err = [], [], []
    for x in xs:
        hs = shifted_integral(model.claims, A, x, c_star, quad)
        hc = shifted_integral(model.claims, A, x, c, quad)
        num.append(hs.value)
        den.append(hc.value)
        err.append(hs.value / hc.value * (hs.error_bound / hs.value + hc.error_bound / hc.value))
    num, den, err = np.array(num), np.array(den), np.array(err)
    ratio = num / den
    verdict = _converging(xs, ratio, 1.0, tol, min_x, err)
    method = {"check": "lemma", "c": c.tolist(), "c_star": c_star.tolist(), "backend": hc.backend}
    return RatioReport(xs, num, den, ratio, 1.0, verdict, tol, err, method, vacuous)


def _alpha_hint(claims: ClaimModel) -> float | None:
    if isinstance(claims, IndependentMargins) and all(isinstance(m, (Pareto, OscillatingPareto)) for m in claims.margins):
        return min(m.alpha for m in claims.margins)
    return None


def proposition41_suite(
    model: RiskModel,
    A_list: Sequence[GaugeSet],
    x_grid: Sequence[float],
    y: float = 1.0,
    b: float = 0.5,
    quad: QuadratureSpec = QuadratureSpec(),
) -> list[RatioReport]:
    """L and D checks of the integrated tail ``x -> F_I(x A)`` for every gauge.

    The hypotheses are checked first on the gauge tails ``F_A`` themselves;
    a failure there raises ``ValueError``.  Returned reports are tagged with
    ``method['object']`` (``'F_A'`` or ``'F_I'``) and ``method['gauge']``.
    """
    xs = _grid(x_grid)
    claims = model.claims
    claims.mean_vector()  # raises on an infinite mean
    hint = _alpha_hint(claims)
    c = resolve_drift(model, "c")
    t = theta(claims, c, quad).value
    reports = []
    for g, A in enumerate(A_list):
        fa = gauge_tail_function(claims, A)
        pre = [ratio_L(fa, y, xs), ratio_D(fa, b, xs, alpha_hint=hint)]
        for r in pre:
            r.method.update(object="F_A", gauge=g)
            if not r.passed:
                raise ValueError(f"gauge {g}: F_A fails the {r.method['check']} hypothesis ({r.verdict.value})")
        fi = TailFunction(
            np.vectorize(lambda x, A=A: shifted_integral(claims, A, x, c, quad).value / t, otypes=[float]),
            0.0,
            "F_I",
        )
        post = [ratio_L(fi, y, xs), ratio_D(fi, b, xs, alpha_hint=None if hint is None else hint - 1.0)]
        for r in post:
            r.method.update(object="F_I", gauge=g)
        reports.extend(pre + post)
    return reports


def suite_passed(reports: Sequence[RatioReport]) -> bool:
    return all(r.passed for r in reports)
