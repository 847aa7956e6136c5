"""Claim-vector laws, their tails, and gauge-projected tails.

Three dependence structures are offered: independent margins, a common shock
added to every line, and a spectral product ``R * Theta`` with ``Theta``
Dirichlet on the unit simplex.  All claims are nonnegative.

The oscillating Pareto margin has tail
``min(1, (x/sigma)^-alpha * exp(sin(log(x/sigma))))``; it is dominatedly
varying and long tailed but not regularly varying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate, special, stats

from . import _kernels as K
from .geometry import GaugeSet, gauge_project
from .rng import Stream, as_stream

__all__ = [
    "InfiniteMeanError",
    "ClosedFormUnavailable",
    "Pareto",
    "OscillatingPareto",
    "Exponential",
    "Degenerate",
    "Margin",
    "TailFunction",
    "ClaimModel",
    "IndependentMargins",
    "CommonShock",
    "SpectralProduct",
    "ClosedForm",
    "Quadrature",
    "MonteCarlo",
    "GridConvolution",
    "TailEstimate",
    "sample_claims",
    "marginal_tail",
    "gauge_tail",
    "gauge_tail_function",
    "spectral_W",
    "mean_vector",
]


class InfiniteMeanError(ValueError):
    """A claim margin has no finite mean."""


class ClosedFormUnavailable(ValueError):
    """The requested backend does not cover this model/gauge pair."""


_QUAD = dict(epsabs=0.0, epsrel=1e-11, limit=500)


def _tail_integral_log(alpha: float, s0: float) -> float:
    # int_{s0}^inf exp(-(alpha-1)s + sin s) ds; shifting s by one period of
    # sin multiplies the integrand by exp(-2 pi k), so one period suffices
    k = alpha - 1.0
    if k <= 0:
        return math.inf
    period = 2 * math.pi
    f = lambda s: math.exp(-k * (s - s0) + math.sin(s))
    piece, _ = integrate.quad(f, s0, s0 + period, epsabs=0.0, epsrel=1e-13, limit=200)
    return math.exp(-k * s0) * piece / -math.expm1(-k * period)


# ---------------------------------------------------------------- margins


@dataclass(frozen=True)
class Pareto:
    alpha: float
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.sigma > 0):
            raise ValueError("Pareto needs alpha > 0 and sigma > 0")

    @property
    def lower(self) -> float:
        return self.sigma

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(x >= self.sigma, (np.maximum(x, self.sigma) / self.sigma) ** -self.alpha, 1.0)
        return out if out.ndim else float(out)

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        out = -self.alpha * np.log(np.maximum(x, self.sigma) / self.sigma)
        return out if out.ndim else float(out)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, self.sigma)
        out = np.where(x >= self.sigma, self.alpha / self.sigma * (xs / self.sigma) ** (-self.alpha - 1), 0.0)
        return out if out.ndim else float(out)

    def mean(self) -> float:
        if self.alpha <= 1:
            raise InfiniteMeanError(f"Pareto(alpha={self.alpha}) has infinite mean")
        return self.alpha * self.sigma / (self.alpha - 1)

    def integrated_tail(self, t: float) -> float:
        """``int_t^inf P(X > u) du``."""
        a, s = self.alpha, self.sigma
        if a <= 1:
            raise InfiniteMeanError(f"Pareto(alpha={a}) has infinite mean")
        t = np.asarray(t, dtype=float)
        ts = np.maximum(t, s)
        out = np.where(t >= s, s * (ts / s) ** (1 - a) / (a - 1), (s - t) + s / (a - 1))
        return out if out.ndim else float(out)

    def isf(self, u):
        return self.sigma * np.asarray(u, dtype=float) ** (-1.0 / self.alpha)

    def _code(self):
        return K.PARETO, self.alpha, self.sigma


@dataclass(frozen=True)
class OscillatingPareto:
    alpha: float
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.sigma > 0):
            raise ValueError("OscillatingPareto needs alpha > 0 and sigma > 0")
        t = np.linspace(0.0, 60.0, 20001)
        logtail = -self.alpha * t + np.sin(t)
        if np.any(np.diff(logtail) > 0):
            raise ValueError(
                f"OscillatingPareto(alpha={self.alpha}) tail is not monotone; need alpha >= 1"
            )

    @property
    def lower(self) -> float:
        return self.sigma

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        t = np.log(np.maximum(x, self.sigma) / self.sigma)
        out = np.where(x > self.sigma, np.minimum(1.0, np.exp(-self.alpha * t + np.sin(t))), 1.0)
        return out if out.ndim else float(out)

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        t = np.log(np.maximum(x, self.sigma) / self.sigma)
        out = np.minimum(0.0, -self.alpha * t + np.sin(t))
        return out if out.ndim else float(out)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, self.sigma)
        t = np.log(xs / self.sigma)
        val = np.exp(-self.alpha * t + np.sin(t)) * (self.alpha - np.cos(t)) / xs
        out = np.where(x >= self.sigma, val, 0.0)
        return out if out.ndim else float(out)

    def mean(self) -> float:
        if self.alpha <= 1:
            raise InfiniteMeanError(f"OscillatingPareto(alpha={self.alpha}) has infinite mean")
        return self.sigma * (1.0 + _tail_integral_log(self.alpha, 0.0))

    def integrated_tail(self, t):
        if self.alpha <= 1:
            raise InfiniteMeanError(f"OscillatingPareto(alpha={self.alpha}) has infinite mean")
        s = self.sigma

        def one(tv):
            if tv >= s:
                return s * _tail_integral_log(self.alpha, math.log(tv / s))
            return (s - tv) + s * _tail_integral_log(self.alpha, 0.0)

        out = np.vectorize(one, otypes=[float])(np.asarray(t, dtype=float))
        return out if out.ndim else float(out)

    def isf(self, u):
        u = np.asarray(u, dtype=float)
        return np.vectorize(lambda v: K.osc_isf(self.alpha, self.sigma, v))(u)

    def _code(self):
        return K.OSC_PARETO, self.alpha, self.sigma


@dataclass(frozen=True)
class Exponential:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("Exponential needs beta > 0")

    lower = 0.0

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.exp(-self.beta * np.maximum(x, 0.0))
        return out if out.ndim else float(out)

    def log_tail(self, x):
        out = -self.beta * np.maximum(np.asarray(x, dtype=float), 0.0)
        return out if out.ndim else float(out)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, self.beta * np.exp(-self.beta * np.maximum(x, 0.0)), 0.0)
        return out if out.ndim else float(out)

    def mean(self) -> float:
        return 1.0 / self.beta

    def integrated_tail(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t >= 0, np.exp(-self.beta * np.maximum(t, 0.0)) / self.beta, 1.0 / self.beta - t)
        return out if out.ndim else float(out)

    def isf(self, u):
        return -np.log(np.asarray(u, dtype=float)) / self.beta

    def _code(self):
        return K.EXPONENTIAL, self.beta, 0.0


@dataclass(frozen=True)
class Degenerate:
    """Point mass at ``value``; ``value=0`` switches a component off."""

    value: float = 0.0

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise ValueError("Degenerate value must be finite and nonnegative")

    @property
    def lower(self) -> float:
        return self.value

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x < self.value, 1.0, 0.0)
        return out if out.ndim else float(out)

    def density(self, x):
        raise ValueError("Degenerate margin has no density")

    def mean(self) -> float:
        return self.value

    def integrated_tail(self, t):
        out = np.maximum(self.value - np.asarray(t, dtype=float), 0.0)
        return out if out.ndim else float(out)

    def isf(self, u):
        return np.full(np.shape(u), self.value)

    def _code(self):
        return K.DEGENERATE, self.value, 0.0


Margin = Union[Pareto, OscillatingPareto, Exponential, Degenerate]


@dataclass(frozen=True)
class TailFunction:
    """Survival-function evaluator ``x -> P(Y > x)`` with its support lower bound."""

    sf: Callable
    lower: float = 0.0
    name: str = ""
    log_sf: Callable | None = None

    def __call__(self, x):
        return self.sf(x)


# ---------------------------------------------------------------- claim models


class ClaimModel:
    """Base class; subclasses are frozen dataclasses."""

    d: int

    def mean_vector(self) -> np.ndarray:
        raise NotImplementedError

    def marginal_tail(self, j: int, x):
        raise NotImplementedError

    def _encode(self):
        raise NotImplementedError

    def _margin_arrays(self, margins, extra):
        d = self.d
        kinds = np.zeros(d + 1, dtype=np.int64)
        pars = np.zeros((d + 1, 2))
        for j, m in enumerate(list(margins) + [extra]):
            k, a, s = m._code()
            kinds[j], pars[j] = k, (a, s)
        return kinds, pars

    def _check_index(self, j: int) -> None:
        if not 0 <= j < self.d:
            raise IndexError(f"margin index {j} out of range for d={self.d}")


def _margins_tuple(margins) -> tuple:
    ms = tuple(margins)
    if not ms:
        raise ValueError("need at least one margin")
    if len(ms) > K.MAX_DIM:
        raise ValueError(f"dimension above {K.MAX_DIM} is not supported")
    return ms


@dataclass(frozen=True)
class IndependentMargins(ClaimModel):
    margins: tuple

    def __post_init__(self):
        object.__setattr__(self, "margins", _margins_tuple(self.margins))

    @property
    def d(self) -> int:
        return len(self.margins)

    def mean_vector(self) -> np.ndarray:
        return np.array([m.mean() for m in self.margins])

    def marginal_tail(self, j: int, x):
        self._check_index(j)
        return self.margins[j].tail(x)

    def _encode(self):
        kinds, pars = self._margin_arrays(self.margins, Degenerate(0.0))
        return kinds, pars, K.INDEPENDENT, 0.0, np.ones(self.d)


@dataclass(frozen=True)
class CommonShock(ClaimModel):
    """``X_j = weight * S + Y_j`` with one shock ``S`` shared by all lines."""

    shock: Margin
    weight: float
    idiosyncratic: tuple

    def __post_init__(self):
        object.__setattr__(self, "idiosyncratic", _margins_tuple(self.idiosyncratic))
        if not (self.weight >= 0 and math.isfinite(self.weight)):
            raise ValueError("shock weight must be finite and nonnegative")

    @property
    def d(self) -> int:
        return len(self.idiosyncratic)

    def mean_vector(self) -> np.ndarray:
        s = self.weight * self.shock.mean() if self.weight > 0 else 0.0
        return np.array([s + m.mean() for m in self.idiosyncratic])

    def marginal_tail(self, j: int, x):
        self._check_index(j)
        y = self.idiosyncratic[j]
        w = self.weight
        if w == 0:
            return y.tail(x)
        if isinstance(y, Degenerate):
            return self.shock.tail((np.asarray(x, dtype=float) - y.value) / w)

        def one(xv):
            hi = xv
            if hi <= y.lower:
                return float(y.tail(xv))
            f = lambda v: y.density(v) * self.shock.tail((xv - v) / w)
            val, _ = integrate.quad(f, y.lower, hi, **_QUAD)
            return float(y.tail(xv)) + val

        xs = np.asarray(x, dtype=float)
        out = np.vectorize(one)(xs)
        return out if out.ndim else float(out)

    def _encode(self):
        kinds, pars = self._margin_arrays(self.idiosyncratic, self.shock)
        return kinds, pars, K.COMMON_SHOCK, float(self.weight), np.ones(self.d)


@dataclass(frozen=True)
class SpectralProduct(ClaimModel):
    """``X = R * Theta``: radius ``R`` (the L1 norm of ``X``) times a Dirichlet direction."""

    radius: Margin
    dirichlet: tuple

    def __post_init__(self):
        a = tuple(float(v) for v in self.dirichlet)
        if not a or any(not (v > 0) for v in a):
            raise ValueError("Dirichlet parameters must be positive")
        if len(a) > K.MAX_DIM:
            raise ValueError(f"dimension above {K.MAX_DIM} is not supported")
        object.__setattr__(self, "dirichlet", a)

    @property
    def d(self) -> int:
        return len(self.dirichlet)

    def mean_vector(self) -> np.ndarray:
        a = np.array(self.dirichlet)
        return self.radius.mean() * a / a.sum()

    def marginal_tail(self, j: int, x):
        self._check_index(j)
        if self.d == 1:
            return self.radius.tail(x)
        a = np.array(self.dirichlet)
        beta = stats.beta(a[j], a.sum() - a[j])

        def one(xv):
            if xv <= 0:
                return 1.0
            f = lambda t: beta.pdf(t) * self.radius.tail(xv / t)
            val, _ = integrate.quad(f, 0.0, 1.0, **_QUAD)
            return val

        out = np.vectorize(one)(np.asarray(x, dtype=float))
        return out if out.ndim else float(out)

    def _encode(self):
        kinds, pars = self._margin_arrays([Degenerate(0.0)] * self.d, self.radius)
        return kinds, pars, K.SPECTRAL, 0.0, np.array(self.dirichlet)


# ---------------------------------------------------------------- operations


def sample_claims(model: ClaimModel, rng: Union[Stream, int], n: int) -> np.ndarray:
    """``n`` i.i.d. claim vectors, shape ``(n, d)``; same stream, same output."""
    if n < 1:
        raise ValueError("n must be >= 1")
    stream = as_stream(rng)
    kinds, pars, variant, weight, dir_alpha = model._encode()
    return K.sample_claims_kernel(kinds, pars, variant, weight, dir_alpha, stream.key, 0, int(n), model.d)


def marginal_tail(model: ClaimModel, j: int, x):
    """``P(X_j > x)`` (0-based ``j``)."""
    return model.marginal_tail(j, x)


def mean_vector(model: ClaimModel) -> np.ndarray:
    return model.mean_vector()


def spectral_W(A: GaugeSet, direction) -> float:
    """Smallest ``u > 0`` with ``u * direction`` in ``A``."""
    theta = np.asarray(direction, dtype=float)
    if np.any(theta < 0) or abs(theta.sum() - 1.0) > 1e-9:
        raise ValueError("direction must lie on the unit simplex")
    g = gauge_project(A, theta)
    if g <= 0:
        raise ValueError("direction is orthogonal to every gauge direction; W is infinite")
    return 1.0 / g


@dataclass(frozen=True)
class ClosedForm:
    pass


@dataclass(frozen=True)
class Quadrature:
    """Conditioning on the second coordinate; independent margins with d <= 2."""

    pass


@dataclass(frozen=True)
class MonteCarlo:
    n: int = 10**6
    seed: int = 0


@dataclass(frozen=True)
class GridConvolution:
    """Cell-mass convolution on a uniform grid; single-direction gauges, d <= 2."""

    step: float = 0.01
    max_cells: int = 2 * 10**7


Backend = Union[ClosedForm, Quadrature, MonteCarlo, GridConvolution]


@dataclass(frozen=True)
class TailEstimate:
    value: float
    error: float
    backend: str


def _closed_form(model: ClaimModel, A: GaugeSet, x: float) -> TailEstimate:
    if model.d == 1:
        pmax = float(A.directions.max())
        return TailEstimate(float(model.marginal_tail(0, x / pmax)), 0.0, "ClosedForm")
    if isinstance(model, IndependentMargins) and A.axis_aligned:
        a = A.axis_coefficients()
        keep = np.nonzero(a > 0)[0]
        tails = [float(model.margins[j].tail(x / a[j])) for j in keep]
        if max(tails) >= 1.0:
            return TailEstimate(1.0, 0.0, "ClosedForm")
        log_surv = sum(math.log1p(-t) for t in tails)
        return TailEstimate(float(-math.expm1(log_surv)), 0.0, "ClosedForm")
    raise ClosedFormUnavailable(
        f"no closed form for {type(model).__name__} with this gauge; use Quadrature or MonteCarlo"
    )


def _quadrature(model: ClaimModel, A: GaugeSet, x: float) -> TailEstimate:
    if model.d == 1:
        return _closed_form(model, A, x)
    if not (isinstance(model, IndependentMargins) and model.d == 2):
        raise ClosedFormUnavailable("Quadrature backend needs independent margins with d <= 2")
    m1, m2 = model.margins
    P = A.directions
    on1 = P[:, 0] > 0
    # X1 exceeds t(y) given X2 = y; directions without X1 decide on y alone
    def cond_tail(y):
        if np.any(P[~on1, 1] * y > x):
            return 1.0
        if not on1.any():
            return 0.0
        t = np.min((x - P[on1, 1] * y) / P[on1, 0])
        return float(m1.tail(t))

    col2 = P[:, 1]
    y_star = x / col2.max() if col2.max() > 0 else math.inf
    if isinstance(m2, Degenerate):
        val = 1.0 if m2.value > y_star else cond_tail(m2.value)
        return TailEstimate(val, 0.0, "Quadrature")
    lo = m2.lower
    if y_star <= lo:
        return TailEstimate(1.0, 0.0, "Quadrature")
    head = float(m2.tail(y_star)) if math.isfinite(y_star) else 0.0
    hi = y_star
    f = lambda y: m2.density(y) * cond_tail(y)
    if math.isfinite(hi):
        # kinks where some threshold t(y) crosses the lower end of X1
        kinks = [(x - P[k, 0] * m1.lower) / P[k, 1] for k in np.nonzero(on1 & (col2 > 0))[0]]
        kinks = sorted(k for k in kinks if lo < k < hi) or None
        val, err = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-10, limit=500, points=kinks)
    else:
        val, err = integrate.quad(f, lo, math.inf, epsabs=0.0, epsrel=1e-10, limit=500)
    return TailEstimate(head + val, err, "Quadrature")


def _monte_carlo(model: ClaimModel, A: GaugeSet, x: float, n: int, seed: int) -> TailEstimate:
    X = sample_claims(model, Stream(seed), n)
    if isinstance(model, SpectralProduct):
        # conditional on the direction: P(R > x / gauge(Theta))
        g = gauge_project(A, X / X.sum(axis=1, keepdims=True))
        with np.errstate(divide="ignore"):
            vals = np.where(g > 0, model.radius.tail(x / np.where(g > 0, g, 1.0)), 0.0)
        return TailEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n)), "MonteCarlo")
    hits = gauge_project(A, X) > x
    p = float(hits.mean())
    return TailEstimate(p, math.sqrt(p * (1 - p) / n), "MonteCarlo")


def _grid_convolution(model: ClaimModel, A: GaugeSet, x: float, step: float, max_cells: int) -> TailEstimate:
    if model.d == 1:
        return _closed_form(model, A, x)
    if not (isinstance(model, IndependentMargins) and model.d == 2 and A.single_direction):
        raise ClosedFormUnavailable(
            "GridConvolution needs independent margins, d <= 2 and a single-direction gauge"
        )
    p1, p2 = A.directions[0]
    m1, m2 = model.margins
    if p1 == 0 or p2 == 0:
        j, pj = (1, p2) if p1 == 0 else (0, p1)
        return TailEstimate(float(model.margins[j].tail(x / pj)), 0.0, "GridConvolution")
    n = int(math.ceil(x / step))
    if n > max_cells:
        raise ValueError(f"GridConvolution would need {n} cells; increase step")
    u = np.linspace(0.0, x, n + 1)
    t1 = m1.tail(u / p1)
    mass = t1[:-1] - t1[1:]
    atom0 = 1.0 - float(m1.tail(0.0))
    s2_left = m2.tail((x - u[:-1]) / p2)
    s2_right = m2.tail((x - u[1:]) / p2)
    tail1_x = float(t1[-1])
    base = tail1_x + atom0 * float(m2.tail(x / p2))
    lo = base + float(np.dot(mass, s2_left))
    hi = base + float(np.dot(mass, s2_right))
    return TailEstimate(0.5 * (lo + hi), 0.5 * (hi - lo), "GridConvolution")


def gauge_tail(model: ClaimModel, A: GaugeSet, x: float, backend: Backend = ClosedForm()) -> TailEstimate:
    """``P(max_k p_k . X > x)`` with a backend-specific error estimate.

    ``MonteCarlo`` reports a standard error; ``GridConvolution`` reports the
    half-width of a rigorous lower/upper bracket; ``Quadrature`` reports the
    integrator's error estimate.
    """
    if not x > 0:
        raise ValueError("x must be positive")
    if model.d != A.d:
        raise ValueError(f"model has d={model.d} but gauge has d={A.d}")
    if isinstance(backend, ClosedForm):
        return _closed_form(model, A, x)
    if isinstance(backend, Quadrature):
        return _quadrature(model, A, x)
    if isinstance(backend, MonteCarlo):
        return _monte_carlo(model, A, x, backend.n, backend.seed)
    if isinstance(backend, GridConvolution):
        return _grid_convolution(model, A, x, backend.step, backend.max_cells)
    raise TypeError(f"unknown backend {backend!r}")


def default_backend(model: ClaimModel, A: GaugeSet) -> Backend:
    """Most accurate deterministic backend available for the pair, else Monte Carlo."""
    if model.d == 1 or (isinstance(model, IndependentMargins) and A.axis_aligned):
        return ClosedForm()
    if isinstance(model, IndependentMargins) and model.d == 2:
        return Quadrature()
    return MonteCarlo()


def gauge_tail_function(model: ClaimModel, A: GaugeSet, backend: Backend | None = None) -> TailFunction:
    """Vectorized ``x -> P(X in xA)`` built on :func:`gauge_tail`."""
    backend = default_backend(model, A) if backend is None else backend
    if isinstance(backend, MonteCarlo):
        # one shared sample across all x keeps the curve monotone
        X = sample_claims(model, Stream(backend.seed), backend.n)
        if isinstance(model, SpectralProduct):
            g = gauge_project(A, X / X.sum(axis=1, keepdims=True))

            def sf(x):
                xs = np.atleast_1d(np.asarray(x, dtype=float))
                out = np.array([np.mean(model.radius.tail(v / g[g > 0])) * np.mean(g > 0) for v in xs])
                return out if np.ndim(x) else float(out[0])

        else:
            y = np.sort(gauge_project(A, X))

            def sf(x):
                xs = np.asarray(x, dtype=float)
                out = 1.0 - np.searchsorted(y, xs, side="right") / y.size
                return out if out.ndim else float(out)

        return TailFunction(sf, 0.0, "gauge tail (MC)")

    def sf(x):
        xs = np.asarray(x, dtype=float)
        out = np.vectorize(lambda v: gauge_tail(model, A, v, backend).value if v > 0 else 1.0)(xs)
        return out if out.ndim else float(out)

    return TailFunction(sf, 0.0, f"gauge tail ({type(backend).__name__})")
