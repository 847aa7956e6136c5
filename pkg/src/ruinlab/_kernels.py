"""Compiled sampling and random-walk kernels.

Randomness is counter based: every uniform is a hash of
``(path key, tag, index)`` so a draw is addressed by path, step and slot
rather than by position in a stream.  Consequences relied upon elsewhere:

* results do not depend on batch size or thread count;
* skipping the Brownian draws (no diffusion) leaves every other draw intact,
  so runs with and without diffusion are path-coupled.

Claim models and inter-arrival laws arrive as small numeric arrays; the
encoding is produced by ``distributions`` and ``process``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import config, njit, prange

# an outdated TBB otherwise triggers a warning on every first parallel call
config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

# margin kinds
PARETO = 0
OSC_PARETO = 1
EXPONENTIAL = 2
DEGENERATE = 3

# claim variants
INDEPENDENT = 0
COMMON_SHOCK = 1
SPECTRAL = 2

# inter-arrival kinds
IA_EXPONENTIAL = 0
IA_ERLANG = 1
IA_DETERMINISTIC = 2
IA_LOGNORMAL = 3

# bridge modes
SKELETON = 0
BRIDGE_EXACT = 1
BRIDGE_UNION = 2

# stop reasons
STOP_RUIN = 1
STOP_SLACK = 2
STOP_BUDGET = 3
STOP_MAX_STEPS = 4

TAG_INTERARRIVAL = 0
TAG_BROWNIAN = 1
TAG_CLAIM = 2
TAG_REJECTION = 3

_EXP_UNDERFLOW = 745.2  # math.exp(-z) == 0.0 beyond this
SLOTS = 64  # counter indices reserved per step and per tag
MAX_DIM = 60

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S3 = np.uint64(3)
_TWO_M53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def path_key(key, path):
    return mix64(key ^ mix64(np.uint64(path) * _GOLD + _GOLD))


@njit(cache=True, inline="always")
def uniform(pkey, tag, idx):
    """Uniform in the open interval (0, 1)."""
    h = mix64(pkey + ((np.uint64(idx) << _S3) | np.uint64(tag)) * _GOLD)
    return (float(h >> _S11) + 0.5) * _TWO_M53


@njit(cache=True)
def uniforms(key, path, tag, start, n):
    out = np.empty(n)
    pk = path_key(key, path)
    for i in range(n):
        out[i] = uniform(pk, tag, start + i)
    return out


# ---------------------------------------------------------------- margins


@njit(cache=True)
def osc_isf(alpha, sigma, u):
    # solve alpha*t - sin(t) = -log(u) for t >= 0; x = sigma * e^t
    r = -math.log(u)
    if r <= 0.0:
        return sigma
    lo = max(0.0, (r - 1.0) / alpha)
    hi = (r + 1.0) / alpha
    t = min(max(r / alpha, lo), hi)
    for _ in range(100):
        g = alpha * t - math.sin(t) - r
        if g > 0.0:
            hi = t
        else:
            lo = t
        dg = alpha - math.cos(t)
        step_ok = False
        if dg > 1e-12:
            tn = t - g / dg
            if lo < tn < hi:
                step_ok = True
        if not step_ok:
            tn = 0.5 * (lo + hi)
        if abs(tn - t) <= 1e-15 * (1.0 + t):
            t = tn
            break
        t = tn
    return sigma * math.exp(t)


@njit(cache=True, inline="always")
def margin_isf(kind, a, s, u):
    """Inverse survival function: the x with P(X > x) = u."""
    if kind == PARETO:
        if a == 2.0:
            return s / math.sqrt(u)
        return s * u ** (-1.0 / a)
    elif kind == OSC_PARETO:
        return osc_isf(a, s, u)
    elif kind == EXPONENTIAL:
        return -math.log(u) / a
    return a


@njit(cache=True)
def gamma_draw(pk, step, j, shape):
    # Marsaglia-Tsang; attempts live in their own counter block
    base = (step * SLOTS + j) * SLOTS
    boost = 1.0
    a = shape
    if a < 1.0:
        boost = uniform(pk, TAG_REJECTION, base + 63) ** (1.0 / a)
        a = a + 1.0
    dd = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * dd)
    for att in range(15):
        u1 = uniform(pk, TAG_REJECTION, base + 4 * att)
        u2 = uniform(pk, TAG_REJECTION, base + 4 * att + 1)
        u3 = uniform(pk, TAG_REJECTION, base + 4 * att + 2)
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)
        v = 1.0 + c * z
        if v <= 0.0:
            continue
        v = v * v * v
        if math.log(u3) < 0.5 * z * z + dd - dd * v + dd * math.log(v):
            return dd * v * boost
    return dd * boost


@njit(cache=True)
def draw_claim(kinds, pars, variant, weight, dir_alpha, pk, step, X):
    d = X.shape[0]
    base = step * SLOTS
    if variant == INDEPENDENT:
        for j in range(d):
            u = uniform(pk, TAG_CLAIM, base + j)
            X[j] = margin_isf(kinds[j], pars[j, 0], pars[j, 1], u)
    elif variant == COMMON_SHOCK:
        u = uniform(pk, TAG_CLAIM, base + d)
        shock = margin_isf(kinds[d], pars[d, 0], pars[d, 1], u)
        for j in range(d):
            u = uniform(pk, TAG_CLAIM, base + j)
            X[j] = weight * shock + margin_isf(kinds[j], pars[j, 0], pars[j, 1], u)
    else:
        u = uniform(pk, TAG_CLAIM, base + d)
        radius = margin_isf(kinds[d], pars[d, 0], pars[d, 1], u)
        total = 0.0
        for j in range(d):
            g = gamma_draw(pk, step, j, dir_alpha[j])
            X[j] = g
            total += g
        for j in range(d):
            X[j] = radius * X[j] / total


@njit(cache=True)
def draw_theta(ia, pk, step):
    kind = int(ia[0])
    base = step * SLOTS
    if kind == IA_EXPONENTIAL:
        return -math.log(uniform(pk, TAG_INTERARRIVAL, base)) / ia[1]
    elif kind == IA_ERLANG:
        k = int(ia[2])
        acc = 0.0
        for i in range(k):
            acc -= math.log(uniform(pk, TAG_INTERARRIVAL, base + i))
        return acc / ia[1]
    elif kind == IA_DETERMINISTIC:
        return ia[1]
    u1 = uniform(pk, TAG_INTERARRIVAL, base)
    u2 = uniform(pk, TAG_INTERARRIVAL, base + 1)
    z = math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)
    return math.exp(ia[1] + ia[2] * z)


@njit(cache=True)
def draw_brownian(bdrift, bchol, pk, step, theta, z, dB):
    d = dB.shape[0]
    base = step * SLOTS
    for j in range(0, d, 2):
        u1 = uniform(pk, TAG_BROWNIAN, base + j)
        u2 = uniform(pk, TAG_BROWNIAN, base + j + 1)
        rad = math.sqrt(-2.0 * math.log(u1))
        z[j] = rad * math.cos(_TWO_PI * u2)
        if j + 1 < d:
            z[j + 1] = rad * math.sin(_TWO_PI * u2)
    sq = math.sqrt(theta)
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += bchol[i, j] * z[j]
        dB[i] = bdrift[i] * theta + sq * acc


# ---------------------------------------------------------------- samplers


@njit(cache=True)
def sample_claims_kernel(kinds, pars, variant, weight, dir_alpha, key, start, n, d):
    out = np.empty((n, d))
    X = np.empty(d)
    for i in range(n):
        pk = path_key(key, start + i)
        draw_claim(kinds, pars, variant, weight, dir_alpha, pk, 0, X)
        for j in range(d):
            out[i, j] = X[j]
    return out


@njit(cache=True)
def sample_increments_kernel(
    kinds, pars, variant, weight, dir_alpha, ia, premium, delta, bdrift, bchol, diffuse,
    key, start, n,
):
    d = premium.shape[0]
    Xs = np.empty((n, d))
    thetas = np.empty(n)
    dBs = np.zeros((n, d))
    X = np.empty(d)
    z = np.empty(d + 1)
    dB = np.zeros(d)
    for i in range(n):
        pk = path_key(key, start + i)
        theta = draw_theta(ia, pk, 0)
        draw_claim(kinds, pars, variant, weight, dir_alpha, pk, 0, X)
        thetas[i] = theta
        for j in range(d):
            Xs[i, j] = X[j]
        if diffuse:
            draw_brownian(bdrift, bchol, pk, 0, theta, z, dB)
            for j in range(d):
                dBs[i, j] = dB[j]
    return Xs, thetas, dBs


# ---------------------------------------------------------------- walk


@njit(cache=True, inline="always")
def bridge_hit(a0, a1, x, var_rate, theta):
    a = x - a0
    b = x - a1
    if a <= 0.0 or b <= 0.0:
        return 1.0
    if var_rate <= 0.0:
        return 0.0
    z = 2.0 * a * b / (var_rate * theta)
    if z > _EXP_UNDERFLOW:
        return 0.0
    return math.exp(-z)


@njit(cache=True)
def walk_path(
    kinds, pars, variant, weight, dir_alpha, ia, premium, delta, bdrift, bchol, diffuse,
    P, xs, var_rates, bridge_mode, gap_stop, budget_rate, max_steps, check_stride,
    pk, S, X, dB, z, pre, a0, logsurv,
):
    """Simulate one path; returns (max projection, steps, stop reason).

    ``logsurv`` receives, per level in ``xs``, the log-probability that no
    bridge crossing occurred between claim epochs.
    """
    d = S.shape[0]
    K = P.shape[0]
    nx = xs.shape[0]
    x_top = xs[nx - 1]
    for j in range(d):
        S[j] = 0.0
        dB[j] = 0.0
    for i in range(nx):
        logsurv[i] = 0.0
    max_proj = -np.inf
    step = 0
    while True:
        theta = draw_theta(ia, pk, step)
        draw_claim(kinds, pars, variant, weight, dir_alpha, pk, step, X)
        if diffuse:
            draw_brownian(bdrift, bchol, pk, step, theta, z, dB)
        for j in range(d):
            pre[j] = S[j] - theta * premium[j] - delta[j] * dB[j]
        if bridge_mode != SKELETON:
            # a0[:K] projections at the interval start, a0[K:] just before the claim
            for k in range(K):
                s0 = 0.0
                s1 = 0.0
                for j in range(d):
                    s0 += P[k, j] * S[j]
                    s1 += P[k, j] * pre[j]
                a0[k] = s0
                a0[K + k] = s1
            kk = 1 if bridge_mode == BRIDGE_EXACT else K
            for i in range(nx):
                if logsurv[i] == -np.inf:
                    continue
                q = 0.0
                for k in range(kk):
                    q += bridge_hit(a0[k], a0[K + k], xs[i], var_rates[k], theta)
                if q >= 1.0:
                    logsurv[i] = -np.inf
                elif q > 0.0:
                    logsurv[i] += math.log1p(-q)
                else:
                    # exp underflowed to exactly 0 and the exponent grows with x
                    break
        for j in range(d):
            S[j] = pre[j] + X[j]
        proj = -np.inf
        for k in range(K):
            acc = 0.0
            for j in range(d):
                acc += P[k, j] * S[j]
            if acc > proj:
                proj = acc
        step += 1
        if proj > max_proj:
            max_proj = proj
        if proj > x_top:
            return max_proj, step, STOP_RUIN
        if step % check_stride == 0:
            gap = x_top - proj
            if gap > gap_stop:
                return max_proj, step, STOP_SLACK
            if gap > budget_rate * (max_steps - step):
                return max_proj, step, STOP_BUDGET
        if step >= max_steps:
            return max_proj, step, STOP_MAX_STEPS


@njit(cache=True)
def _score(mp, logsurv, xs, bridge_mode, hits, bsum, bsq, b):
    for i in range(xs.shape[0]):
        if mp > xs[i]:
            hits[b, i] += 1
            bsum[b, i] += 1.0
            bsq[b, i] += 1.0
        elif bridge_mode != SKELETON:
            o = -math.expm1(logsurv[i])
            bsum[b, i] += o
            bsq[b, i] += o * o


@njit(cache=True, parallel=True)
def run_paths(
    kinds, pars, variant, weight, dir_alpha, ia, premium, delta, bdrift, bchol, diffuse,
    P, xs, var_rates, bridge_mode, gap_stop, budget_rate, max_steps, check_stride,
    key, start, n_paths, batch,
):
    """Aggregate path outcomes per batch of ``batch`` consecutive paths.

    Returns per-batch skeleton hit counts, bridge outcome sums and sums of
    squares (shape ``(n_batches, len(xs))``), truncated-path counts, step
    counts, and a per-path flag marking paths whose stop depended on
    ``max_steps`` (budget or hard stop).  Batches are summed by the caller in
    a fixed order.
    """
    d = premium.shape[0]
    K = P.shape[0]
    nx = xs.shape[0]
    nb = (n_paths + batch - 1) // batch
    hits = np.zeros((nb, nx), dtype=np.int64)
    bsum = np.zeros((nb, nx))
    bsq = np.zeros((nb, nx))
    trunc = np.zeros(nb, dtype=np.int64)
    steps = np.zeros(nb, dtype=np.int64)
    horizon_bound = np.zeros(n_paths, dtype=np.bool_)
    for b in prange(nb):
        S = np.empty(d)
        X = np.empty(d)
        dB = np.zeros(d)
        z = np.empty(d + 1)
        pre = np.empty(d)
        a0 = np.empty(2 * K)
        logsurv = np.empty(nx)
        lo = start + b * batch
        hi = min(start + n_paths, lo + batch)
        for path in range(lo, hi):
            pk = path_key(key, path)
            mp, ns, reason = walk_path(
                kinds, pars, variant, weight, dir_alpha, ia, premium, delta, bdrift, bchol,
                diffuse, P, xs, var_rates, bridge_mode, gap_stop, budget_rate, max_steps,
                check_stride, pk, S, X, dB, z, pre, a0, logsurv,
            )
            steps[b] += ns
            if reason == STOP_MAX_STEPS:
                trunc[b] += 1
            if reason == STOP_MAX_STEPS or reason == STOP_BUDGET:
                horizon_bound[path - start] = True
            _score(mp, logsurv, xs, bridge_mode, hits, bsum, bsq, b)
    return hits, bsum, bsq, trunc, steps, horizon_bound


@njit(cache=True)
def run_path_list(
    kinds, pars, variant, weight, dir_alpha, ia, premium, delta, bdrift, bchol, diffuse,
    P, xs, var_rates, bridge_mode, gap_stop, budget_rate, max_steps, check_stride,
    key, paths,
):
    """Like ``run_paths`` for an explicit list of path indices, as one batch."""
    d = premium.shape[0]
    K = P.shape[0]
    nx = xs.shape[0]
    hits = np.zeros((1, nx), dtype=np.int64)
    bsum = np.zeros((1, nx))
    bsq = np.zeros((1, nx))
    trunc = 0
    steps = 0
    S = np.empty(d)
    X = np.empty(d)
    dB = np.zeros(d)
    z = np.empty(d + 1)
    pre = np.empty(d)
    a0 = np.empty(2 * K)
    logsurv = np.empty(nx)
    bound = np.zeros(paths.shape[0], dtype=np.bool_)
    for n in range(paths.shape[0]):
        path = paths[n]
        mp, ns, reason = walk_path(
            kinds, pars, variant, weight, dir_alpha, ia, premium, delta, bdrift, bchol,
            diffuse, P, xs, var_rates, bridge_mode, gap_stop, budget_rate, max_steps,
            check_stride, path_key(key, path), S, X, dB, z, pre, a0, logsurv,
        )
        steps += ns
        if reason == STOP_MAX_STEPS:
            trunc += 1
        if reason == STOP_MAX_STEPS or reason == STOP_BUDGET:
            bound[n] = True
        _score(mp, logsurv, xs, bridge_mode, hits, bsum, bsq, 0)
    return hits[0], bsum[0], bsq[0], trunc, steps, bound
