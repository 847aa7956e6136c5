"""Command-line runner: ``ruinlab run | validate | scenarios``.

Exit codes: 0 success, 2 invalid configuration, 3 a scenario check failed
under ``--check``.
"""

from __future__ import annotations

import argparse
import copy
import datetime as _dt
import json
import logging
import math
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .asymptotics import AsymptoticResult, QuadratureSpec, approx_ruin_mrv, big_H, corollary_constant, theta
from .config import (
    PRESET_NOTES,
    PRESETS,
    ConfigError,
    build_gauge_from,
    build_model,
    build_policy,
    grid_of,
    load_config,
    validate_config,
)
from .diagnostics import CoverageError, FFTConvolution, lemma_ratio_check, proposition41_suite, ratio_D, ratio_L, ratio_S
from .distributions import Exponential, IndependentMargins, marginal_tail
from .montecarlo import BridgeMode, cramer_lundberg_psi, extend_horizon, run_ensemble
from .process import ExpArrivals, drift_c
from .report import Emitter, csv_text, emit_ratio_table, psi_table, report_table, svg_plot

__all__ = ["main", "run", "Check", "EXIT_OK", "EXIT_INVALID", "EXIT_CHECK"]

logger = logging.getLogger("ruinlab")

EXIT_OK, EXIT_INVALID, EXIT_CHECK = 0, 2, 3


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))


# ---------------------------------------------------------------- shared pieces


def _ensemble(ctx, model=None, bridge=None):
    cfg = ctx["cfg"]
    return run_ensemble(
        model or ctx["model"], ctx["A"], ctx["xs"], cfg["estimator"]["paths"], ctx["policy"],
        bridge or cfg["estimator"]["bridge"], cfg["run"]["seed"],
    )


def _approx(model, A, x, quad):
    try:
        return approx_ruin_mrv(model, A, x, "c", quad).value
    except (ValueError, AttributeError):
        return None


def _asymptotics(ctx, model=None) -> list[AsymptoticResult]:
    """Emit ``asymptotic.csv`` and return the ``H_c`` curve."""
    model = model or ctx["model"]
    A, quad = ctx["A"], ctx["quad"]
    c = drift_c(model)
    th = theta(model.claims, c, quad).value
    same = np.array_equal(c, c + model.delta * model.brownian_drift * model.interarrival.mean())
    hc_curve, rows = [], []
    for x in ctx["xs"]:
        hc = big_H(model, A, x, "c", quad)
        hs = hc if same else big_H(model, A, x, "c_star", quad)
        hc_curve.append(hc)
        rows.append((x, hc.value, hs.value, hc.value / th, _approx(model, A, x, quad), hc.error_bound))
    ctx["emit"].add("asymptotic.csv", csv_text(("x", "H_c", "H_cstar", "F_I", "approx_mrv", "error_bound"), rows))
    return hc_curve


def _ratios(curve, H):
    out = []
    for e, h in zip(curve, H):
        r = e.estimate / h.value
        half = 1.96 * e.std_err / h.value + r * h.error_bound / h.value
        out.append((r, half))
    return out


def _band_checks(name, curve, H, band) -> list[Check]:
    rs = _ratios(curve, H)
    dev = [abs(r - 1) for r, _ in rs]
    r_top, half_top = rs[-1]
    checks = [Check(f"{name}: |ratio - 1| <= {band:g} at x={curve[-1].x:g}", dev[-1] <= band,
                    f"ratio {r_top:.4f} +/- {half_top:.4f}")]
    worst = max((dev[i + 1] - dev[i] - rs[i][1] - rs[i + 1][1] for i in range(len(rs) - 1)), default=-1.0)
    checks.append(Check(f"{name}: |ratio - 1| non-increasing within CI overlap", worst <= 0,
                        "deviations " + ", ".join(f"{d:.3f}" for d in dev)))
    return checks


def _plot(ctx, name, title, series, ylabel=""):
    ctx["emit"].add(name, svg_plot(series, title, ylabel=ylabel))


def _xs_of(curve):
    return [e.x for e in curve]


# ---------------------------------------------------------------- scenarios


def _engine_validate(ctx) -> list[Check]:
    model = ctx["model"]
    claims = model.claims
    if not (model.d == 1 and isinstance(claims, IndependentMargins) and isinstance(claims.margins[0], Exponential)
            and isinstance(model.interarrival, ExpArrivals) and not np.any(model.delta)):
        raise ConfigError("engine-validate needs d=1, exponential claims, Poisson arrivals and delta=0")
    beta, rate, p = claims.margins[0].beta, model.interarrival.rate, float(model.premium[0])
    curve = _ensemble(ctx).estimates()
    exact = cramer_lundberg_psi(ctx["xs"], rate, beta, p)
    k = ctx["cfg"]["checks"]["se_multiplier"]
    emit = ctx["emit"]
    emit.add("psi.csv", psi_table(curve))
    z = [(e.estimate - ex) / e.std_err if e.std_err > 0 else math.inf for e, ex in zip(curve, exact)]
    emit.add("oracle.csv", csv_text(("x", "exact", "estimate", "std_err", "z"),
                                    [(e.x, ex, e.estimate, e.std_err, zz) for e, ex, zz in zip(curve, exact, z)]))
    H = _asymptotics(ctx)
    emit.add("ratio.csv", emit_ratio_table(curve, H))
    _plot(ctx, "psi.svg", "ruin probability", {
        "estimate": (_xs_of(curve), [e.estimate for e in curve]),
        "exact": (_xs_of(curve), exact),
        "H(x)": (_xs_of(curve), [h.value for h in H]),
    })
    return [Check(f"|psi_hat(x) - exact| <= {k:g} se at x={e.x:g}", abs(zz) <= k, f"z = {zz:.3f}")
            for e, zz in zip(curve, z)]


def _theorem31(ctx) -> list[Check]:
    ens = _ensemble(ctx)
    curve = ens.estimates()
    emit = ctx["emit"]
    emit.add("psi.csv", psi_table(curve))
    H = _asymptotics(ctx)
    emit.add("ratio.csv", emit_ratio_table(curve, H))
    _plot(ctx, "psi.svg", "ruin probability against H(x)", {
        "psi_hat": (_xs_of(curve), [e.estimate for e in curve]),
        "H_c": (_xs_of(curve), [h.value for h in H]),
    })
    checks = _band_checks("ratio", curve, H, ctx["cfg"]["checks"]["band"])
    doubled = extend_horizon(ens, 2 * ens.policy.max_steps).estimates()
    shift = max(abs(a.estimate - b.estimate) / a.std_err if a.std_err > 0 else 0.0 for a, b in zip(curve, doubled))
    checks.append(Check("horizon doubling moves no point by more than 2 se", shift <= 2, f"max shift {shift:.3f} se"))
    return checks


def _insensitivity(ctx) -> list[Check]:
    model = ctx["model"]
    if not model.diffuse:
        raise ConfigError("insensitivity needs a Brownian perturbation (delta and brownian.cov or drift)")
    base = model.replace(delta=None, brownian_drift=None, brownian_cov=None)
    bridge = BridgeMode(ctx["cfg"]["estimator"]["bridge"])
    pert = _ensemble(ctx, bridge=bridge)
    zero = _ensemble(ctx, model=base, bridge=BridgeMode.SKELETON)
    emit, band = ctx["emit"], ctx["cfg"]["checks"]["band"]
    H = _asymptotics(ctx, base)
    curves = {"delta": pert.estimates(), "zero": zero.estimates()}
    if bridge is not BridgeMode.SKELETON:
        curves["delta_skeleton"] = pert.estimates(BridgeMode.SKELETON)
    checks = []
    for tag, curve in curves.items():
        emit.add(f"psi_{tag}.csv", psi_table(curve))
        emit.add(f"ratio_{tag}.csv", emit_ratio_table(curve, H))
        checks.extend(_band_checks(tag, curve, H, band)[:1])
    a, b = curves["delta"][-1], curves["zero"][-1]
    se = math.hypot(a.std_err, b.std_err)
    diff = abs(a.estimate - b.estimate)
    checks.insert(0, Check(f"|psi_delta - psi_0| <= 2 combined se at x={a.x:g}", diff <= 2 * se,
                           f"diff {diff:.3g}, combined se {se:.3g}"))
    series = {tag: (_xs_of(c), [e.estimate for e in c]) for tag, c in curves.items()}
    series["H_c"] = (list(ctx["xs"]), [h.value for h in H])
    _plot(ctx, "psi.svg", "ruin probability with and without perturbation", series)
    return checks


def _corollary31(ctx) -> list[Check]:
    model, A, quad = ctx["model"], ctx["A"], ctx["quad"]
    try:
        k = corollary_constant(model, A, quad=quad)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    H = _asymptotics(ctx)
    ref = model.claims.margins[0]
    rows, ratio = [], []
    for x, h in zip(ctx["xs"], H):
        xv = x * float(ref.tail(x))
        ratio.append(h.value / xv)
        rows.append((x, h.value, xv, ratio[-1], k.value, k.error_bound))
    ctx["emit"].add("corollary.csv", csv_text(("x", "H_c", "x_Vbar", "ratio", "constant", "constant_error"), rows))
    _plot(ctx, "corollary.svg", "H(x) / (x V(x)) against the limit constant", {
        "H/(xV)": (list(ctx["xs"]), ratio),
        "constant": (list(ctx["xs"]), [k.value] * len(ratio)),
    }, ylabel="ratio")
    band = ctx["cfg"]["checks"]["band"]
    dev = abs(ratio[-1] / k.value - 1)
    return [Check(f"H/(xV) within {band:g} of the constant at x={ctx['xs'][-1]:g}", dev <= band,
                  f"H/(xV) = {ratio[-1]:.5f}, constant = {k.value:.6f}")]


def _veraverbeke(ctx) -> list[Check]:
    if ctx["model"].d != 1:
        raise ConfigError("veraverbeke needs a one-dimensional model")
    curve = _ensemble(ctx).estimates()
    emit = ctx["emit"]
    emit.add("psi.csv", psi_table(curve))
    H = _asymptotics(ctx)
    emit.add("ratio.csv", emit_ratio_table(curve, H))
    _plot(ctx, "psi.svg", "one-dimensional ruin probability", {
        "psi_hat": (_xs_of(curve), [e.estimate for e in curve]),
        "H": (_xs_of(curve), [h.value for h in H]),
    })
    return _band_checks("ratio", curve, H, ctx["cfg"]["checks"]["band"])[:1]


def _lemma_ratios(ctx) -> list[Check]:
    r = lemma_ratio_check(ctx["model"], ctx["A"], ctx["xs"], ctx["quad"], tol=ctx["cfg"]["checks"]["tol"])
    ctx["emit"].add("lemma.csv", report_table(r))
    _plot(ctx, "lemma.svg", "H with drift c* over H with drift c", {"ratio": (list(r.x_grid), list(r.ratio))},
          ylabel="ratio")
    note = " (c* = c, check is vacuous)" if r.vacuous else ""
    return [Check(f"H_c*/H_c converges to 1 within {r.tol:g}", r.passed,
                  f"verdict {r.verdict.value}, last ratio {r.ratio[-1]:.5f}{note}")]


def _class_suite(ctx) -> list[Check]:
    cfg, model, xs, emit = ctx["cfg"], ctx["model"], ctx["xs"], ctx["emit"]
    ch = cfg["checks"]
    margin = model.claims.margins[0] if isinstance(model.claims, IndependentMargins) else None
    tail = margin if margin is not None else (lambda x: marginal_tail(model.claims, 0, x))
    hint = getattr(margin, "alpha", None)
    checks = []

    def record(name, r):
        emit.add(f"{name}.csv", report_table(r))
        checks.append(Check(name, r.passed, f"verdict {r.verdict.value}, last ratio {r.ratio[-1]:.5g}"))

    record("L_margin", ratio_L(tail, 1.0, xs, tol=ch["tol"]))
    record("D_margin", ratio_D(tail, 0.5, xs, alpha_hint=hint))
    gauges = {kind: build_gauge_from(cfg, kind) for kind in ch["ruin_sets"]}
    s_grid = xs[xs <= 1e3]
    for kind, A in gauges.items():
        try:
            record(f"S_{kind}", ratio_S(model.claims, A, s_grid, FFTConvolution(step=ch["fft_step"])))
        except (CoverageError, ValueError) as e:
            checks.append(Check(f"S_{kind}", False, str(e)))
    try:
        reports = proposition41_suite(model, list(gauges.values()), xs, quad=ctx["quad"])
    except ValueError as e:
        checks.append(Check("integrated-tail suite", False, str(e)))
    else:
        names = list(gauges)
        for r in reports:
            record(f"suite_{names[r.method['gauge']]}_{r.method['object']}_{r.method['check']}", r)
    return checks


SCENARIO_RUNNERS = {
    "engine-validate": _engine_validate,
    "theorem31": _theorem31,
    "insensitivity": _insensitivity,
    "corollary31": _corollary31,
    "veraverbeke": _veraverbeke,
    "lemma-ratios": _lemma_ratios,
    "class-suite": _class_suite,
}


# ---------------------------------------------------------------- commands


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = copy.deepcopy(cfg)
    if not isinstance(cfg, dict):
        return cfg
    est = cfg.setdefault("estimator", {}) if isinstance(cfg.get("estimator", {}), dict) else cfg["estimator"]
    if getattr(args, "paths", None) is not None:
        est["paths"] = args.paths
    if getattr(args, "bridge", None) is not None:
        est["bridge"] = args.bridge
    if getattr(args, "max_steps", None) is not None:
        est["max_steps"] = args.max_steps
    if not est:
        cfg.pop("estimator")
    if getattr(args, "seed", None) is not None:
        cfg.setdefault("run", {})["seed"] = args.seed
    if getattr(args, "x_grid", None) is not None:
        cfg["grid"] = {"geometric": args.x_grid}
    if getattr(args, "out", None) is not None:
        cfg.setdefault("output", {})["dir"] = str(args.out)
    return cfg


def run(cfg: dict, check: bool = False, out: Path | None = None) -> tuple[int, list[Check], dict | None]:
    """Validate and execute one configuration; returns (exit code, checks, manifest)."""
    t0 = time.perf_counter()
    try:
        resolved = validate_config(cfg)
    except ConfigError as e:
        logger.error("invalid configuration: %s", e)
        return EXIT_INVALID, [], None
    out_dir = Path(out if out is not None else resolved["output"]["dir"])
    if out_dir.exists() and not out_dir.is_dir():
        logger.error("output path %s is not a directory", out_dir)
        return EXIT_INVALID, [], None
    ctx = {
        "cfg": resolved,
        "model": build_model(resolved),
        "A": build_gauge_from(resolved),
        "xs": grid_of(resolved),
        "policy": build_policy(resolved),
        "quad": QuadratureSpec(),
        "emit": Emitter(),
    }
    try:
        checks = SCENARIO_RUNNERS[resolved["scenario"]](ctx)
    except ConfigError as e:
        logger.error("invalid configuration: %s", e)
        return EXIT_INVALID, [], None
    manifest = {
        "config": cfg,
        "resolved": resolved,
        "seed": resolved["run"]["seed"],
        "versions": {
            "ruinlab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "started_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "wall_clock_s": round(time.perf_counter() - t0, 3),
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks],
    }
    manifest = ctx["emit"].flush(out_dir, manifest)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  [{c.detail}]")
    print(f"wrote {len(manifest['files'])} files and manifest.json to {out_dir}")
    code = EXIT_CHECK if check and not all(c.passed for c in checks) else EXIT_OK
    return code, checks, manifest


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_INVALID
    return run(_apply_overrides(cfg, args), check=args.check)[0]


def _cmd_validate(args) -> int:
    try:
        resolved = validate_config(_apply_overrides(load_config(args.config), args))
    except ConfigError as e:
        print(f"invalid: {e}")
        return EXIT_INVALID
    print(f"valid: scenario {resolved['scenario']}, grid of {len(grid_of(resolved))} points")
    return EXIT_OK


def _cmd_scenarios(args) -> int:
    if args.show:
        if args.show not in PRESETS:
            print(f"unknown preset {args.show!r}", file=sys.stderr)
            return EXIT_INVALID
        print(json.dumps(PRESETS[args.show], indent=2))
        return EXIT_OK
    width = max(map(len, PRESETS))
    for name in PRESETS:
        print(f"{name:<{width}}  {PRESET_NOTES[name]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ruinlab", description="Multivariate ruin probability experiments.")
    ap.add_argument("--version", action="version", version=f"ruinlab {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def overrides(p):
        p.add_argument("config", help="JSON config file, or the name of a preset")
        p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int)
        p.add_argument("--paths", type=int)
        p.add_argument("--x-grid", dest="x_grid", metavar="A:B:K", help="geometric grid of K points from A to B")
        p.add_argument("--bridge", choices=[m.value for m in BridgeMode])
        p.add_argument("--max-steps", dest="max_steps", type=int)

    p = sub.add_parser("run", help="run a scenario and write CSV, SVG and manifest files")
    overrides(p)
    p.add_argument("--check", action="store_true", help="exit 3 if a scenario check fails")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("validate", help="check a config without running it")
    overrides(p)
    p.set_defaults(func=_cmd_validate)
    p = sub.add_parser("scenarios", help="list the preset scenarios")
    p.add_argument("--show", metavar="NAME", help="print the preset config as JSON")
    p.set_defaults(func=_cmd_scenarios)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
