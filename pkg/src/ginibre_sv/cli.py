"""Command-line front end: ``ginibre-sv {onepoint,mc,validate,figure1}``.

Exit codes: 0 success, 1 validation failure, 2 quadrature failure,
64 usage error, 74 I/O error.

Every option can also be given in a flat ``key = value`` file passed with
``--config``; keys are option names without the leading dashes (``eta-t`` or
``eta_t``).  Flags override the file, which overrides the built-in defaults.
"""
from __future__ import annotations

import argparse
import cmath
import csv
import json
import math
import re
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_QUADRATURE = 2
EXIT_USAGE = 64
EXIT_IO = 74


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# value parsing

_COMPLEX_RE = re.compile(r"^[+-]?[0-9.eE+-]*[ij]?$")


def parse_complex(text: str) -> complex:
    """Parse ``a+bi``, ``bi``, ``a`` (``j`` is accepted for ``i``)."""
    s = str(text).strip().replace(" ", "")
    if not s or not _COMPLEX_RE.match(s):
        raise UsageError(f"not a complex literal: {text!r}")
    s = s.replace("i", "j")
    if s.endswith("j") and s[:-1] in ("", "+", "-"):
        s = s[:-1] + "1j"
    try:
        return complex(s)
    except ValueError:
        raise UsageError(f"not a complex literal: {text!r}") from None


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"not a comma separated list of numbers: {text!r}") from None


def parse_int(text) -> int:
    try:
        v = float(text)
    except ValueError:
        raise UsageError(f"not an integer: {text!r}") from None
    if v != int(v):
        raise UsageError(f"not an integer: {text!r}")
    return int(v)


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def read_config(path: str) -> Dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


# ---------------------------------------------------------------------------
# option tables: name -> (parser, default, help)

Opt = Dict[str, tuple]

COMMON: Opt = {
    "output": (str, "-", "output path ('-' for stdout)"),
    "threads": (parse_int, None, "worker cap (default: GINIBRE_THREADS or 1)"),
    "rel_tol": (float, 1e-9, "relative quadrature tolerance"),
    "abs_tol": (float, 1e-13, "absolute quadrature tolerance"),
}

ONEPOINT: Opt = {
    "target": (str, "limit-real", "limit-real | limit-complex | limit-real-reduced | finite-n"),
    "lambda": (parse_float_list, [1.0], "rescaled energy lambda (list)"),
    "eta_t": (parse_float_list, [0.0], "rescaled Im z (list)"),
    "delta_t": (parse_float_list, [0.0], "rescaled 1-|z|^2 (list)"),
    "compare": (str, "", "add a comparison column against this target"),
    "n": (parse_int, 50, "matrix size for finite-n"),
    "im_z_scaled": (parse_float_list, None, "finite-n: sqrt(N) Im z (list; overrides eta-t)"),
    "eps_frac": (float, 0.0, "finite-n: epsilon as a fraction of E"),
    "n_max": (parse_int, 200, "finite-n: largest N accepted"),
}

MC: Opt = {
    "kind": (str, "complex", "real | complex"),
    "n": (parse_int, 256, "matrix size"),
    "z": (parse_complex, 0j, "shift, e.g. 0+1.0e-2i"),
    "im_z_scaled": (float, None, "set z = i s / sqrt(N) instead of --z"),
    "samples": (parse_int, 20000, "number of samples"),
    "seed": (parse_int, 0, "64-bit seed"),
    "hist": (parse_bool, False, "emit the N sigma_min histogram"),
    "bins": (parse_int, 80, "histogram bins"),
    "range_max": (float, 3.2, "histogram upper edge"),
    "resolvent": (parse_bool, False, "emit the smoothed resolvent trace"),
    "lambda": (float, 1.0, "resolvent: E = lambda N^{-3/2}"),
    "eps_frac": (float, 0.5, "resolvent: eps as a fraction of E"),
    "svg": (str, "", "write an SVG histogram overlay here"),
    "sigma_dump": (str, "", "write raw sigma_min values here"),
}

VALIDATE: Opt = {
    "suite": (str, "all", "all | identities | lemma-lower-bounds | monotone-ray | small-regime | "
                          "expansion | tau-collapse | positivity"),
    "grid_size": (parse_int, 10000, "points per lemma case"),
    "seed": (parse_int, 1, "seed of the lemma grids"),
    "eta_t": (parse_float_list, [8.0, 16.0, 32.0], "tau-collapse eta_t values"),
    "report": (str, "", "write a JSON summary here"),
}

FIGURE1: Opt = {
    "n": (parse_int, 256, "matrix size"),
    "samples": (parse_int, 20000, "samples per ensemble and panel"),
    "seed": (parse_int, 2024, "base seed"),
    "outdir": (str, "figure1", "output directory"),
}

COMMANDS = {"onepoint": ONEPOINT, "mc": MC, "validate": VALIDATE, "figure1": FIGURE1}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ginibre-sv", description="Smallest singular values of shifted Ginibre matrices")
    sub = p.add_subparsers(dest="command")
    for name, table in COMMANDS.items():
        sp = sub.add_parser(name, help=f"{name} command")
        sp.add_argument("--config", default=None, help="flat key = value file")
        for key, (_, default, hlp) in {**COMMON, **table}.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                            help=f"{hlp} [default: {default}]")
    return p


def resolve_options(command: str, ns: argparse.Namespace) -> Dict[str, object]:
    """Merge flag > config file > default and parse every value."""
    table = {**COMMON, **COMMANDS[command]}
    cfg = read_config(ns.config) if ns.config else {}
    unknown = sorted(set(cfg) - set(table))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    out = {}
    for key, (conv, default, _) in table.items():
        raw = getattr(ns, key, None)
        if raw is None:
            raw = cfg.get(key)
        if raw is None:
            out[key] = default
            continue
        try:
            out[key] = conv(raw)
        except UsageError:
            raise
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {key}: {raw!r} ({exc})") from None
    return out


# ---------------------------------------------------------------------------
# output helpers

class _Out:
    """Context manager yielding a text stream for ``path`` ('-' is stdout)."""

    def __init__(self, path):
        self.path = path
        self.fh = None

    def __enter__(self):
        if self.path in ("-", "", None):
            return sys.stdout
        self.fh = open(self.path, "w", encoding="utf-8", newline="")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not None:
            self.fh.close()
        return False


def svg_histogram(table, curves: Dict[str, tuple] = None, title: str = "", width: int = 480,
                  height: int = 320) -> str:
    """Minimal SVG 1.1 plot of a pdf histogram with optional reference curves."""
    curves = curves or {}
    edges = np.asarray(table.bin_edges, float)
    pdf = np.asarray(table.counts, float) / (max(table.n_inside, 1) * np.diff(edges))
    ymax = max([float(pdf.max()) if pdf.size else 1.0] + [float(np.max(y)) for _, y in curves.values()])
    ymax = 1.1 * ymax if ymax > 0 else 1.0
    ml, mr, mt, mb = 50, 15, 30, 40
    pw, ph = width - ml - mr, height - mt - mb
    x0, x1 = edges[0], edges[-1]

    def X(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def Y(y):
        return mt + ph - y / ymax * ph

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13" '
                     f'font-family="sans-serif">{_esc(title)}</text>')
    for lo, hi, v in zip(edges[:-1], edges[1:], pdf):
        parts.append(f'<rect x="{X(lo):.2f}" y="{Y(v):.2f}" width="{X(hi) - X(lo):.2f}" '
                     f'height="{Y(0) - Y(v):.2f}" fill="#9ecae1" stroke="#3182bd" stroke-width="0.5"/>')
    colors = ["#d62728", "#2ca02c", "#9467bd"]
    for k, (label, (xs, ys)) in enumerate(curves.items()):
        pts = " ".join(f"{X(x):.2f},{Y(y):.2f}" for x, y in zip(xs, ys))
        c = colors[k % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        parts.append(f'<text x="{ml + pw - 5}" y="{mt + 15 + 15 * k}" text-anchor="end" font-size="11" '
                     f'font-family="sans-serif" fill="{c}">{_esc(label)}</text>')
    parts.append(f'<line x1="{ml}" y1="{Y(0):.2f}" x2="{ml + pw}" y2="{Y(0):.2f}" stroke="black"/>')
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>')
    for t in np.linspace(x0, x1, 5):
        parts.append(f'<text x="{X(t):.2f}" y="{mt + ph + 15}" text-anchor="middle" font-size="10" '
                     f'font-family="sans-serif">{t:g}</text>')
    for t in np.linspace(0, ymax, 5):
        parts.append(f'<text x="{ml - 5}" y="{Y(t) + 3:.2f}" text-anchor="end" font-size="10" '
                     f'font-family="sans-serif">{t:.2f}</text>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 5}" text-anchor="middle" font-size="11" '
                 f'font-family="sans-serif">N sigma_min</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _write_text(path: str, text: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# commands

def cmd_onepoint(opts) -> int:
    from .contours import Tolerance
    from .onepoint import CSV_FIELDS, EvalRequest, QuadratureFailure, evaluate_many
    from .phases import FiniteParams, ScaledParams

    tol = Tolerance(rel_tol=opts["rel_tol"], abs_tol=opts["abs_tol"])
    target = opts["target"]
    compare = opts["compare"]
    valid = ("limit-real", "limit-complex", "limit-real-reduced", "finite-n")
    if target not in valid or (compare and compare not in valid):
        raise UsageError(f"target must be one of {', '.join(valid)}")
    reqs, cmp_reqs = [], []
    for lam in opts["lambda"]:
        for dt in opts["delta_t"]:
            if target == "finite-n":
                etas = opts["im_z_scaled"] if opts["im_z_scaled"] is not None else opts["eta_t"]
                for et in etas:
                    if opts["n"] > opts["n_max"]:
                        raise UsageError(f"N={opts['n']} exceeds --n-max={opts['n_max']}")
                    try:
                        fp = FiniteParams.from_scaled(opts["n"], lam, et, dt, opts["eps_frac"])
                    except ValueError as exc:
                        raise UsageError(str(exc)) from None
                    reqs.append(EvalRequest(target, fp, {}, tol))
                    if compare:
                        cmp_reqs.append(EvalRequest(compare, ScaledParams(lam, et, dt), {}, tol))
            else:
                for et in opts["eta_t"]:
                    try:
                        reqs.append(EvalRequest(target, ScaledParams(lam, et, dt), {}, tol))
                        if compare:
                            cp = ScaledParams(lam, 0.0 if compare == "limit-complex" else et, dt)
                            cmp_reqs.append(EvalRequest(compare, cp, {}, tol))
                    except ValueError as exc:
                        raise UsageError(str(exc)) from None
    threads = _threads(opts)
    results = evaluate_many(reqs, threads)
    cmp_results = evaluate_many(cmp_reqs, threads) if compare else []
    status = EXIT_OK
    fields = list(CSV_FIELDS)
    if compare:
        fields += ["compare_target", "compare_re", "compare_im", "abs_diff", "rate"]
    with _Out(opts["output"]) as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for k, res in enumerate(results):
            res, bad = _unwrap(res, reqs[k])
            if bad:
                status = EXIT_QUADRATURE
            row = res.csv_row() if res is not None else _failed_row(reqs[k])
            if compare:
                cres, cbad = _unwrap(cmp_results[k], cmp_reqs[k])
                if cbad:
                    status = EXIT_QUADRATURE
                row["compare_target"] = compare
                if cres is not None and res is not None:
                    v = res.value
                    if target == "finite-n":
                        p = reqs[k].params
                        v = v / p.n_dim / math.sqrt(p.n_dim)
                    d = abs(v - cres.value)
                    eta_col = cmp_reqs[k].params.eta_t if compare != "limit-complex" else reqs[k].params.eta_t
                    row.update(compare_re=repr(cres.value.real), compare_im=repr(cres.value.imag),
                               abs_diff=repr(d), rate=repr(d * abs(eta_col)))
            w.writerow(row)
    return status


def _unwrap(res, req):
    from .onepoint import QuadratureFailure
    if isinstance(res, QuadratureFailure):
        return res.result, True
    return res, not res.converged


def _failed_row(req):
    from .onepoint import CSV_FIELDS, OnePointValue
    dummy = OnePointValue(complex("nan+nanj"), float("nan"), float("nan"), {}, 0, False, req.target, req.params)
    return dummy.csv_row()


def _threads(opts) -> int:
    from .ginibre_mc import resolve_threads
    try:
        return resolve_threads(opts["threads"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _spec(opts, kind=None, z=None, seed=None):
    from .ginibre_mc import EnsembleSpec
    n = opts["n"]
    if z is None:
        z = opts["z"] if opts.get("im_z_scaled") is None else 1j * opts["im_z_scaled"] / math.sqrt(n)
    try:
        return EnsembleSpec(kind or opts["kind"], n, z, opts["seed"] if seed is None else seed, opts["samples"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_mc(opts) -> int:
    from . import ginibre_mc as mc

    spec = _spec(opts)
    threads = _threads(opts)
    if not (opts["hist"] or opts["resolvent"] or opts["sigma_dump"] or opts["svg"]):
        opts["hist"] = True
    with _Out(opts["output"]) as fh:
        if opts["hist"] or opts["svg"] or opts["sigma_dump"]:
            if spec.n_samples < 1000 and (opts["hist"] or opts["svg"]):
                raise UsageError("a histogram needs at least 1000 samples")
            smin = mc.smallest_singular_values(spec, threads)
            if opts["hist"]:
                tab = mc.smallest_sv_histogram(spec, bins=opts["bins"], range_=(0.0, opts["range_max"]), data=smin)
                tab.to_csv(fh)
            if opts["svg"]:
                tab = mc.smallest_sv_histogram(spec, bins=opts["bins"], range_=(0.0, opts["range_max"]), data=smin)
                xs = np.linspace(0, opts["range_max"], 200)
                curves = {}
                if spec.z == 0:
                    curves = {f"limit law ({spec.kind.value})": (xs, mc.edelman_density(spec.kind, xs))}
                _write_text(opts["svg"], svg_histogram(tab, curves, f"{spec.kind.value}, N={spec.n_dim}, z={spec.z}"))
            if opts["sigma_dump"]:
                with open(opts["sigma_dump"], "w", encoding="utf-8", newline="") as dh:
                    mc.write_sigma_min_csv(dh, smin)
        if opts["resolvent"]:
            E = opts["lambda"] * spec.n_dim ** -1.5
            eps = opts["eps_frac"] * E
            if not eps > 0:
                raise UsageError("the resolvent needs eps-frac > 0")
            r = mc.resolvent_trace_mean(spec, E, eps, threads)
            mc.write_resolvent_csv(fh, [{"E": E, "eps": eps, **r}])
    return EXIT_OK


# validation suites: name -> callable(opts) -> (passed, rows)

def _admissible_points(rng, n):
    """n points in |Re|, |Im| <= 3 away from 0, -1 and the cut (-inf, -1]."""
    out = []
    while len(out) < n:
        a = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
        if abs(a) > 0.05 and abs(1 + a) > 0.05 and not (a.real < -1 and abs(a.imag) < 1e-3):
            out.append(a)
    return np.array(out)


def _suite_identities(opts):
    from .phases import ScaledParams, f_finite, frak_f, frak_g, g_continued
    rng = np.random.default_rng(opts["seed"])
    a = _admissible_points(rng, 1000)
    d1 = max(float(np.max(np.abs(frak_g(a, 1.0, p) - frak_f(a, p))))
             for p in (ScaledParams(1.3, 0.7, 0.0), ScaledParams(0.5, 2.0, 12.0)))
    w = 0.01 + 0.002j
    d2 = float(np.max(np.abs(g_continued(a, 1.0, 0.3, w, 0.8) - f_finite(a, w, 0.8))))
    ok = d1 < 1e-12 and d2 < 1e-12
    return ok, [{"check": "frak g(a,1) = frak f(a)", "max_dev": d1}, {"check": "g(a,1) = f(a)", "max_dev": d2}]


def _suite_lemma(opts):
    from .phases import LEMMA_CASES, re_g_lower_bound_check, sample_lemma_case
    rng = np.random.default_rng(opts["seed"])
    rows, ok = [], True
    for case in LEMMA_CASES:
        m = math.inf
        count = 0
        while count < opts["grid_size"]:
            smp = sample_lemma_case(case, rng)
            if smp is None:
                continue
            tau, a, p = smp
            m = min(m, re_g_lower_bound_check(tau, a, p, case)["margin"])
            count += 1
        ok = ok and m >= 0
        rows.append({"case": case, "points": count, "min_margin": m, "pass": m >= 0})
    return ok, rows


def _suite_monotone(opts):
    from .phases import monotone_grid, monotone_ray_report
    n = mono = dom = 0
    worst = 0.0
    for t, E, x in monotone_grid():
        r = monotone_ray_report(t, E, x)
        n += 1
        mono += r["monotone"]
        dom += r["eta_dominates"]
        worst = min(worst, r["worst_eta_gap"])
    rows = [{"check": "Re g(x e^{i pi/6}) nonincreasing", "passed": mono, "of": n},
            {"check": "Re g(eta) >= Re g(0)", "passed": dom, "of": n, "worst_gap": worst}]
    return mono == n and dom == n, rows


def _suite_small_regime(opts):
    from .onepoint import small_regime_mass
    from .phases import FiniteParams
    p = FiniteParams.from_scaled(100, 1.0, 1.0)
    m = small_regime_mass(p, 0.1)
    return m < 1e-3, [{"check": "small-regime mass / |value| (N=100, omega=0.1)", "value": m, "limit": 1e-3}]


def _suite_expansion(opts):
    from .phases import expansion_report
    reps = [expansion_report(R) for R in (1e2, 1e3, 1e4)] + \
        [expansion_report(R, eta_t=1.5, delta_t=2.0) for R in (1e2, 1e3, 1e4)]
    rows, ok = [], True
    for k in (0, 3):
        for key in ("f", "g", "G1", "G2"):
            r = [reps[k + i][key] for i in range(3)]
            ratios = [r[0] / r[1], r[1] / r[2]] if r[1] and r[2] else [10.0, 10.0]
            good = all(2.0 <= q <= 50.0 for q in ratios)
            ok = ok and good
            rows.append({"check": f"{key} deviation ~ 1/R", "devs": r, "pass": good})
    ok = ok and not any(rep["missing"] for rep in reps)
    return ok, rows


def _suite_tau_collapse(opts):
    from .contours import RAY_DIRECTION, Z0
    from .onepoint import tau_collapse_integral
    etas = sorted(opts["eta_t"])
    pts = [cmath.exp(1j * math.pi / 3), 0.7 * Z0, cmath.exp(1j * math.pi / 3) + 1.5 * RAY_DIRECTION]
    rows, ok = [], True
    for a in pts:
        for g in (0.5, 1.5):
            res = []
            for et in etas:
                v, _ = tau_collapse_integral(a, g, et)
                res.append(abs(v - 1 / (2 * et ** 2)))
            K = res[0] * etas[0] ** 3
            good = all(r <= K * et ** -3 for r, et in zip(res[1:], etas[1:]))
            ok = ok and good
            rows.append({"a": repr(a), "gamma": g, "residuals": res, "K": K, "pass": good})
    return ok, rows


def _suite_positivity(opts):
    from .onepoint import eval_limit_real
    from .phases import ScaledParams
    rows, ok = [], True
    for lam in np.geomspace(0.1, 10, 20):
        r = eval_limit_real(ScaledParams(float(lam), 1.0, 0.0), strict=False)
        good = r.value.imag >= -10 * r.err_estimate
        ok = ok and good
        rows.append({"lambda": float(lam), "im": r.value.imag, "err": r.err_estimate, "pass": good})
    return ok, rows


SUITES: Dict[str, Callable] = {
    "identities": _suite_identities,
    "lemma-lower-bounds": _suite_lemma,
    "monotone-ray": _suite_monotone,
    "expansion": _suite_expansion,
    "tau-collapse": _suite_tau_collapse,
    "positivity": _suite_positivity,
    "small-regime": _suite_small_regime,
}


def cmd_validate(opts) -> int:
    names = list(SUITES) if opts["suite"] == "all" else opts["suite"].split(",")
    bad = [n for n in names if n not in SUITES]
    if bad:
        raise UsageError(f"unknown suite(s): {', '.join(bad)}")
    summary = {}
    with _Out(opts["output"]) as fh:
        for n in names:
            t0 = time.time()
            ok, rows = SUITES[n](opts)
            summary[n] = {"pass": bool(ok), "seconds": time.time() - t0, "rows": rows}
            fh.write(f"{'PASS' if ok else 'FAIL'}  {n}  ({summary[n]['seconds']:.1f} s)\n")
            for r in rows:
                fh.write("      " + ", ".join(f"{k}={_fmt(v)}" for k, v in r.items()) + "\n")
    if opts["report"]:
        _write_text(opts["report"], json.dumps(summary, indent=2, default=str) + "\n")
    return EXIT_OK if all(s["pass"] for s in summary.values()) else EXIT_VALIDATION


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def cmd_figure1(opts) -> int:
    from . import ginibre_mc as mc

    n = opts["n"]
    out = Path(opts["outdir"])
    out.mkdir(parents=True, exist_ok=True)
    threads = _threads(opts)
    panels = [("panel1", 0j), ("panel2", 0.2j / math.sqrt(n)), ("panel3", 5j / math.sqrt(n))]
    xs = np.linspace(0, 3.2, 200)
    summary = []
    for k, (name, z) in enumerate(panels):
        data = {}
        for j, kind in enumerate(("real", "complex")):
            spec = _spec({**opts, "kind": kind, "im_z_scaled": None, "z": z}, seed=opts["seed"] + 10 * k + j)
            smin = mc.smallest_singular_values(spec, threads)
            data[kind] = (spec, smin)
            tab = mc.smallest_sv_histogram(spec, data=smin)
            with _Out(str(out / f"{name}_{kind}.csv")) as fh:
                tab.to_csv(fh)
        rs, cs = data["real"][1] * n, data["complex"][1] * n
        ks_rc = mc.ks_two_sample(rs, cs)
        row = {"panel": name, "z": z, "ks_real_complex": ks_rc}
        curves = {}
        if k == 0:
            row["ks_real_limit"] = mc.ks_to_edelman("real", rs)
            row["ks_complex_limit"] = mc.ks_to_edelman("complex", cs)
            curves = {"(1+x) exp(-x^2/2-x)": (xs, mc.edelman_density("real", xs)),
                      "2x exp(-x^2)": (xs, mc.edelman_density("complex", xs))}
        tab_r = mc.smallest_sv_histogram(data["real"][0], data=data["real"][1])
        _write_text(str(out / f"{name}.svg"), svg_histogram(tab_r, curves, f"real, N={n}, z={z:.4g}"))
        summary.append(row)
    with _Out(opts["output"]) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["panel", "re_z", "im_z", "ks_real_complex", "ks_real_limit", "ks_complex_limit"])
        for r in summary:
            w.writerow([r["panel"], repr(r["z"].real), repr(r["z"].imag), repr(r["ks_real_complex"]),
                        repr(r["ks_real_limit"]) if "ks_real_limit" in r else "",
                        repr(r["ks_complex_limit"]) if "ks_complex_limit" in r else ""])
    return EXIT_OK


HANDLERS = {"onepoint": cmd_onepoint, "mc": cmd_mc, "validate": cmd_validate, "figure1": cmd_figure1}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        if not ns.command:
            raise UsageError("a command is required: onepoint, mc, validate or figure1")
        opts = resolve_options(ns.command, ns)
        return HANDLERS[ns.command](opts)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
