"""One-point function of the shifted Ginibre ensemble near the spectral edge.

Four evaluators are provided:

* :func:`eval_limit_real`, the limiting real-ensemble integral over
  (xi, tau, a) in rescaled variables,
* :func:`eval_limit_complex`, the limiting complex-ensemble integral,
* :func:`eval_limit_real_reduced`, the large-eta_t leading form of the real one,
* :func:`eval_finite_n`, the exact finite-N representation of
  E Tr (Y - w)^{-1}.

Every integrand separates into a xi-factor times an (a, tau)-factor, so each
value is assembled as a sum over prefactor monomials of a one-dimensional
xi-moment times a two-dimensional (a, tau)-moment.  The (a, tau)-moments are
computed with tau outside and a inside because the a-contour scale depends on
tau.
"""
from __future__ import annotations

import cmath
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import _backend
from .contours import (
    Contour, DecayThreshold, FixedLength, LineSegment, QuadratureError, Ray, Tolerance,
    integrate, limit_a_scale, r_scale, standard_gamma, standard_lambda, standard_omega,
)
from .phases import (
    BranchTracker, FiniteParams, PoleHit, ScaledParams, _quad_roots, exp_Nf, frak_f, frak_g,
    finite_G_terms, limit_G_terms, safe_exp, H_terms,
)

__all__ = [
    "QuadratureFailure", "ContourPole", "EvalRequest", "OnePointValue", "DEFAULT_TOL", "N_MAX",
    "eval_limit_real", "eval_limit_complex", "eval_limit_real_reduced", "eval_finite_n",
    "evaluate", "evaluate_many", "small_regime_mass", "tau_collapse_integral",
    "CSV_FIELDS",
]

DEFAULT_TOL = Tolerance(rel_tol=1e-9, abs_tol=1e-13)
#: quadrature cost guard for the finite-N evaluator
N_MAX = 200
#: inner (a) quadratures run this much tighter than the outer tau quadrature
INNER_FACTOR = 1e-2
#: distance below which a contour counts as passing through a pole of D^{-N/2}
POLE_DISTANCE = 1e-8
X_RAY_DIRECTION = cmath.exp(3j * math.pi / 4)


class QuadratureFailure(QuadratureError):
    """A sub-integral failed; ``result`` holds the unconverged estimate if one exists."""

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class ContourPole(PoleHit):
    pass


@dataclass
class OnePointValue:
    """Result of one evaluation.

    ``density`` is Im value / pi.  ``decomposition`` maps a monomial label to
    its contribution; the entries sum to ``value``.
    """
    value: complex
    err_estimate: float
    density: float
    decomposition: Dict[str, complex]
    n_evals: int
    converged: bool
    target: str = ""
    params: Optional[Union[ScaledParams, FiniteParams]] = None

    def csv_row(self) -> Dict[str, str]:
        row = {k: "" for k in CSV_FIELDS}
        row["target"] = self.target
        p = self.params
        if isinstance(p, ScaledParams):
            row.update(lam=repr(p.lam), eta_t=repr(p.eta_t), delta_t=repr(p.delta_t))
        elif isinstance(p, FiniteParams):
            row.update(n=str(p.n_dim), energy=repr(p.energy), eta=repr(p.eta), absz2=repr(p.absz2),
                       epsilon=repr(p.epsilon))
        row.update(re=repr(self.value.real), im=repr(self.value.imag),
                   err_estimate=repr(self.err_estimate), n_evals=str(self.n_evals),
                   converged="true" if self.converged else "false")
        return row


CSV_FIELDS = ("target", "lam", "eta_t", "delta_t", "n", "energy", "eta", "absz2", "epsilon",
              "re", "im", "err_estimate", "n_evals", "converged")


@dataclass(frozen=True)
class EvalRequest:
    """One evaluation: target in {"limit-real", "limit-complex", "limit-real-reduced", "finite-n"}."""
    target: str
    params: Union[ScaledParams, FiniteParams]
    contour_overrides: Mapping[str, object] = field(default_factory=dict)
    tol: Tolerance = DEFAULT_TOL

    def __post_init__(self):
        if self.target not in _DISPATCH:
            raise ValueError(f"unknown target {self.target!r}")
        want = FiniteParams if self.target == "finite-n" else ScaledParams
        if not isinstance(self.params, want):
            raise TypeError(f"target {self.target} needs {want.__name__}")


# ---------------------------------------------------------------------------
# helpers

def _straight_pieces(c: Contour):
    """(start, unit direction, length) per piece; length is inf for a decay-cut ray."""
    out = []
    for seg in c.segments:
        if isinstance(seg, LineSegment):
            d = complex(seg.end - seg.start)
            out.append((complex(seg.start), d / abs(d), abs(d)))
        elif isinstance(seg, Ray):
            L = seg.truncation.length if isinstance(seg.truncation, FixedLength) else math.inf
            out.append((complex(seg.start), complex(seg.direction), L))
        else:
            raise ValueError("the a-contour must consist of straight pieces and a ray")
    return out


def _lambda_contour(overrides, scale) -> Contour:
    lam = overrides.get("lambda")
    scale = scale * float(overrides.get("lambda_scale", 1.0))
    if lam is None:
        return standard_lambda(scale)
    if isinstance(lam, Contour):
        return lam
    return lam(scale)


def _a_moments(kind, params, tau, contour, powers, tol: Tolerance, scale):
    """Moments sum_pieces of a^k e^{L} (w) along ``contour`` for every k in ``powers``."""
    roots = tuple(_quad_roots(tau)) if kind == 1 else (0j, 0j)
    if len(roots) == 1:
        roots = (roots[0], roots[0])
    tracker = BranchTracker.for_quadratic(tau) if kind == 1 else None
    total = 0
    err = 0.0
    n = 0
    ok = True
    for start, d, L in _straight_pieces(contour):
        if tracker is not None:
            logD0 = tracker.advance(start) if start != tracker.base_point else \
                complex(tracker.log_at(start))
        else:
            logD0 = 0j
        v, e, ne, conv, _ = _backend.segment_moments(
            kind, params, complex(tau), roots, start, d, float(L), powers, complex(logD0),
            tol.rel_tol, max(tol.abs_tol, 1e-300), tol.max_depth, 46.0, float(scale))
        total = total + v
        err += e
        n += ne
        ok = ok and conv
    return total, err, n, ok


def _tau_moments(kind, params, omega: Contour, a_powers, cols, tol: Tolerance, scale_of, lam_of):
    """Outer tau quadrature of a-moments.

    ``cols`` lists (index into ``a_powers``, tau exponent) pairs; column j of
    the result is the integral over Omega of tau^{exponent_j} times the a-moment.
    An extra trailing column integrates the inner error estimate.
    """
    ai = np.array([c[0] for c in cols], dtype=int)
    te = np.array([c[1] for c in cols], dtype=float)
    inner_tol = tol.scaled(INNER_FACTOR)
    state = {"n": 0, "ok": True}

    def f(taus):
        out = np.zeros((taus.size, len(cols) + 1), dtype=complex)
        for i, t in enumerate(taus):
            t = complex(t)
            sc = scale_of(t)
            v, e, n, ok = _a_moments(kind, params, t, lam_of(sc), a_powers, inner_tol, sc)
            state["n"] += n
            state["ok"] = state["ok"] and ok
            out[i, :-1] = v[ai] * np.exp(te * cmath.log(t))
            # inner error, weighted by the largest tau factor in play
            out[i, -1] = e * max(1.0, float(np.max(np.abs(np.exp(te * cmath.log(t))))))
        return out

    res = integrate(f, omega, tol)
    vals = np.asarray(res.value)
    inner_err = abs(vals[-1])
    return vals[:-1], res.err_estimate + inner_err, res.n_evals + state["n"], res.converged and state["ok"]


def _masked_moments(x, base, powers):
    """x^p * base with nodes where base == 0 left at exactly 0 (avoids inf * 0)."""
    out = np.zeros((x.size, len(powers)), dtype=complex)
    live = base != 0
    if live.any():
        out[live] = x[live, None] ** np.asarray(powers, dtype=float)[None, :] * base[live, None]
    return out


def _xi_moments_limit(p: ScaledParams, gamma: Contour, betas, tol: Tolerance):
    """Xi(beta) = closed integral of xi^{2-beta} e^{frak f(xi)} for each beta."""
    pw = [2 - b for b in betas]

    def f(x):
        return _masked_moments(x, safe_exp(frak_f(x, p)), pw)

    res = integrate(f, gamma, tol)
    return dict(zip(betas, np.asarray(res.value))), res.err_estimate, res.n_evals, res.converged


def _check_gamma(gamma: Contour):
    if not gamma.closed:
        raise ValueError("the xi-contour must be closed")


def _limit_gamma(p: ScaledParams, overrides):
    g = overrides.get("gamma")
    if g is None:
        return standard_gamma(radius=(p.m * p.lam) ** (-1.0 / 3.0))
    _check_gamma(g)
    return g


def _finish(target, params, terms, err, n, ok, strict):
    """terms: list of (label, contribution, error) -> OnePointValue."""
    value = complex(sum(t[1] for t in terms))
    err = err + sum(t[2] for t in terms)
    parts: Dict[str, complex] = {}
    for label, contrib, _ in terms:
        parts[label] = parts.get(label, 0j) + complex(contrib)
    res = OnePointValue(value, float(err), value.imag / math.pi, parts, int(n), bool(ok), target, params)
    if strict and not ok:
        raise QuadratureFailure(f"{target}: quadrature did not converge", res)
    return res


def _wrap(fn):
    def inner(*args, **kw):
        try:
            return fn(*args, **kw)
        except QuadratureFailure:
            raise
        except QuadratureError as exc:
            raise QuadratureFailure(f"{fn.__name__}: {exc}") from exc
    inner.__name__ = fn.__name__
    inner.__doc__ = fn.__doc__
    inner.__wrapped__ = fn
    return inner


# ---------------------------------------------------------------------------
# limiting integrals

@_wrap
def eval_limit_real(p: ScaledParams, tol: Optional[Tolerance] = None, *,
                    overrides: Optional[Mapping[str, object]] = None, strict: bool = True) -> OnePointValue:
    """Limiting real-ensemble one-point function I_R(lambda, eta_t, delta_t).

    Parameters
    ----------
    p : ScaledParams
    tol : Tolerance, optional
        Outer tolerance; the inner a-quadratures run 100 times tighter.
    overrides : mapping, optional
        ``gamma`` (closed Contour), ``omega`` (Contour from 0 to 1), ``lambda``
        (Contour, or callable scale -> Contour) and ``lambda_scale`` (factor
        applied to the default a-contour scale).
    strict : bool
        Raise :class:`QuadratureFailure` when a quadrature does not converge.

    Returns
    -------
    OnePointValue
    """
    tol = tol or DEFAULT_TOL
    ov = dict(overrides or {})
    terms = limit_G_terms(p)
    gamma = _limit_gamma(p, ov)
    omega = ov.get("omega") or standard_omega()
    alphas = sorted({t.alpha for t in terms})
    pairs = sorted({(t.alpha, t.gamma) for t in terms})
    betas = sorted({t.beta for t in terms})
    a_powers = [1 - al for al in alphas]
    cols = [(alphas.index(al), -0.5 - g) for al, g in pairs]
    params = (p.m * p.lam, p.eta_t ** 2, p.delta_t)
    A, errA, nA, okA = _tau_moments(0, params, omega, a_powers, cols, tol,
                                    lambda t: limit_a_scale(p.m * p.lam, t),
                                    lambda sc: _lambda_contour(ov, sc))
    Amap = dict(zip(pairs, A))
    Xi, errX, nX, okX = _xi_moments_limit(p, gamma, betas, tol)
    pre = 1.0 / (4j * math.pi)
    out = []
    for t in terms:
        a_val = Amap[(t.alpha, t.gamma)]
        x_val = Xi[t.beta]
        c = complex(t.coeff)
        out.append((f"a^-{t.alpha} tau^-{t.gamma} xi^-{t.beta}", pre * c * x_val * a_val,
                    abs(pre * c) * (abs(x_val) * errA + abs(a_val) * errX)))
    return _finish("limit-real", p, out, 0.0, nA + nX, okA and okX, strict)


def _x_moments_complex(p: ScaledParams, powers, tol, x0=None, direction=X_RAY_DIRECTION):
    """X(k) = integral of x^{-k} e^{-h(x)} from 0 through x0 to infinity along ``direction``."""
    x0 = (p.m * p.lam) ** (-1.0 / 3.0) if x0 is None else x0
    pw = [-k for k in powers]
    c = Contour([LineSegment(0j, complex(x0)),
                 Ray(complex(x0), direction, DecayThreshold(probe=lambda x: -frak_f(x, p)))])

    def f(x):
        return _masked_moments(x, safe_exp(-frak_f(x, p)), pw)

    res = integrate(f, c, tol, ray_scale=abs(x0))
    return dict(zip(powers, np.asarray(res.value))), res.err_estimate, res.n_evals, res.converged


@_wrap
def eval_limit_complex(p: ScaledParams, tol: Optional[Tolerance] = None, *,
                       overrides: Optional[Mapping[str, object]] = None,
                       strict: bool = True) -> OnePointValue:
    """Limiting complex-ensemble one-point function I_C(lambda, delta_t).

    The x-path runs from 0 along the positive axis to (m lambda)^{-1/3} and
    then to infinity in direction e^{3 i pi/4}; the y-circle is ``gamma``
    (override key ``gamma``) and the y-moments coincide with the xi-moments
    of the real case.  Override ``x0`` moves the x-knot.
    """
    tol = tol or DEFAULT_TOL
    ov = dict(overrides or {})
    rows = H_terms(p)
    gamma = _limit_gamma(p, ov)
    xs = sorted({r[1] for r in rows})
    ys = sorted({r[2] for r in rows})
    X, errX, nX, okX = _x_moments_complex(p, xs, tol, ov.get("x0"))
    # y^{-q} = xi^{2 - beta} with beta = q + 2
    Y, errY, nY, okY = _xi_moments_limit(p, gamma, [q + 2 for q in ys], tol)
    pre = 1.0 / (2j * math.pi)
    out = []
    for c, px, qy in rows:
        xv, yv = X[px], Y[qy + 2]
        out.append((f"x^-{px} y^-{qy}", pre * c * xv * yv,
                    abs(pre * c) * (abs(xv) * errY + abs(yv) * errX)))
    return _finish("limit-complex", p, out, 0.0, nX + nY, okX and okY, strict)


@_wrap
def eval_limit_real_reduced(p: ScaledParams, tol: Optional[Tolerance] = None, *,
                            overrides: Optional[Mapping[str, object]] = None,
                            strict: bool = True) -> OnePointValue:
    """Large-eta_t leading form of I_R: the tau-integral collapsed to tau = 1.

    Evaluates (1/(8 pi i eta_t^2)) sum_monomials c Xi(beta) B(alpha) with
    B(alpha) the a-integral of a^{1-alpha} e^{-frak f(a)} along Lambda and
    the prefactor taken at tau = 1.
    """
    if p.eta_t == 0:
        raise ValueError("the reduced form needs eta_t != 0")
    tol = tol or DEFAULT_TOL
    ov = dict(overrides or {})
    folded: Dict[Tuple[int, int], complex] = {}
    for t in limit_G_terms(p):
        folded[(t.alpha, t.beta)] = folded.get((t.alpha, t.beta), 0) + complex(t.coeff)
    folded = {k: v for k, v in folded.items() if v != 0}
    alphas = sorted({k[0] for k in folded})
    betas = sorted({k[1] for k in folded})
    gamma = _limit_gamma(p, ov)
    sc = limit_a_scale(p.m * p.lam, 1.0)
    B, errB, nB, okB = _a_moments(0, (p.m * p.lam, 0.0, p.delta_t), 1.0 + 0j, _lambda_contour(ov, sc),
                                  [1 - al for al in alphas], tol.scaled(INNER_FACTOR), sc)
    Bmap = dict(zip(alphas, B))
    Xi, errX, nX, okX = _xi_moments_limit(p, gamma, betas, tol)
    pre = 1.0 / (8j * math.pi * p.eta_t ** 2)
    out = []
    for (al, be), c in sorted(folded.items()):
        bv, xv = Bmap[al], Xi[be]
        out.append((f"a^-{al} xi^-{be}", pre * c * xv * bv,
                    abs(pre * c) * (abs(xv) * errB + abs(bv) * errX)))
    return _finish("limit-real-reduced", p, out, 0.0, nB + nX, okB and okX, strict)


# ---------------------------------------------------------------------------
# finite N

def _min_distance(contour: Contour, pt: complex) -> float:
    best = math.inf
    for start, d, L in _straight_pieces(contour):
        s = ((pt - start) * d.conjugate()).real
        s = min(max(s, 0.0), L)
        best = min(best, abs(start + d * s - pt))
    return best


def _finite_lambda(ov, tau, p: FiniteParams):
    """r Lambda for this tau, nudged by +-1% (up to 5 times) away from the zeros of D."""
    r0 = r_scale(p.eta_t, p.energy, tau)
    roots = _quad_roots(tau)
    for k in range(6):
        # 0, +1%, -1%, +2%, -2%, +3%
        step = (k + 1) // 2 * (1 if k % 2 else -1)
        r = r0 * (1 + 0.01 * step)
        c = _lambda_contour(ov, r)
        if all(_min_distance(c, rt) > POLE_DISTANCE * max(1.0, abs(rt)) for rt in roots):
            return c, r
    raise ContourPole(f"a-contour at tau={tau} stays within {POLE_DISTANCE} of a zero of D")


def _finite_gamma(p: FiniteParams, ov):
    g = ov.get("gamma")
    if g is None:
        return standard_gamma(p.energy)
    _check_gamma(g)
    return g


def _xi_moments_finite(p: FiniteParams, gamma, keys, tol):
    kx = np.array([k[0] for k in keys], dtype=float)
    q = np.array([k[1] for k in keys], dtype=float)

    def f(x):
        base = exp_Nf(x, p.n_dim, p.w, p.absz2)
        out = np.zeros((x.size, len(keys)), dtype=complex)
        live = base != 0
        if live.any():
            xl = x[live, None]
            out[live] = xl ** kx[None, :] * (1 + xl) ** (-q[None, :]) * base[live, None]
        return out

    res = integrate(f, gamma, tol)
    return dict(zip(keys, np.asarray(res.value))), res.err_estimate, res.n_evals, res.converged


@_wrap
def eval_finite_n(p: FiniteParams, tol: Optional[Tolerance] = None, *,
                  overrides: Optional[Mapping[str, object]] = None, n_max: int = N_MAX,
                  strict: bool = True) -> OnePointValue:
    """Exact E Tr (Y - w)^{-1} at finite N, w = E + i epsilon.

    The a-contour r Lambda is rebuilt at every tau node with r from
    :func:`ginibre_sv.contours.r_scale`; D^{-N/2} is continued along it from
    a = 0, so odd N is handled too.

    Parameters
    ----------
    p : FiniteParams
    n_max : int
        Cost guard; larger N raises ``ValueError`` unless this is raised.
    """
    if p.n_dim > n_max:
        raise ValueError(f"N={p.n_dim} exceeds n_max={n_max}; pass a larger n_max to proceed")
    tol = tol or DEFAULT_TOL
    ov = dict(overrides or {})
    G = finite_G_terms(p)
    gamma = _finite_gamma(p, ov)
    omega = ov.get("omega") or standard_omega()
    xkeys = sorted({(k[0], k[1]) for k in G})
    akeys = sorted({k[2] for k in G})
    tkeys = sorted({(k[2], k[3]) for k in G})
    cols = [(akeys.index(ka), l - 0.5) for ka, l in tkeys]
    params = (float(p.n_dim), p.energy, p.epsilon, p.eta ** 2, p.absz2)
    lam_cache = {}

    def scale_of(t):
        c, r = _finite_lambda(ov, t, p)
        lam_cache[r] = c
        return r

    A, errA, nA, okA = _tau_moments(1, params, omega, akeys, cols, tol, scale_of,
                                    lambda r: lam_cache.pop(r))
    Amap = dict(zip(tkeys, A))
    M, errM, nM, okM = _xi_moments_finite(p, gamma, xkeys, tol)
    pre = p.n_dim / (4j * math.pi)
    out = []
    for k, c in sorted(G.items()):
        xv, av = M[(k[0], k[1])], Amap[(k[2], k[3])]
        out.append((f"xi^{k[0]} (1+xi)^-{k[1]} a^{k[2]} tau^{k[3]}", pre * c * xv * av,
                    abs(pre * c) * (abs(xv) * errA + abs(av) * errM)))
    return _finish("finite-n", p, out, 0.0, nA + nM, okA and okM, strict)


_DISPATCH: Dict[str, Callable] = {
    "limit-real": eval_limit_real,
    "limit-complex": eval_limit_complex,
    "limit-real-reduced": eval_limit_real_reduced,
    "finite-n": eval_finite_n,
}


def evaluate(req: EvalRequest, strict: bool = True) -> OnePointValue:
    return _DISPATCH[req.target](req.params, req.tol, overrides=req.contour_overrides, strict=strict)


def _evaluate_loose(req):
    try:
        return evaluate(req, strict=False)
    except QuadratureFailure as exc:
        return exc


def evaluate_many(reqs: Sequence[EvalRequest], threads: int = 1) -> List[Union[OnePointValue, QuadratureFailure]]:
    """Evaluate independent requests, in order; failures are returned, not raised."""
    if threads <= 1 or len(reqs) <= 1:
        return [_evaluate_loose(r) for r in reqs]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(_evaluate_loose, reqs))


# ---------------------------------------------------------------------------
# diagnostics

def _abs_xi_moments(p: FiniteParams, gamma, keys, tol, cut=None):
    kx = np.array([k[0] for k in keys], dtype=float)
    q = np.array([k[1] for k in keys], dtype=float)

    def f(x):
        base = np.abs(exp_Nf(x, p.n_dim, p.w, p.absz2))
        if cut is not None:
            base = np.where(np.abs(x) > cut, base, 0.0)
        out = np.zeros((x.size, len(keys)))
        live = base != 0
        if live.any():
            xl = np.abs(x[live, None])
            out[live] = xl ** kx[None, :] * np.abs(1 + x[live, None]) ** (-q[None, :]) * base[live, None]
        return out

    # integrate |.| |dxi| by feeding |dxi/dt| through a unit-modulus rotation
    segs = gamma.segments
    total = 0
    for seg in segs:
        c = Contour([seg])

        def g(x, seg=seg):
            # |dxi| = |xi - center| dtheta for arcs; the engine multiplies by dxi
            rot = np.conj(1j * (x - seg.center)) / np.abs(x - seg.center) * np.sign(seg.angle_end - seg.angle_start)
            return f(x) * rot[:, None]
        total = total + np.real(np.asarray(integrate(g, c, tol).value))
    return dict(zip(keys, total))


def _abs_a_tau_moments(p: FiniteParams, omega, tkeys, tol, tau_cut=None, a_cut_num=None):
    """Integral of |tau^{l-1/2} a^{ka} e^{-N g} / D^2| |da| |dtau| over Omega x r Lambda.

    With ``tau_cut``/``a_cut_num`` only |tau| > tau_cut and |a| > a_cut_num/|tau| count.
    """
    akeys = sorted({k[0] for k in tkeys})
    ka = np.array(akeys, dtype=float)
    ai = np.array([akeys.index(k[0]) for k in tkeys])
    lt = np.array([k[1] - 0.5 for k in tkeys])
    N = p.n_dim

    def inner(t):
        r = r_scale(p.eta_t, p.energy, t)
        lam = standard_lambda(r)
        acut = 0.0 if a_cut_num is None else a_cut_num / abs(t)

        def lg(a):
            D = 1 + 2 * a + a * a * t
            return N * (p.energy * a.real - p.epsilon * a.imag + np.log(np.abs(a))
                        + 0.5 * math.log(abs(t)) - 0.5 * np.log(np.abs(D))
                        + np.real((p.absz2 * (1 + a) - 2 * p.eta ** 2 * a * a * (1 - t)) / D)), D

        def f(a):
            L, D = lg(a)
            base = safe_exp(L).real / np.abs(D) ** 2
            base = np.where(np.abs(a) > acut, base, 0.0)
            return _masked_moments(np.abs(a), base, ka).real

        total = 0
        for seg in lam.segments:
            d = seg.direction if isinstance(seg, Ray) else (seg.end - seg.start) / abs(seg.end - seg.start)
            if isinstance(seg, Ray):
                seg = Ray(seg.start, seg.direction, DecayThreshold(probe=lambda a: lg(a)[0]))

            def g(a, d=d):
                return f(a) * np.conj(d)
            total = total + np.real(np.asarray(integrate(g, Contour([seg]), tol, ray_scale=r).value))
        return total

    def outer(taus):
        out = np.zeros((taus.size, len(tkeys)))
        for i, t in enumerate(taus):
            t = complex(t)
            if tau_cut is not None and abs(t) <= tau_cut:
                continue
            out[i] = inner(t)[ai] * np.abs(t) ** lt
        return out

    total = 0
    for seg in omega.segments:
        d = (seg.end - seg.start) / abs(seg.end - seg.start)

        def g(t, d=d):
            return outer(t) * np.conj(d)
        total = total + np.real(np.asarray(integrate(g, Contour([seg]), tol).value))
    return dict(zip(tkeys, total))


def small_regime_mass(p: FiniteParams, omega_exp: float, tol: Optional[Tolerance] = None,
                      value: Optional[complex] = None) -> float:
    """Absolute integrand mass carried by the small-variable regimes, relative to |value|.

    The small regimes are |xi| <= N^w on the xi-circle, |tau| <= N^{-w} on the
    tau-contour and |a| <= N^{2w}/|tau| on the a-contour.  The mass of their
    union is bounded through the triangle inequality by

        sum_monomials |c| (X_full A_full - X_out A_out) / |value|

    where X and A are integrals of the integrand moduli over the full
    contours and over the complements of the small regimes.
    """
    if not 0 < omega_exp <= 0.2:
        raise ValueError("omega_exp must lie in (0, 0.2]")
    tol = tol or Tolerance(rel_tol=1e-6, abs_tol=1e-300, max_depth=30)
    if value is None:
        value = eval_finite_n(p, strict=False).value
    N = p.n_dim
    G = finite_G_terms(p)
    gamma = standard_gamma(p.energy)
    omega = standard_omega()
    xkeys = sorted({(k[0], k[1]) for k in G})
    tkeys = sorted({(k[2], k[3]) for k in G})
    Xf = _abs_xi_moments(p, gamma, xkeys, tol)
    Xo = _abs_xi_moments(p, gamma, xkeys, tol, cut=N ** omega_exp)
    Af = _abs_a_tau_moments(p, omega, tkeys, tol)
    Ao = _abs_a_tau_moments(p, omega, tkeys, tol, tau_cut=N ** -omega_exp, a_cut_num=N ** (2 * omega_exp))
    pre = N / (4 * math.pi)
    mass = 0.0
    for k, c in G.items():
        xk, tk = (k[0], k[1]), (k[2], k[3])
        mass += pre * abs(c) * (Xf[xk] * Af[tk] - Xo[xk] * Ao[tk])
    return float(mass / abs(value))


def _cut_omega(omega: Contour, cut: float) -> Contour:
    """Part of a tau-contour (with |tau| increasing along it) where |tau| >= cut."""
    segs = list(omega.segments)
    for i, s in enumerate(segs):
        if abs(s.end) > cut:
            if abs(s.start) >= cut:
                return Contour(segs[i:])
            # |start + t (end - start)| = cut
            d = s.end - s.start
            A = abs(d) ** 2
            B = 2 * (s.start * d.conjugate()).real
            C = abs(s.start) ** 2 - cut ** 2
            t = (-B + math.sqrt(B * B - 4 * A * C)) / (2 * A)
            return Contour([LineSegment(s.point(t), s.end)] + segs[i + 1:])
    raise ValueError("cut lies beyond the end of the tau-contour")


def tau_collapse_integral(a: complex, gamma_exp: float, eta_t: float, lam: float = 1.0,
                          delta_t: float = 0.0, C: float = 1.0,
                          tol: Optional[Tolerance] = None) -> Tuple[complex, float]:
    """Integral over |tau| >= C eta_t^{-1/2} of tau^{-gamma} e^{frak g(a, 1) - frak g(a, tau)}.

    For large eta_t the result is 1/(2 eta_t^2) + O(eta_t^{-3}).

    Returns
    -------
    (value, err_estimate)
    """
    tol = tol or Tolerance(rel_tol=1e-11, abs_tol=1e-16)
    p = ScaledParams(lam, eta_t, delta_t)
    omega = _cut_omega(standard_omega(), C * eta_t ** -0.5)
    g1 = complex(frak_g(a, 1.0, p))

    def f(t):
        return np.exp(-gamma_exp * np.log(t)) * safe_exp(g1 - frak_g(a, t, p))

    res = integrate(f, omega, tol)
    if not res.converged:
        raise QuadratureFailure("tau-collapse integral did not converge")
    return complex(res.value), res.err_estimate
