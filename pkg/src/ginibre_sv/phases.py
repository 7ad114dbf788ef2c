"""Phase functions, prefactor polynomials and branch-safe exponentials.

Finite-N objects (``f_finite``, ``g_finite``, ``G_N``) live next to their
limiting counterparts (``frak_f``, ``frak_g``, ``limit_G_terms``) and the
complex-ensemble pair ``h_complex`` / ``H_complex``.  Scalar logs are always
principal; the only multivalued piece of the integrands, the half-integer
power of 1 + 2a + a^2 tau, is continued along the a-contour by
:class:`BranchTracker`.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .contours import Z0, RAY_DIRECTION, r_scale

__all__ = [
    "PoleHit", "BranchJump", "RegimeMismatch",
    "ScaledParams", "FiniteParams", "MonomialTerm", "BranchTracker",
    "f_finite", "g_finite", "g_continued", "exp_Nf", "exp_negNg", "neg_N_g",
    "frak_f", "frak_g", "limit_G_terms", "G_N", "G_N_parts", "finite_G_terms", "POLYNOMIALS",
    "h_complex", "H_complex", "H_terms",
    "f_expansion", "g_expansion", "G_N_expansion", "expansion_report",
    "LEMMA_CASES", "LEMMA_KAPPA", "lemma_bound", "lemma_regime", "sample_lemma_case",
    "re_g_lower_bound_check", "calibrate_kappa", "monotone_ray_check", "monotone_ray_report", "monotone_grid",
    "safe_exp",
]

_POLE_EPS = 1e-300
_EXCL_EPS = 1e-12


class PoleHit(ValueError):
    pass


class BranchJump(RuntimeError):
    pass


class RegimeMismatch(ValueError):
    pass


def safe_exp(logv):
    """exp with results below e^{-700} flushed to exactly zero."""
    logv = np.asarray(logv, dtype=complex)
    re = logv.real
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.exp(np.where(re < -700.0, -np.inf, re)) * np.exp(1j * np.where(re < -700.0, 0.0, logv.imag))
    return out


# ---------------------------------------------------------------------------
# parameters

@dataclass(frozen=True)
class ScaledParams:
    """Rescaled parameters (lambda, eta_t, delta_t) of the limiting integrals."""
    lam: float
    eta_t: float = 0.0
    delta_t: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.delta_t < 0:
            raise ValueError("delta_t must be nonnegative")
        c0 = 10.0
        if not (1 / c0 <= self.lam <= c0):
            warnings.warn(f"lambda={self.lam} outside the targeted range [0.1, 10]", stacklevel=3)
        if self.eta_t != 0 and not (1 / c0 <= abs(self.eta_t) <= c0 * 1e3):
            warnings.warn(f"|eta_t|={abs(self.eta_t)} outside [0.1, 1e4]; result is an extrapolation",
                          stacklevel=3)
        if self.delta_t != 0 and self.delta_t < 10:
            warnings.warn(f"delta_t={self.delta_t} lies between 0 and 10", stacklevel=3)

    @property
    def m(self) -> float:
        """The factor (1 wedge 1/delta_t), equal to 1 at delta_t = 0."""
        return 1.0 if self.delta_t <= 1 else 1.0 / self.delta_t


@dataclass(frozen=True)
class FiniteParams:
    """Finite-N parameters: dimension, energy, Im z, |z|^2 and the smoothing epsilon."""
    n_dim: int
    energy: float
    eta: float
    absz2: float = 1.0
    epsilon: float = 0.0
    delta: Optional[float] = None

    def __post_init__(self):
        if self.delta is None:
            object.__setattr__(self, "delta", 1.0 - self.absz2)
        if int(self.n_dim) != self.n_dim or self.n_dim < 1:
            raise ValueError("n_dim must be a positive integer")
        if not 0 < self.energy <= 1:
            raise ValueError("energy must lie in (0, 1]")
        if self.absz2 < 0 or self.epsilon < 0:
            raise ValueError("absz2 and epsilon must be nonnegative")
        if abs(self.delta - (1.0 - self.absz2)) > 1e-14:
            raise ValueError("delta must equal 1 - |z|^2")
        if self.eta ** 2 > self.absz2 * (1 + 1e-14) + 1e-300:
            raise ValueError("eta^2 cannot exceed |z|^2")

    @classmethod
    def from_scaled(cls, n_dim: int, lam: float, eta_t: float, delta_t: float = 0.0,
                    eps_frac: float = 0.0) -> "FiniteParams":
        """Undo the rescaling: E = lam N^{-3/2}/(1 v delta_t), eta = eta_t/sqrt(N), delta = delta_t/sqrt(N)."""
        N = int(n_dim)
        E = lam * N ** -1.5 / max(1.0, delta_t)
        delta = delta_t / math.sqrt(N)
        return cls(N, E, eta_t / math.sqrt(N), 1.0 - delta, eps_frac * E, delta)

    @property
    def w(self) -> complex:
        return complex(self.energy, self.epsilon)

    @property
    def eta_t(self) -> float:
        return self.eta * math.sqrt(self.n_dim)


@dataclass(frozen=True)
class MonomialTerm:
    """coeff * a^{-alpha} tau^{-gamma} xi^{-beta}."""
    coeff: complex
    alpha: int
    beta: int
    gamma: int
    eta_power: int = 0
    delta_power: int = 0

    def __post_init__(self):
        if self.coeff == 0:
            raise ValueError("monomial coefficient must be nonzero")

    def __call__(self, a, tau, xi):
        return self.coeff * np.power(a, -float(self.alpha)) * np.power(tau, -float(self.gamma)) \
            * np.power(xi, -float(self.beta))


# ---------------------------------------------------------------------------
# finite-N phases

def _check_away(x, eps, what):
    if np.any(np.abs(x) < eps):
        raise PoleHit(f"{what} too close to a pole")


def f_finite(xi, w, absz2):
    """f(xi) = -w xi + log(1+xi) - log xi - |z|^2/(1+xi), principal logs."""
    xi = np.asarray(xi, dtype=complex)
    _check_away(xi, _POLE_EPS, "xi")
    _check_away(1 + xi, _POLE_EPS, "1 + xi")
    out = -w * xi + np.log(1 + xi) - np.log(xi) - absz2 / (1 + xi)
    return out[()] if out.ndim == 0 else out


def _quad_roots(tau):
    """Roots of 1 + 2a + a^2 tau in a cancellation-free form."""
    s = cmath.sqrt(1 - tau)
    if tau == 0:
        return (-0.5,)
    return (-1.0 / (1.0 + s), -(1.0 + s) / tau)


def _check_excluded(a, tau):
    a = np.asarray(a, dtype=complex)
    for r in _quad_roots(complex(tau)) if np.ndim(tau) == 0 else ():
        if np.any(np.abs(a - r) < _EXCL_EPS * max(1.0, abs(r))):
            raise PoleHit("a is at a zero of 1 + 2a + a^2 tau")


def g_finite(a, tau, eta, w, absz2):
    """g(a, tau) of the boson sector with principal logs."""
    a = np.asarray(a, dtype=complex)
    _check_away(a, _POLE_EPS, "a")
    if np.any(np.asarray(tau) == 0):
        raise PoleHit("tau = 0")
    _check_excluded(a, tau)
    D = 1 + 2 * a + a * a * tau
    out = (-w * a + 0.5 * np.log(D) - np.log(a) - 0.5 * np.log(tau)
           - (absz2 * (1 + a) - 2 * eta ** 2 * a * a * (1 - tau)) / D)
    return out[()] if out.ndim == 0 else out


def exp_Nf(xi, n_dim, w, absz2):
    """e^{N f(xi)} = e^{-N w xi} ((1+xi)/xi)^N e^{-N|z|^2/(1+xi)}, single valued."""
    xi = np.asarray(xi, dtype=complex)
    _check_away(xi, _POLE_EPS, "xi")
    _check_away(1 + xi, _POLE_EPS, "1 + xi")
    # exp(N Log q) equals q^N for integer N whatever branch Log picks
    lg = n_dim * (-w * xi - absz2 / (1 + xi) + np.log((1 + xi) / xi))
    out = safe_exp(lg)
    return out[()] if out.ndim == 0 else out


class BranchTracker:
    """Continuous logarithm of a polynomial along a path.

    The polynomial is ``lead * prod(a - r)``.  Along a straight piece that
    misses every root, the argument of each factor changes by less than pi,
    so the continued log at a point ``a`` reached straight from
    ``base_point`` is the log at the base plus the principal logs of the
    factor ratios.  ``accumulated_arg`` holds the continued argument at
    ``base_point``.

    The default instance tracks D(a) = 1 + 2a + a^2 tau from a = 0, where
    D = 1 and the argument is 0.
    """

    def __init__(self, roots: Sequence[complex], lead: complex = 1.0, base_point: complex = 0j,
                 accumulated_arg: Optional[float] = None):
        self.roots = tuple(complex(r) for r in roots)
        self.lead = complex(lead)
        self.base_point = complex(base_point)
        val = self._value(self.base_point)
        if val == 0:
            raise PoleHit("branch tracker started on a root")
        self._base_log_abs = math.log(abs(val))
        self.accumulated_arg = cmath.phase(val) if accumulated_arg is None else float(accumulated_arg)
        self._last_arg = self.accumulated_arg

    @classmethod
    def for_quadratic(cls, tau: complex, base_point: complex = 0j):
        """Tracker for 1 + 2a + a^2 tau started at ``base_point`` (default 0, where D = 1)."""
        tau = complex(tau)
        if tau == 0:
            return cls((-0.5,), 2.0, base_point)
        tr = cls(_quad_roots(tau), tau, base_point, accumulated_arg=0.0)
        if base_point != 0:
            # continue from 0 to the base along a straight line
            tr0 = cls(_quad_roots(tau), tau, 0j, accumulated_arg=0.0)
            tr.accumulated_arg = float(np.imag(tr0.log_at(base_point)))
            tr._last_arg = tr.accumulated_arg
        return tr

    def _value(self, a):
        v = self.lead
        for r in self.roots:
            v = v * (a - r)
        return v

    def log_at(self, a):
        """Continued log at points reached by straight lines from ``base_point``."""
        a = np.asarray(a, dtype=complex)
        darg = np.zeros(a.shape)
        mod = np.full(a.shape, abs(self.lead), dtype=float)
        for r in self.roots:
            ratio = (a - r) / (self.base_point - r)
            if np.any(ratio == 0):
                raise PoleHit("path passes through a branch point")
            darg = darg + np.angle(ratio)
            mod = mod * np.abs(a - r)
        out = np.log(mod) + 1j * (self.accumulated_arg + darg)
        return out[()] if out.ndim == 0 else out

    def advance(self, point: complex) -> complex:
        """Move the base along a straight line to ``point``; returns the log there."""
        lg = complex(self.log_at(point))
        self.base_point = complex(point)
        self.accumulated_arg = lg.imag
        return lg

    def step(self, point: complex) -> complex:
        """Sequential tracking through consecutive nodes.

        Raises :class:`BranchJump` if the argument changes by pi or more
        between the previous node and ``point``, which means the nodes are
        too sparse to follow the path.
        """
        lg = complex(self.log_at(point))
        if abs(lg.imag - self.accumulated_arg) >= math.pi:
            raise BranchJump(f"argument jumps by {lg.imag - self.accumulated_arg:.3f} at {point}")
        self.base_point = complex(point)
        self.accumulated_arg = lg.imag
        return lg


def g_continued(a, tau, eta, w, absz2):
    """g(a, tau) with log D continued along the straight line from a = 0.

    This is the branch carried by the integrands on the a-contour; it agrees
    with :func:`g_finite` wherever the principal logs do not jump.  At
    tau = 1 it equals f(a) identically.
    """
    a = np.asarray(a, dtype=complex)
    _check_away(a, _POLE_EPS, "a")
    if tau == 0:
        raise PoleHit("tau = 0")
    tr = BranchTracker.for_quadratic(complex(tau))
    logD = tr.log_at(a)
    D = 1 + 2 * a + a * a * tau
    out = (-w * a + 0.5 * logD - np.log(a) - 0.5 * cmath.log(tau)
           - (absz2 * (1 + a) - 2 * eta ** 2 * a * a * (1 - tau)) / D)
    return out[()] if np.ndim(out) == 0 else out


def neg_N_g(tracker: BranchTracker, a, tau, n_dim, eta, w, absz2):
    """Exponent -N g(a, tau) with log D continued by ``tracker``."""
    a = np.asarray(a, dtype=complex)
    _check_away(a, _POLE_EPS, "a")
    if tau == 0:
        raise PoleHit("tau = 0")
    D = 1 + 2 * a + a * a * tau
    if np.any(np.abs(D) < _EXCL_EPS):
        raise PoleHit("a is at a zero of 1 + 2a + a^2 tau")
    logD = tracker.log_at(a)
    return n_dim * (w * a + np.log(a) + 0.5 * cmath.log(tau) - 0.5 * logD
                    + (absz2 * (1 + a) - 2 * eta ** 2 * a * a * (1 - tau)) / D)


def exp_negNg(a_path_state: BranchTracker, a, tau, n_dim, eta, w, absz2):
    """a^N tau^{N/2} D^{-N/2} e^{N (w a + (|z|^2 (1+a) - 2 eta^2 a^2 (1-tau))/D)}.

    a^N uses the integer power, tau^{N/2} the principal root (continuous on
    the tau-contour, equal to 1 at tau = 1) and D^{-N/2} the argument
    continued by ``a_path_state`` from a = 0.
    """
    out = safe_exp(neg_N_g(a_path_state, a, tau, n_dim, eta, w, absz2))
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# limiting phases

def frak_f(xi, p: ScaledParams):
    """-(1 wedge 1/delta_t) lam xi + 1/(2 xi^2) + delta_t/xi."""
    xi = np.asarray(xi, dtype=complex)
    _check_away(xi, _POLE_EPS, "xi")
    out = -p.m * p.lam * xi + 0.5 / (xi * xi) + p.delta_t / xi
    return out[()] if out.ndim == 0 else out


def frak_g(a, tau, p: ScaledParams):
    """-(1 wedge 1/delta_t) lam a + 2 eta_t^2 (1-tau)/tau + (2-tau)/(2 a^2 tau^2) + delta_t/(a tau)."""
    a = np.asarray(a, dtype=complex)
    tau = np.asarray(tau, dtype=complex)
    _check_away(a, _POLE_EPS, "a")
    _check_away(tau, _POLE_EPS, "tau")
    at = a * tau
    out = (-p.m * p.lam * a + 2 * p.eta_t ** 2 * (1 - tau) / tau + (2 - tau) / (2 * at * at)
           + p.delta_t / at)
    return out[()] if out.ndim == 0 else out


def limit_G_terms(p: ScaledParams) -> List[MonomialTerm]:
    """Monomials of the limiting prefactor G(a, tau, xi, eta_t, delta_t).

    The term (4 - tau)/(a^4 tau^3 xi^4) appears as 4/(a^4 tau^3 xi^4) and
    -1/(a^4 tau^2 xi^4).  Besides the 17 written terms the list carries the
    three delta_t^2 monomials delta_t^2 (1/(a^2 tau xi^4) + 2/(a^3 tau^2 xi^3)
    + 1/(a^4 tau^2 xi^2)), which are the large-N limit of the N^2 delta^2
    block of G_N; without them the limit disagrees with the finite-N
    integrand whenever delta_t > 0.  Terms whose folded coefficient vanishes
    are dropped.
    """
    e2 = p.eta_t ** 2
    d = p.delta_t
    rows = [
        # (coeff, alpha, beta, gamma, eta_power, delta_power)
        (1, 2, 6, 1, 0, 0), (2, 3, 5, 2, 0, 0), (4, 4, 4, 3, 0, 0), (-1, 4, 4, 2, 0, 0),
        (2, 5, 3, 3, 0, 0), (1, 6, 2, 3, 0, 0), (1, 2, 4, 1, 0, 0), (2, 3, 3, 2, 0, 0),
        (1, 4, 2, 2, 0, 0),
        (2 * d, 2, 5, 1, 0, 1), (4 * d, 3, 4, 2, 0, 1), (4 * d, 4, 3, 3, 0, 1), (2 * d, 5, 2, 3, 0, 1),
        (4 * e2, 2, 4, 2, 2, 0), (4 * e2, 3, 3, 2, 2, 0), (4 * e2, 4, 2, 3, 2, 0),
        (4 * e2 * d, 2, 3, 2, 2, 1), (4 * e2 * d, 3, 2, 2, 2, 1),
        (d * d, 2, 4, 1, 0, 2), (2 * d * d, 3, 3, 2, 0, 2), (d * d, 4, 2, 2, 0, 2),
    ]
    return [MonomialTerm(c, al, be, ga, ep, dp) for c, al, be, ga, ep, dp in rows if c != 0]


def h_complex(x, p: ScaledParams):
    """h(x) = -(1 wedge 1/delta_t) lam x + delta_t/x + 1/(2 x^2)."""
    x = np.asarray(x, dtype=complex)
    _check_away(x, _POLE_EPS, "x")
    out = -p.m * p.lam * x + p.delta_t / x + 0.5 / (x * x)
    return out[()] if out.ndim == 0 else out


def H_terms(p: ScaledParams) -> List[Tuple[float, int, int]]:
    """H as (coeff, x power, y power): 1/x^3 + 1/(x^2 y) + 1/(x y^2) + d/(x y) + d/x^2."""
    d = p.delta_t
    rows = [(1.0, 3, 0), (1.0, 2, 1), (1.0, 1, 2), (d, 1, 1), (d, 2, 0)]
    return [r for r in rows if r[0] != 0]


def H_complex(x, y, p: ScaledParams):
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    _check_away(x, _POLE_EPS, "x")
    _check_away(y, _POLE_EPS, "y")
    out = sum(c * x ** (-px) * y ** (-py) for c, px, py in H_terms(p))
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# finite-N prefactor

Poly = Dict[Tuple[int, int, int], float]   # (a power, tau power, xi power) -> coefficient


def _pmul(p: Poly, q: Poly) -> Poly:
    out: Poly = {}
    for k1, c1 in p.items():
        for k2, c2 in q.items():
            k = (k1[0] + k2[0], k1[1] + k2[1], k1[2] + k2[2])
            out[k] = out.get(k, 0) + c1 * c2
    return {k: v for k, v in out.items() if v}


def _pscale(p: Poly, c) -> Poly:
    return {k: v * c for k, v in p.items()}


_A1 = {(1, 0, 0): 1, (0, 0, 0): 1}
POLYNOMIALS: Dict[str, Poly] = {
    "p200": {(4, 2, 0): 1, (3, 1, 1): 2, (3, 1, 0): 4, (2, 1, 2): -1, (2, 0, 2): 4, (2, 0, 1): 8,
             (2, 1, 0): 2, (2, 0, 0): 4, (1, 0, 3): 2, (1, 0, 2): 8, (1, 0, 1): 10, (1, 0, 0): 4,
             (0, 0, 4): 1, (0, 0, 3): 4, (0, 0, 2): 6, (0, 0, 1): 4, (0, 0, 0): 1},
    "p100": {(4, 2, 1): -1, (4, 2, 0): 1, (3, 1, 2): -2, (3, 1, 1): -2, (3, 1, 0): 4, (2, 1, 3): -1,
             (2, 1, 2): -3, (2, 1, 1): -2, (2, 0, 1): 4, (2, 1, 0): 2, (2, 0, 0): 4, (1, 0, 2): 2,
             (1, 0, 1): 6, (1, 0, 0): 4, (0, 0, 3): 1, (0, 0, 2): 3, (0, 0, 1): 3, (0, 0, 0): 1},
    "p220": _pscale(_pmul(_A1, {(2, 1, 0): 1, (1, 1, 1): 1, (1, 1, 0): 2, (0, 0, 2): 1,
                                (0, 0, 1): 2, (0, 0, 0): 1}), 4),
    "p120": _pscale(_pmul(_A1, {(2, 1, 0): 1, (1, 1, 1): 1, (1, 1, 0): 2, (0, 0, 1): 1,
                                (0, 0, 0): 1}), 4),
    "p201": _pscale({(3, 2, 0): 1, (2, 1, 1): 2, (2, 1, 0): 4, (1, 0, 2): 2, (1, 1, 1): 2,
                     (1, 0, 1): 4, (1, 1, 0): 3, (1, 0, 0): 2, (0, 0, 3): 1, (0, 0, 2): 4,
                     (0, 0, 1): 5, (0, 0, 0): 2}, 2),
    "p101": _pscale({(3, 2, 0): 1, (2, 1, 1): 2, (2, 1, 0): 4, (1, 1, 2): 1, (1, 1, 1): 3,
                     (1, 0, 1): 2, (1, 1, 0): 3, (1, 0, 0): 2, (0, 0, 2): 1, (0, 0, 1): 3,
                     (0, 0, 0): 2}, 2),
    "p221": _pscale(_pmul(_A1, {(1, 0, 0): 1, (0, 0, 1): 1, (0, 0, 0): 2}), 4),
    "p202": {(2, 1, 0): 1, (1, 0, 1): 2, (1, 0, 0): 4, (0, 0, 2): 1, (0, 0, 1): 4, (0, 0, 0): 4},
}


def _blocks(p: FiniteParams):
    """(scalar, polynomial, a-denominator, xi-denominator, (1+xi)-denominator, tau-denominator).

    The p220 block carries a single power of (1+xi) in its denominator; see
    the package README for why this differs from the cubic power one might
    transcribe.  Every block is further divided by D^2 (1+xi)^2.
    """
    N, eta, dl = p.n_dim, p.eta, p.delta
    P = POLYNOMIALS
    return [
        (N ** 2, P["p200"], 2, 2, 2, 1),
        (-N, P["p100"], 2, 2, 1, 1),
        (dl * N ** 2, P["p201"], 1, 1, 2, 1),
        (-N * dl, P["p101"], 1, 1, 1, 1),
        (N ** 2 * dl ** 2, P["p202"], 0, 0, 2, 0),
        (N ** 2 * eta ** 2, P["p220"], 1, 1, 1, 1),
        (-N * eta ** 2, P["p120"], 1, 1, 0, 1),
        (N ** 2 * eta ** 2 * dl, P["p221"], 0, 0, 1, 0),
    ]


def _peval(poly: Poly, a, tau, xi):
    return sum(c * a ** i * tau ** j * xi ** k for (i, j, k), c in poly.items())


def G_N_parts(a, tau, xi, p: FiniteParams):
    """(G_1N, G_2N) evaluated directly from the polynomial tables."""
    a = np.asarray(a, dtype=complex)
    xi = np.asarray(xi, dtype=complex)
    tau = np.asarray(tau, dtype=complex)
    for v, nm in ((a, "a"), (xi, "xi"), (1 + xi, "1 + xi"), (tau, "tau")):
        _check_away(v, _POLE_EPS, nm)
    D = 1 + 2 * a + a * a * tau
    _check_away(D, _EXCL_EPS, "1 + 2a + a^2 tau")
    parts = [0, 0]
    for idx, (c, poly, ad, xd, x1d, td) in enumerate(_blocks(p)):
        if c == 0:
            continue
        term = c * _peval(poly, a, tau, xi) / (a ** ad * xi ** xd * (1 + xi) ** x1d * tau ** td)
        parts[0 if idx < 5 else 1] = parts[0 if idx < 5 else 1] + term
    pre = 1.0 / (D * D * (1 + xi) ** 2)
    return parts[0] * pre, parts[1] * pre


def G_N(a, tau, xi, p: FiniteParams):
    """Finite-N prefactor G_1N + G_2N; G_2N vanishes for real z."""
    g1, g2 = G_N_parts(a, tau, xi, p)
    out = np.asarray(g1 + g2)
    return out[()] if out.ndim == 0 else out


def finite_G_terms(p: FiniteParams) -> Dict[Tuple[int, int, int, int], float]:
    """Separated form of xi^2 a G_N (times D^2), keyed by powers.

    Key (k_xi, q, k_a, l) stands for xi^{k_xi} (1+xi)^{-q} a^{k_a} tau^{l};
    the remaining factors 1/D^2 and tau^{-1/2} are supplied by the caller.
    """
    out: Dict[Tuple[int, int, int, int], float] = {}
    for c, poly, ad, xd, x1d, td in _blocks(p):
        if c == 0:
            continue
        for (ea, et, ex), v in poly.items():
            key = (ex - xd + 2, x1d + 2, ea - ad + 1, et - td)
            out[key] = out.get(key, 0) + c * v
    return {k: v for k, v in out.items() if v != 0}


# ---------------------------------------------------------------------------
# large-argument expansions (diagnostic only)

_C1 = {(2, 6, 1): 1, (6, 2, 3): 1, (3, 5, 2): 2, (5, 3, 3): 2, (4, 4, 3): 4}
_C2 = {(2, 5, 1): 2, (5, 2, 3): 2, (3, 4, 2): 4, (4, 3, 3): 4}
_C3 = {(2, 4, 1): 1, (4, 2, 2): 1, (3, 3, 2): 2}
_C4 = {(2, 4, 1): 1, (4, 2, 2): 1, (3, 3, 2): 2}


def _index_sets():
    """Index triples (alpha, beta, gamma) required by each sum of the expansion."""
    return {
        "c1": [(al, 8 - al, min(al - 1, 3)) for al in range(2, 7)],
        "c2": [(al, 7 - al, min(al - 1, 3)) for al in range(2, 6)],
        "c3": [(al, 6 - al, min(al - 1, 2)) for al in range(2, 5)],
        "c4": [(al, 6 - al, min(al - 1, 2)) for al in range(2, 5)],
    }


def f_expansion(xi, energy, delta=0.0):
    """Leading large-xi form -E xi + delta/xi + 1/(2 xi^2)."""
    xi = np.asarray(xi, dtype=complex)
    return -energy * xi + delta / xi + 0.5 / (xi * xi)


def g_expansion(a, tau, eta, energy, delta):
    """Leading large-|a tau| form of g, including the 2 eta^2 (tau-5)/(a^2 tau^2) term."""
    a = np.asarray(a, dtype=complex)
    at = a * tau
    return (-energy * a - 2 * eta ** 2 * (tau - 1) / tau + delta / at + (2 - tau) / (2 * at * at)
            + 2 * eta ** 2 * (tau - 5) / (at * at))


def G_N_expansion(a, tau, xi, p: FiniteParams):
    """Leading monomials of (G_1N, G_2N) for large |xi| and |a tau|.

    Two coefficients differ from a literal transcription and follow from the
    polynomial tables instead: the a^{-4} tau^{-2} xi^{-4} term of G_1N
    carries N^2 (it comes from the -a^2 xi^2 tau monomial of p200), and the
    N eta^2 terms of G_2N enter with coefficient -4 (they come from
    -N eta^2 p120).
    """
    N, eta, dl = p.n_dim, p.eta, p.delta
    a = np.asarray(a, dtype=complex)

    def msum(table, scale):
        return sum(c * scale / (a ** al * tau ** g * xi ** b) for (al, b, g), c in table.items())

    g1 = (msum(_C1, N ** 2) - N ** 2 / (a ** 4 * tau ** 2 * xi ** 4) + msum(_C2, N ** 2 * dl)
          + msum(_C3, N) + msum(_C4, N ** 2 * dl ** 2))
    s6 = [(al, 6 - al, max(al - 1, 2)) for al in (2, 3, 4)]
    s5 = [(al, 5 - al, max(al - 1, 2)) for al in (2, 3)]
    g2 = (sum(4 * N ** 2 * eta ** 2 / (a ** al * tau ** g * xi ** b) for al, b, g in s6)
          + sum(4 * N ** 2 * eta ** 2 * dl / (a ** al * tau ** g * xi ** b) for al, b, g in s5)
          - sum(4 * N * eta ** 2 / (a ** al * tau ** g * xi ** b) for al, b, g in s5))
    return g1, g2


def expansion_report(R: float, eta_t: float = 1.0, delta_t: float = 0.0, lam: float = 1.0,
                     tau: complex = 0.5 * cmath.exp(-0.4j), a_angle: float = 2.0,
                     xi_angle: float = 0.3) -> dict:
    """Relative deviations of f, g, G_1N, G_2N from their expansions at |xi| = |a tau| = R.

    Uses the natural scaling N = R^2 (so xi ~ a ~ sqrt(N)), eta = eta_t/sqrt(N),
    delta = delta_t/sqrt(N) and E = lam N^{-3/2}.  ``missing`` lists index
    combinations of the expansion sums without a tabulated coefficient.
    """
    N = int(round(R * R))
    p = FiniteParams(N, lam * N ** -1.5, eta_t / math.sqrt(N), 1 - delta_t / math.sqrt(N),
                     delta=delta_t / math.sqrt(N))
    a = R / abs(tau) * cmath.exp(1j * a_angle)
    xi = R * cmath.exp(1j * xi_angle)
    fx = complex(f_finite(xi, p.energy, p.absz2))
    # combine the logs as log(D/(a^2 tau)), the branch that tends to 0 for large a
    D = 1 + 2 * a + a * a * tau
    gx = (-p.energy * a + 0.5 * cmath.log(D / (a * a * tau))
          - (p.absz2 * (1 + a) - 2 * p.eta ** 2 * a * a * (1 - tau)) / D)
    e1, e2 = G_N_parts(a, tau, xi, p)
    x1, x2 = G_N_expansion(a, tau, xi, p)
    tables = {"c1": _C1, "c2": _C2, "c3": _C3, "c4": _C4}
    missing = [(k, idx) for k, idxs in _index_sets().items() for idx in idxs if idx not in tables[k]]
    rep = {
        "R": R, "N": N,
        "f": abs(complex(f_expansion(xi, p.energy, p.delta)) / fx - 1),
        "g": abs(complex(g_expansion(a, tau, p.eta, p.energy, p.delta)) / gx - 1),
        "G1": abs(complex(x1) / complex(e1) - 1),
        "G2": abs(complex(x2) / complex(e2) - 1) if p.eta != 0 else 0.0,
        "missing": missing,
    }
    return rep


# ---------------------------------------------------------------------------
# lower bounds on Re g (regime table) and monotonicity along e^{i pi/6}

LEMMA_CASES = ("1a", "1b", "1c", "2a", "2b", "2c", "2d", "3a", "3b", "3c", "4a", "4b", "4c")

#: Regime conventions: "x << y" means x <= y/10, "x >> y" means x >= 10 y, an
#: upper bound "x <~ y" means x <= 10 y.  |tau| <= N^{-1/3} stands for the
#: small-tau condition and eta_t ranges over [1/2, 2] when nonzero.
REGIME_FACTOR = 10.0
ETA_T_RANGE = (0.5, 2.0)
TAU_EXPONENT = 1.0 / 3.0

#: Calibrated constants: half the minimum of Re g / bound over a 10^4-point
#: pilot grid per case (seed 0, N = 10^6, lambda = 1); see ``calibrate_kappa``.
LEMMA_KAPPA = {
    "1a": 0.043307, "1b": 0.02655, "1c": 0.136885, "2a": 0.209291, "2b": 0.262082, "2c": 0.17133,
    "2d": 0.154546, "3a": 0.224507, "3b": 0.123053, "3c": 0.135974, "4a": 0.225858, "4b": 0.126355,
    "4c": 0.15426,
}


def lemma_bound(case_id, a, tau, eta_t, energy):
    """Right-hand side of the lower bound for ``case_id`` (without the constant)."""
    aT = abs(a * tau)
    at = abs(tau)
    A = abs(a)
    E = energy
    if case_id in ("1a", "2a"):
        return 1 - math.log(aT)
    if case_id == "1b":
        return 1.0
    if case_id in ("1c", "2d", "3c", "4c"):
        return E * A
    if case_id == "2b":
        return E ** (2 / 3) * eta_t ** 2 * A - math.log(aT)
    if case_id in ("2c", "4b"):
        return E ** (2 / 3) * eta_t ** 2 / at
    if case_id in ("3a", "4a"):
        return -math.log(aT)
    if case_id == "3b":
        return E ** (2 / 3) * at ** (-2 / 3)
    raise RegimeMismatch(f"unknown case {case_id!r}")


def lemma_regime(case_id, tau, energy, eta_t, n_dim):
    """(|tau| range, |a| range) of a case under the conventions above."""
    c = REGIME_FACTOR
    E = energy
    if case_id[0] in "12":
        tr = (1e-3 * E, c * E)
    else:
        tr = (c * E, n_dim ** -TAU_EXPONENT)
    at = abs(tau)
    rng = {
        "1a": (1e-3, 1 / at), "1b": (1 / at, c / E), "1c": (c / E, 1e3 / E),
        "2a": (1e-3, c * min(1 / E, 1 / at)), "2b": (min(1 / E, 1 / at) * c, 1 / at),
        "2c": (1 / at, c * E ** (-1 / 3) / at), "2d": (c * E ** (-1 / 3) / at, 1e3 * E ** (-1 / 3) / at),
        "3a": (1e-3, 1 / (c * at)), "3b": (1 / at, c * E ** (-1 / 3) * at ** (-2 / 3)),
        "3c": (c * E ** (-1 / 3) * at ** (-2 / 3), 1e3 * E ** (-1 / 3) * at ** (-2 / 3)),
        "4a": (1e-3, 1 / (c * at)), "4b": (1 / at, c * E ** (-1 / 3) / at),
        "4c": (c * E ** (-1 / 3) / at, 1e3 * E ** (-1 / 3) / at),
    }[case_id]
    return tr, rng


def _point_on_rlambda(r, modulus):
    k = abs(r * Z0)
    if modulus <= k:
        return modulus * Z0 / abs(Z0)
    p = r * Z0
    b = 2 * (p * RAY_DIRECTION.conjugate()).real
    cc = abs(p) ** 2 - modulus ** 2
    s = (-b + math.sqrt(b * b - 4 * cc)) / 2
    return p + s * RAY_DIRECTION


def sample_lemma_case(case_id, rng: np.random.Generator, n_dim: int = 10 ** 6, lam: float = 1.0):
    """Draw one (tau, a, FiniteParams) in the regime of ``case_id``, or None if it is empty.

    tau lies on the first piece of the tau-contour (argument -pi/3), a lies on
    r*Lambda with r recomputed from (eta_t, E, tau), and both moduli are drawn
    log-uniformly inside the regime.
    """
    E = lam * n_dim ** -1.5
    eta_t = 0.0 if case_id[0] in "13" else float(rng.uniform(*ETA_T_RANGE))
    tr, _ = lemma_regime(case_id, 1.0, E, eta_t, n_dim)
    s = math.exp(rng.uniform(math.log(tr[0]), math.log(tr[1])))
    tau = s * cmath.exp(-1j * math.pi / 3)
    _, ar = lemma_regime(case_id, tau, E, eta_t, n_dim)
    if ar[0] >= ar[1]:
        return None
    m = math.exp(rng.uniform(math.log(ar[0]), math.log(ar[1])))
    r = r_scale(eta_t, E, tau)
    a = _point_on_rlambda(r, m)
    p = FiniteParams(n_dim, E, eta_t / math.sqrt(n_dim), 1.0)
    return tau, a, p


def re_g_lower_bound_check(tau, a, p: FiniteParams, case_id: str, kappa: Optional[float] = None):
    """Check Re g >= kappa * bound for one point of the regime table.

    Returns ``{"holds": bool, "margin": float}`` with margin = Re g - kappa*bound.
    Raises :class:`RegimeMismatch` if the point lies outside the case.
    """
    if case_id not in LEMMA_CASES:
        raise RegimeMismatch(f"unknown case {case_id!r}")
    eta_t = p.eta_t
    if (case_id[0] in "13") != (eta_t == 0):
        raise RegimeMismatch(f"case {case_id} needs eta_t {'= 0' if case_id[0] in '13' else '!= 0'}")
    tr, ar = lemma_regime(case_id, tau, p.energy, eta_t, p.n_dim)
    tol = 1 + 1e-9
    if not (tr[0] / tol <= abs(tau) <= tr[1] * tol and ar[0] / tol <= abs(a) <= ar[1] * tol):
        raise RegimeMismatch(f"(tau, a) = ({tau}, {a}) outside case {case_id}")
    kappa = LEMMA_KAPPA[case_id] if kappa is None else kappa
    reg = float(np.real(g_finite(a, tau, p.eta, p.energy, p.absz2)))
    bound = lemma_bound(case_id, a, tau, eta_t, p.energy)
    margin = reg - kappa * bound
    return {"holds": bool(margin >= 0), "margin": margin}


def calibrate_kappa(case_id, n_points: int = 10_000, seed: int = 0, safety: float = 0.5) -> float:
    """Pilot calibration: ``safety`` times the minimum of Re g / bound over positive bounds."""
    rng = np.random.default_rng(seed)
    ratios = []
    while len(ratios) < n_points:
        smp = sample_lemma_case(case_id, rng)
        if smp is None:
            continue
        tau, a, p = smp
        bd = lemma_bound(case_id, a, tau, p.eta_t, p.energy)
        if bd > 0:
            ratios.append(float(np.real(g_finite(a, tau, p.eta, p.energy, p.absz2))) / bd)
    return safety * min(ratios)


def monotone_ray_report(tau, E, x_grid, etas: Iterable[float] = (1e-4, 1e-3, 1e-2)) -> dict:
    """Both clauses of the ray check separately.

    Returns ``monotone`` (x -> Re g(x e^{i pi/6}, tau, 0, E) nonincreasing on
    the grid), ``eta_dominates`` (Re g with eta >= Re g with eta = 0 for each
    sampled eta) and ``worst_eta_gap``, the most negative value of the
    difference (0 when it never goes below zero).
    """
    x = np.asarray(x_grid, dtype=float)
    if np.any(np.diff(x) <= 0) or x[0] <= 0:
        raise ValueError("x_grid must be positive and increasing")
    a = x * cmath.exp(1j * math.pi / 6)
    base = np.real(g_finite(a, tau, 0.0, E, 1.0))
    mono = bool(np.all(np.diff(base) <= 1e-14 * np.maximum(1.0, np.abs(base[1:]))))
    dom = True
    worst = 0.0
    for eta in etas:
        if eta ** 2 > 1:
            continue
        gap = np.real(g_finite(a, tau, eta, E, 1.0)) - base
        worst = min(worst, float(gap.min()))
        dom = dom and bool(np.all(gap >= -1e-12 * np.maximum(1.0, np.abs(base))))
    return {"monotone": mono, "eta_dominates": dom, "worst_eta_gap": worst}


def monotone_ray_check(tau, E, x_grid, etas: Iterable[float] = (1e-4, 1e-3, 1e-2)) -> bool:
    """Monotone decay of x -> Re g(x e^{i pi/6}, tau, 0, E) and its minimality over eta >= 0.

    The grid must start above 0 (g has a log singularity there) and be
    increasing; |z| = 1.  See :func:`monotone_ray_report` for the two
    clauses separately.
    """
    rep = monotone_ray_report(tau, E, x_grid, etas)
    return rep["monotone"] and rep["eta_dominates"]


def monotone_grid(energies=(1e-9, 1e-8, 1e-6, 1e-4, 1e-3), n_tau: int = 15, n_x: int = 100):
    """Standard validation grid: tau on every piece of the tau-contour with |tau| >= 10 E,
    x log-spaced on [1e-4, 0.01 E^{-1/3}].  Yields (tau, E, x_grid)."""
    from .contours import standard_omega
    om = standard_omega()
    for E in energies:
        x = np.geomspace(1e-4, 0.01 * E ** (-1.0 / 3.0), n_x)
        for seg in om.segments:
            for s in np.linspace(0.0, 1.0, n_tau):
                t = complex(seg.point(s))
                if abs(t) >= 10 * E:
                    yield t, E, x
