"""Pure-Python implementation of the inner a-moment kernel.

``segment_moments`` integrates a^k e^{L(a)} w(a) along one straight piece of
the a-contour for a vector of integer powers k, where

* kind 0 (limit):  L = m lam a - 2 eta_t^2 (1-tau)/tau - (2-tau)/(2 a^2 tau^2) - delta_t/(a tau),  w = 1
* kind 1 (finite): L = -N g(a, tau) with log D continued from ``logD0``,          w = 1/D^2

The compiled extension exposes the same function; this module is the
reference it is tested against.
"""
from __future__ import annotations

import math

import numpy as np

from .contours import DecayThreshold, FixedLength, LineSegment, Ray, Contour, Tolerance, integrate
from .phases import safe_exp

KIND_LIMIT = 0
KIND_FINITE = 1


def _exponent(kind, params, tau, roots, start, logD0):
    if kind == KIND_LIMIT:
        m_lam, eta2, delta_t = params
        c0 = -2.0 * eta2 * (1 - tau) / tau

        def L(a):
            at = a * tau
            return m_lam * a + c0 - (2 - tau) / (2 * at * at) - delta_t / at, None
        return L

    n, energy, eps, eta2, absz2 = params
    w = complex(energy, eps)
    half_log_tau = 0.5 * np.log(complex(tau))
    r1, r2 = roots

    def L(a):
        D = 1 + 2 * a + a * a * tau
        # continued log D: base value plus principal logs of the factor ratios
        ld = (np.log(np.abs(D)) + 1j * (logD0.imag + np.angle((a - r1) / (start - r1))
                                         + np.angle((a - r2) / (start - r2))))
        lg = n * (w * a + np.log(a) + half_log_tau - 0.5 * ld
                  + (absz2 * (1 + a) - 2 * eta2 * a * a * (1 - tau)) / D)
        return lg, D
    return L


def segment_moments(kind, params, tau, roots, start, direction, length, powers, logD0,
                    rel_tol, abs_tol, max_depth, log_drop, scale):
    """Moments of one straight piece.

    Parameters
    ----------
    length : float
        Piece length; ``math.inf`` for a ray cut by decay of Re L.
    powers : sequence of int
    logD0 : complex
        Continued log D at ``start`` (ignored for kind 0).
    scale : float
        Length scale for the ray probe grid.

    Returns
    -------
    values, err, n_evals, converged, accepted_length
    """
    pw = np.asarray(powers, dtype=float)
    tau = complex(tau)
    start = complex(start)
    L = _exponent(kind, params, tau, roots, start, complex(logD0))

    def f(a):
        lg, D = L(a)
        base = safe_exp(lg)
        if D is not None:
            base = base / (D * D)
        live = base != 0
        out = np.zeros((a.size, pw.size), dtype=complex)
        if live.any():
            out[live] = a[live, None] ** pw[None, :] * base[live, None]
        return out

    def probe(a):
        return L(a)[0]

    tol = Tolerance(rel_tol, abs_tol, max_depth)
    if math.isinf(length):
        seg = Ray(start, complex(direction), DecayThreshold(log_drop, probe))
    else:
        seg = LineSegment(start, start + complex(direction) * length)
    res = integrate(f, Contour([seg]), tol, ray_scale=scale)
    acc = res.truncations[0] if res.truncations else length
    return np.asarray(res.value), res.err_estimate, res.n_evals, res.converged, acc
