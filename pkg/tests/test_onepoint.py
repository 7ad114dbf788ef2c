import math

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import quad_vec

from ginibre_sv import _backend
from ginibre_sv.contours import Tolerance, standard_gamma, standard_omega
from ginibre_sv.ginibre_mc import EnsembleSpec, resolvent_trace_mean
from ginibre_sv.onepoint import (
    CSV_FIELDS, N_MAX, EvalRequest, QuadratureFailure, eval_finite_n, eval_limit_complex,
    eval_limit_real, eval_limit_real_reduced, evaluate, evaluate_many, small_regime_mass,
    tau_collapse_integral,
)
from ginibre_sv.phases import FiniteParams, ScaledParams, finite_G_terms


def circle_moment(k, lam, radius=2.0):
    """Integral of y^k e^{-lam y + 1/(2 y^2)} over the circle |y - r| = r, which touches 0.

    Along the tangent at 0 the exponent tends to -infinity, so the integrand
    vanishes there; the value does not depend on r.
    """
    def f(t):
        y = radius * (1 + mp.expj(t))
        return y ** k * mp.exp(-lam * y + 1 / (2 * y * y)) * 1j * radius * mp.expj(t)
    return complex(mp.quad(f, [-mp.pi, -mp.pi / 2, 0, mp.pi / 2, mp.pi]))


def x_moment(k, lam):
    """Integral of x^{-k} e^{lam x - 1/(2 x^2)} from 0 to x0 and on to infinity at angle 3 pi/4."""
    x0 = lam ** (-1 / 3)
    d = mp.expjpi(0.75)
    f = lambda x: x ** (-k) * mp.exp(lam * x - 1 / (2 * x * x))
    return complex(mp.quad(f, [0, x0, x0 + 20 * d, x0 + 200 * d]))


def test_xi_moments_match_mpmath():
    from ginibre_sv.onepoint import _xi_moments_limit
    p = ScaledParams(1.3, 0.0, 0.0)
    betas = [2, 3, 4, 5, 6]
    Xi, err, _, ok = _xi_moments_limit(p, standard_gamma(radius=1.3 ** (-1 / 3)), betas, Tolerance())
    assert ok
    for b in betas:
        ref = circle_moment(2 - b, 1.3)
        assert abs(Xi[b] - ref) < 1e-9 * max(1.0, abs(ref))


def test_limit_complex_against_mpmath():
    lam = 1.0
    # H = 1/x^3 + 1/(x^2 y) + 1/(x y^2) at delta_t = 0
    ref = sum(x_moment(px, lam) * circle_moment(-qy, lam) for px, qy in ((3, 0), (2, 1), (1, 2)))
    ref /= 2j * math.pi
    r = eval_limit_complex(ScaledParams(lam, 0.0, 0.0))
    assert r.converged
    assert abs(r.value - ref) < 1e-8 * abs(ref)
    assert abs(r.value - (0.5881672168 + 1.0516463021j)) < 1e-9


def test_limit_complex_contour_invariance():
    p = ScaledParams(1.0, 0.0, 0.0)
    a = eval_limit_complex(p).value
    b = eval_limit_complex(p, overrides={"gamma": standard_gamma(radius=3.0), "x0": 2.0}).value
    assert abs(a - b) < 1e-8


def test_limit_real_reference_values():
    r = eval_limit_real(ScaledParams(1.0, 1.0, 0.0))
    assert r.converged
    assert abs(r.value - (0.4839397823 + 1.3389585834j)) < 1e-9
    assert r.density == pytest.approx(r.value.imag / math.pi)
    assert abs(sum(r.decomposition.values()) - r.value) < 1e-14


def test_limit_real_contour_invariance():
    p = ScaledParams(1.0, 0.0, 0.0)
    a = eval_limit_real(p)
    b = eval_limit_real(p, overrides={"gamma": standard_gamma(radius=2.5), "lambda_scale": 1.7,
                                      "omega": standard_omega(0.2)})
    assert abs(a.value - b.value) < 10 * (a.err_estimate + b.err_estimate)


def test_eta_sign_flip_is_exact():
    a = eval_limit_real(ScaledParams(1.0, 2.0, 0.0)).value
    b = eval_limit_real(ScaledParams(1.0, -2.0, 0.0)).value
    assert a == b


def test_reduced_form_approaches_full_value():
    # the gap closes like eta_t^{-2}
    scaled = []
    for eta_t in (8.0, 16.0):
        p = ScaledParams(1.0, eta_t, 0.0)
        d = abs(eval_limit_real(p).value - eval_limit_real_reduced(p).value)
        scaled.append(d * eta_t ** 2)
    assert scaled[1] == pytest.approx(scaled[0], rel=0.05)


@pytest.mark.skipif("compiled" not in _backend.available(), reason="extension not built")
def test_backends_agree():
    p = ScaledParams(0.7, 1.5, 0.0)
    try:
        _backend.use("python")
        a = eval_limit_real(p)
        _backend.use("compiled")
        b = eval_limit_real(p)
    finally:
        _backend.use("auto")
    assert a.n_evals == b.n_evals
    assert abs(a.value - b.value) < 1e-12


def imaginary_axis_oracle(p: FiniteParams):
    """Same integral with a on the positive imaginary axis, tau on [0, 1] and a small xi-circle."""
    N, w, z2, eta = p.n_dim, p.w, p.absz2, p.eta
    T = finite_G_terms(p)
    xk = sorted({(k[0], k[1]) for k in T})
    tk = sorted({(k[2], k[3]) for k in T})
    XP, XQ = np.array([k[0] for k in xk]), np.array([k[1] for k in xk])
    AP, TL = np.array([k[0] for k in tk]), np.array([k[1] for k in tk])
    R = 0.8
    c = -0.5 + R

    def fx(s):
        x = c + R * np.exp(2j * np.pi * s)
        dx = 2j * np.pi * R * np.exp(2j * np.pi * s)
        f = -w * x + np.log1p(x) - np.log(x) - z2 / (1 + x)
        return x ** XP * (1 + x) ** (-XQ) * np.exp(N * f) * dx

    M = dict(zip(xk, quad_vec(fx, 0, 1, epsrel=1e-12, epsabs=0)[0]))
    sc = 3.0 / math.sqrt(w.imag)

    def inner(t):
        def fa(u):
            a = 1j * sc * u / (1 - u)
            da = 1j * sc / (1 - u) ** 2
            D = 1 + 2 * a + a * a * t
            g = (-w * a + 0.5 * np.log(D) - np.log(a) - 0.5 * np.log(t)
                 - (z2 * (1 + a) - 2 * eta ** 2 * a * a * (1 - t)) / D)
            return a ** AP * np.exp(-N * g) * da / D ** 2 * t ** (TL - 0.5)
        return quad_vec(fa, 0, 1 - 1e-12, epsrel=1e-11, epsabs=0, limit=2000)[0]

    A = dict(zip(tk, quad_vec(inner, 0, 1, epsrel=1e-9, epsabs=0, limit=2000)[0]))
    return N / (4j * np.pi) * sum(co * M[k[:2]] * A[k[2:]] for k, co in T.items())


@pytest.mark.parametrize("n", [5, 7])
def test_finite_n_odd_against_independent_contours(n):
    p = FiniteParams(n, 0.05, 0.5, 0.61, 0.02)
    r = eval_finite_n(p)
    ref = imaginary_axis_oracle(p)
    assert abs(r.value - ref) < 1e-6 * abs(ref)


def test_finite_n_small_against_monte_carlo():
    # |z| = 1, N = 4, w = 0.5 + 0.5i
    p = FiniteParams(4, 0.5, 0.8, 1.0, 0.5)
    r = eval_finite_n(p)
    mc = resolvent_trace_mean(EnsembleSpec("real", 4, 0.6 + 0.8j, seed=17, n_samples=40_000), 0.5, 0.5)
    d = r.value / 4 - mc["mean"]
    assert abs(d.real) < 4 * mc["std_error"].real
    assert abs(d.imag) < 4 * mc["std_error"].imag


def test_finite_n_scaled_toward_limit():
    r = eval_finite_n(FiniteParams.from_scaled(50, 1.0, 1.0))
    assert abs(r.value / 50 / math.sqrt(50) - (0.4886486 + 1.3325651j)) < 1e-6


def test_finite_n_toward_limit_inside_disc():
    # delta_t = 2: the scaled finite-N value approaches the limit at the N^{-1/2} rate
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lim = eval_limit_real(ScaledParams(1.0, 1.0, 2.0)).value
    dev = []
    for n in (50, 200):
        v = eval_finite_n(FiniteParams.from_scaled(n, 1.0, 1.0, 2.0)).value
        dev.append(abs(v / n / math.sqrt(n) - lim))
    assert dev[1] < dev[0] / 1.5


def test_requests_and_failures():
    with pytest.raises(ValueError):
        EvalRequest("nope", ScaledParams(1.0))
    with pytest.raises(TypeError):
        EvalRequest("finite-n", ScaledParams(1.0))
    with pytest.raises(ValueError):
        eval_finite_n(FiniteParams.from_scaled(N_MAX + 1, 1.0, 1.0))
    tiny = Tolerance(rel_tol=1e-13, abs_tol=0.0, max_depth=2, max_evals=2000)
    with pytest.raises(QuadratureFailure) as exc:
        eval_limit_real(ScaledParams(1.0, 1.0, 0.0), tiny)
    assert exc.value.result is None or not exc.value.result.converged
    loose = eval_limit_real(ScaledParams(1.0, 1.0, 0.0), tiny, strict=False)
    assert not loose.converged
    out = evaluate_many([EvalRequest("limit-complex", ScaledParams(1.0)),
                         EvalRequest("limit-real", ScaledParams(1.0, 1.0), tol=tiny)])
    assert out[0].converged and not out[1].converged


def test_csv_row_round_trip():
    r = evaluate(EvalRequest("limit-real", ScaledParams(1.0, 1.0, 0.0)))
    row = r.csv_row()
    assert tuple(row) == CSV_FIELDS
    assert complex(float(row["re"]), float(row["im"])) == r.value
    assert float(row["err_estimate"]) == r.err_estimate


def test_tau_collapse_leading_term():
    a = complex(math.cos(math.pi / 3), math.sin(math.pi / 3))
    res = []
    for eta_t in (8.0, 16.0, 32.0):
        v, _ = tau_collapse_integral(a, 0.5, eta_t)
        res.append(abs(v - 1 / (2 * eta_t ** 2)) * eta_t ** 3)
    assert res[2] < res[1] < res[0]


def test_small_regime_mass_is_finite_and_shrinks():
    m50 = small_regime_mass(FiniteParams.from_scaled(50, 1.0, 1.0), 0.1)
    m100 = small_regime_mass(FiniteParams.from_scaled(100, 1.0, 1.0), 0.1)
    assert 0 < m100 < m50
    with pytest.raises(ValueError):
        small_regime_mass(FiniteParams.from_scaled(50, 1.0, 1.0), 0.9)


def test_large_delta_bounded():
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ratios = [abs(eval_limit_real(ScaledParams(1.0, 1.0, d)).value) / (1 + d) for d in (10.0, 20.0, 40.0)]
    assert max(ratios) < 2 * min(ratios)
