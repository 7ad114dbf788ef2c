import cmath
import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ginibre_sv.phases import (
    LEMMA_CASES, BranchJump, BranchTracker, FiniteParams, PoleHit, RegimeMismatch, ScaledParams,
    G_N, G_N_parts, exp_Nf, expansion_report, f_finite, finite_G_terms, frak_f, frak_g, g_continued,
    g_finite, h_complex, limit_G_terms, monotone_ray_check, monotone_ray_report,
    re_g_lower_bound_check, sample_lemma_case,
)

finite_c = st.complex_numbers(min_magnitude=0.1, max_magnitude=3.0, allow_nan=False, allow_infinity=False)


def test_f_finite_matches_mpmath():
    rng = np.random.default_rng(3)
    w, z2 = 0.02 + 0.001j, 0.7
    for _ in range(50):
        x = complex(*rng.uniform(-2, 2, 2))
        ref = -w * mp.mpc(x) + mp.log(1 + mp.mpc(x)) - mp.log(mp.mpc(x)) - z2 / (1 + mp.mpc(x))
        assert abs(complex(f_finite(x, w, z2)) - complex(ref)) < 1e-13


def test_g_finite_matches_mpmath():
    rng = np.random.default_rng(4)
    w, z2, eta = 0.01 + 0.0j, 0.9, 0.2
    for _ in range(50):
        a = complex(*rng.uniform(0.1, 2, 2))
        t = complex(rng.uniform(0.1, 1), -rng.uniform(0, 0.3))
        A, T = mp.mpc(a), mp.mpc(t)
        D = 1 + 2 * A + A * A * T
        ref = (-w * A + mp.log(D) / 2 - mp.log(A) - mp.log(T) / 2
               - (z2 * (1 + A) - 2 * eta ** 2 * A * A * (1 - T)) / D)
        assert abs(complex(g_finite(a, t, eta, w, z2)) - complex(ref)) < 1e-13


@settings(max_examples=200, deadline=None)
@given(finite_c, st.floats(0.1, 10), st.floats(0.1, 5))
def test_frak_g_at_tau_one_is_frak_f(a, lam, eta_t):
    p = ScaledParams(lam, eta_t, 0.0)
    assert abs(complex(frak_g(a, 1.0, p)) - complex(frak_f(a, p))) < 1e-12 * max(1.0, abs(frak_f(a, p)))


@settings(max_examples=200, deadline=None)
@given(finite_c, finite_c, st.floats(0.1, 5))
def test_eta_sign_flip(a, tau, eta_t):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p, q = ScaledParams(1.0, eta_t, 0.0), ScaledParams(1.0, -eta_t, 0.0)
    assert complex(frak_g(a, tau, p)) == complex(frak_g(a, tau, q))


def test_g_continued_equals_f_at_tau_one():
    rng = np.random.default_rng(5)
    a = rng.uniform(-3, 3, 500) + 1j * rng.uniform(-3, 3, 500)
    a = a[(np.abs(a) > 0.05) & (np.abs(1 + a) > 0.05)]
    w = 0.01 + 0.002j
    dev = np.abs(g_continued(a, 1.0, 0.3, w, 0.8) - f_finite(a, w, 0.8))
    assert dev.max() < 1e-12


def test_branch_tracker_follows_unwrapped_argument():
    tau = 0.3 - 0.4j
    tr = BranchTracker.for_quadratic(tau)
    path = np.linspace(0, 1, 4001) * (6 * cmath.exp(2.2j))
    D = 1 + 2 * path + path * path * tau
    ref = np.log(np.abs(D)) + 1j * np.unwrap(np.angle(D))
    got = np.array([tr.step(p) for p in path])
    assert np.max(np.abs(got - ref)) < 1e-10


def test_branch_tracker_detects_sparse_nodes():
    tr = BranchTracker([0j], base_point=1 + 0j)
    assert abs(tr.step(1j) - 0.5j * math.pi) < 1e-15
    # from 1j, the point -1j lies exactly opposite the root: half a turn in one step
    with pytest.raises(BranchJump):
        tr.step(-1j)
    with pytest.raises(PoleHit):
        BranchTracker([1 + 0j], base_point=1 + 0j)


def test_exp_Nf_is_single_valued():
    N, w, z2 = 7, 0.03 + 0.01j, 0.5
    for x in (-0.5 + 1e-9j, -0.5 - 1e-9j, -2 + 0.3j, 0.4 - 1.1j):
        X = mp.mpc(x)
        ref = mp.exp(-N * w * X - N * z2 / (1 + X)) * ((1 + X) / X) ** N
        assert abs(complex(exp_Nf(x, N, w, z2)) / complex(ref) - 1) < 1e-12


def test_separated_terms_reproduce_G_N():
    p = FiniteParams(9, 2e-3, 0.2, 0.6, 1e-4)
    T = finite_G_terms(p)
    rng = np.random.default_rng(6)
    for _ in range(20):
        a, xi = complex(*rng.uniform(0.2, 2, 2)), complex(*rng.uniform(0.2, 2, 2))
        tau = complex(rng.uniform(0.2, 1), -rng.uniform(0, 0.3))
        D = 1 + 2 * a + a * a * tau
        s = sum(c * xi ** kx * (1 + xi) ** -q * a ** ka * tau ** l for (kx, q, ka, l), c in T.items())
        ref = xi ** 2 * a * complex(G_N(a, tau, xi, p)) * D ** 2
        assert abs(s / ref - 1) < 1e-11


def test_G_2N_vanishes_for_real_z():
    p = FiniteParams(5, 1e-2, 0.0, 0.8)
    g1, g2 = G_N_parts(0.3 + 0.2j, 0.5 - 0.1j, 0.7 + 0.4j, p)
    assert g2 == 0 and g1 != 0


def test_limit_terms_fold():
    p = ScaledParams(1.0, 0.0, 0.0)
    labels = {(t.alpha, t.beta, t.gamma) for t in limit_G_terms(p)}
    assert all(t.eta_power == 0 and t.delta_power == 0 for t in limit_G_terms(p))
    assert (4, 4, 3) in labels and (4, 4, 2) in labels
    # 17 written terms with (4 - tau) split, plus three delta_t^2 terms
    assert len(limit_G_terms(ScaledParams(1.0, 1.0, 12.0))) == 21
    unit = sum(t(1.0, 1.0, 1.0) for t in limit_G_terms(p))
    assert unit == 13


@pytest.mark.parametrize("delta_t", [0.0, 2.0, 12.0])
def test_limit_prefactor_is_large_n_limit_of_G_N(delta_t):
    # G_N(sqrt(N) a, tau, sqrt(N) xi) N^2 -> G(a, tau, xi) under eta = eta_t/sqrt(N), delta = delta_t/sqrt(N)
    N = 10 ** 10
    sN = math.sqrt(N)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = ScaledParams(1.0, 1.3, delta_t)
    fp = FiniteParams(N, N ** -1.5 / max(1.0, delta_t), 1.3 / sN, 1 - delta_t / sN, 0.0, delta_t / sN)
    a, tau, xi = 0.7 + 0.9j, 0.5 - 0.3j, 0.8 + 0.4j
    lim = sum(t(a, tau, xi) for t in limit_G_terms(p))
    fin = complex(G_N(sN * a, tau, sN * xi, fp)) * N ** 2
    assert abs(fin / lim - 1) < 1e-4


def test_h_matches_frak_f():
    p = ScaledParams(2.0, 0.0, 15.0)
    x = np.array([0.3 + 0.1j, 1.2 - 0.5j])
    assert np.allclose(h_complex(x, p), frak_f(x, p), rtol=1e-14, atol=0)


def test_params_validation():
    with pytest.raises(ValueError):
        ScaledParams(0.0)
    with pytest.raises(ValueError):
        FiniteParams(5, 2.0, 0.1)
    with pytest.raises(ValueError):
        FiniteParams(5, 0.1, 2.0, 1.0)
    with pytest.warns(UserWarning):
        ScaledParams(50.0)
    p = FiniteParams.from_scaled(64, 1.0, 2.0, 0.0, eps_frac=0.5)
    assert p.energy == pytest.approx(64 ** -1.5)
    assert p.eta_t == pytest.approx(2.0)
    assert p.w == complex(p.energy, p.energy / 2)


def test_expansion_deviation_shrinks():
    reps = [expansion_report(R) for R in (1e2, 1e3, 1e4)]
    for key in ("f", "g", "G1", "G2"):
        assert reps[2][key] < reps[1][key] < reps[0][key]
    assert not reps[0]["missing"]


def test_lemma_check_and_regimes():
    rng = np.random.default_rng(11)
    for case in LEMMA_CASES:
        for _ in range(30):
            smp = sample_lemma_case(case, rng)
            if smp is None:
                continue
            tau, a, p = smp
            assert re_g_lower_bound_check(tau, a, p, case)["holds"]
    tau, a, p = sample_lemma_case("1a", rng)
    with pytest.raises(RegimeMismatch):
        re_g_lower_bound_check(tau, a * 1e6, p, "1a")
    with pytest.raises(RegimeMismatch):
        re_g_lower_bound_check(tau, a, p, "9z")


def test_monotone_ray_examples():
    x = np.geomspace(1e-4, 1.0, 200)
    assert monotone_ray_check(1.0, 1e-8, x)
    rep = monotone_ray_report(0.5 * cmath.exp(-1j * math.pi / 3), 1e-8, x)
    assert rep["monotone"]
    with pytest.raises(ValueError):
        monotone_ray_check(1.0, 1e-8, x[::-1])
