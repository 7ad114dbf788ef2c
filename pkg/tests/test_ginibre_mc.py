import csv
import io
import math

import numpy as np
import pytest
from scipy import integrate

from ginibre_sv import ginibre_mc as mc
from ginibre_sv.ginibre_mc import (
    EnsembleSpec, Kind, SvdFailure, draw_matrix, edelman_cdf, edelman_density, ks_to_edelman,
    ks_two_sample, median_smallest_eigenvalue, resolve_threads, resolvent_trace_mean,
    sample_singular_values, smallest_singular_values, smallest_sv_histogram,
)


def test_two_by_two_closed_form():
    spec = EnsembleSpec("complex", 2, 0.3 - 0.2j, seed=1, n_samples=5)
    for s in sample_singular_values(spec):
        A = draw_matrix(spec, s.sample_index)
        fro = np.sum(np.abs(A) ** 2)
        det = abs(np.linalg.det(A)) ** 2
        disc = math.sqrt(fro * fro - 4 * det)
        ref = np.sqrt([(fro - disc) / 2, (fro + disc) / 2])
        assert np.allclose(s.singular_values, ref, rtol=1e-12)


def test_real_dtype_only_for_real_shift():
    assert draw_matrix(EnsembleSpec("real", 4, 0.5), 0).dtype == np.float64
    assert draw_matrix(EnsembleSpec("real", 4, 0.5j), 0).dtype == np.complex128
    assert draw_matrix(EnsembleSpec("complex", 4, 0.5), 0).dtype == np.complex128


@pytest.mark.parametrize("kind", ["real", "complex"])
def test_second_moment_identity(kind):
    # E (1/N) tr (X - z)(X - z)^* = 1 + |z|^2
    z = 0.4 + 0.3j
    spec = EnsembleSpec(kind, 16, z, seed=2, n_samples=3000)
    m = np.array([np.sum(s.singular_values ** 2) / 16 for s in sample_singular_values(spec)])
    se = m.std(ddof=1) / math.sqrt(m.size)
    assert abs(m.mean() - (1 + abs(z) ** 2)) < 4 * se


def test_thread_count_does_not_change_results(monkeypatch):
    spec = EnsembleSpec("real", 12, 0.2j, seed=9, n_samples=700)
    a = smallest_singular_values(spec, threads=1)
    b = smallest_singular_values(spec, threads=3)
    monkeypatch.setenv("GINIBRE_THREADS", "2")
    c = smallest_singular_values(spec)
    assert np.array_equal(a, b) and np.array_equal(a, c)
    assert resolve_threads() == 2
    with pytest.raises(ValueError):
        resolve_threads(0)


def test_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec("real", 1)
    with pytest.raises(ValueError):
        EnsembleSpec("real", 4, seed=-1)
    with pytest.raises(ValueError):
        EnsembleSpec("quaternion", 4)
    assert EnsembleSpec("complex", 4).kind is Kind.COMPLEX


@pytest.mark.parametrize("kind", ["real", "complex"])
def test_edelman_laws(kind):
    total, _ = integrate.quad(lambda x: edelman_density(kind, x), 0, np.inf)
    assert total == pytest.approx(1.0, abs=1e-12)
    x = np.linspace(0.1, 3, 7)
    h = 1e-6
    deriv = (edelman_cdf(kind, x + h) - edelman_cdf(kind, x - h)) / (2 * h)
    assert np.allclose(deriv, edelman_density(kind, x), atol=1e-8)
    with pytest.raises(ValueError):
        edelman_density(kind, -1.0)


def test_ks_helpers():
    rng = np.random.default_rng(0)
    # inverse of 1 - e^{-x^2}
    x = np.sqrt(-np.log1p(-rng.uniform(size=5000)))
    assert ks_to_edelman("complex", x) < 0.03
    assert ks_to_edelman("real", x) > 0.1
    assert ks_two_sample(x, x) == 0.0


def test_histogram_normalisation_and_csv():
    spec = EnsembleSpec("complex", 8, 0j, seed=4, n_samples=1500)
    t = smallest_sv_histogram(spec)
    assert t.bin_edges.size == 81 and t.bin_edges[-1] == pytest.approx(3.2)
    assert np.sum(t.values * np.diff(t.bin_edges)) == pytest.approx(1.0)
    buf = io.StringIO()
    t.to_csv(buf)
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert len(rows) == 80
    assert np.array_equal([float(r["pdf"]) for r in rows], t.values)
    cdf = smallest_sv_histogram(spec, normalization="cdf", data=smallest_singular_values(spec))
    assert cdf.values[-1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        smallest_sv_histogram(EnsembleSpec("real", 8, n_samples=10))
    with pytest.raises(ValueError):
        smallest_sv_histogram(spec, scale="BySqrtN")


def test_resolvent_mean():
    spec = EnsembleSpec("real", 10, 1.0, seed=3, n_samples=400)
    r = resolvent_trace_mean(spec, 0.01, 0.005)
    assert r["mean"].imag > 0 and r["n"] == 400
    assert r["std_error"].real > 0
    with pytest.raises(ValueError):
        resolvent_trace_mean(spec, 0.01, 0.0)


def test_svd_failure_is_retried(monkeypatch):
    real_svd = np.linalg.svd
    calls = {"n": 0}

    def flaky(a, compute_uv=True):
        calls["n"] += 1
        if calls["n"] == 1:
            raise np.linalg.LinAlgError("no convergence")
        return real_svd(a, compute_uv=compute_uv)

    monkeypatch.setattr(mc.np.linalg, "svd", flaky)
    spec = EnsembleSpec("real", 4, seed=5, n_samples=2)
    out = smallest_singular_values(spec)
    assert out.size == 2 and calls["n"] == 3

    def broken(a, compute_uv=True):
        raise np.linalg.LinAlgError("no convergence")

    monkeypatch.setattr(mc.np.linalg, "svd", broken)
    with pytest.raises(SvdFailure):
        smallest_singular_values(spec)


def test_level_spacing_scale_at_unit_circle():
    # at |z| = 1 the smallest eigenvalue of Y^z lives on the N^{-3/2} scale
    vals = [median_smallest_eigenvalue(EnsembleSpec("complex", n, 1.0, seed=n, n_samples=300)) * n ** 1.5
            for n in (32, 64, 128)]
    assert max(vals) / min(vals) < 2.0
