import cmath
import math

import numpy as np
import pytest

from ginibre_sv.contours import (
    CircularArc, Contour, DecayThreshold, FixedLength, InvalidScale, LineSegment, MaxDepthExceeded,
    NonFinite, Ray, Tolerance, integrate, limit_a_scale, r_scale, standard_gamma, standard_lambda,
    standard_omega,
)


def test_polynomial_on_segment_is_exact():
    c = Contour([LineSegment(0j, 1 + 1j)])
    res = integrate(lambda z: z ** 5, c)
    assert res.converged
    assert abs(res.value - (1 + 1j) ** 6 / 6) < 1e-14


def test_residue_on_circle():
    c = standard_gamma(radius=1.0, center=0j)
    res = integrate(lambda z: np.exp(z) / z ** 3, c)
    assert abs(res.value - 2j * math.pi / 2) < 1e-12


def test_vector_integrand_columns():
    c = Contour([LineSegment(0j, 2 + 0j)])
    res = integrate(lambda z: np.stack([z, z * z], axis=1), c)
    assert np.allclose(res.value, [2.0, 8.0 / 3.0], rtol=1e-13)


def test_ray_with_decay_threshold():
    # integral of e^{-z} along a ray from 0 at angle -pi/4 equals 1
    d = cmath.exp(-1j * math.pi / 4)
    c = Contour([Ray(0j, d, DecayThreshold(probe=lambda z: -z))])
    res = integrate(lambda z: np.exp(-z), c)
    assert res.converged
    assert abs(res.value - 1) < 1e-10
    assert res.truncations and res.truncations[0] > 46


def test_ray_with_fixed_length():
    c = Contour([Ray(0j, 1 + 0j, FixedLength(3.0))])
    res = integrate(lambda z: np.exp(-z), c)
    assert abs(res.value - (1 - math.exp(-3))) < 1e-13


def test_split_and_reverse_are_equivalent():
    c = Contour([LineSegment(0j, 1j), CircularArc(0j, 1.0, math.pi / 2, math.pi)])
    f = lambda z: np.cos(z) * z
    v = integrate(f, c).value
    assert abs(integrate(f, c.split(1, 0.3)).value - v) < 1e-13
    assert abs(integrate(f, c.reversed()).value + v) < 1e-13


def test_scaled_contour():
    c = standard_omega()
    s = c.scaled(2.0)
    assert s.knots()[-1] == 2 + 0j
    assert abs(integrate(lambda z: z, s).value - 2.0) < 1e-13


def test_nonfinite_is_reported():
    c = Contour([LineSegment(-1 + 0j, 1 + 0j)])
    with pytest.raises(NonFinite), np.errstate(all="ignore"):
        integrate(lambda z: 1 / z, c)


def test_strict_raises_on_budget():
    c = Contour([LineSegment(1e-12 + 0j, 1 + 0j)])
    tol = Tolerance(rel_tol=1e-13, abs_tol=0.0, max_depth=3)
    res = integrate(lambda z: np.abs(z) ** -0.9, c, tol)
    assert not res.converged
    with pytest.raises(MaxDepthExceeded):
        integrate(lambda z: np.abs(z) ** -0.9, c, tol, strict=True)


def test_contour_validation():
    with pytest.raises(ValueError):
        Contour([])
    with pytest.raises(ValueError):
        Contour([LineSegment(0j, 1 + 0j), LineSegment(2 + 0j, 3 + 0j)])
    with pytest.raises(ValueError):
        Contour([Ray(0j, 1 + 0j), LineSegment(0j, 1j)])
    with pytest.raises(ValueError):
        Contour([LineSegment(0j, 1 + 0j)], closed=True)
    with pytest.raises(ValueError):
        Tolerance(rel_tol=1e-15)


def test_standard_contours():
    om = standard_omega()
    k = om.knots()
    assert k[0] == 0 and k[-1] == 1
    assert abs(k[1] - complex(1 / (3 * math.sqrt(3)), -1 / 3)) < 1e-15
    E = 1e-6
    g = standard_gamma(E)
    seg = g.segments[0]
    assert g.closed and abs(seg.radius - E ** (-1 / 3)) < 1e-9
    assert abs(seg.center - seg.radius - (-0.5)) < 1e-9
    lam = standard_lambda(2.0)
    assert isinstance(lam.segments[-1], Ray)
    with pytest.raises(InvalidScale):
        standard_gamma(-1.0)
    with pytest.raises(InvalidScale):
        standard_omega(1.0)
    with pytest.raises(InvalidScale):
        r_scale(1.0, 1e-6, 0j)
    assert limit_a_scale(1.0, 1.0) == pytest.approx(1.0)
