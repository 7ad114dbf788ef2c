"""Piecewise integration paths in the complex plane and adaptive quadrature along them.

A :class:`Contour` is an ordered chain of straight segments, circular arcs and
at most one terminal ray.  :func:`integrate` applies an adaptive Gauss-Kronrod
7/15 rule with a single global panel heap shared by all segments, so effort
goes where the error is largest regardless of which piece it sits on.

Integrands are vectorised: ``f`` receives a 1-D complex array of nodes and
returns either an array of the same length or a 2-D array whose trailing axis
holds several integrands that share the same nodes (moment vectors).
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "QuadratureError", "NonFinite", "MaxDepthExceeded", "TruncationFailure", "InvalidScale",
    "Tolerance", "QuadResult", "FixedLength", "DecayThreshold",
    "LineSegment", "CircularArc", "Ray", "Contour", "integrate",
    "standard_gamma", "standard_omega", "standard_lambda", "r_scale", "limit_a_scale",
    "Z0", "RAY_DIRECTION",
]

# Kronrod abscissae on [0, 1] (descending) with Kronrod and embedded Gauss weights.
_XK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])

#: 15 nodes on [-1, 1] in increasing order, never touching the endpoints.
GK_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
GK_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5, 9, 11, 13]] = np.concatenate([_WG[:3], _WG[:3][::-1]])
GAUSS_WEIGHTS[7] = _WG[3]

Z0 = math.sin(4 * math.pi / 15) / math.sin(17 * math.pi / 30) * complex(math.cos(math.pi / 6), math.sin(math.pi / 6))
RAY_DIRECTION = complex(math.cos(3 * math.pi / 5), math.sin(3 * math.pi / 5))


class QuadratureError(RuntimeError):
    """Base class for quadrature failures."""


class NonFinite(QuadratureError):
    def __init__(self, node):
        super().__init__(f"integrand is not finite at node {node!r}")
        self.node = node


class MaxDepthExceeded(QuadratureError):
    def __init__(self, result):
        super().__init__(
            f"adaptive refinement hit its depth limit (err={result.err_estimate:.3g})")
        self.result = result


class TruncationFailure(QuadratureError):
    """The probe never dropped far enough below its maximum along a ray."""


class InvalidScale(ValueError):
    pass


@dataclass(frozen=True)
class Tolerance:
    """Stopping rule for :func:`integrate`.

    ``max_evals`` is a budget guard on top of ``max_depth``; hitting either
    returns the best estimate with ``converged=False``.
    """
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_depth: int = 40
    max_evals: int = 2_000_000

    def __post_init__(self):
        if not self.rel_tol >= 1e-13:
            raise ValueError("rel_tol must be at least 1e-13")
        if self.abs_tol < 0 or self.max_depth < 1:
            raise ValueError("abs_tol must be >= 0 and max_depth >= 1")

    def scaled(self, factor: float) -> "Tolerance":
        return Tolerance(max(self.rel_tol * factor, 1e-13), self.abs_tol * factor,
                         self.max_depth, self.max_evals)


@dataclass
class QuadResult:
    value: Union[complex, np.ndarray]
    err_estimate: float
    n_evals: int
    converged: bool
    truncations: tuple = ()


@dataclass(frozen=True)
class FixedLength:
    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("truncation length must be positive")


@dataclass(frozen=True)
class DecayThreshold:
    """Cut a ray once the exponent has fallen ``log_drop`` below its running maximum.

    ``probe`` maps an array of points on the ray to the (complex or real)
    exponent of the integrand; only the real part is used.  Without a probe
    the logarithm of the integrand modulus is used instead.
    """
    log_drop: float = 46.0
    probe: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.log_drop > 0:
            raise ValueError("log_drop must be positive")


@dataclass(frozen=True)
class LineSegment:
    start: complex
    end: complex

    def __post_init__(self):
        if self.start == self.end:
            raise ValueError("degenerate line segment")

    def point(self, t):
        return self.start + (self.end - self.start) * t

    def deriv(self, t):
        return np.full(np.shape(t), self.end - self.start, dtype=complex)

    @property
    def endpoint(self):
        return complex(self.end)

    def reversed(self):
        return LineSegment(self.end, self.start)

    def split(self, t):
        mid = self.point(t)
        return LineSegment(self.start, mid), LineSegment(mid, self.end)


@dataclass(frozen=True)
class CircularArc:
    center: complex
    radius: float
    angle_start: float
    angle_end: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("arc radius must be positive")
        if self.angle_start == self.angle_end:
            raise ValueError("degenerate arc")

    def point(self, t):
        th = self.angle_start + (self.angle_end - self.angle_start) * t
        return self.center + self.radius * np.exp(1j * th)

    def deriv(self, t):
        span = self.angle_end - self.angle_start
        th = self.angle_start + span * t
        return 1j * span * self.radius * np.exp(1j * th)

    @property
    def start(self):
        return complex(self.point(0.0))

    @property
    def endpoint(self):
        return complex(self.point(1.0))

    def reversed(self):
        return CircularArc(self.center, self.radius, self.angle_end, self.angle_start)

    def split(self, t):
        mid = self.angle_start + (self.angle_end - self.angle_start) * t
        return (CircularArc(self.center, self.radius, self.angle_start, mid),
                CircularArc(self.center, self.radius, mid, self.angle_end))


@dataclass(frozen=True)
class Ray:
    """Half-line ``start + s*direction``, ``s >= 0``, cut according to ``truncation``.

    The parameter t in [0, 1) covers the accepted truncation [0, T]; the
    quadrature engine works with t in units of the initial cut so that the
    doubling stage simply appends [1, 2], [2, 4], ...
    """
    start: complex
    direction: complex
    truncation: Union[FixedLength, DecayThreshold] = DecayThreshold()

    def __post_init__(self):
        if abs(abs(self.direction) - 1.0) > 1e-14:
            raise ValueError("ray direction must have modulus 1")

    def point(self, t, length=1.0):
        return self.start + self.direction * (length * t)

    def deriv(self, t, length=1.0):
        return np.full(np.shape(t), self.direction * length, dtype=complex)

    def split(self, t):
        raise ValueError("rays cannot be split; cut the preceding segment instead")


Segment = Union[LineSegment, CircularArc, Ray]


def _seg_end(seg):
    return seg.endpoint


class Contour:
    """Ordered chain of segments, optionally closed."""

    def __init__(self, segments: Sequence[Segment], closed: bool = False):
        segs = list(segments)
        if not segs:
            raise ValueError("a contour needs at least one segment")
        for i, s in enumerate(segs):
            if isinstance(s, Ray):
                if i != len(segs) - 1 or closed:
                    raise ValueError("a ray may only be the last segment of an open contour")
        for s0, s1 in zip(segs[:-1], segs[1:]):
            if abs(_seg_end(s0) - complex(s1.start)) > 1e-12 * max(1.0, abs(s1.start)):
                raise ValueError("consecutive segments are not connected")
        if closed and abs(_seg_end(segs[-1]) - complex(segs[0].start)) > 1e-12 * max(1.0, abs(segs[0].start)):
            raise ValueError("closed contour does not return to its start")
        self.segments = tuple(segs)
        self.closed = closed

    def __repr__(self):
        return f"Contour({list(self.segments)!r}, closed={self.closed})"

    @property
    def start(self):
        return complex(self.segments[0].start)

    def knots(self):
        """Start point of every segment, plus the end of the last finite one."""
        pts = [complex(s.start) for s in self.segments]
        if not isinstance(self.segments[-1], Ray):
            pts.append(_seg_end(self.segments[-1]))
        return pts

    def reversed(self):
        if any(isinstance(s, Ray) for s in self.segments):
            raise ValueError("cannot reverse a contour that ends in a ray")
        return Contour([s.reversed() for s in reversed(self.segments)], self.closed)

    def split(self, index, t):
        """Return an equivalent contour with segment ``index`` cut at parameter ``t``."""
        if not 0.0 < t < 1.0:
            raise ValueError("split parameter must lie strictly inside (0, 1)")
        segs = list(self.segments)
        a, b = segs[index].split(t)
        segs[index:index + 1] = [a, b]
        return Contour(segs, self.closed)

    def scaled(self, factor):
        """Image of the contour under ``z -> factor * z`` for real ``factor > 0``."""
        out = []
        for s in self.segments:
            if isinstance(s, LineSegment):
                out.append(LineSegment(s.start * factor, s.end * factor))
            elif isinstance(s, CircularArc):
                out.append(CircularArc(s.center * factor, s.radius * factor, s.angle_start, s.angle_end))
            else:
                trunc = s.truncation
                if isinstance(trunc, FixedLength):
                    trunc = FixedLength(trunc.length * factor)
                out.append(Ray(s.start * factor, s.direction, trunc))
        return Contour(out, self.closed)


# ---------------------------------------------------------------------------
# adaptive engine

def _as_2d(vals, n):
    arr = np.asarray(vals)
    if arr.ndim == 1:
        return arr.reshape(n, 1), True
    return arr.reshape(n, -1), False


class _Engine:
    """Global-heap adaptive GK15 over a list of parameter intervals."""

    def __init__(self, f, tol: Tolerance):
        self.f = f
        self.tol = tol
        self.n_evals = 0
        self.scalar = None

    def _eval(self, pieces, t0s, t1s):
        # pieces: list of (point, deriv) callables, one per interval
        n = len(t0s)
        ts = []
        for t0, t1 in zip(t0s, t1s):
            h = 0.5 * (t1 - t0)
            ts.append(0.5 * (t0 + t1) + h * GK_NODES)
        pts = np.concatenate([pc[0](t) for pc, t in zip(pieces, ts)])
        ders = np.concatenate([pc[1](t) for pc, t in zip(pieces, ts)])
        vals = self.f(pts)
        vals, scalar = _as_2d(vals, pts.size)
        if self.scalar is None:
            self.scalar = scalar
        self.n_evals += pts.size
        bad = ~np.isfinite(vals)
        if bad.any():
            i = int(np.argwhere(bad)[0][0])
            raise NonFinite(complex(pts[i]))
        out = []
        for k in range(n):
            blk = vals[15 * k:15 * (k + 1)] * ders[15 * k:15 * (k + 1), None]
            h = 0.5 * (t1s[k] - t0s[k])
            K = h * (GK_WEIGHTS @ blk)
            G = h * (GAUSS_WEIGHTS @ blk)
            out.append((K, float(np.max(np.abs(K - G)))))
        return out

    def run(self, pieces, intervals, extend=None):
        """Adaptively integrate over ``intervals`` = [(piece_id, t0, t1, group), ...].

        ``extend(total_by_group) -> list of new intervals`` is called once the
        heap meets the tolerance; it may append tail pieces (ray doubling).
        """
        heap = []
        counter = 0
        total = None
        err = 0.0
        by_group = {}
        first = self._eval([pieces[p] for p, *_ in intervals],
                           [iv[1] for iv in intervals], [iv[2] for iv in intervals])
        for (pid, t0, t1, grp), (K, e) in zip(intervals, first):
            heapq.heappush(heap, (-e, counter, pid, t0, t1, grp, 0, K))
            counter += 1
            total = K.copy() if total is None else total + K
            by_group[grp] = by_group.get(grp, 0) + K
            err += e
        converged = False
        while True:
            scale = float(np.max(np.abs(total)))
            if err <= max(self.tol.abs_tol, self.tol.rel_tol * scale):
                new = extend(by_group, total) if extend is not None else []
                if not new:
                    converged = True
                    break
                res = self._eval([pieces[p] for p, *_ in new], [iv[1] for iv in new], [iv[2] for iv in new])
                for (pid, t0, t1, grp), (K, e) in zip(new, res):
                    heapq.heappush(heap, (-e, counter, pid, t0, t1, grp, 0, K))
                    counter += 1
                    total = total + K
                    by_group[grp] = by_group.get(grp, 0) + K
                    err += e
                continue
            ne, _, pid, t0, t1, grp, depth, K0 = heap[0]
            if depth >= self.tol.max_depth or self.n_evals >= self.tol.max_evals:
                break
            heapq.heappop(heap)
            tm = 0.5 * (t0 + t1)
            (K1, e1), (K2, e2) = self._eval([pieces[pid], pieces[pid]], [t0, tm], [tm, t1])
            total = total - K0 + K1 + K2
            by_group[grp] = by_group[grp] - K0 + K1 + K2
            err += ne + e1 + e2
            for a, b, K, e in ((t0, tm, K1, e1), (tm, t1, K2, e2)):
                heapq.heappush(heap, (-e, counter, pid, a, b, grp, depth + 1, K))
                counter += 1
        # recompute the error as a plain sum to shed accumulated rounding
        err = float(sum(-item[0] for item in heap))
        return total, err, converged


_PROBE_S = np.geomspace(1e-10, 1e14, 24 * 16 + 1)


def _probe_cut(ray: Ray, f, scale):
    """First ray length at which the probe is ``log_drop`` below its running max."""
    pol = ray.truncation
    s = _PROBE_S * scale
    pts = ray.point(s)
    with np.errstate(all="ignore"):
        if pol.probe is not None:
            lv = np.real(np.asarray(pol.probe(pts), dtype=complex))
        else:
            vals, _ = _as_2d(f(pts), pts.size)
            lv = np.log(np.max(np.abs(vals), axis=1))
    lv = np.where(np.isnan(lv), -np.inf, lv)
    run_max = np.maximum.accumulate(lv)
    if not np.isfinite(run_max[-1]):
        if np.all(lv == -np.inf):
            return float(s[0])
        raise TruncationFailure("probe diverges along the ray")
    hit = np.nonzero((lv <= run_max - pol.log_drop) & np.isfinite(run_max))[0]
    # demand that the drop is not followed by a recovery above the cut level
    for i in hit:
        if np.all(lv[i:] <= run_max[i] - pol.log_drop):
            return float(s[i])
    raise TruncationFailure(
        f"integrand did not decay by {pol.log_drop} along the ray from {ray.start}")


def integrate(f: Callable, c: Contour, tol: Optional[Tolerance] = None, *, strict: bool = False,
              ray_scale: float = 1.0) -> QuadResult:
    """Integrate ``f`` along ``c``.

    Parameters
    ----------
    f : callable
        Vectorised integrand, complex array -> array of shape (n,) or (n, m).
    c : Contour
        Integration path.  A terminal :class:`Ray` is cut by its policy; with
        :class:`DecayThreshold` the cut is then doubled until one more doubling
        changes the ray's contribution by less than the tolerance.
    tol : Tolerance, optional
    strict : bool
        Raise :class:`MaxDepthExceeded` instead of returning an unconverged result.
    ray_scale : float
        Characteristic length used to place probe points on a ray.

    Returns
    -------
    QuadResult
        ``value`` is complex for scalar integrands and an array otherwise.
    """
    tol = tol or Tolerance()
    eng = _Engine(f, tol)
    pieces = []
    intervals = []
    ray_state = None
    for k, seg in enumerate(c.segments):
        if isinstance(seg, Ray):
            if isinstance(seg.truncation, FixedLength):
                length = seg.truncation.length
                adaptive_tail = False
            else:
                length = _probe_cut(seg, f, ray_scale)
                adaptive_tail = True
            pieces.append((lambda t, s=seg, L=length: s.point(t, L),
                           lambda t, s=seg, L=length: s.deriv(t, L)))
            intervals.append((len(pieces) - 1, 0.0, 1.0, ("ray", 0)))
            if adaptive_tail:
                ray_state = {"pid": len(pieces) - 1, "upper": 1.0, "length": length, "doublings": 0}
            else:
                ray_state = {"fixed": length}
        else:
            pieces.append((seg.point, seg.deriv))
            intervals.append((len(pieces) - 1, 0.0, 1.0, ("seg", k)))

    def extend(by_group, total):
        if ray_state is None or "fixed" in ray_state:
            return []
        up = ray_state["upper"]
        last = by_group.get(("ray", ray_state["doublings"]))
        if ray_state["doublings"] > 0:
            scale = float(np.max(np.abs(total)))
            if float(np.max(np.abs(last))) < max(tol.abs_tol, tol.rel_tol * scale):
                return []
        if ray_state["doublings"] >= 40:
            raise TruncationFailure("ray tail did not settle after 40 doublings")
        ray_state["doublings"] += 1
        ray_state["upper"] = 2 * up
        return [(ray_state["pid"], up, 2 * up, ("ray", ray_state["doublings"]))]

    total, err, ok = eng.run(pieces, intervals, extend)
    truncs = ()
    if ray_state is not None:
        truncs = (ray_state.get("fixed") or ray_state["length"] * ray_state["upper"],)
    value = complex(total[0]) if eng.scalar else total
    scale = float(np.max(np.abs(total)))
    ok = ok and err <= max(tol.abs_tol, tol.rel_tol * scale)
    res = QuadResult(value, err, eng.n_evals, ok, truncs)
    if strict and not ok:
        raise MaxDepthExceeded(res)
    return res


# ---------------------------------------------------------------------------
# the prescribed contours

def standard_gamma(energy: Optional[float] = None, *, radius: Optional[float] = None,
                   center: Optional[complex] = None) -> Contour:
    """Closed counter-clockwise circle for the xi-integration.

    With ``energy`` E the finite-N circle of radius E^{-1/3} centred at
    -1/2 + E^{-1/3} is returned; it passes through -1/2 and keeps -1 outside.
    Otherwise ``radius`` is required and the centre defaults to ``radius``,
    giving the circle tangent to the imaginary axis at 0 used by the limiting
    integrals, whose xi-integrand decays to zero along that tangent.
    """
    if energy is not None:
        if not 0 < energy:
            raise InvalidScale("energy must be positive")
        R = energy ** (-1.0 / 3.0)
        c = -0.5 + R if center is None else center
        return Contour([CircularArc(c, R, -math.pi, math.pi)], closed=True)
    if radius is None or not radius > 0:
        raise InvalidScale("a positive radius is required for the limiting contour")
    c = radius if center is None else center
    return Contour([CircularArc(c, radius, -math.pi, math.pi)], closed=True)


def standard_omega(depth: float = 1.0 / 3.0) -> Contour:
    """Three-piece tau-contour 0 -> d/sqrt(3) - i d -> 1 - d/sqrt(3) - i d -> 1.

    The default depth 1/3 gives the canonical knots; other depths keep the
    +-60 degree slopes at both ends.
    """
    if not 0 < depth < math.sqrt(3) / 2:
        raise InvalidScale("depth must lie in (0, sqrt(3)/2)")
    k1 = complex(depth / math.sqrt(3), -depth)
    k2 = complex(1 - depth / math.sqrt(3), -depth)
    return Contour([LineSegment(0j, k1), LineSegment(k1, k2), LineSegment(k2, 1 + 0j)])


def standard_lambda(scale: float, truncation=None) -> Contour:
    """The a-contour r*Lambda: [0, r z0] followed by a ray in direction e^{3 i pi/5}."""
    if not scale > 0:
        raise InvalidScale("the a-contour scale must be positive")
    knot = scale * Z0
    return Contour([LineSegment(0j, knot), Ray(knot, RAY_DIRECTION, truncation or DecayThreshold())])


def r_scale(eta_t: float, energy: float, tau: complex) -> float:
    """Finite-N a-contour scale E^{-1/3} (1/2 + 1/(2 (E v |tau|)^{2/3}) + eta_t^2/|tau|)."""
    at = abs(tau)
    if not energy > 0 or at == 0:
        raise InvalidScale("energy and |tau| must be positive")
    return energy ** (-1.0 / 3.0) * (0.5 + 0.5 / max(energy, at) ** (2.0 / 3.0) + eta_t ** 2 / at)


def limit_a_scale(lam: float, tau: complex) -> float:
    """a-contour scale for the limiting integrals: lam^{-1/3} (1/2 + 1/(2|tau|^{2/3})).

    This is the rescaled finite-N choice without the eta_t^2/|tau| term.  That
    term pushes the knot deep into the region where e^{lam a} is large and the
    straight piece then suffers heavy cancellation.
    """
    at = abs(tau)
    if not lam > 0 or at == 0:
        raise InvalidScale("lambda and |tau| must be positive")
    return lam ** (-1.0 / 3.0) * (0.5 + 0.5 * at ** (-2.0 / 3.0))
