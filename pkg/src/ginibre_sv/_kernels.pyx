# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner a-moment kernel.

Same contract as ``ginibre_sv._fallback.segment_moments``: adaptive
Gauss-Kronrod 7/15 on one straight piece of the a-contour, a vector of
integer powers sharing the nodes, and decay-based truncation plus doubling
when the piece is a ray.
"""
import numpy as np
from libc.math cimport exp, log, cos, sin, atan2, hypot, fabs, isfinite, INFINITY
from libc.stdlib cimport malloc, free, realloc

cdef double XK[8]
cdef double WK[8]
cdef double WG[4]
XK[:] = [0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
         0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
         0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
         0.207784955007898467600689403773245, 0.0]
WK[:] = [0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
         0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
         0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
         0.204432940075298892414161999234649, 0.209482141084727828012999174891714]
WG[:] = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
         0.381830050505118944950369775488975, 0.417959183673469387755102040816327]

cdef double NODES[15]
cdef double KW[15]
cdef double GW[15]
cdef int _i
for _i in range(7):
    NODES[_i] = -XK[_i]
    NODES[14 - _i] = XK[_i]
    KW[_i] = WK[_i]
    KW[14 - _i] = WK[_i]
    GW[_i] = 0.0
    GW[14 - _i] = 0.0
NODES[7] = 0.0
KW[7] = WK[7]
GW[7] = WG[3]
GW[1] = WG[0]; GW[13] = WG[0]
GW[3] = WG[1]; GW[11] = WG[1]
GW[5] = WG[2]; GW[9] = WG[2]

DEF NPROBE = 385

ctypedef struct Ctx:
    int kind
    double m_lam, eta2, delta_t
    double n, absz2
    double complex w, tau, r1, r2, start, direction, c0, half_log_tau
    double logD0_im
    int pmin, npow, nk
    int* pidx


cdef inline double complex cexp_(double complex z) nogil:
    cdef double e = exp(z.real)
    return e * cos(z.imag) + 1j * (e * sin(z.imag))


cdef inline double carg(double complex z) nogil:
    return atan2(z.imag, z.real)


cdef inline double complex clog_(double complex z) nogil:
    return log(hypot(z.real, z.imag)) + 1j * atan2(z.imag, z.real)


cdef inline double complex exponent(Ctx* c, double complex a, double complex* Dout) nogil:
    cdef double complex at, D, ld
    if c.kind == 0:
        at = a * c.tau
        Dout[0] = 1.0
        return c.m_lam * a + c.c0 - (2.0 - c.tau) / (2.0 * at * at) - c.delta_t / at
    D = 1.0 + 2.0 * a + a * a * c.tau
    Dout[0] = D
    ld = log(hypot(D.real, D.imag)) + 1j * (c.logD0_im + carg((a - c.r1) / (c.start - c.r1))
                                             + carg((a - c.r2) / (c.start - c.r2)))
    return c.n * (c.w * a + clog_(a) + c.half_log_tau - 0.5 * ld
                  + (c.absz2 * (1.0 + a) - 2.0 * c.eta2 * a * a * (1.0 - c.tau)) / D)


cdef int panel(Ctx* c, double s0, double s1, double complex* K, double complex* G,
               double complex* apow, double complex* bad) nogil:
    """GK15 on [s0, s1] of the piece; returns 0, or 1 on a non-finite value."""
    cdef int j, k, q
    cdef double h = 0.5 * (s1 - s0), mid = 0.5 * (s0 + s1)
    cdef double complex a, L, D, val, x
    for k in range(c.nk):
        K[k] = 0.0
        G[k] = 0.0
    for j in range(15):
        a = c.start + c.direction * (mid + h * NODES[j])
        L = exponent(c, a, &D)
        if L.real < -700.0:
            continue
        val = cexp_(L) * c.direction
        if c.kind == 1:
            val = val / (D * D)
        if not (isfinite(val.real) and isfinite(val.imag)):
            bad[0] = a
            return 1
        # a^pmin by repeated multiplication, then ascending powers
        x = 1.0
        if c.pmin >= 0:
            for q in range(c.pmin):
                x = x * a
        else:
            for q in range(-c.pmin):
                x = x / a
        for q in range(c.npow):
            apow[q] = x
            x = x * a
        for k in range(c.nk):
            K[k] = K[k] + (KW[j] * h) * apow[c.pidx[k]] * val
            G[k] = G[k] + (GW[j] * h) * apow[c.pidx[k]] * val
    return 0


cdef double maxabs(double complex* v, int n) nogil:
    cdef double m = 0.0, t
    cdef int k
    for k in range(n):
        t = hypot(v[k].real, v[k].imag)
        if t > m:
            m = t
    return m


cdef double diffabs(double complex* a, double complex* b, int n) nogil:
    cdef double m = 0.0, t
    cdef int k
    for k in range(n):
        t = hypot(a[k].real - b[k].real, a[k].imag - b[k].imag)
        if t > m:
            m = t
    return m


cdef double probe_cut(Ctx* c, double scale, double log_drop) nogil:
    """Ray length where Re L first sits log_drop below its running max for good; -1 if never."""
    cdef double lv[NPROBE]
    cdef double rmax[NPROBE]
    cdef double smax[NPROBE]
    cdef double s, m
    cdef double complex D
    cdef int j
    for j in range(NPROBE):
        s = scale * 10.0 ** (-10.0 + 24.0 * j / (NPROBE - 1))
        lv[j] = exponent(c, c.start + c.direction * s, &D).real
        if lv[j] != lv[j]:
            lv[j] = -INFINITY
    m = -INFINITY
    for j in range(NPROBE):
        if lv[j] > m:
            m = lv[j]
        rmax[j] = m
    m = -INFINITY
    for j in range(NPROBE - 1, -1, -1):
        if lv[j] > m:
            m = lv[j]
        smax[j] = m
    if rmax[NPROBE - 1] == -INFINITY:
        return scale * 1e-10
    for j in range(NPROBE):
        if isfinite(rmax[j]) and smax[j] <= rmax[j] - log_drop:
            return scale * 10.0 ** (-10.0 + 24.0 * j / (NPROBE - 1))
    return -1.0


class KernelError(RuntimeError):
    pass


def segment_moments(int kind, tuple params, double complex tau, tuple roots, double complex start,
                    double complex direction, double length, powers, double complex logD0,
                    double rel_tol, double abs_tol, int max_depth, double log_drop, double scale,
                    int max_panels=8192, long max_evals=2000000):
    """Compiled twin of the pure-Python ``segment_moments``; see there for the contract."""
    cdef Ctx c
    cdef int nk = len(powers), k, i, best, npan = 0, cap = 64, group = 0, ngroups = 1
    cdef long n_evals = 0
    cdef double err_sum, sc, T, upper, e, lastmag, emax
    cdef bint is_ray = length == INFINITY, converged = False
    cdef double complex bad = 0
    pw = [int(p) for p in powers]
    c.kind = kind
    c.tau = tau
    c.start = start
    c.direction = direction
    c.nk = nk
    c.pmin = min(pw)
    c.npow = max(pw) - c.pmin + 1
    if kind == 0:
        c.m_lam, c.eta2, c.delta_t = params
        c.c0 = -2.0 * c.eta2 * (1.0 - tau) / tau
    else:
        c.n, E, eps, c.eta2, c.absz2 = params
        c.w = E + 1j * eps
        c.half_log_tau = 0.5 * clog_(tau)
        c.r1, c.r2 = roots
        c.logD0_im = logD0.imag
    c.pidx = <int*> malloc(nk * sizeof(int))
    cdef double complex* apow = <double complex*> malloc(c.npow * sizeof(double complex))
    cdef double complex* Kp = <double complex*> malloc(cap * nk * sizeof(double complex))
    cdef double* s0 = <double*> malloc(cap * sizeof(double))
    cdef double* s1 = <double*> malloc(cap * sizeof(double))
    cdef double* perr = <double*> malloc(cap * sizeof(double))
    cdef int* depth = <int*> malloc(cap * sizeof(int))
    cdef int* grp = <int*> malloc(cap * sizeof(int))
    cdef double complex* total = <double complex*> malloc(nk * sizeof(double complex))
    cdef double complex* gsum = <double complex*> malloc(nk * sizeof(double complex))
    cdef double complex* K1 = <double complex*> malloc(nk * sizeof(double complex))
    cdef double complex* G1 = <double complex*> malloc(nk * sizeof(double complex))
    cdef double complex* K2 = <double complex*> malloc(nk * sizeof(double complex))
    cdef double complex* G2 = <double complex*> malloc(nk * sizeof(double complex))
    cdef double mid
    status = 0
    try:
        for k in range(nk):
            c.pidx[k] = pw[k] - c.pmin
            total[k] = 0
        if is_ray:
            T = probe_cut(&c, scale, log_drop)
            if T < 0:
                status = 2
                raise KernelError("integrand did not decay along the ray")
        else:
            T = length
        upper = T
        # first panel
        if panel(&c, 0.0, T, K1, G1, apow, &bad):
            status = 1
            raise KernelError("non-finite")
        n_evals += 15
        s0[0] = 0.0; s1[0] = T; depth[0] = 0; grp[0] = 0
        perr[0] = diffabs(K1, G1, nk)
        for k in range(nk):
            Kp[k] = K1[k]
            total[k] = K1[k]
        npan = 1
        err_sum = perr[0]
        while True:
            sc = maxabs(total, nk)
            if err_sum <= max(abs_tol, rel_tol * sc):
                if not is_ray:
                    converged = True
                    break
                if group > 0:
                    for k in range(nk):
                        gsum[k] = 0
                    for i in range(npan):
                        if grp[i] == group:
                            for k in range(nk):
                                gsum[k] = gsum[k] + Kp[i * nk + k]
                    lastmag = maxabs(gsum, nk)
                    if lastmag < max(abs_tol, rel_tol * sc):
                        converged = True
                        break
                if group >= 40:
                    status = 2
                    raise KernelError("ray tail did not settle after 40 doublings")
                group += 1
                if npan + 1 > cap:
                    cap *= 2
                    Kp = <double complex*> realloc(Kp, cap * nk * sizeof(double complex))
                    s0 = <double*> realloc(s0, cap * sizeof(double))
                    s1 = <double*> realloc(s1, cap * sizeof(double))
                    perr = <double*> realloc(perr, cap * sizeof(double))
                    depth = <int*> realloc(depth, cap * sizeof(int))
                    grp = <int*> realloc(grp, cap * sizeof(int))
                if panel(&c, upper, 2 * upper, K1, G1, apow, &bad):
                    status = 1
                    raise KernelError("non-finite")
                n_evals += 15
                s0[npan] = upper; s1[npan] = 2 * upper; depth[npan] = 0; grp[npan] = group
                perr[npan] = diffabs(K1, G1, nk)
                for k in range(nk):
                    Kp[npan * nk + k] = K1[k]
                    total[k] = total[k] + K1[k]
                err_sum += perr[npan]
                npan += 1
                upper = 2 * upper
                continue
            best = 0
            emax = perr[0]
            for i in range(1, npan):
                if perr[i] > emax:
                    emax = perr[i]
                    best = i
            if depth[best] >= max_depth or n_evals >= max_evals or npan >= max_panels:
                break
            if npan + 1 > cap:
                cap *= 2
                Kp = <double complex*> realloc(Kp, cap * nk * sizeof(double complex))
                s0 = <double*> realloc(s0, cap * sizeof(double))
                s1 = <double*> realloc(s1, cap * sizeof(double))
                perr = <double*> realloc(perr, cap * sizeof(double))
                depth = <int*> realloc(depth, cap * sizeof(int))
                grp = <int*> realloc(grp, cap * sizeof(int))
            mid = 0.5 * (s0[best] + s1[best])
            if panel(&c, s0[best], mid, K1, G1, apow, &bad) or panel(&c, mid, s1[best], K2, G2, apow, &bad):
                status = 1
                raise KernelError("non-finite")
            n_evals += 30
            err_sum -= perr[best]
            for k in range(nk):
                total[k] = total[k] - Kp[best * nk + k] + K1[k] + K2[k]
            # left child replaces the parent, right child is appended
            s0[npan] = mid; s1[npan] = s1[best]; depth[npan] = depth[best] + 1; grp[npan] = grp[best]
            s1[best] = mid; depth[best] += 1
            perr[best] = diffabs(K1, G1, nk)
            perr[npan] = diffabs(K2, G2, nk)
            for k in range(nk):
                Kp[best * nk + k] = K1[k]
                Kp[npan * nk + k] = K2[k]
            err_sum += perr[best] + perr[npan]
            npan += 1
        err_sum = 0.0
        for i in range(npan):
            err_sum += perr[i]
        sc = maxabs(total, nk)
        converged = converged and err_sum <= max(abs_tol, rel_tol * sc)
        out = np.empty(nk, dtype=complex)
        for k in range(nk):
            out[k] = total[k]
        return out, err_sum, n_evals, bool(converged), (upper if is_ray else length)
    except KernelError:
        if status == 1:
            from .contours import NonFinite
            raise NonFinite(complex(bad))
        from .contours import TruncationFailure
        raise TruncationFailure("integrand did not decay along the a-ray")
    finally:
        free(c.pidx); free(apow); free(Kp); free(s0); free(s1); free(perr); free(depth); free(grp)
        free(total); free(gsum); free(K1); free(G1); free(K2); free(G2)
