# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: normalization, equilibrium weights and chart metrics.

Same algorithms and signatures as ``_kernels_py``; see that module for the
contracts.  Inner loops avoid temporaries, which is what dominates the cost
of the many small eigenproblems solved along geodesics.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs

cnp.import_array()

cdef double TOL = 1e-15
cdef int MAXITER = 100000


class KernelConvergenceError(ArithmeticError):
    pass


cdef int _ipow(int d, int e) nogil:
    cdef int r = 1
    cdef int i
    for i in range(e):
        r *= d
    return r


cdef double _normalize(const double[::1] B, int d, int k, double[::1] out,
                       double[::1] W, double[::1] h, double[::1] g) except? -1e300:
    """Write Pi(B) into ``out`` and return log lambda."""
    cdef int n = _ipow(d, k)
    cdef int n1, dk2, a, u, w, it
    cdef double shift = B[0], s, lam, hs, gs, diff, hmax, t, loglam
    for w in range(1, n):
        if B[w] > shift:
            shift = B[w]
    if k == 1:
        s = 0.0
        for w in range(n):
            s += exp(B[w] - shift)
        loglam = shift + log(s)
        for w in range(n):
            out[w] = B[w] - loglam
        return loglam
    n1 = n // d
    dk2 = n1 // d
    for w in range(n):
        W[w] = exp(B[w] - shift)
    for u in range(n1):
        h[u] = 1.0
    lam = 1.0
    diff = 1.0
    for it in range(MAXITER):
        hs = 0.0
        gs = 0.0
        for u in range(n1):
            t = 0.0
            for a in range(d):
                t += W[a * n1 + u] * h[a * dk2 + u // d]
            g[u] = t
            gs += t
            hs += h[u]
        lam = gs / hs
        diff = 0.0
        hmax = 0.0
        for u in range(n1):
            t = g[u] / lam
            if fabs(t - h[u]) > diff:
                diff = fabs(t - h[u])
            h[u] = t
            if t > hmax:
                hmax = t
        if diff <= TOL * hmax:
            break
    else:
        raise KernelConvergenceError(f"power iteration for h did not converge (last change {diff:.3e})")
    loglam = log(lam) + shift
    for u in range(n1):
        g[u] = log(h[u])
    for w in range(n):
        out[w] = B[w] + g[w // d] - g[w % n1] - loglam
    return loglam


cdef int _stationary(const double[::1] P, int d, int k, double[::1] mu,
                     double[::1] pi, double[::1] q) except -1:
    cdef int n = _ipow(d, k)
    cdef int n1 = n // d
    cdef int u, b, w, it
    cdef double s, t, diff, pmax
    if k == 1:
        s = 0.0
        for w in range(n):
            mu[w] = exp(P[w])
            s += mu[w]
        for w in range(n):
            mu[w] /= s
        return 0
    for u in range(n1):
        pi[u] = 1.0 / n1
    diff = 1.0
    for it in range(MAXITER):
        s = 0.0
        for u in range(n1):
            t = 0.0
            for b in range(d):
                t += exp(P[u * d + b]) * pi[(u * d + b) % n1]
            q[u] = t
            s += t
        diff = 0.0
        pmax = 0.0
        for u in range(n1):
            t = q[u] / s
            if fabs(t - pi[u]) > diff:
                diff = fabs(t - pi[u])
            pi[u] = t
            if t > pmax:
                pmax = t
        if diff <= TOL * pmax:
            break
    else:
        raise KernelConvergenceError(f"stationary iteration did not converge (last change {diff:.3e})")
    s = 0.0
    for w in range(n):
        mu[w] = exp(P[w]) * pi[w % n1]
        s += mu[w]
    for w in range(n):
        mu[w] /= s
    return 0


def normalize(B, int d, int k):
    cdef const double[::1] Bv = np.ascontiguousarray(B, dtype=np.float64)
    cdef int n = _ipow(d, k)
    out = np.empty(n)
    cdef double[::1] outv = out
    cdef double[::1] W = np.empty(n)
    cdef double[::1] h = np.empty(max(n // d, 1))
    cdef double[::1] g = np.empty(max(n // d, 1))
    loglam = _normalize(Bv, d, k, outv, W, h, g)
    return out, loglam


def stationary(P, int d, int k):
    cdef const double[::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef int n = _ipow(d, k)
    mu = np.empty(n)
    cdef double[::1] muv = mu
    cdef double[::1] pi = np.empty(max(n // d, 1))
    cdef double[::1] q = np.empty(max(n // d, 1))
    _stationary(Pv, d, k, muv, pi, q)
    return mu


cdef int _metric(const double[::1] A0, const double[:, ::1] E, const double[::1] c,
                 int d, int k, double eps, double[:, ::1] M, double[::1] P,
                 double[::1] mu, double[:, ::1] V, double[::1] B, double[::1] Bp,
                 double[::1] tmp, double[::1] W, double[::1] h, double[::1] g) except -1:
    cdef int n = _ipow(d, k)
    cdef int m = E.shape[0]
    cdef int i, j, w, r
    cdef double s, e, wt
    for w in range(n):
        s = A0[w]
        for i in range(m):
            s += c[i] * E[i, w]
        B[w] = s
    _normalize(B, d, k, P, W, h, g)
    _stationary(P, d, k, mu, h, g)
    for i in range(m):
        for w in range(n):
            V[i, w] = 0.0
        for r in range(2):
            e = eps if r == 0 else 0.5 * eps
            # Richardson weights: -1/3 for the eps stencil, 4/3 for eps/2
            wt = (-1.0 / 3.0 if r == 0 else 4.0 / 3.0) / (2.0 * e)
            for w in range(n):
                Bp[w] = B[w] + e * E[i, w]
            _normalize(Bp, d, k, tmp, W, h, g)
            for w in range(n):
                V[i, w] += wt * tmp[w]
            for w in range(n):
                Bp[w] = B[w] - e * E[i, w]
            _normalize(Bp, d, k, tmp, W, h, g)
            for w in range(n):
                V[i, w] -= wt * tmp[w]
    for i in range(m):
        for j in range(i, m):
            s = 0.0
            for w in range(n):
                s += mu[w] * V[i, w] * V[j, w]
            M[i, j] = s
            M[j, i] = s
    return 0


cdef class _Workspace:
    cdef public object B, Bp, tmp, W, h, g, P, mu, V

    def __init__(self, int n, int n1, int m):
        self.B = np.empty(n)
        self.Bp = np.empty(n)
        self.tmp = np.empty(n)
        self.W = np.empty(n)
        self.h = np.empty(n1)
        self.g = np.empty(n1)
        self.P = np.empty(n)
        self.mu = np.empty(n)
        self.V = np.empty((m, n))


def metric(A0, E, c, int d, int k, double eps):
    cdef const double[::1] A0v = np.ascontiguousarray(A0, dtype=np.float64)
    cdef const double[:, ::1] Ev = np.ascontiguousarray(E, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef int n = _ipow(d, k)
    cdef int m = Ev.shape[0]
    ws = _Workspace(n, max(n // d, 1), m)
    M = np.empty((m, m))
    _metric(A0v, Ev, cv, d, k, eps, M, ws.P, ws.mu, ws.V, ws.B, ws.Bp, ws.tmp, ws.W, ws.h, ws.g)
    return M, ws.P, ws.mu, ws.V


def metric_jet(A0, E, c, int d, int k, double eps, double step):
    cdef const double[::1] A0v = np.ascontiguousarray(A0, dtype=np.float64)
    cdef const double[:, ::1] Ev = np.ascontiguousarray(E, dtype=np.float64)
    cdef const double[::1] c0 = np.ascontiguousarray(c, dtype=np.float64)
    cdef int n = _ipow(d, k)
    cdef int m = Ev.shape[0]
    cdef int l, i, j, r
    cdef double s, sgn
    ws = _Workspace(n, max(n // d, 1), m)
    cdef double[:, ::1] Vv = ws.V
    cdef double[::1] Pv = ws.P, muv = ws.mu, Bv = ws.B, Bpv = ws.Bp, tv = ws.tmp
    cdef double[::1] Wv = ws.W, hv = ws.h, gv = ws.g
    M0 = np.empty((m, m))
    dM = np.zeros((m, m, m))
    cdef double[:, ::1] M0v = M0
    cdef double[:, :, ::1] dMv = dM
    cdef double[:, ::1] Mt = np.empty((m, m))
    cdef double[:, :, ::1] D = np.zeros((2, m, m))
    cdef double[::1] cc = np.empty(m)
    _metric(A0v, Ev, c0, d, k, eps, M0v, Pv, muv, Vv, Bv, Bpv, tv, Wv, hv, gv)
    for l in range(m):
        for r in range(2):
            s = step if r == 0 else 0.5 * step
            for i in range(m):
                for j in range(m):
                    D[r, i, j] = 0.0
            for sgn in (1.0, -1.0):
                for i in range(m):
                    cc[i] = c0[i]
                cc[l] += sgn * s
                _metric(A0v, Ev, cc, d, k, eps, Mt, Pv, muv, Vv, Bv, Bpv, tv, Wv, hv, gv)
                for i in range(m):
                    for j in range(m):
                        D[r, i, j] += sgn * Mt[i, j] / (2.0 * s)
        for i in range(m):
            for j in range(m):
                dMv[l, i, j] = (4.0 * D[1, i, j] - D[0, i, j]) / 3.0
    return M0, dM
