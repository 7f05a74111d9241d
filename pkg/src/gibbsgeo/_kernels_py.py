"""Pure NumPy implementation of the hot kernels.

Mirrors ``_kernels.pyx`` algorithm for algorithm; it is used when the
compiled extension is unavailable or ``GIBBSGEO_PURE_PYTHON=1`` is set.
All arrays are float64; potentials are coefficient vectors in the word order
documented in :mod:`gibbsgeo.function_space`.
"""
import numpy as np

TOL = 1e-15
MAXITER = 100_000


class KernelConvergenceError(ArithmeticError):
    pass


def _power_h(W, idx, n1):
    h = np.ones(n1)
    lam = 1.0
    for _ in range(MAXITER):
        g = (W * h[idx]).sum(axis=0)
        lam = g.sum() / h.sum()
        g /= lam
        diff = np.max(np.abs(g - h))
        h = g
        if diff <= TOL * np.max(h):
            return h, lam
    raise KernelConvergenceError(f"power iteration for h did not converge (last change {diff:.3e})")


def normalize(B, d, k):
    """Return ``(Pi(B), log lambda_B)`` for a depth-``k`` potential."""
    B = np.asarray(B, dtype=float)
    shift = B.max()
    if k == 1:
        log_lam = shift + np.log(np.exp(B - shift).sum())
        return B - log_lam, log_lam
    n1 = d ** (k - 1)
    W = np.exp(B - shift).reshape(d, n1)
    idx = np.arange(d)[:, None] * d ** (k - 2) + np.arange(n1)[None, :] // d
    h, lam = _power_h(W, idx, n1)
    logh = np.log(h)
    w = np.arange(d**k)
    P = B + logh[w // d] - logh[w % n1] - (np.log(lam) + shift)
    return P, np.log(lam) + shift


def stationary(P, d, k):
    """Equilibrium weights on depth-``k`` cylinders of a normalized potential."""
    P = np.asarray(P, dtype=float)
    e = np.exp(P)
    if k == 1:
        return e / e.sum()
    n1 = d ** (k - 1)
    E = e.reshape(n1, d)
    idx = (np.arange(n1)[:, None] * d + np.arange(d)[None, :]) % n1
    pi = np.full(n1, 1.0 / n1)
    for _ in range(MAXITER):
        q = (E * pi[idx]).sum(axis=1)
        q /= q.sum()
        diff = np.max(np.abs(q - pi))
        pi = q
        if diff <= TOL * np.max(pi):
            break
    else:
        raise KernelConvergenceError(f"stationary iteration did not converge (last change {diff:.3e})")
    mu = e * pi[np.arange(d**k) % n1]
    return mu / mu.sum()


def metric(A0, E, c, d, k, eps):
    """Chart metric at coordinates ``c``.

    Returns ``(M, P, mu, V)``: the Gram matrix, the mapped potential
    ``Pi(A0 + c @ E)``, its equilibrium weights and the symmetric-difference
    images ``V[i] ~ D Pi(E[i])`` (symmetric differences at ``eps`` and
    ``eps/2`` with one Richardson step).
    """
    A0 = np.asarray(A0, dtype=float)
    E = np.asarray(E, dtype=float)
    B = A0 + np.asarray(c, dtype=float) @ E
    P = normalize(B, d, k)[0]
    mu = stationary(P, d, k)
    m = E.shape[0]
    V = np.empty_like(E)
    for i in range(m):
        D = [
            (normalize(B + s * E[i], d, k)[0] - normalize(B - s * E[i], d, k)[0]) / (2.0 * s)
            for s in (eps, 0.5 * eps)
        ]
        V[i] = (4.0 * D[1] - D[0]) / 3.0
    M = (V * mu) @ V.T
    M = 0.5 * (M + M.T)
    return M, P, mu, V


def metric_jet(A0, E, c, d, k, eps, step):
    """Metric and its coordinate derivatives ``dM[l] = d M / d c_l``.

    Derivatives are central differences at ``step`` and ``step/2`` combined
    by one Richardson extrapolation.
    """
    c = np.asarray(c, dtype=float)
    m = len(c)
    M0 = metric(A0, E, c, d, k, eps)[0]
    dM = np.empty((m, m, m))
    for l in range(m):
        e = np.zeros(m)
        e[l] = 1.0
        D = []
        for s in (step, 0.5 * step):
            Mp = metric(A0, E, c + s * e, d, k, eps)[0]
            Mm = metric(A0, E, c - s * e, d, k, eps)[0]
            D.append((Mp - Mm) / (2.0 * s))
        dM[l] = (4.0 * D[1] - D[0]) / 3.0
    return M0, dM
