"""Ruelle operator, leading eigendata, pressure, normalization and Gibbs measures.

For a depth-``k`` potential ``A`` the operator

    (L_A f)(x) = sum_a exp(A(a x)) f(a x)

maps depth-``k`` functions to depth-``k-1`` functions, so on the cylinder
space it is an exact ``d^k x d^k`` matrix.  Entry ``(w', v)`` is nonzero only
when ``v = a . prefix(w')``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NumericalError, ResourceError, StructuralError, ValidationError
from .function_space import DEFAULT_DEPTH_CAP, CylinderFunction, ShiftSpace, shift_compose

DENSE_LIMIT = 64
POWER_TOL = 1e-13
POWER_MAXITER = 100_000
GAP_THRESHOLD = 1e-8


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Matrix of ``f -> L_A f`` on depth-``k`` functions (or on a circle grid).

    ``entries`` is a dense ndarray for the shift and may be a scipy sparse
    matrix for the circle backend.
    """

    space: object
    entries: object
    potential: object = None

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.entries @ np.asarray(f, dtype=float)

    def apply_adjoint(self, nu: np.ndarray) -> np.ndarray:
        return self.entries.T @ np.asarray(nu, dtype=float)


def preimage_indices(space: ShiftSpace) -> np.ndarray:
    """``idx[a, w]`` = index of the word ``a . prefix(w)``."""
    n1 = space.dim // space.d
    w = np.arange(space.dim)
    return np.arange(space.d)[:, None] * n1 + (w // space.d)[None, :]


def build_matrix(A: CylinderFunction, k: int | None = None) -> TransferMatrix:
    """Transfer matrix of ``A`` on depth-``k`` functions (default: depth of ``A``)."""
    k = A.k if k is None else k
    if A.k > k:
        raise ValidationError(f"potential depth {A.k} exceeds target depth {k}")
    space = ShiftSpace(A.d, k)
    a = A.embed(k).coeffs
    idx = preimage_indices(space)
    M = np.zeros((space.dim, space.dim))
    rows = np.broadcast_to(np.arange(space.dim), idx.shape)
    M[rows, idx] = np.exp(a[idx])
    return TransferMatrix(space, M, A)


def apply_transfer(A: CylinderFunction, f: CylinderFunction) -> CylinderFunction:
    """``L_A f`` at the common depth of ``A`` and ``f`` (the result depends on one symbol less)."""
    k = max(A.k, f.k)
    M = build_matrix(A, k)
    return CylinderFunction(M.space, M.apply(f.embed(k).coeffs))


@dataclass(frozen=True, eq=False)
class GibbsData:
    """Leading eigentriple of ``L_A`` together with the equilibrium weights.

    ``h`` is the eigenfunction (a depth-``k`` CylinderFunction whose values do
    not depend on the last symbol), ``nu`` and ``mu`` are probability weights
    on depth-``k`` cylinders with ``mu = h * nu`` and ``sum(h * nu) = 1``.
    """

    lam: float
    h: CylinderFunction
    nu: np.ndarray
    mu: np.ndarray
    residuals: dict = field(default_factory=dict)
    method: str = "dense"

    @property
    def space(self) -> ShiftSpace:
        return self.h.space

    @property
    def d(self) -> int:
        return self.h.d

    @property
    def k(self) -> int:
        return self.h.k

    @property
    def pressure(self) -> float:
        return float(np.log(self.lam))

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "lambda": float(self.lam),
            "h": [float(v) for v in self.h.coeffs],
            "nu": [float(v) for v in self.nu],
            "mu": [float(v) for v in self.mu],
            "residuals": {key: float(v) for key, v in self.residuals.items()},
            "method": self.method,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "GibbsData":
        space = ShiftSpace(int(data["d"]), int(data["k"]))
        return cls(
            lam=float(data["lambda"]),
            h=CylinderFunction(space, np.asarray(data["h"], dtype=float)),
            nu=np.asarray(data["nu"], dtype=float),
            mu=np.asarray(data["mu"], dtype=float),
            residuals=dict(data.get("residuals", {})),
            method=data.get("method", "dense"),
        )


def _check_primitive(M: np.ndarray) -> None:
    n = M.shape[0]
    pattern = (M > 0).astype(float)
    reach = pattern.copy()
    # Wielandt: a primitive n x n pattern has a positive power of exponent <= (n-1)^2 + 1
    power = 1
    while power < (n - 1) ** 2 + 1:
        reach = np.minimum(reach @ pattern, 1.0)
        power += 1
        if np.all(reach > 0):
            return
    if not np.all(reach > 0):
        raise StructuralError("transfer matrix is not primitive")


def _dense_eigen(M: np.ndarray):
    vals, right = np.linalg.eig(M)
    order = np.argsort(-vals.real)
    lam = vals[order[0]]
    if abs(lam.imag) > 1e-12 * abs(lam) or lam.real <= 0:
        raise StructuralError(f"leading eigenvalue {lam} is not positive real")
    lam = lam.real
    mags = np.sort(np.abs(vals))[::-1]
    if len(mags) > 1 and mags[0] - mags[1] < GAP_THRESHOLD * lam:
        raise StructuralError(f"spectral gap {mags[0] - mags[1]:.3e} below {GAP_THRESHOLD} * lambda")
    h = right[:, order[0]].real
    lvals, left = np.linalg.eig(M.T)
    nu = left[:, np.argmax(lvals.real)].real
    return lam, h, nu


def _power_eigen(M, tol: float = POWER_TOL, maxiter: int = POWER_MAXITER):
    n = M.shape[0]
    MT = M.T.tocsr() if hasattr(M, "tocsr") else np.ascontiguousarray(M.T)
    h = np.ones(n)
    nu = np.full(n, 1.0 / n)
    lam = 1.0
    res = np.inf
    for _ in range(maxiter):
        g = M @ h
        lam = np.linalg.norm(g, np.inf) / np.linalg.norm(h, np.inf)
        g /= np.linalg.norm(g, np.inf)
        res = np.linalg.norm(g - h, np.inf)
        h = g
        if res <= tol:
            break
    else:
        raise NumericalError(f"power iteration for h did not converge (change {res:.3e})", residual=res)
    for _ in range(maxiter):
        q = MT @ nu
        q /= q.sum()
        res_nu = np.linalg.norm(q - nu, 1)
        nu = q
        if res_nu <= tol:
            break
    else:
        raise NumericalError(f"power iteration for nu did not converge (change {res_nu:.3e})", residual=res_nu)
    lam = float(nu @ (M @ h) / (nu @ h))
    return lam, h, nu


def eigentriple(entries, method: str = "auto"):
    """Normalized ``(lam, h, nu, mu, residuals, method)`` for a nonnegative matrix.

    Shared by the shift and circle backends.  ``h`` is positive with
    ``h @ nu = 1``, ``nu`` and ``mu = h * nu`` are probability vectors.
    """
    n = entries.shape[0]
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "power"
    if method == "dense":
        dense = entries.toarray() if hasattr(entries, "toarray") else np.asarray(entries)
        _check_primitive(dense)
        lam, h, nu = _dense_eigen(dense)
    elif method == "power":
        lam, h, nu = _power_eigen(entries)
    else:
        raise ValidationError(f"unknown eigen method {method!r}")

    h = h * np.sign(h[np.argmax(np.abs(h))])
    nu = nu * np.sign(nu[np.argmax(np.abs(nu))])
    if np.any(h <= 0):
        raise NumericalError("numerical eigenfunction is not strictly positive", residual=float(h.min()))
    if np.any(nu < -1e-14):
        raise NumericalError("numerical eigenmeasure has negative weights", residual=float(nu.min()))
    nu = np.clip(nu, 0.0, None)
    nu = nu / nu.sum()
    h = h / float(h @ nu)
    mu = h * nu
    mu = mu / mu.sum()
    residuals = {
        "eigenfunction": float(np.linalg.norm(entries @ h - lam * h, np.inf)),
        "eigenmeasure": float(np.linalg.norm(nu @ entries - lam * nu, 1)),
    }
    return float(lam), h, nu, mu, residuals, method


def leading_eigen(M: TransferMatrix, method: str = "auto") -> GibbsData:
    """Leading eigenvalue, eigenfunction, eigenmeasure and equilibrium weights.

    ``method`` is ``"dense"`` (full eigendecomposition), ``"power"`` or
    ``"auto"`` (dense when the matrix has at most 64 rows).
    """
    if not isinstance(M.space, ShiftSpace):
        raise ValidationError("leading_eigen expects a shift transfer matrix; use gibbsgeo.circle for grids")
    lam, h, nu, mu, residuals, method = eigentriple(M.entries, method)
    return GibbsData(lam, CylinderFunction(M.space, h), nu, mu, residuals, method)


def gibbs(A: CylinderFunction, k: int | None = None, method: str = "auto") -> GibbsData:
    return leading_eigen(build_matrix(A, k), method=method)


def pressure(A: CylinderFunction, method: str = "auto") -> float:
    """Topological pressure ``log lambda_A``."""
    return gibbs(A, method=method).pressure


def normalize(B: CylinderFunction, method: str = "auto") -> CylinderFunction:
    """``Pi(B) = B + log h_B - log h_B o T - log lambda_B`` at the depth of ``B``."""
    g = gibbs(B, method=method)
    k = B.k
    if k == 1:
        return CylinderFunction(B.space, B.coeffs - np.log(g.lam))
    # L h is depth k-1 by construction; reuse it to strip the rounding-level dependence on x_{k-1}
    M = build_matrix(B)
    hk = CylinderFunction(B.space, M.apply(g.h.coeffs) / g.lam)
    if np.any(hk.coeffs <= 0):
        raise NumericalError("eigenfunction lost positivity", residual=float(hk.coeffs.min()))
    h_short = CylinderFunction(ShiftSpace(B.d, k - 1), hk.coeffs.reshape(-1, B.d)[:, 0])
    logh = np.log(h_short.coeffs)
    coeffs = B.coeffs + np.repeat(logh, B.d) - shift_compose(CylinderFunction(h_short.space, logh)).coeffs - np.log(g.lam)
    return CylinderFunction(B.space, coeffs)


def normalization_defect(A: CylinderFunction) -> float:
    """``max |L_A 1 - 1|``."""
    M = build_matrix(A)
    return float(np.max(np.abs(M.apply(np.ones(M.size)) - 1.0)))


def is_normalized(A: CylinderFunction, tol: float = 1e-10) -> bool:
    return normalization_defect(A) <= tol


def equilibrium_weights(A: CylinderFunction) -> np.ndarray:
    """Equilibrium weights of a normalized potential via the stationary kernel."""
    return kernels.stationary(A.coeffs, A.d, A.k)


# --------------------------------------------------------------------------------------
# measures on deeper cylinders


def marginal(mu: np.ndarray, d: int, j: int) -> np.ndarray:
    """Weights on depth-``j`` cylinders from weights on deeper cylinders."""
    k = int(round(np.log(len(mu)) / np.log(d)))
    if j > k:
        raise ValidationError(f"cannot marginalize depth {k} weights to depth {j}")
    return np.asarray(mu).reshape(d**j, d ** (k - j)).sum(axis=1)


def transition_probabilities(mu: np.ndarray, d: int) -> np.ndarray:
    """``P[u, a] = mu[u a] / mu[u]`` for words ``u`` of length ``k-1``."""
    table = np.asarray(mu, dtype=float).reshape(-1, d)
    return table / table.sum(axis=1, keepdims=True)


def extend_measure(mu: np.ndarray, d: int, depth: int, depth_cap: int = DEFAULT_DEPTH_CAP) -> np.ndarray:
    """Markov extension of depth-``k`` equilibrium weights to depth ``depth``.

    Exact for the Gibbs measure of a depth-``k`` potential, which is a Markov
    chain of order ``k-1``.
    """
    mu = np.asarray(mu, dtype=float)
    k = int(round(np.log(len(mu)) / np.log(d)))
    if depth <= k:
        return marginal(mu, d, depth)
    if d**depth > depth_cap:
        raise ResourceError(f"extending the measure to depth {depth} needs {d**depth} cylinders, above cap {depth_cap}")
    P = transition_probabilities(mu, d)
    n1 = d ** (k - 1)
    out = mu
    for _ in range(depth - k):
        last = np.arange(out.size) % n1
        out = (out[:, None] * P[last, :]).ravel()
    return out


def integrate(f: CylinderFunction, mu, depth_cap: int = DEFAULT_DEPTH_CAP) -> float:
    """``sum_w f[w] mu[w]``, extending ``mu`` to the depth of ``f`` when needed.

    ``mu`` is a :class:`GibbsData` or a weight vector on depth-``k`` cylinders.
    """
    weights = mu.mu if isinstance(mu, GibbsData) else np.asarray(mu, dtype=float)
    k = int(round(np.log(len(weights)) / np.log(f.d)))
    if f.k <= k:
        return float(f.embed(k).coeffs @ weights)
    return float(f.coeffs @ extend_measure(weights, f.d, f.k, depth_cap))


# --------------------------------------------------------------------------------------
# variational principle


def markov_entropy(m: np.ndarray, d: int) -> float:
    """Entropy ``-sum_u m[u] sum_a P(a|u) log P(a|u)`` of an order ``k-1`` Markov measure."""
    m = np.asarray(m, dtype=float)
    table = m.reshape(-1, d)
    mass = table.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        P = np.where(mass[:, None] > 0, table / mass[:, None], 0.0)
        terms = np.where(P > 0, P * np.log(P), 0.0)
    return float(-(mass * terms.sum(axis=1)).sum())


def random_markov_measure(rng: np.random.Generator, d: int, k: int) -> np.ndarray:
    """Stationary weights on depth-``k`` cylinders of a random order ``k-1`` chain."""
    n1 = d ** (k - 1)
    P = rng.dirichlet(np.ones(d), size=n1)
    if k == 1:
        return P[0]
    # transition u -> (u a)[1:] with probability P[u, a]
    T = np.zeros((n1, n1))
    for u in range(n1):
        for a in range(d):
            T[u, (u * d + a) % n1] += P[u, a]
    vals, vecs = np.linalg.eig(T.T)
    pi = np.abs(vecs[:, np.argmin(np.abs(vals - 1.0))].real)
    pi /= pi.sum()
    return (pi[:, None] * P).ravel()


def free_energy(A: CylinderFunction, m: np.ndarray) -> float:
    """``h(m) + int A dm`` for Markov weights ``m`` at the depth of ``A``."""
    return markov_entropy(m, A.d) + float(A.coeffs @ np.asarray(m))


def pressure_derivative_check(A: CylinderFunction, psi: CylinderFunction, eps: float = 1e-2) -> dict:
    """Finite-difference derivatives of ``t -> log lambda_{A + t psi}`` at ``t=0``.

    The first derivative is compared to ``int psi dmu_A`` at ``eps`` and
    ``eps/2``; their gap ratio should be close to 4.  The second derivative is
    reported next to ``int psi^2 dmu_A`` and to the asymptotic variance of
    ``psi``; the former agrees only when ``psi`` is a tangent vector.
    """
    from .geometry import coboundary_projection

    if not 0 < eps < 0.1:
        raise ValidationError(f"eps must be in (0, 0.1), got {eps}")
    k = max(A.k, psi.k)
    A, psi = A.embed(k), psi.embed(k)
    g = gibbs(A)
    F = lambda t: pressure(A + psi * t)  # noqa: E731
    F0 = F(0.0)
    first_formula = integrate(psi, g)
    second_formula = integrate(psi * psi, g)
    variance = integrate((lambda X: X * X)(coboundary_projection(psi, A)), g) if is_normalized(A) else float("nan")
    out = {"first_formula": first_formula, "second_formula": second_formula, "asymptotic_variance": variance}
    gaps = []
    for e in (eps, eps / 2):
        Fp, Fm = F(e), F(-e)
        d1 = (Fp - Fm) / (2 * e)
        d2 = (Fp - 2 * F0 + Fm) / e**2
        gaps.append(abs(d1 - first_formula))
        out[f"first_fd@{e:g}"] = d1
        out[f"second_fd@{e:g}"] = d2
    out["first_gaps"] = gaps
    out["first_ratio"] = gaps[0] / gaps[1] if gaps[1] > 0 else float("inf")
    return out
