"""Tangent spaces of the manifold of normalized potentials and their metric.

At a normalized potential ``A`` the tangent space is the kernel of ``L_A``;
the inner product is ``<X, Y> = int X Y dmu_A``.  For kernel elements this is
also the asymptotic variance of Birkhoff sums.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericalError, StructuralError, UsageError, ValidationError
from .function_space import CylinderFunction, ShiftSpace, birkhoff_sum
from .transfer import build_matrix, gibbs, integrate, normalize, normalization_defect

KERNEL_TOL = 1e-10
MEAN_TOL = 1e-12
MIN_WEIGHT = 1e-14
DROP_TOL = 1e-10
SERIES_TOL = 1e-15
SERIES_MAXITER = 10_000


def base_measure(A: CylinderFunction) -> np.ndarray:
    """Equilibrium weights of a normalized potential."""
    return kernels.stationary(A.coeffs, A.d, A.k)


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A kernel element ``value`` of ``L_base`` with its base measure cached in ``mu``."""

    base: CylinderFunction
    value: CylinderFunction
    mu: np.ndarray

    @classmethod
    def at(cls, base: CylinderFunction, value: CylinderFunction, check: bool = True) -> "TangentVector":
        if value.k > base.k:
            raise ValidationError(f"tangent vector depth {value.k} exceeds base depth {base.k}")
        value = value.embed(base.k)
        tv = cls(base, value, base_measure(base))
        if check:
            tv.validate()
        return tv

    def validate(self, kernel_tol: float = KERNEL_TOL, mean_tol: float = MEAN_TOL) -> None:
        scale = max(1.0, self.value.max_abs())
        res = kernel_residual(self.base, self.value)
        if res > kernel_tol * scale:
            raise ValidationError(f"not in the kernel of L_A: residual {res:.3e}")
        mean = abs(float(self.value.coeffs @ self.mu))
        if mean > mean_tol * scale * 100:
            raise ValidationError(f"tangent vector has nonzero mean {mean:.3e}")

    def __add__(self, other: "TangentVector") -> "TangentVector":
        _same_base(self, other)
        return TangentVector(self.base, self.value + other.value, self.mu)

    def __sub__(self, other: "TangentVector") -> "TangentVector":
        _same_base(self, other)
        return TangentVector(self.base, self.value - other.value, self.mu)

    def __mul__(self, s: float) -> "TangentVector":
        return TangentVector(self.base, self.value * float(s), self.mu)

    __rmul__ = __mul__

    @property
    def coeffs(self) -> np.ndarray:
        return self.value.coeffs


def _same_base(X: TangentVector, Y: TangentVector) -> None:
    if X.base is not Y.base and not np.array_equal(X.base.coeffs, Y.base.coeffs):
        raise UsageError("tangent vectors live at different base potentials")


def kernel_residual(A: CylinderFunction, X: CylinderFunction) -> float:
    """``max |L_A X|``."""
    k = max(A.k, X.k)
    M = build_matrix(A, k)
    return float(np.max(np.abs(M.apply(X.embed(k).coeffs))))


def _transfer_short(A: CylinderFunction, V: CylinderFunction) -> np.ndarray:
    """``L_A V`` as depth ``k-1`` coefficients (a single constant when ``k=1``)."""
    M = build_matrix(A, A.k)
    LV = M.apply(V.embed(A.k).coeffs)
    return LV.reshape(-1, A.d)[:, 0]


def tangent_project(V: CylinderFunction, A: CylinderFunction) -> TangentVector:
    """``P(V) = V - (L_A V) o T``; lands in the kernel of ``L_A`` for normalized ``A``."""
    if V.k > A.k:
        raise ValidationError(f"function depth {V.k} exceeds base depth {A.k}")
    short = _transfer_short(A, V)
    correction = np.tile(short, A.d) if A.k > 1 else np.full(A.d, short[0])
    value = CylinderFunction(A.space, V.embed(A.k).coeffs - correction)
    return TangentVector(A, value, base_measure(A))


def coboundary_projection(psi: CylinderFunction, A: CylinderFunction) -> CylinderFunction:
    """Derivative of the normalization map at normalized ``A`` in direction ``psi``.

    Returns the unique kernel element ``X = psi + g - g o T - c``, i.e. ``psi``
    modulo coboundaries and constants.  Solves ``(I - L_A) g = L_A psi - c`` on
    depth ``k-1`` functions with ``c = int psi dmu_A``.
    """
    k = max(A.k, psi.k)
    A, psi = A.embed(k), psi.embed(k)
    mu = base_measure(A)
    c = float(psi.coeffs @ mu)
    if k == 1:
        return CylinderFunction(psi.space, psi.coeffs - c)
    d = A.d
    n1 = d ** (k - 1)
    M = build_matrix(A).entries
    J = np.repeat(np.eye(n1), d, axis=0)  # depth k-1 -> depth k
    R = M[::d] @ J  # L_A on depth k-1 functions
    mu_short = mu.reshape(n1, d).sum(axis=1)
    rhs = (M @ psi.coeffs)[::d] - c
    g = np.linalg.solve(np.eye(n1) - R + np.outer(np.ones(n1), mu_short), rhs)
    coeffs = psi.coeffs + np.repeat(g, d) - np.tile(g, d) - c
    return CylinderFunction(psi.space, coeffs)


def inner(X: TangentVector, Y: TangentVector) -> float:
    """``<X, Y> = int X Y dmu_A``."""
    _same_base(X, Y)
    return float(np.sum(X.value.coeffs * Y.value.coeffs * X.mu))


def norm(X: TangentVector) -> float:
    return float(np.sqrt(max(inner(X, X), 0.0)))


def gram_matrix(vectors: list[TangentVector]) -> np.ndarray:
    if not vectors:
        return np.zeros((0, 0))
    V = np.array([v.value.coeffs for v in vectors])
    for v in vectors[1:]:
        _same_base(vectors[0], v)
    G = (V * vectors[0].mu) @ V.T
    return 0.5 * (G + G.T)


def asymptotic_variance(X: TangentVector, n: int) -> float:
    """``(1/n) int (S_n X)^2 dmu_A`` with the measure extended to depth ``k+n-1``."""
    S = birkhoff_sum(X.value, n)
    return integrate(S * S, X.mu) / n


def observable_derivative_check(
    A: CylinderFunction, X: TangentVector, phi: CylinderFunction, eps: float = 1e-2
) -> dict:
    """Finite differences of ``t -> int phi dmu_{Pi(A + tX)}`` against ``int phi X dmu_A``.

    Central differences at ``eps`` and ``eps/2``; ``ratio`` is the quotient of
    the two gaps and approaches 4 for a smooth second-order scheme.

    The one-term value ``formula`` is the exact derivative only when
    ``L_A phi`` is constant or ``phi`` is itself tangent.  In general the
    forward correlations survive and the derivative is
    ``sum_{n>=0} int (L_A^n phi) X dmu_A``, reported as ``series_formula``
    (truncated once ``L_A^n phi`` is constant to ``SERIES_TOL``).
    """
    k = max(A.k, phi.k)
    formula = integrate(phi * X.value, X.mu)
    series = _correlation_series(A, X, phi)

    def F(t):
        return integrate(phi, gibbs(normalize(A + X.value * t)))

    out = {"formula": formula, "series_formula": series, "gaps": [], "series_gaps": []}
    for e in (eps, eps / 2):
        fd = (F(e) - F(-e)) / (2 * e)
        out[f"fd@{e:g}"] = fd
        out["gaps"].append(abs(fd - formula))
        out["series_gaps"].append(abs(fd - series))
    for key in ("gaps", "series_gaps"):
        g0, g1 = out[key]
        out[key.replace("gaps", "ratio")] = g0 / g1 if g1 > 0 else float("inf")
    out["depth"] = k
    return out


def _correlation_series(A: CylinderFunction, X: TangentVector, phi: CylinderFunction) -> float:
    k = max(A.k, phi.k)
    A = A.embed(k)
    d = A.d
    mu = base_measure(A)
    x = X.value.embed(k).coeffs
    M = build_matrix(A).entries
    v = phi.embed(k).coeffs.astype(float)
    total = 0.0
    for _ in range(SERIES_MAXITER):
        total += float(np.sum(v * x * mu))
        Lv = (M @ v)[::d]
        v = np.repeat(Lv, d) if k > 1 else np.full(d, Lv[0])
        if np.ptp(v) <= SERIES_TOL * max(1.0, np.max(np.abs(v))):
            return total
    raise NumericalError("correlation series did not converge", residual=float(np.ptp(v)))


def orthonormal_tangent_basis(A: CylinderFunction) -> list[TangentVector]:
    """Gram-Schmidt (two passes) over projected cylinder indicators in word order.

    Returns ``d^k - d^(k-1)`` vectors orthonormal in ``L^2(mu_A)``.
    """
    mu = base_measure(A)
    if np.min(mu) < MIN_WEIGHT:
        raise StructuralError(f"equilibrium weight {np.min(mu):.3e} below {MIN_WEIGHT}: metric is degenerate")
    expected = A.space.dim - A.space.dim // A.d
    M = build_matrix(A).entries
    basis: list[np.ndarray] = []
    for i in range(A.space.dim):
        v = np.zeros(A.space.dim)
        v[i] = 1.0
        Lv = (M @ v)[:: A.d]
        v = v - (np.tile(Lv, A.d) if A.k > 1 else Lv[0])
        for _ in range(2):
            for b in basis:
                v = v - float(np.sum(v * b * mu)) * b
        nv = np.sqrt(float(np.sum(v * v * mu)))
        if nv < DROP_TOL:
            continue
        basis.append(v / nv)
        if len(basis) == expected:
            break
    if len(basis) < expected:
        raise StructuralError(f"tangent basis has rank {len(basis)}, expected {expected}")
    return [TangentVector(A, CylinderFunction(A.space, b), mu) for b in basis]


def kernel_dimension(A: CylinderFunction, tol: float = 1e-10) -> int:
    """Dimension of the kernel of the dense transfer matrix, by SVD rank."""
    s = np.linalg.svd(build_matrix(A).entries, compute_uv=False)
    return int(A.space.dim - np.sum(s > tol * s[0]))


def base_hash(A: CylinderFunction) -> str:
    payload = json.dumps(A.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


def basis_to_json(basis: list[TangentVector]) -> str:
    if not basis:
        raise ValidationError("empty basis")
    A = basis[0].base
    return json.dumps(
        {
            "d": A.d,
            "k": A.k,
            "base_sha256": base_hash(A),
            "vectors": [[float(c) for c in v.value.coeffs] for v in basis],
        }
    )


def basis_from_json(text: str, A: CylinderFunction) -> list[TangentVector]:
    data = json.loads(text)
    if data.get("base_sha256") != base_hash(A):
        raise ValidationError("basis was exported for a different base potential")
    mu = base_measure(A)
    return [TangentVector(A, CylinderFunction(A.space, np.asarray(v)), mu) for v in data["vectors"]]


def random_normalized_potential(rng: np.random.Generator, d: int, k: int, spread: float = 0.5) -> CylinderFunction:
    """Coefficients i.i.d. uniform on ``[-spread, spread]`` followed by normalization."""
    B = CylinderFunction(ShiftSpace(d, k), rng.uniform(-spread, spread, d**k))
    return normalize(B)


def bernoulli_potential(p, k: int = 1) -> CylinderFunction:
    """Normalized potential ``log p_a`` of a Bernoulli measure, at depth ``k``."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.size == 1:
        p = np.array([p[0], 1.0 - p[0]])
    if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValidationError(f"Bernoulli weights must be positive and sum to 1, got {p}")
    return CylinderFunction(ShiftSpace(p.size, 1), np.log(p)).embed(k)


__all__ = [
    "TangentVector",
    "tangent_project",
    "coboundary_projection",
    "inner",
    "norm",
    "gram_matrix",
    "asymptotic_variance",
    "observable_derivative_check",
    "orthonormal_tangent_basis",
    "kernel_dimension",
    "kernel_residual",
    "basis_to_json",
    "basis_from_json",
    "random_normalized_potential",
    "bernoulli_potential",
    "normalization_defect",
]
