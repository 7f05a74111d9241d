"""Transfer operator of ``T(x) = d x mod 1`` on a uniform circle grid.

Grid functions live at ``x_j = j/N`` with ``N`` divisible by ``d``.  The
operator is collocated at the grid points,

    (L f)(x_j) = sum_i exp(A(y_ij)) f(y_ij),   y_ij = (x_j + i)/d,

with ``A`` and ``f`` read off the grid by periodic linear interpolation.
This gives a sparse nonnegative matrix with at most ``2d`` entries per row.
Constants are reproduced exactly by interpolation, and ``g o T`` is exact
on the grid because ``T(x_j) = x_{dj mod N}``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ValidationError
from .function_space import MAX_ALPHABET, CircleGridFunction, interpolate_periodic
from .transfer import TransferMatrix, eigentriple

DEFAULT_N = 1024


@dataclass(frozen=True, eq=False)
class CircleModel:
    """Expanding map of degree ``d`` with a grid potential ``A`` of size ``N``."""

    d: int
    A: CircleGridFunction

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or not 2 <= self.d <= MAX_ALPHABET:
            raise ValidationError(f"degree must be an integer in [2, {MAX_ALPHABET}], got {self.d!r}")
        if self.A.N % self.d:
            raise ValidationError(f"grid size {self.A.N} is not divisible by d={self.d}")

    @property
    def N(self) -> int:
        return self.A.N

    @classmethod
    def from_callable(cls, d: int, N: int, fn) -> "CircleModel":
        if N % d:
            raise ValidationError(f"grid size {N} is not divisible by d={d}")
        return cls(d, CircleGridFunction.from_callable(N, fn))

    def with_values(self, values) -> "CircleModel":
        return CircleModel(self.d, CircleGridFunction(self.N, values))

    def to_dict(self) -> dict:
        return {"backend": "circle", "d": self.d, **self.A.to_dict()}


def _preimage_stencil(d: int, N: int):
    """Rows, interpolation nodes and weights of the preimages ``y_ij``."""
    j = np.arange(N)
    rows, cols, wts, pts = [], [], [], []
    for i in range(d):
        y = (j + i * N) / (d * N)
        u = y * N
        lo = np.floor(u).astype(int)
        theta = u - lo
        rows.append(j)
        cols.append(lo % N)
        wts.append(1.0 - theta)
        rows.append(j)
        cols.append((lo + 1) % N)
        wts.append(theta)
        pts.append(y)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(wts), np.stack(pts)


def circle_transfer(model: CircleModel) -> TransferMatrix:
    """Sparse collocation matrix of ``L_A``; entries are nonnegative."""
    d, N = model.d, model.N
    rows, cols, wts, pts = _preimage_stencil(d, N)
    weight = np.exp(interpolate_periodic(model.A.values, pts))  # (d, N)
    per_row = np.repeat(weight, 2, axis=0).ravel()
    # rows/cols/wts are laid out as [i=0 lo, i=0 hi, i=1 lo, ...], each block of length N
    data = wts * per_row
    keep = data != 0.0
    M = sparse.csr_matrix((data[keep], (rows[keep], cols[keep])), shape=(N, N))
    M.sum_duplicates()
    return TransferMatrix(model, M, model.A)


@dataclass(frozen=True, eq=False)
class CircleGibbs:
    """Eigendata on the grid; ``nu`` and ``mu`` are weights on grid points."""

    lam: float
    h: np.ndarray
    nu: np.ndarray
    mu: np.ndarray
    residuals: dict = field(default_factory=dict)

    @property
    def pressure(self) -> float:
        return float(np.log(self.lam))

    @property
    def density(self) -> np.ndarray:
        """Equilibrium density relative to Lebesgue measure."""
        return self.mu * self.mu.size

    def to_dict(self) -> dict:
        return {
            "backend": "circle",
            "lambda": self.lam,
            "h": self.h.tolist(),
            "nu": self.nu.tolist(),
            "mu": self.mu.tolist(),
            "residuals": self.residuals,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def circle_gibbs(model: CircleModel, method: str = "power") -> CircleGibbs:
    M = circle_transfer(model).entries
    lam, h, nu, mu, residuals, _ = eigentriple(M, method)
    return CircleGibbs(lam, h, nu, mu, residuals)


def circle_pressure(model: CircleModel) -> float:
    return circle_gibbs(model).pressure


def circle_normalize(model: CircleModel) -> CircleModel:
    """``Pi(A) = A + log h - log h o T - log lambda`` on the grid."""
    g = circle_gibbs(model)
    logh = np.log(g.h)
    idx = (model.d * np.arange(model.N)) % model.N
    return model.with_values(model.A.values + logh - logh[idx] - np.log(g.lam))


def normalization_defect(model: CircleModel) -> float:
    M = circle_transfer(model).entries
    return float(np.max(np.abs(M @ np.ones(model.N) - 1.0)))


def circle_gibbs_check(model: CircleModel, refine: int = 1) -> dict:
    """Adjoint defect of the computed eigenmeasure and the pressure, with a refinement trend.

    ``invariance_defect`` is ``max |int (f o T) dmu - int f dmu|`` over the
    first Fourier modes ``f``; it measures discretization error and decays
    under refinement.  ``refine`` extra levels resample ``A`` on ``2N, 4N, ...``.
    """
    levels = []
    current = model
    for level in range(refine + 1):
        g = circle_gibbs(current)
        M = circle_transfer(current).entries
        N = current.N
        x = np.arange(N) / N
        Tx = (current.d * x) % 1.0
        inv = max(
            abs(float(fn(2 * np.pi * Tx) @ g.mu - fn(2 * np.pi * x) @ g.mu)) for fn in (np.cos, np.sin)
        )
        adjoint = float(np.max(np.abs(M.T @ g.nu - g.lam * g.nu)))
        levels.append({"N": N, "pressure": g.pressure, "adjoint_defect": adjoint, "invariance_defect": inv})
        if level < refine:
            fine = 2 * N
            current = CircleModel(current.d, CircleGridFunction(fine, interpolate_periodic(current.A.values, np.arange(fine) / fine)))
    diffs = [abs(b["pressure"] - a["pressure"]) for a, b in zip(levels, levels[1:])]
    return {"levels": levels, "pressure_differences": diffs}


def refinement_study(d: int, fn, Ns=(256, 512, 1024, 2048)) -> dict:
    """Leading eigenvalue of ``fn`` sampled at each ``N`` with successive-difference ratios."""
    lams = [circle_gibbs(CircleModel.from_callable(d, N, fn)).lam for N in Ns]
    diffs = [abs(b - a) for a, b in zip(lams, lams[1:])]
    ratios = [a / b if b > 0 else float("inf") for a, b in zip(diffs, diffs[1:])]
    return {"N": list(Ns), "lambda": lams, "differences": diffs, "ratios": ratios}


# --------------------------------------------------------------------------------------
# approximate geometry on the grid


def _pi_and_weights(d: int, B: np.ndarray):
    model = CircleModel(d, CircleGridFunction(B.size, B))
    P = circle_normalize(model)
    g = circle_gibbs(P)
    return P.A.values, g.mu


def circle_tangent_basis(model: CircleModel, m: int = 2) -> np.ndarray:
    """Orthonormal (in ``L^2(mu)``) projections of low Fourier modes onto the kernel of ``L``.

    ``model`` must carry a normalized potential.
    """
    M = circle_transfer(model).entries
    mu = circle_gibbs(model).mu
    idx = (model.d * np.arange(model.N)) % model.N
    x = np.arange(model.N) / model.N
    basis: list[np.ndarray] = []
    n = 1
    while len(basis) < m:
        for v in (np.cos(2 * np.pi * n * x), np.sin(2 * np.pi * n * x)):
            if len(basis) == m:
                break
            v = v - (M @ v)[idx]
            for _ in range(2):
                for b in basis:
                    v = v - float(np.sum(v * b * mu)) * b
            nv = np.sqrt(float(np.sum(v * v * mu)))
            if nv > 1e-10:
                basis.append(v / nv)
        n += 1
    return np.array(basis)


class CircleEngine:
    """Chart metric engine for the grid backend (results flagged approximate)."""

    approximate = True

    def __init__(self, model: CircleModel, E: np.ndarray, eps: float = 1e-4):
        self.model = model
        self.A0 = np.asarray(model.A.values, dtype=float)
        self.E = np.asarray(E, dtype=float)
        self.eps = eps

    def metric(self, c):
        B = self.A0 + np.asarray(c, dtype=float) @ self.E
        P, mu = _pi_and_weights(self.model.d, B)
        V = np.empty_like(self.E)
        for i, e in enumerate(self.E):
            D = [
                (_pi_and_weights(self.model.d, B + s * e)[0] - _pi_and_weights(self.model.d, B - s * e)[0]) / (2 * s)
                for s in (self.eps, 0.5 * self.eps)
            ]
            V[i] = (4 * D[1] - D[0]) / 3
        M = (V * mu) @ V.T
        return 0.5 * (M + M.T), P, mu, V

    def jet(self, c, step: float):
        c = np.asarray(c, dtype=float)
        m = c.size
        M0 = self.metric(c)[0]
        dM = np.empty((m, m, m))
        for l in range(m):
            e = np.zeros(m)
            e[l] = 1.0
            D = [(self.metric(c + s * e)[0] - self.metric(c - s * e)[0]) / (2 * s) for s in (step, 0.5 * step)]
            dM[l] = (4 * D[1] - D[0]) / 3
        return M0, dM

    def potential(self, P):
        return CircleGridFunction(self.model.N, P)


def circle_chart(model: CircleModel, m: int = 2, radius: float = 0.25, eps: float = 1e-4, fd_step: float = 1e-3):
    """Approximate chart at the normalization of ``model``; tolerances widen by 100."""
    from .geodesy import Chart

    base = circle_normalize(model)
    E = circle_tangent_basis(base, m)
    # the grid Pi is not exactly the identity on the grid kernel; re-orthonormalize in the chart metric
    M0 = CircleEngine(base, E, eps).metric(np.zeros(m))[0]
    E = np.linalg.solve(np.linalg.cholesky(M0), E)
    return Chart.from_engine(base, E, CircleEngine(base, E, eps), radius=radius, fd_step=fd_step)


__all__ = [
    "CircleModel",
    "CircleGibbs",
    "CircleEngine",
    "circle_transfer",
    "circle_gibbs",
    "circle_pressure",
    "circle_normalize",
    "normalization_defect",
    "circle_gibbs_check",
    "refinement_study",
    "circle_tangent_basis",
    "circle_chart",
]
