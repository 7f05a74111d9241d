"""Charts, metric field, geodesics, parallel transport and Fermi surfaces.

A chart at a normalized potential ``A`` with an orthonormal tangent basis
``e_1..e_m`` is the map ``c -> Pi(A + sum c_i e_i)``.  Its metric matrix is
``M_ij(c) = int v_i v_j dmu`` with ``v_i`` the symmetric difference of ``Pi``
along ``e_i``; Christoffel symbols come from finite differences of ``M``.
Geodesics solve ``c'' = -Gamma(c', c')`` with classical RK4 on a fixed grid.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import AccuracyError, ChartBoundaryError, StructuralError, ValidationError
from .function_space import CylinderFunction
from .geometry import orthonormal_tangent_basis

DEFAULT_RADIUS = 0.25
DEFAULT_EPS = 1e-4
DEFAULT_FD_STEP = 1e-3
COND_MAX = 10.0
MIN_RADIUS = 1e-3
ENERGY_TOL = 1e-6
TANGENCY_TOL = 1e-8
UNIT_TOL = 1e-6


class ShiftEngine:
    """Metric evaluation on the cylinder space through the hot kernels."""

    approximate = False

    def __init__(self, A: CylinderFunction, E: np.ndarray, eps: float = DEFAULT_EPS):
        self.A = A
        self.A0 = np.ascontiguousarray(A.coeffs, dtype=float)
        self.E = np.ascontiguousarray(E, dtype=float)
        self.d, self.k = A.d, A.k
        self.eps = eps

    def metric(self, c):
        """``(M, P, mu, V)`` at coordinates ``c``."""
        return kernels.metric(self.A0, self.E, np.asarray(c, dtype=float), self.d, self.k, self.eps)

    def jet(self, c, step: float):
        return kernels.metric_jet(self.A0, self.E, np.asarray(c, dtype=float), self.d, self.k, self.eps, step)

    def potential(self, P: np.ndarray) -> CylinderFunction:
        return CylinderFunction(self.A.space, P)


@dataclass(frozen=True, eq=False)
class Chart:
    """Local parametrization ``c -> Pi(A + c @ basis)`` around a normalized potential.

    ``radius`` bounds the coordinate sup-norm; it is halved at construction
    until the metric condition number stays below ``cond_max`` on probe
    points at that radius.
    """

    base: object
    basis: np.ndarray
    engine: object
    radius: float = DEFAULT_RADIUS
    fd_step: float = DEFAULT_FD_STEP
    cond_max: float = COND_MAX

    @classmethod
    def build(
        cls,
        A: CylinderFunction,
        basis=None,
        radius: float = DEFAULT_RADIUS,
        eps: float = DEFAULT_EPS,
        fd_step: float = DEFAULT_FD_STEP,
        cond_max: float = COND_MAX,
    ) -> "Chart":
        if basis is None:
            basis = orthonormal_tangent_basis(A)
        E = np.array([getattr(b, "coeffs", b) for b in basis], dtype=float)
        return cls.from_engine(A, E, ShiftEngine(A, E, eps), radius, fd_step, cond_max)

    @classmethod
    def from_engine(cls, base, E, engine, radius=DEFAULT_RADIUS, fd_step=DEFAULT_FD_STEP, cond_max=COND_MAX):
        E = np.asarray(E, dtype=float)
        r = float(radius)
        while r >= MIN_RADIUS:
            if _worst_condition(engine, E.shape[0], r) <= cond_max:
                return cls(base, E, engine, r, fd_step, cond_max)
            r *= 0.5
        raise StructuralError(f"no chart radius >= {MIN_RADIUS} keeps the metric condition below {cond_max}")

    @property
    def m(self) -> int:
        return self.basis.shape[0]

    @property
    def tolerance_scale(self) -> float:
        return 100.0 if self.engine.approximate else 1.0

    def _check_inside(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if c.shape != (self.m,):
            raise ValidationError(f"expected {self.m} coordinates, got shape {c.shape}")
        if np.max(np.abs(c), initial=0.0) > self.radius * (1 + 1e-12):
            raise ChartBoundaryError(f"coordinates {np.max(np.abs(c)):.4g} outside chart radius {self.radius:.4g}")
        return c

    def _check_condition(self, M) -> None:
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > self.cond_max:
            raise ChartBoundaryError(f"metric condition number {cond:.3g} exceeds {self.cond_max}", residual=cond)

    def map(self, c):
        """Normalized potential at coordinates ``c``."""
        c = self._check_inside(c)
        return self.engine.potential(self.engine.metric(c)[1])

    def evaluate(self, c):
        """``(M, P, mu, V)`` with boundary and conditioning checks."""
        c = self._check_inside(c)
        M, P, mu, V = self.engine.metric(c)
        self._check_condition(M)
        return M, P, mu, V

    def metric_field(self, c) -> np.ndarray:
        return self.evaluate(c)[0]

    def christoffel(self, c) -> np.ndarray:
        """``G[k, i, j]`` = Christoffel symbol of the second kind at ``c``."""
        c = self._check_inside(c)
        M, dM = self.engine.jet(c, self.fd_step)
        self._check_condition(M)
        return christoffel_from_jet(M, dM)

    def pushforward(self, c, v):
        """Potential-space velocity ``sum v_i v_i(c)`` and the weights at ``c``."""
        M, P, mu, V = self.evaluate(c)
        return np.asarray(v) @ V, mu


def _worst_condition(engine, m: int, r: float) -> float:
    probes = [r * s * np.eye(m)[i] for i in range(m) for s in (1.0, -1.0)]
    probes += [r * np.ones(m), -r * np.ones(m)]
    worst = 1.0
    for c in probes:
        try:
            M = engine.metric(c)[0]
        except (ArithmeticError, FloatingPointError):
            return math.inf
        worst = max(worst, float(np.linalg.cond(M)))
    return worst


def christoffel_from_jet(M: np.ndarray, dM: np.ndarray) -> np.ndarray:
    """Levi-Civita symbols from the metric and ``dM[l] = dM/dc_l``."""
    # first kind: [ij, l] = (d_i M_jl + d_j M_il - d_l M_ij) / 2
    first = 0.5 * (np.einsum("ijl->lij", dM) + np.einsum("jil->lij", dM) - dM)
    return np.einsum("kl,lij->kij", np.linalg.inv(M), first)


def _rhs(chart: Chart, state: np.ndarray) -> np.ndarray:
    c, v = state[0], state[1]
    G = chart.christoffel(c)
    out = np.empty_like(state)
    out[0] = v
    Gv = np.einsum("kij,i->kj", G, v)
    out[1] = -Gv @ v
    for q in range(2, state.shape[0]):
        out[q] = -Gv @ state[q]
    return out


def rk4(chart: Chart, state0: np.ndarray, dt: float, nsteps: int) -> np.ndarray:
    """Fixed-step classical RK4 on the joint (position, velocity, transported) state."""
    out = np.empty((nsteps + 1,) + state0.shape)
    y = np.array(state0, dtype=float)
    out[0] = y
    for n in range(nsteps):
        k1 = _rhs(chart, y)
        k2 = _rhs(chart, y + 0.5 * dt * k1)
        k3 = _rhs(chart, y + 0.5 * dt * k2)
        k4 = _rhs(chart, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[n + 1] = y
    return out


@dataclass(frozen=True, eq=False)
class GeodesicPath:
    """Samples of a geodesic on the symmetric grid ``times`` with diagnostics.

    ``transported[q]`` holds the parallel transport of the ``q``-th extra
    initial vector.  ``potential_velocity`` is the velocity pushed into
    potential space, ``mu`` the equilibrium weights at each sample.
    """

    chart: Chart
    times: np.ndarray
    coords: np.ndarray
    velocity: np.ndarray
    transported: np.ndarray
    energy: np.ndarray
    tangency: np.ndarray
    potentials: np.ndarray
    potential_velocity: np.ndarray
    mu: np.ndarray
    metrics: np.ndarray
    rho: float
    step: float

    @property
    def energy_drift(self) -> float:
        e0 = self.energy[len(self.times) // 2]
        return float(np.max(np.abs(self.energy - e0)) / e0)

    @property
    def tangency_max(self) -> float:
        return float(np.max(np.abs(self.tangency)))

    def index_of(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValidationError(f"time {t} is not on the sample grid")
        return i

    def acceleration_integrals(self) -> np.ndarray:
        """``int X' dmu`` at interior samples, ``X'`` by central differences."""
        X = self.potential_velocity
        dX = (X[2:] - X[:-2]) / (2 * self.step)
        return np.sum(dX * self.mu[1:-1], axis=1)

    def energy_identity_rate(self) -> np.ndarray:
        """Central-difference rate of ``t -> int (X' + X^2/2) dmu`` on the interior grid."""
        X = self.potential_velocity
        dX = (X[2:] - X[:-2]) / (2 * self.step)
        F = np.sum((dX + 0.5 * X[1:-1] ** 2) * self.mu[1:-1], axis=1)
        return (F[2:] - F[:-2]) / (2 * self.step)

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "coords": self.coords.tolist(),
            "velocity": self.velocity.tolist(),
            "transported": self.transported.tolist(),
            "energy": self.energy.tolist(),
            "tangency": self.tangency.tolist(),
            "potentials": self.potentials.tolist(),
            "diagnostics": {
                "energy_drift": self.energy_drift,
                "tangency_max": self.tangency_max,
                "rho": self.rho,
                "step": self.step,
                "chart_radius": self.chart.radius,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _integrate_both_ways(chart: Chart, state0: np.ndarray, rho: float, step: float):
    nsteps = max(1, int(math.ceil(rho / step - 1e-9)))
    dt = rho / nsteps
    fwd = rk4(chart, state0, dt, nsteps)
    bwd = rk4(chart, state0, -dt, nsteps)
    states = np.concatenate([bwd[::-1], fwd[1:]])
    times = dt * np.arange(-nsteps, nsteps + 1)
    return times, states, dt


def geodesic_shoot(
    chart: Chart,
    X0,
    rho: float = 0.2,
    step: float | None = None,
    origin=None,
    transport=(),
    check: bool = True,
) -> GeodesicPath:
    """Geodesic through ``origin`` (default the chart centre) with velocity ``X0``.

    Integrated forward and backward over ``|t| <= rho`` with RK4 at ``step``
    (default ``rho/200``).  Vectors in ``transport`` are parallel transported
    along the way.  Raises :class:`AccuracyError` when the relative energy
    drift exceeds ``1e-6`` or the tangency constraint ``int X dmu = 0``
    drifts above ``1e-8`` (both scaled for approximate backends).
    """
    m = chart.m
    c0 = np.zeros(m) if origin is None else np.asarray(origin, dtype=float)
    v0 = np.asarray(X0, dtype=float)
    if v0.shape != (m,):
        raise ValidationError(f"initial velocity must have {m} components")
    if rho <= 0 or rho > chart.radius:
        raise ValidationError(f"rho must lie in (0, chart radius {chart.radius:.4g}], got {rho}")
    step = rho / 200 if step is None else float(step)
    if step <= 0:
        raise ValidationError("step must be positive")
    M0 = chart.metric_field(c0)
    if check and abs(v0 @ M0 @ v0 - 1.0) > UNIT_TOL:
        raise ValidationError(f"initial velocity is not unit: |v|^2 = {v0 @ M0 @ v0:.8f}")
    Ys = [np.asarray(Y, dtype=float) for Y in transport]
    state0 = np.vstack([c0, v0] + Ys) if Ys else np.vstack([c0, v0])
    times, states, dt = _integrate_both_ways(chart, state0, rho, step)

    n = len(times)
    energy = np.empty(n)
    tangency = np.empty(n)
    metrics = np.empty((n, m, m))
    pot, vel, mus = [], [], []
    for i in range(n):
        M, P, mu, V = chart.evaluate(states[i, 0])
        X = states[i, 1] @ V
        metrics[i] = M
        energy[i] = states[i, 1] @ M @ states[i, 1]
        tangency[i] = X @ mu
        pot.append(P)
        vel.append(X)
        mus.append(mu)
    path = GeodesicPath(
        chart=chart,
        times=times,
        coords=states[:, 0].copy(),
        velocity=states[:, 1].copy(),
        transported=np.transpose(states[:, 2:], (1, 0, 2)).copy(),
        energy=energy,
        tangency=tangency,
        potentials=np.array(pot),
        potential_velocity=np.array(vel),
        mu=np.array(mus),
        metrics=metrics,
        rho=float(rho),
        step=float(dt),
    )
    if check:
        scale = chart.tolerance_scale
        if path.energy_drift > ENERGY_TOL * scale:
            raise AccuracyError(
                f"energy drift {path.energy_drift:.3e} exceeds {ENERGY_TOL * scale:.1e}; reduce the step",
                residual=path.energy_drift,
            )
        # on grid backends the constraint carries an O(N^-2) discretization error; it is reported only
        if not chart.engine.approximate and path.tangency_max > TANGENCY_TOL:
            raise AccuracyError(f"tangency drift {path.tangency_max:.3e}", residual=path.tangency_max)
    return path


@dataclass(frozen=True, eq=False)
class TransportField:
    times: np.ndarray
    Y: np.ndarray
    norm_drift: float
    angle_drift: float
    path: GeodesicPath = field(repr=False)


def parallel_transport(path: GeodesicPath, Y0) -> TransportField:
    """Transport ``Y0`` (chart coordinates at the path's centre) along ``path``.

    The joint system is re-integrated on the same grid, so the geodesic
    samples are reproduced exactly.  Reports the drift of ``|Y|`` and of
    ``<gamma', Y>`` relative to their initial values.
    """
    centre = len(path.times) // 2
    redo = geodesic_shoot(
        path.chart,
        path.velocity[centre],
        rho=path.rho,
        step=path.step,
        origin=path.coords[centre],
        transport=[Y0],
        check=False,
    )
    Y = redo.transported[0]
    norms = np.sqrt(np.einsum("ti,tij,tj->t", Y, redo.metrics, Y))
    angles = np.einsum("ti,tij,tj->t", redo.velocity, redo.metrics, Y)
    return TransportField(
        times=redo.times,
        Y=Y,
        norm_drift=float(np.max(np.abs(norms - norms[centre]))),
        angle_drift=float(np.max(np.abs(angles - angles[centre]))),
        path=redo,
    )


@dataclass(frozen=True, eq=False)
class FermiSurface:
    """Potentials ``P[i, j]`` at ``S(tgrid[i], sgrid[j])``.

    Rows are s-geodesics shot from the base geodesic with the transported
    second vector as initial velocity.  ``mu`` holds the equilibrium weights
    at each node; ``spacing`` is the common grid spacing of both axes.
    """

    chart: Chart
    tgrid: np.ndarray
    sgrid: np.ndarray
    coords: np.ndarray
    P: np.ndarray
    mu: np.ndarray
    base: GeodesicPath
    spacing: float
    diagnostics: dict

    @property
    def centre(self) -> tuple[int, int]:
        return len(self.tgrid) // 2, len(self.sgrid) // 2

    def xbar(self, j: int, r: int = 1) -> np.ndarray:
        """t-derivative at ``(0, s_j)`` by a central difference over ``r`` grid cells."""
        i0 = self.centre[0]
        return (self.P[i0 + r, j] - self.P[i0 - r, j]) / (2 * r * self.spacing)

    def ys(self, i: int, r: int = 1) -> np.ndarray:
        """s-derivative at ``(t_i, 0)`` by a central difference over ``r`` grid cells."""
        j0 = self.centre[1]
        return (self.P[i, j0 + r] - self.P[i, j0 - r]) / (2 * r * self.spacing)

    def fields(self, r: int = 1) -> dict:
        """Derivative fields at the centre with stencil half-width ``r`` cells."""
        i0, j0 = self.centre
        h = r * self.spacing
        P = self.P
        return {
            "Xbar": self.xbar(j0, r),
            "Y": self.ys(i0, r),
            "Yt": (P[i0 + r, j0 + r] - P[i0 + r, j0 - r] - P[i0 - r, j0 + r] + P[i0 - r, j0 - r]) / (4 * h * h),
            "Ys": (P[i0, j0 + r] - 2 * P[i0, j0] + P[i0, j0 - r]) / (h * h),
            "Xt": (P[i0 + r, j0] - 2 * P[i0, j0] + P[i0 - r, j0]) / (h * h),
        }

    def to_dict(self) -> dict:
        return {
            "tgrid": self.tgrid.tolist(),
            "sgrid": self.sgrid.tolist(),
            "coords": self.coords.tolist(),
            "potentials": self.P.tolist(),
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def fermi_surface(
    chart: Chart,
    X0,
    Y0,
    spacing: float = 0.01,
    points: int = 5,
    substeps: int = 5,
) -> FermiSurface:
    """Fermi-coordinate surface around the chart centre.

    The base geodesic has velocity ``X0``; ``Y0`` is transported along it
    and each ``s``-curve is the geodesic leaving ``gamma(t_i)`` with the
    transported vector.  Both grids are ``spacing * (-(points//2) .. points//2)``
    and RK4 runs with ``substeps`` steps per grid cell.
    """
    if points < 3 or points % 2 == 0:
        raise ValidationError("points must be odd and at least 3")
    X0 = np.asarray(X0, dtype=float)
    Y0 = np.asarray(Y0, dtype=float)
    M0 = chart.metric_field(np.zeros(chart.m))
    gram = np.array([[X0 @ M0 @ X0, X0 @ M0 @ Y0], [Y0 @ M0 @ X0, Y0 @ M0 @ Y0]])
    if np.max(np.abs(gram - np.eye(2))) > UNIT_TOL:
        raise ValidationError(f"X0, Y0 must be orthonormal at the centre; Gram = {gram.tolist()}")
    half = points // 2
    rho = half * spacing
    step = spacing / substeps
    base = geodesic_shoot(chart, X0, rho=rho, step=step, transport=[Y0])
    grid = spacing * np.arange(-half, half + 1)
    n = chart.engine.potential(base.potentials[0]).coeffs.size
    coords = np.empty((points, points, chart.m))
    P = np.empty((points, points, n))
    mu = np.empty((points, points, n))
    drifts = []
    for i, t in enumerate(grid):
        b = base.index_of(t)
        # the s-geodesics start off-centre, so the chart must reach rho beyond the base point
        row = geodesic_shoot(chart, base.transported[0, b], rho=rho, step=step, origin=base.coords[b])
        drifts.append(row.energy_drift)
        for j, s in enumerate(grid):
            q = row.index_of(s)
            coords[i, j] = row.coords[q]
            P[i, j] = row.potentials[q]
            mu[i, j] = row.mu[q]
    surf = FermiSurface(
        chart=chart,
        tgrid=grid,
        sgrid=grid.copy(),
        coords=coords,
        P=P,
        mu=mu,
        base=base,
        spacing=float(spacing),
        diagnostics={"base_energy_drift": base.energy_drift, "row_energy_drift": float(max(drifts))},
    )
    i0, j0 = surf.centre
    F1, F2 = surf.fields(1), surf.fields(2)
    w = mu[i0, j0]
    ip1 = float(np.sum(F1["Xbar"] * F1["Y"] * w))
    ip2 = float(np.sum(F2["Xbar"] * F2["Y"] * w))
    surf.diagnostics["centre_inner"] = (4 * ip1 - ip2) / 3
    return surf


def truncation_stability(A: CylinderFunction, X0, rho: float = 0.1, extra: tuple = (1,), step=None) -> dict:
    """Compare the geodesic of the depth-``k`` chart with those of deeper charts.

    The initial potential-space velocity is carried to each deeper chart by
    orthogonal projection onto its basis.  ``gaps[k+e]`` is the sup-norm
    potential gap to the depth-``k`` path; ``successive[k+e]`` compares with
    the previous depth in ``extra`` and is the quantity that should shrink.
    """
    chart = Chart.build(A)
    path = geodesic_shoot(chart, X0, rho=rho, step=step)
    X = np.asarray(X0) @ chart.basis
    report = {"rho": rho, "depth": A.k, "gaps": {}, "successive": {}}
    prev_depth, prev_pot = A.k, path.potentials
    for e in sorted(extra):
        deep = A.embed(A.k + e)
        dchart = Chart.build(deep)
        if dchart.radius < rho:
            raise ValidationError(f"depth-{deep.k} chart radius {dchart.radius} is below rho={rho}")
        mu = kernels.stationary(deep.coeffs, deep.d, deep.k)
        c = dchart.basis @ (np.repeat(X, A.d**e) * mu)
        dpath = geodesic_shoot(dchart, c, rho=rho, step=step, check=False)
        shallow = np.repeat(path.potentials, A.d**e, axis=1)
        report["gaps"][deep.k] = float(np.max(np.abs(dpath.potentials - shallow)))
        lifted = np.repeat(prev_pot, A.d ** (deep.k - prev_depth), axis=1)
        report["successive"][deep.k] = float(np.max(np.abs(dpath.potentials - lifted)))
        prev_depth, prev_pot = deep.k, dpath.potentials
    return report


__all__ = [
    "Chart",
    "ShiftEngine",
    "GeodesicPath",
    "TransportField",
    "FermiSurface",
    "christoffel_from_jet",
    "geodesic_shoot",
    "parallel_transport",
    "fermi_surface",
    "truncation_stability",
    "rk4",
]
