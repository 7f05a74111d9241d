"""Sectional curvature on Fermi surfaces, two routes plus an identity audit.

Route one integrates ``f^2`` where ``f = Y_t + Xbar Y / 2`` at the centre of a
Fermi surface.  Route two differentiates the energy
``E(s) = int Xbar(0, s)^2 dmu_{S(0, s)}`` twice: ``K = -E''(0) / 2``.  Every
finite difference is taken with stencils of one and two grid cells and
combined by one Richardson step.

``tensor_curvature`` is a third, surface-free route through the Riemann
tensor of the chart metric.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, ChartBoundaryError, GibbsGeoError, ValidationError
from .function_space import CylinderFunction
from .geodesy import Chart, FermiSurface, fermi_surface
from .geometry import TangentVector, bernoulli_potential, random_normalized_potential

SCHEMA_VERSION = 1
DEFAULT_SPACING = 0.01
RICHARDSON_TOL = 0.2
ACCEPT_TOL = 1e-3
AUDIT_KEYS = (
    "int_f",
    "int_G",
    "int_YG",
    "int_XbarYG_plus_2G2",
    "int_Q",
    "int_XbarQ",
    "int_Xbar2Q",
    "int_g_plus_half",
    "int_Xprime_plus_one",
)


def _rich(a, b):
    """Combine a one-cell value ``a`` with a two-cell value ``b``."""
    return (4.0 * a - b) / 3.0


@dataclass(frozen=True, eq=False)
class CurvatureReport:
    K_formula: float
    K_energy: float
    f: CylinderFunction | np.ndarray
    residuals: dict
    steps: dict
    brioschi: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def audit_max(self) -> float:
        return max(abs(self.residuals[k]) for k in AUDIT_KEYS)

    @property
    def accepted(self) -> bool:
        return self.audit_max <= ACCEPT_TOL

    @property
    def gap(self) -> float:
        return abs(self.K_formula - self.K_energy)

    def agrees(self) -> bool:
        return self.gap <= max(0.05 * abs(self.K_formula), 1e-3)

    def to_dict(self) -> dict:
        coeffs = getattr(self.f, "coeffs", self.f)
        return {
            "K_formula": self.K_formula,
            "K_energy": self.K_energy,
            "brioschi": self.brioschi,
            "f": [float(x) for x in coeffs],
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "steps": self.steps,
            "accepted": self.accepted,
            "diagnostics": self.diagnostics,
        }


def _f_single(surf: FermiSurface, r: int) -> np.ndarray:
    F = surf.fields(r)
    return F["Yt"] + 0.5 * F["Xbar"] * F["Y"]


def extract_f(surf: FermiSurface, check: bool = True) -> tuple[np.ndarray, dict]:
    """``f = Y_t + Xbar Y / 2`` at the surface centre, Richardson-combined.

    ``Y_t`` is the mixed central difference of the potentials.  Raises
    :class:`AccuracyError` when the one- and two-cell values differ by more
    than 20 % of their size (grid too coarse).
    """
    f1, f2 = _f_single(surf, 1), _f_single(surf, 2)
    diff = float(np.max(np.abs(f1 - f2)))
    size = max(float(np.max(np.abs(f1))), 1e-3)
    if check and diff > RICHARDSON_TOL * size:
        raise AccuracyError(f"f changes by {diff:.3e} between stencils (size {size:.3e}); refine the grid", residual=diff)
    f = _rich(f1, f2)
    mu = surf.mu[surf.centre]
    return f, {"richardson_change": diff, "int_f": float(f @ mu)}


def _energy_curvature(surf: FermiSurface, r: int) -> float:
    j0 = surf.centre[1]
    i0 = surf.centre[0]
    E = []
    for j in (j0 - r, j0, j0 + r):
        Xb = surf.xbar(j, r)
        E.append(float(np.sum(Xb * Xb * surf.mu[i0, j])))
    h = r * surf.spacing
    return -0.5 * (E[0] - 2.0 * E[1] + E[2]) / (h * h)


def energy_curvature(surf: FermiSurface) -> tuple[float, dict]:
    k1, k2 = _energy_curvature(surf, 1), _energy_curvature(surf, 2)
    return _rich(k1, k2), {"K_energy_1": k1, "K_energy_2": k2}


def _audit_single(surf: FermiSurface, r: int) -> dict:
    F = surf.fields(r)
    mu = surf.mu[surf.centre]
    Xb, Y = F["Xbar"], F["Y"]
    f = F["Yt"] + 0.5 * Xb * Y
    # Xbar_s coincides with Y_t on the surface, so G is built from the same mixed difference
    G = f
    Q = F["Ys"] + 0.5 * Y * Y

    def I(v):
        return float(np.sum(v * mu))

    return {
        "int_f": I(f),
        "int_G": I(G),
        "int_YG": I(Y * G),
        "int_XbarYG_plus_2G2": I(Xb * Y * G) + 2.0 * I(G * G),
        "int_Q": I(Q),
        "int_XbarQ": I(Xb * Q),
        "int_Xbar2Q": I(Xb * Xb * Q),
        "int_g_plus_half": I(Q) + 0.5,
        "int_Xprime_plus_one": I(F["Xt"]) + 1.0,
        "inner_XbarY": I(Xb * Y),
    }


def identity_audit(surf: FermiSurface) -> dict:
    """Integral identities at the surface centre, Richardson-combined.

    Keys are listed in ``AUDIT_KEYS`` (plus ``inner_XbarY``); each value is
    the signed residual, zero when the identity holds.
    """
    a1, a2 = _audit_single(surf, 1), _audit_single(surf, 2)
    return {k: _rich(a1[k], a2[k]) for k in a1}


def brioschi(surf: FermiSurface) -> float:
    """Gauss curvature of the induced surface metric at the centre (diagnostic)."""
    i0, j0 = surf.centre
    h = surf.spacing
    P, mu = surf.P, surf.mu
    E = np.empty((3, 3))
    F = np.empty((3, 3))
    G = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            i, j = i0 - 1 + a, j0 - 1 + b
            St = (P[i + 1, j] - P[i - 1, j]) / (2 * h)
            Ss = (P[i, j + 1] - P[i, j - 1]) / (2 * h)
            w = mu[i, j]
            E[a, b] = np.sum(St * St * w)
            F[a, b] = np.sum(St * Ss * w)
            G[a, b] = np.sum(Ss * Ss * w)

    def d_t(X):
        return (X[2, 1] - X[0, 1]) / (2 * h)

    def d_s(X):
        return (X[1, 2] - X[1, 0]) / (2 * h)

    E0, F0, G0 = E[1, 1], F[1, 1], G[1, 1]
    Ess = (E[1, 2] - 2 * E0 + E[1, 0]) / h**2
    Gtt = (G[2, 1] - 2 * G0 + G[0, 1]) / h**2
    Fts = (F[2, 2] - F[2, 0] - F[0, 2] + F[0, 0]) / (4 * h * h)
    A1 = np.array(
        [
            [-0.5 * Ess + Fts - 0.5 * Gtt, 0.5 * d_t(E), d_t(F) - 0.5 * d_s(E)],
            [d_s(F) - 0.5 * d_t(G), E0, F0],
            [0.5 * d_s(G), F0, G0],
        ]
    )
    A2 = np.array([[0.0, 0.5 * d_s(E), 0.5 * d_t(G)], [0.5 * d_s(E), E0, F0], [0.5 * d_t(G), F0, G0]])
    return float((np.linalg.det(A1) - np.linalg.det(A2)) / (E0 * G0 - F0 * F0) ** 2)


def _coordinates(chart: Chart, v) -> np.ndarray:
    if isinstance(v, TangentVector):
        return chart.basis @ (v.value.embed(chart.base.k).coeffs * v.mu)
    return np.asarray(v, dtype=float)


def sectional_curvature(
    A,
    X,
    Y,
    chart: Chart | None = None,
    spacing: float = DEFAULT_SPACING,
    substeps: int = 5,
    check: bool = True,
) -> CurvatureReport:
    """Curvature of the plane spanned by orthonormal ``X, Y`` at ``A``.

    ``X`` and ``Y`` are chart coordinate vectors or :class:`TangentVector`
    objects at ``A``.  The Fermi grid has 5 points per axis at ``spacing``,
    so the two Richardson stencils are ``spacing`` and ``2 * spacing``.
    """
    chart = Chart.build(A) if chart is None else chart
    x, y = _coordinates(chart, X), _coordinates(chart, Y)
    surf = fermi_surface(chart, x, y, spacing=spacing, points=5, substeps=substeps)
    f, fdiag = extract_f(surf, check=check)
    mu = surf.mu[surf.centre]
    K_formula = float(np.sum(f * f * mu))
    K_energy, ediag = energy_curvature(surf)
    audit = identity_audit(surf)
    fobj = chart.engine.potential(f)
    return CurvatureReport(
        K_formula=K_formula,
        K_energy=float(K_energy),
        f=fobj,
        residuals=audit,
        steps={"t_step": 2 * spacing, "s_step": 2 * spacing, "richardson_halving": spacing, "ode_step": spacing / substeps},
        brioschi=brioschi(surf),
        diagnostics={**fdiag, **ediag, **surf.diagnostics, "K_tensor": tensor_curvature(chart, x, y)},
    )


def tensor_curvature(chart: Chart, X, Y, step: float = 2e-3) -> float:
    """``<R(X, Y) Y, X> / |X ^ Y|^2`` at the chart centre.

    Christoffel symbols are differentiated by central differences at ``step``.
    Independent of Fermi surfaces; costs ``2m`` Christoffel evaluations.
    """
    x, y = _coordinates(chart, X), _coordinates(chart, Y)
    m = chart.m
    c = np.zeros(m)
    Gam = chart.christoffel(c)  # Gam[i, j, k] = Gamma^i_{jk}
    dG = np.empty((m, m, m, m))
    for l in range(m):
        e = np.zeros(m)
        e[l] = step
        dG[l] = (chart.christoffel(c + e) - chart.christoffel(c - e)) / (2 * step)
    # R^i_{jkl} = d_k Gamma^i_{lj} - d_l Gamma^i_{kj} + Gamma^i_{kp} Gamma^p_{lj} - Gamma^i_{lp} Gamma^p_{kj}
    R = (np.einsum("kilj->ijkl", dG) - np.einsum("likj->ijkl", dG)
         + np.einsum("ikp,plj->ijkl", Gam, Gam) - np.einsum("ilp,pkj->ijkl", Gam, Gam))
    M = chart.metric_field(c)
    num = np.einsum("im,mjkl,i,j,k,l->", M, R, y, x, y, x)
    den = (x @ M @ x) * (y @ M @ y) - (x @ M @ y) ** 2
    return float(num / den)


def random_plane(rng: np.random.Generator, chart: Chart) -> tuple[np.ndarray, np.ndarray]:
    """Two Gaussian coordinate vectors orthonormalized in the centre metric."""
    M = chart.metric_field(np.zeros(chart.m))
    u = rng.standard_normal(chart.m)
    v = rng.standard_normal(chart.m)
    u /= np.sqrt(u @ M @ u)
    v -= (u @ M @ v) * u
    v /= np.sqrt(v @ M @ v)
    return u, v


def _sample(args) -> dict:
    d, k, index, entropy, spacing, spread = args
    rng = np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(index,)))
    row = {"sample": index, "d": d, "k": k}
    try:
        A = random_normalized_potential(rng, d, k, spread)
        row["A_sha256"] = hashlib.sha256(np.ascontiguousarray(A.coeffs).tobytes()).hexdigest()[:16]
        row["A"] = [float(c) for c in A.coeffs]
        chart = Chart.build(A)
        X, Y = random_plane(rng, chart)
        row["X"] = X.tolist()
        row["Y"] = Y.tolist()
        rep = sectional_curvature(A, X, Y, chart=chart, spacing=spacing)
        row.update(
            K_formula=rep.K_formula,
            K_energy=rep.K_energy,
            brioschi=rep.brioschi,
            K_tensor=rep.diagnostics["K_tensor"],
            audit_max=rep.audit_max,
            accepted=rep.accepted,
            residuals=rep.residuals,
            error="",
        )
    except GibbsGeoError as exc:
        row.update(K_formula=None, K_energy=None, brioschi=None, K_tensor=None, audit_max=None, accepted=False, residuals={},
                   error=f"{type(exc).__name__}: {exc}")
    return row


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("GIBBSGEO_WORKERS", "1")))
    except ValueError:
        raise ValidationError("GIBBSGEO_WORKERS must be an integer") from None


def curvature_scan(
    d: int,
    k: int,
    num_samples: int,
    seed: int,
    workers: int | None = None,
    spacing: float = DEFAULT_SPACING,
    spread: float = 0.5,
) -> dict:
    """Curvature on ``num_samples`` random (potential, plane) draws.

    Sample ``i`` draws from ``SeedSequence(seed, spawn_key=(i,))``, so rows
    do not depend on the worker count or on execution order.  Failures are
    recorded in the ``error`` column.
    """
    if num_samples < 1:
        raise ValidationError("num_samples must be positive")
    workers = default_workers() if workers is None else workers
    tasks = [(d, k, i, seed, spacing, spread) for i in range(num_samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sample, tasks, chunksize=max(1, num_samples // (4 * workers))))
    else:
        rows = [_sample(t) for t in tasks]
    rows.sort(key=lambda r: r["sample"])
    return {"rows": rows, "summary": scan_summary(rows)}


def scan_summary(rows: list[dict]) -> dict:
    ok = [r for r in rows if not r["error"]]
    kf = [r["K_formula"] for r in ok]
    ke = [r["K_energy"] for r in ok]
    gaps = [abs(r["K_formula"] - r["K_energy"]) for r in ok]
    rel = [g <= max(0.05 * abs(r["K_formula"]), 1e-3) for g, r in zip(gaps, ok)]
    return {
        "samples": len(rows),
        "failed": len(rows) - len(ok),
        "accepted": sum(1 for r in ok if r["accepted"]),
        "min_K_formula": min(kf) if kf else None,
        "max_K_formula": max(kf) if kf else None,
        "min_K_energy": min(ke) if ke else None,
        "max_K_energy": max(ke) if ke else None,
        "min_K_tensor": min((r["K_tensor"] for r in ok), default=None),
        "max_gap": max(gaps) if gaps else None,
        "agreeing": sum(rel),
    }


CSV_COLUMNS = (
    "schema_version",
    "sample",
    "d",
    "k",
    "A_sha256",
    "K_formula",
    "K_energy",
    "brioschi",
    "K_tensor",
    "audit_max",
    "accepted",
    "error",
) + AUDIT_KEYS


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def scan_to_csv(scan: dict) -> str:
    """CSV with one row per sample and a final ``summary`` row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in scan["rows"]:
        res = r.get("residuals") or {}
        vals = [SCHEMA_VERSION] + [r.get(c) for c in CSV_COLUMNS[1:12]] + [res.get(k) for k in AUDIT_KEYS]
        w.writerow([_fmt(v) for v in vals])
    s = scan["summary"]
    summary = [SCHEMA_VERSION, "summary", "", "", "", s["min_K_formula"], s["min_K_energy"], "", "", "", s["accepted"],
               f"max_K_formula={_fmt(s['max_K_formula'])};max_K_energy={_fmt(s['max_K_energy'])}"]
    w.writerow([_fmt(v) for v in summary] + [""] * len(AUDIT_KEYS))
    return buf.getvalue()


def scan_to_json(scan: dict) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **scan}, sort_keys=True)


def bernoulli_probe(
    ps=(0.5, 0.2, 0.1, 0.05, 0.02),
    k: int = 2,
    spacing: float = DEFAULT_SPACING,
    planes: int = 1,
    seed: int = 0,
    rtol: float = 1e-3,
    min_spacing: float = 1e-4,
) -> dict:
    """Curvature along the Bernoulli family ``(p, 1-p)`` at depth ``k``.

    For each ``p`` the Fermi spacing is halved until two successive energy
    values agree to ``rtol`` (relative); the maximum over ``planes`` planes
    is reported (at ``d=2, k=2`` there is a single plane).  A sequence counts
    as increasing only when each step exceeds ``rtol`` relative, so noise
    below the resolution is not mistaken for growth.
    """
    rows = []
    for p in ps:
        A = bernoulli_potential(p, k)
        chart = Chart.build(A)
        rng = np.random.default_rng(seed)
        best = None
        for _ in range(planes):
            X, Y = np.eye(2) if chart.m == 2 else random_plane(rng, chart)
            rep, h = _converged_report(A, X, Y, chart, spacing, rtol, min_spacing)
            if best is None or rep.K_energy > best["K_energy"]:
                best = {"p": p, "K_formula": rep.K_formula, "K_energy": rep.K_energy, "brioschi": rep.brioschi,
                        "spacing": h, "chart_radius": chart.radius}
        rows.append(best)
    return {
        "rows": rows,
        "increasing_energy": _increasing([r["K_energy"] for r in rows], rtol),
        "increasing_formula": _increasing([r["K_formula"] for r in rows], rtol),
    }


def _increasing(values, rtol) -> bool:
    return bool(all(b - a > rtol * max(1.0, abs(a)) for a, b in zip(values, values[1:])))


def _converged_report(A, X, Y, chart, spacing, rtol, min_spacing):
    h = spacing
    prev = None
    while h >= min_spacing:
        try:
            rep = sectional_curvature(A, X, Y, chart=chart, spacing=h)
        except (AccuracyError, ChartBoundaryError):
            h *= 0.5
            continue
        if prev is not None and abs(rep.K_energy - prev.K_energy) <= rtol * max(1.0, abs(rep.K_energy)):
            return rep, h
        prev = rep
        h *= 0.5
    if prev is None:
        raise AccuracyError(f"no Fermi spacing >= {min_spacing} passed the accuracy checks")
    return prev, 2 * h


__all__ = [
    "CurvatureReport",
    "extract_f",
    "energy_curvature",
    "identity_audit",
    "brioschi",
    "sectional_curvature",
    "random_plane",
    "tensor_curvature",
    "curvature_scan",
    "scan_summary",
    "scan_to_csv",
    "scan_to_json",
    "bernoulli_probe",
    "SCHEMA_VERSION",
]
