"""Desk-scale acceptance checks, one function per numbered criterion.

Each check returns a :class:`CriterionResult`; ``run`` evaluates a selection
and ``format_line`` renders the one-line PASS/FAIL summary used by the test
suite and the CLI.  Tolerances are the stated ones and are never adapted to
the outcome.
"""
from __future__ import annotations

import functools
import hashlib
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import circle as C
from . import curvature as K
from . import geodesy as D
from . import geometry as G
from . import transfer as T
from .function_space import CylinderFunction, ShiftSpace


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    note: str = ""


def format_line(r: CriterionResult) -> str:
    status = "PASS" if r.passed else "FAIL"
    return f"[{status}] criterion {r.number:2d} {r.name}: {r.note}"


def _rng(tag: int, seed: int = 20240) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag,)))


def criterion_1() -> CriterionResult:
    rng = _rng(1)
    worst_defect = worst_mu = 0.0
    for _ in range(100):
        B = CylinderFunction(ShiftSpace(2, 2), rng.uniform(-1.0, 1.0, 4))
        P = T.normalize(B)
        worst_defect = max(worst_defect, T.normalization_defect(P))
        worst_mu = max(worst_mu, float(np.max(np.abs(T.gibbs(P).mu - T.gibbs(B).mu))))
    ok = worst_defect <= 1e-10 and worst_mu <= 1e-10
    return CriterionResult(1, "normalization", ok, {"max_defect": worst_defect, "max_mu_gap": worst_mu},
                           f"max |L1-1| = {worst_defect:.2e}, max |mu_Pi(B) - mu_B| = {worst_mu:.2e} (tol 1e-10)")


def criterion_2() -> CriterionResult:
    rng = _rng(2)
    worst_res = worst_agree = 0.0
    for d, k in [(2, 1), (2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (4, 2)]:
        for _ in range(5):
            A = CylinderFunction(ShiftSpace(d, k), rng.uniform(-1.0, 1.0, d**k))
            dense = T.gibbs(A, method="dense")
            power = T.gibbs(A, method="power")
            for g in (dense, power):
                worst_res = max(worst_res, max(g.residuals.values()) / g.lam)
            agree = max(
                abs(dense.lam - power.lam),
                float(np.max(np.abs(dense.h.coeffs - power.h.coeffs))),
                float(np.max(np.abs(dense.nu - power.nu))),
            )
            worst_agree = max(worst_agree, agree)
    ok = worst_res <= 1e-10 and worst_agree <= 1e-10
    return CriterionResult(2, "eigendata", ok, {"max_relative_residual": worst_res, "max_method_gap": worst_agree},
                           f"max residual/lambda = {worst_res:.2e}, dense vs power = {worst_agree:.2e} (tol 1e-10)")


def criterion_3() -> CriterionResult:
    rng = _rng(3)
    consistency = shift = 0.0
    for d, k in [(2, 2), (2, 3), (3, 2)]:
        A = CylinderFunction(ShiftSpace(d, k), rng.uniform(-1.0, 1.0, d**k))
        mu = T.gibbs(A).mu
        deeper = T.gibbs(A, k=k + 1).mu
        consistency = max(consistency, float(np.max(np.abs(T.marginal(deeper, d, k) - mu))))
        # weights of the leading and trailing (k-1)-words must coincide
        shift = max(shift, float(np.max(np.abs(mu.reshape(d, -1).sum(axis=0) - mu.reshape(-1, d).sum(axis=1)))))
    A = CylinderFunction(ShiftSpace(2, 2), rng.uniform(-1.0, 1.0, 4))
    P = T.pressure(A)
    violations = 0
    worst = -np.inf
    for _ in range(50):
        m = T.random_markov_measure(rng, 2, 2)
        gap = T.free_energy(A, m) - P
        worst = max(worst, gap)
        violations += gap > 1e-8
    equality = abs(T.free_energy(A, T.gibbs(A).mu) - P)
    ok = consistency <= 1e-12 and shift <= 1e-12 and violations == 0 and equality <= 1e-8
    return CriterionResult(
        3, "gibbs structure", ok,
        {"consistency": consistency, "shift_invariance": shift, "max_free_energy_gap": worst, "equality_gap": equality},
        f"consistency {consistency:.1e}, shift {shift:.1e}, max h+intA-P = {worst:.2e}, equality {equality:.1e}",
    )


def criterion_4() -> CriterionResult:
    rng = _rng(4)
    dims = {}
    dims_ok = True
    worst = 0.0
    for d in (2, 3):
        for k in (1, 2, 3):
            A = G.random_normalized_potential(rng, d, k)
            dim = G.kernel_dimension(A)
            dims[f"{d},{k}"] = dim
            dims_ok &= dim == d**k - d ** (k - 1)
            X = G.tangent_project(CylinderFunction(A.space, rng.standard_normal(d**k)), A)
            norm2 = G.inner(X, X)
            for n in range(1, 9):
                worst = max(worst, abs(G.asymptotic_variance(X, n) - norm2))
    ok = dims_ok and worst <= 1e-12
    return CriterionResult(4, "tangent/metric", ok, {"kernel_dimensions": dims, "max_variance_gap": worst},
                           f"kernel dims {'ok' if dims_ok else 'WRONG'}, max |var_n - <X,X>| = {worst:.2e} (tol 1e-12)")


def criterion_5() -> CriterionResult:
    rng = _rng(5)
    A = G.random_normalized_potential(rng, 2, 2)
    psi = CylinderFunction(A.space, rng.standard_normal(4))
    pr = T.pressure_derivative_check(A, psi, 1e-2)
    X = G.tangent_project(CylinderFunction(A.space, rng.standard_normal(4)), A)
    phi = CylinderFunction(A.space, rng.standard_normal(4))
    ob = G.observable_derivative_check(A, X, phi, 1e-2)
    in_band = lambda r: 3.5 <= r <= 4.5  # noqa: E731
    ok = in_band(pr["first_ratio"]) and in_band(ob["ratio"])
    return CriterionResult(
        5, "derivative formulas", ok,
        {"pressure_ratio": pr["first_ratio"], "observable_ratio": ob["ratio"], "observable_gaps": ob["gaps"],
         "observable_series_ratio": ob["series_ratio"], "observable_series_gaps": ob["series_gaps"]},
        f"D log lambda ratio {pr['first_ratio']:.3f}; int(phi X) ratio {ob['ratio']:.3f} "
        f"(gap {ob['gaps'][1]:.2e}); correlation-series ratio {ob['series_ratio']:.3f}",
    )


def criterion_6() -> CriterionResult:
    rng = _rng(6)
    drift = tang = accel = 0.0
    for _ in range(3):
        A = G.random_normalized_potential(rng, 2, 2)
        chart = D.Chart.build(A)
        X0 = rng.standard_normal(chart.m)
        X0 /= np.sqrt(X0 @ chart.metric_field(np.zeros(chart.m)) @ X0)
        path = D.geodesic_shoot(chart, X0, rho=0.2, check=False)
        drift = max(drift, path.energy_drift)
        tang = max(tang, path.tangency_max)
        accel = max(accel, float(np.max(np.abs(path.acceleration_integrals() + 1.0))))
    oracle = 0.0
    for p0 in (0.5, 0.3):
        A = G.bernoulli_potential(p0, 1)
        chart = D.Chart.build(A)
        sign = np.sign(chart.basis[0, 0])
        path = D.geodesic_shoot(chart, np.array([1.0]), rho=0.2)
        p = np.sin(np.arcsin(np.sqrt(p0)) + sign * path.times / 2) ** 2
        s = np.sqrt(p0 * (1 - p0))
        c = sign * s * (np.log(p / (1 - p)) - np.log(p0 / (1 - p0)))
        oracle = max(oracle, float(np.max(np.abs(path.coords[:, 0] - c))))
    ok = drift <= 1e-6 and tang <= 1e-8 and accel <= 1e-5 and oracle <= 1e-8
    return CriterionResult(6, "geodesics", ok,
                           {"energy_drift": drift, "tangency": tang, "int_Xprime_plus_one": accel, "oracle_gap": oracle},
                           f"drift {drift:.1e}, tangency {tang:.1e}, |int X' + 1| {accel:.1e}, 1D oracle {oracle:.1e}")


def criterion_7() -> CriterionResult:
    rng = _rng(7)
    norm = angle = selfgap = 0.0
    for _ in range(3):
        A = G.random_normalized_potential(rng, 2, 3)
        chart = D.Chart.build(A)
        X0, Y0 = K.random_plane(rng, chart)
        # coordinates may outrun arclength slightly; keep clear of the chart edge
        rho = min(0.2, 0.8 * chart.radius)
        path = D.geodesic_shoot(chart, X0, rho=rho)
        tr = D.parallel_transport(path, Y0)
        norm = max(norm, tr.norm_drift)
        angle = max(angle, tr.angle_drift)
        selfgap = max(selfgap, float(np.max(np.abs(D.parallel_transport(path, X0).Y - path.velocity))))
    ok = norm <= 1e-6 and angle <= 1e-6 and selfgap <= 1e-8
    return CriterionResult(7, "parallel transport", ok, {"norm_drift": norm, "angle_drift": angle, "self_gap": selfgap},
                           f"norm drift {norm:.1e}, angle drift {angle:.1e}, self-transport {selfgap:.1e}")


@functools.lru_cache(maxsize=None)
def _scans():
    return K.curvature_scan(2, 2, 200, seed=8), K.curvature_scan(2, 3, 50, seed=9)


def criterion_8() -> CriterionResult:
    rows = [r for s in _scans() for r in s["rows"]]
    ok_rows = [r for r in rows if not r["error"]]
    failed = len(rows) - len(ok_rows)
    min_f = min(r["K_formula"] for r in ok_rows)
    min_e = min(r["K_energy"] for r in ok_rows)
    min_t = min(r["K_tensor"] for r in ok_rows)
    negative = sum(r["K_energy"] < -1e-3 for r in ok_rows)
    agree = [abs(r["K_formula"] - r["K_energy"]) <= max(0.05 * abs(r["K_formula"]), 1e-3) for r in ok_rows]
    worst_rel = max(abs(r["K_formula"] - r["K_energy"]) / max(abs(r["K_formula"]), 1e-12) for r in ok_rows)
    ok = failed == 0 and min_f >= 0 and min_e >= -1e-3 and all(agree)
    return CriterionResult(
        8, "curvature", ok,
        {"samples": len(rows), "failed": failed, "min_K_formula": min_f, "min_K_energy": min_e, "min_K_tensor": min_t,
         "negative_K_energy": negative,
         "agreeing": sum(agree), "worst_relative_gap": worst_rel},
        f"min K_formula {min_f:.3g}, min K_energy {min_e:.3g} ({negative} below -1e-3; tensor route {min_t:.3g}), "
        f"routes agree on {sum(agree)}/{len(ok_rows)}",
    )


CRITERION_9_KEYS = ("int_f", "int_G", "int_YG", "int_XbarYG_plus_2G2", "int_Q", "int_Xbar2Q", "int_g_plus_half")


def criterion_9() -> CriterionResult:
    rows = [r for s in _scans() for r in s["rows"] if not r["error"]]
    accepted = [r for r in rows if r["accepted"]]
    worst = {key: max(abs(r["residuals"][key]) for r in rows) for key in CRITERION_9_KEYS}
    frac = len(accepted) / len(rows)
    failing = sorted(k for k, v in worst.items() if v > 1e-3)
    ok = frac >= 0.95 and all(
        abs(r["residuals"][key]) <= 1e-3 for r in accepted for key in CRITERION_9_KEYS
    )
    return CriterionResult(9, "identity audit", ok, {"accepted_fraction": frac, "worst_residuals": worst},
                           f"accepted {frac:.0%}; identities above 1e-3: {', '.join(failing) or 'none'}")


def criterion_10() -> CriterionResult:
    probe = K.bernoulli_probe()
    ke = [r["K_energy"] for r in probe["rows"]]
    kf = [r["K_formula"] for r in probe["rows"]]
    ok = probe["increasing_energy"]
    return CriterionResult(
        10, "no-upper-bound probe", ok, probe,
        "K_energy " + " ".join(f"{v:.4f}" for v in ke) + " | K_formula " + " ".join(f"{v:.3f}" for v in kf),
    )


def criterion_11() -> CriterionResult:
    worst = 0.0
    for d in (2, 3):
        for value in (0.0, -np.log(d), 0.7):
            model = C.CircleModel.from_callable(d, 96 * d, lambda x, v=value: np.full_like(x, v))
            g = C.circle_gibbs(model)
            worst = max(worst, abs(g.lam - d * np.exp(value)) / g.lam, float(np.max(np.abs(g.h - 1.0))))
    study = C.refinement_study(2, lambda x: 0.3 * np.cos(2 * np.pi * x))
    ok = worst <= 1e-12 and min(study["ratios"]) >= 3
    return CriterionResult(11, "circle backend", ok, {"constant_error": worst, **study},
                           f"constant-potential error {worst:.1e}, refinement ratios "
                           + ", ".join(f"{r:.2f}" for r in study["ratios"]))


def criterion_12() -> CriterionResult:
    import os

    from .cli import main

    digests = []
    saved = os.environ.get("GIBBSGEO_WORKERS")
    try:
        with tempfile.TemporaryDirectory() as tmp:
            for i, workers in enumerate(("1", "1", "2")):
                os.environ["GIBBSGEO_WORKERS"] = workers
                out = f"{tmp}/run{i}"
                args = ["run", "--experiment", "scan", "--d", "2", "--k", "2", "--samples", "6", "--seed", "3",
                        "--out", out]
                code = main(args)
                if code != 0:
                    return CriterionResult(12, "determinism", False, {"exit": code}, f"scan exited with {code}")
                digests.append(_tree_digest(out))
    finally:
        if saved is None:
            os.environ.pop("GIBBSGEO_WORKERS", None)
        else:
            os.environ["GIBBSGEO_WORKERS"] = saved
    ok = len(set(digests)) == 1
    return CriterionResult(12, "determinism", ok, {"digests": digests},
                           "result.json and table.csv identical across repeats and worker counts (1, 1, 2)" if ok
                           else "outputs differ")


def _tree_digest(root: str) -> str:
    import pathlib

    h = hashlib.sha256()
    for path in sorted(pathlib.Path(root).rglob("*")):
        if path.name in ("result.json", "table.csv"):
            h.update(path.name.encode())
            h.update(path.read_bytes())
    return h.hexdigest()


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}


def run(numbers=None) -> list[CriterionResult]:
    numbers = sorted(CRITERIA) if numbers is None else numbers
    return [CRITERIA[n]() for n in numbers]


__all__ = ["CriterionResult", "CRITERIA", "run", "format_line"]
