"""Command-line experiment driver.

``gibbsgeo run`` executes one experiment from a JSON config and/or flags
(flags win) and writes ``manifest.json``, ``result.json`` and ``table.csv``
into ``<out>/<config hash>/``.  ``gibbsgeo converge`` runs a refinement
study and ``gibbsgeo acceptance`` evaluates the acceptance checks.

Exit status: 0 success, 1 failed acceptance check, 2 invalid input,
3 numerical failure.  ``GIBBSGEO_WORKERS`` sets scan parallelism and never
changes output bytes.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import pathlib
import sys
import time

import numpy as np

from . import __version__
from . import circle as C
from . import curvature as K
from . import geodesy as D
from . import geometry as G
from . import kernels
from . import transfer as T
from .errors import GibbsGeoError, NumericalError, ResourceError, ValidationError
from .function_space import CylinderFunction, ShiftSpace

EXPERIMENTS = (
    "normalize", "gibbs", "pressure", "basis", "metric", "geodesic",
    "transport", "curvature", "scan", "audit", "converge",
)
AXES = ("fd_step", "ode_step", "k", "N")

DEFAULTS = {
    "backend": "shift",
    "d": 2,
    "k": 2,
    "N": C.DEFAULT_N,
    "experiment": "gibbs",
    "potential": "random",
    "seed": 0,
    "rho": 0.2,
    "step": None,
    "spacing": K.DEFAULT_SPACING,
    "samples": 20,
    "coords": None,
    "axis": "fd_step",
    "levels": 4,
    "m": 2,
    "out": "out",
}

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3


# --------------------------------------------------------------------------------------
# configuration


def _parse_coords(text):
    if text is None or isinstance(text, list):
        return text
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"coords must be comma-separated numbers, got {text!r}") from None


def resolve_config(file_cfg: dict, flags: dict) -> dict:
    unknown = set(file_cfg) - set(DEFAULTS)
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    cfg = {**DEFAULTS, **file_cfg, **{k: v for k, v in flags.items() if v is not None}}
    cfg["coords"] = _parse_coords(cfg["coords"])
    if cfg["backend"] not in ("shift", "circle"):
        raise ValidationError(f"backend must be 'shift' or 'circle', got {cfg['backend']!r}")
    if cfg["experiment"] not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {cfg['experiment']!r}; choose from {', '.join(EXPERIMENTS)}")
    if cfg["axis"] not in AXES:
        raise ValidationError(f"unknown axis {cfg['axis']!r}; choose from {', '.join(AXES)}")
    for key in ("d", "k", "N", "seed", "samples", "levels", "m"):
        if not isinstance(cfg[key], int) or isinstance(cfg[key], bool):
            raise ValidationError(f"{key} must be an integer, got {cfg[key]!r}")
    for key in ("d", "k", "N", "samples", "levels", "m"):
        if cfg[key] < 1:
            raise ValidationError(f"{key} must be positive")
    if cfg["seed"] < 0:
        raise ValidationError("seed must be nonnegative")
    for key in ("rho", "spacing", "step"):
        v = cfg[key]
        if v is None and key == "step":
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
            raise ValidationError(f"{key} must be a positive number, got {v!r}")
    return cfg


def config_hash(cfg: dict) -> str:
    payload = {k: v for k, v in cfg.items() if k != "out"}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


# --------------------------------------------------------------------------------------
# potentials


def _floats(arg: str, text: str) -> list[float]:
    try:
        vals = [float(v) for v in arg.split(",")]
    except ValueError:
        raise ValidationError(f"malformed numbers in potential {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise ValidationError(f"non-finite value in potential {text!r}")
    return vals


def shift_potential(text: str, d: int, k: int, seed: int) -> CylinderFunction:
    kind, _, arg = str(text).partition(":")
    space = ShiftSpace(d, k)
    if kind == "const":
        return CylinderFunction.constant(d, k, _floats(arg, text)[0])
    if kind == "random":
        rng = np.random.default_rng(seed)
        return CylinderFunction(space, rng.uniform(-0.5, 0.5, d**k))
    if kind == "bernoulli":
        p = _floats(arg, text)
        if len(p) == d - 1:
            p.append(1.0 - sum(p))
        if len(p) != d:
            raise ValidationError(f"bernoulli needs {d - 1} or {d} weights")
        return G.bernoulli_potential(p, k)
    if kind == "coeffs":
        return CylinderFunction(space, np.array(_floats(arg, text)))
    if kind == "file":
        try:
            data = json.loads(pathlib.Path(arg).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read potential file {arg!r}: {exc}") from None
        f = CylinderFunction.from_dict(data) if isinstance(data, dict) else CylinderFunction(space, np.asarray(data, float))
        if f.d != d:
            raise ValidationError(f"potential file has d={f.d}, config has d={d}")
        return f.embed(max(k, f.k))
    raise ValidationError(f"unknown potential {text!r} for the shift backend")


def circle_model(text: str, d: int, N: int, seed: int) -> C.CircleModel:
    kind, _, arg = str(text).partition(":")
    if kind == "const":
        v = _floats(arg, text)[0]
        return C.CircleModel.from_callable(d, N, lambda x: np.full_like(x, v))
    if kind == "cos":
        parts = _floats(arg, text) if arg else [0.3]
        amp, freq = parts[0], parts[1] if len(parts) > 1 else 1.0
        if freq != int(freq):
            raise ValidationError(f"cos frequency must be an integer, got {freq}")
        return C.CircleModel.from_callable(d, N, lambda x: amp * np.cos(2 * np.pi * freq * x))
    if kind == "random":
        rng = np.random.default_rng(seed)
        a, b = rng.uniform(-0.25, 0.25, (2, 3))
        return C.CircleModel.from_callable(
            d, N, lambda x: sum(a[j] * np.cos(2 * np.pi * (j + 1) * x) + b[j] * np.sin(2 * np.pi * (j + 1) * x)
                                for j in range(3)))
    raise ValidationError(f"unknown potential {text!r} for the circle backend")


# --------------------------------------------------------------------------------------
# experiments; each returns (result dict, table rows, residual summary)


def _table(header, rows):
    return [list(header)] + [list(r) for r in rows]


def _unit(chart, v):
    v = np.asarray(v, dtype=float)
    if v.shape != (chart.m,):
        raise ValidationError(f"coords must have {chart.m} components")
    n2 = float(v @ chart.metric_field(np.zeros(chart.m)) @ v)
    if not n2 > 0:
        raise ValidationError("coords must be a nonzero direction")
    return v / math.sqrt(n2)


def _chart(cfg):
    if cfg["backend"] == "circle":
        return C.circle_chart(C.circle_normalize(circle_model(cfg["potential"], cfg["d"], cfg["N"], cfg["seed"])), m=cfg["m"])
    return D.Chart.build(T.normalize(shift_potential(cfg["potential"], cfg["d"], cfg["k"], cfg["seed"])))


def _plane(cfg, chart):
    # independent stream from the one that draws the potential
    rng = np.random.default_rng(np.random.SeedSequence(cfg["seed"], spawn_key=(1,)))
    X, Y = K.random_plane(rng, chart)
    if cfg["coords"] is not None:
        X = _unit(chart, cfg["coords"])
        M = chart.metric_field(np.zeros(chart.m))
        Y = Y - (X @ M @ Y) * X
        Y /= math.sqrt(Y @ M @ Y)
    return X, Y


def exp_normalize(cfg):
    if cfg["backend"] == "circle":
        model = circle_model(cfg["potential"], cfg["d"], cfg["N"], cfg["seed"])
        P = C.circle_normalize(model)
        defect = C.normalization_defect(P)
        result = {"input": model.to_dict(), "normalized": P.to_dict(), "defect": defect}
        rows = zip(P.A.grid, model.A.values, P.A.values)
        return result, _table(("x", "A", "Pi_A"), rows), {"normalization_defect": defect}
    B = shift_potential(cfg["potential"], cfg["d"], cfg["k"], cfg["seed"])
    P = T.normalize(B)
    defect = T.normalization_defect(P)
    result = {"input": B.to_dict(), "normalized": P.to_dict(), "log_lambda": T.pressure(B), "defect": defect}
    rows = [("".join(map(str, B.space.word(i))), B.coeffs[i], P.coeffs[i]) for i in range(B.space.dim)]
    return result, _table(("word", "B", "Pi_B"), rows), {"normalization_defect": defect}


def exp_gibbs(cfg):
    if cfg["backend"] == "circle":
        model = circle_model(cfg["potential"], cfg["d"], cfg["N"], cfg["seed"])
        g = C.circle_gibbs(model)
        check = C.circle_gibbs_check(model)
        result = {**g.to_dict(), "check": check}
        rows = zip(model.A.grid, g.h, g.nu, g.density)
        return result, _table(("x", "h", "nu", "density"), rows), g.residuals
    B = shift_potential(cfg["potential"], cfg["d"], cfg["k"], cfg["seed"])
    g = T.gibbs(B)
    rows = [("".join(map(str, B.space.word(i))), g.h.coeffs[i], g.nu[i], g.mu[i]) for i in range(B.space.dim)]
    return g.to_dict(), _table(("word", "h", "nu", "mu"), rows), g.residuals


def exp_pressure(cfg):
    if cfg["backend"] == "circle":
        model = circle_model(cfg["potential"], cfg["d"], cfg["N"], cfg["seed"])
        check = C.circle_gibbs_check(model, refine=2)
        rows = [(lv["N"], lv["pressure"], lv["invariance_defect"]) for lv in check["levels"]]
        return check, _table(("N", "pressure", "invariance_defect"), rows), {
            "adjoint_defect": max(lv["adjoint_defect"] for lv in check["levels"])}
    B = shift_potential(cfg["potential"], cfg["d"], cfg["k"], cfg["seed"])
    psi = CylinderFunction(B.space, np.random.default_rng(cfg["seed"] + 1).standard_normal(B.space.dim))
    check = T.pressure_derivative_check(B, psi)
    result = {"pressure": T.pressure(B), "psi": psi.to_dict(), "derivative_check": check}
    rows = [("first_derivative", check["first_formula"], check["first_ratio"])]
    return result, _table(("quantity", "formula", "richardson_ratio"), rows), {"first_gap": check["first_gaps"][-1]}


def exp_basis(cfg):
    if cfg["backend"] == "circle":
        model = C.circle_normalize(circle_model(cfg["potential"], cfg["d"], cfg["N"], cfg["seed"]))
        E = C.circle_tangent_basis(model, cfg["m"])
        mu = C.circle_gibbs(model).mu
        gram = (E * mu) @ E.T
        err = float(np.max(np.abs(gram - np.eye(len(E)))))
        rows = zip(model.A.grid, *E)
        return {"basis": E.tolist(), "gram": gram.tolist()}, _table(["x"] + [f"e{i}" for i in range(len(E))], rows), {
            "gram_error": err}
    A = T.normalize(shift_potential(cfg["potential"], cfg["d"], cfg["k"], cfg["seed"]))
    basis = G.orthonormal_tangent_basis(A)
    gram = G.gram_matrix(basis)
    err = float(np.max(np.abs(gram - np.eye(len(basis)))))
    kres = max(G.kernel_residual(A, b.value) for b in basis)
    result = {"base": A.to_dict(), "dimension": len(basis), "vectors": [b.coeffs.tolist() for b in basis],
              "gram": gram.tolist()}
    rows = [("".join(map(str, A.space.word(i))), *[b.coeffs[i] for b in basis]) for i in range(A.space.dim)]
    return result, _table(["word"] + [f"e{i}" for i in range(len(basis))], rows), {
        "gram_error": err, "kernel_residual": kres}


def exp_metric(cfg):
    chart = _chart(cfg)
    c = np.zeros(chart.m) if cfg["coords"] is None else np.asarray(cfg["coords"], float)
    if c.shape != (chart.m,):
        raise ValidationError(f"coords must have {chart.m} components")
    M = chart.metric_field(c)
    Gam = chart.christoffel(c)
    result = {"coords": c.tolist(), "metric": M.tolist(), "christoffel": Gam.tolist(), "chart_radius": chart.radius,
              "condition": float(np.linalg.cond(M)), "approximate": chart.engine.approximate}
    rows = [(i, j, M[i, j]) for i in range(chart.m) for j in range(chart.m)]
    return result, _table(("i", "j", "g_ij"), rows), {"metric_at_origin_minus_identity": float(
        np.max(np.abs(chart.metric_field(np.zeros(chart.m)) - np.eye(chart.m))))}


def _geodesic(cfg, chart, transport=()):
    X0, _ = _plane(cfg, chart) if cfg["coords"] is None else (_unit(chart, cfg["coords"]), None)
    rho = min(float(cfg["rho"]), chart.radius)
    return D.geodesic_shoot(chart, X0, rho=rho, step=cfg["step"], transport=transport)


def _path_rows(path):
    rows = []
    for i, t in enumerate(path.times):
        rows.append((t, *path.coords[i], path.energy[i], path.tangency[i]))
    return _table(["t"] + [f"c{j}" for j in range(path.coords.shape[1])] + ["energy", "tangency"], rows)


def exp_geodesic(cfg):
    chart = _chart(cfg)
    path = _geodesic(cfg, chart)
    result = path.to_dict()
    resid = {"energy_drift": path.energy_drift, "tangency_max": path.tangency_max}
    if not chart.engine.approximate:
        accel = float(np.max(np.abs(path.acceleration_integrals() + 1.0)))
        result["diagnostics"]["int_Xprime_plus_one"] = accel
        resid["int_Xprime_plus_one"] = accel
    return result, _path_rows(path), resid


def exp_transport(cfg):
    chart = _chart(cfg)
    _, Y0 = _plane(cfg, chart)
    path = _geodesic(cfg, chart)
    tr = D.parallel_transport(path, Y0)
    result = {"times": tr.times.tolist(), "Y": tr.Y.tolist(), "norm_drift": tr.norm_drift,
              "angle_drift": tr.angle_drift, "geodesic": path.to_dict()}
    rows = [(t, *tr.Y[i]) for i, t in enumerate(tr.times)]
    return result, _table(["t"] + [f"Y{j}" for j in range(chart.m)], rows), {
        "norm_drift": tr.norm_drift, "angle_drift": tr.angle_drift}


def _curvature_report(cfg):
    chart = _chart(cfg)
    X, Y = _plane(cfg, chart)
    rep = K.sectional_curvature(chart.base, X, Y, chart=chart, spacing=cfg["spacing"])
    return chart, X, Y, rep


def exp_curvature(cfg):
    chart, X, Y, rep = _curvature_report(cfg)
    result = {**rep.to_dict(), "X": X.tolist(), "Y": Y.tolist(), "chart_radius": chart.radius,
              "approximate": chart.engine.approximate}
    rows = [("K_formula", rep.K_formula), ("K_energy", rep.K_energy), ("brioschi", rep.brioschi)]
    return result, _table(("quantity", "value"), rows), {"audit_max": rep.audit_max, "route_gap": rep.gap}


def exp_audit(cfg):
    chart, X, Y, rep = _curvature_report(cfg)
    result = {"residuals": rep.residuals, "audit_max": rep.audit_max, "accepted": rep.accepted,
              "tolerance": K.ACCEPT_TOL, "X": X.tolist(), "Y": Y.tolist()}
    rows = [(k, rep.residuals[k], abs(rep.residuals[k]) <= K.ACCEPT_TOL) for k in K.AUDIT_KEYS]
    return result, _table(("identity", "residual", "within_tolerance"), rows), {"audit_max": rep.audit_max}


def exp_scan(cfg):
    if cfg["backend"] != "shift":
        raise ValidationError("scan runs on the shift backend only")
    scan = K.curvature_scan(cfg["d"], cfg["k"], cfg["samples"], cfg["seed"], spacing=cfg["spacing"])
    return scan, K.scan_to_csv(scan), {"failed": scan["summary"]["failed"]}


def _ratios(values):
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    diffs = [float(np.max(np.abs(b - a))) for a, b in zip(v, v[1:])]
    ratios = [a / b if b > 0 else float("inf") for a, b in zip(diffs, diffs[1:])]
    return diffs, ratios


def exp_converge(cfg):
    axis, n = cfg["axis"], cfg["levels"]
    if axis == "N":
        Ns = [max(cfg["N"] // 2 ** (n - 1), cfg["d"]) * 2**i for i in range(n)]
        Ns = [N - N % cfg["d"] for N in Ns]
        levels = Ns
        values = [C.circle_gibbs(circle_model(cfg["potential"], cfg["d"], N, cfg["seed"])).lam for N in Ns]
        quantity = "lambda"
    elif axis == "k":
        B = shift_potential(cfg["potential"], cfg["d"], cfg["k"], cfg["seed"])
        levels = [B.k + i for i in range(n)]
        values = [T.marginal(T.gibbs(B, k=kk).mu, B.d, B.k) for kk in levels]
        quantity = f"mu_depth_{B.k}"
    elif axis == "ode_step":
        chart = _chart(cfg)
        X0 = _plane(cfg, chart)[0] if cfg["coords"] is None else _unit(chart, cfg["coords"])
        rho = min(float(cfg["rho"]), chart.radius)
        base = cfg["step"] or rho / 4
        levels = [base / 2**i for i in range(n)]
        values = [D.geodesic_shoot(chart, X0, rho=rho, step=s).coords[-1] for s in levels]
        quantity = "endpoint"
    else:
        chart = _chart(cfg)
        X, Y = _plane(cfg, chart)
        levels = [2 * cfg["spacing"] / 2**i for i in range(n)]
        # the single-stencil energy value is the raw second-order estimate
        values = [K.sectional_curvature(chart.base, X, Y, chart=chart, spacing=h, check=False).diagnostics["K_energy_1"]
                  for h in levels]
        quantity = "K_energy_single_stencil"
    diffs, ratios = _ratios(values)
    vals = [np.atleast_1d(v).tolist() for v in values]
    result = {"axis": axis, "quantity": quantity, "levels": levels, "values": vals, "differences": diffs,
              "ratios": ratios}
    rows = []
    for i, lv in enumerate(levels):
        rows.append((lv, *vals[i], diffs[i - 1] if i else "", ratios[i - 2] if i > 1 else ""))
    header = ["level"] + [f"{quantity}_{j}" for j in range(len(vals[0]))] + ["difference", "ratio"]
    return result, _table(header, rows), {"last_difference": diffs[-1] if diffs else 0.0}


EXPERIMENT_FUNCS = {name: globals()[f"exp_{name}"] for name in EXPERIMENTS}


# --------------------------------------------------------------------------------------
# persistence


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def _csv_text(table) -> str:
    if isinstance(table, str):
        return table
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in table:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def execute(cfg: dict) -> tuple[int, pathlib.Path]:
    """Run one experiment and persist its artifacts; returns (exit status, output directory)."""
    outdir = pathlib.Path(cfg["out"]) / config_hash(cfg)
    outdir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    manifest = {"config": cfg, "version": __version__, "kernel_backend": kernels.BACKEND, "error": None,
                "residuals": {}}
    status = EXIT_OK
    try:
        result, table, residuals = EXPERIMENT_FUNCS[cfg["experiment"]](cfg)
        if cfg["experiment"] == "scan":
            payload = K.scan_to_json(result)
        else:
            payload = json.dumps(_jsonable(result), sort_keys=True)
        (outdir / "result.json").write_text(payload)
        (outdir / "table.csv").write_text(_csv_text(table))
        manifest["residuals"] = _jsonable(residuals)
    except (ValidationError, ResourceError) as exc:
        status = EXIT_INVALID
        manifest["error"] = {"type": type(exc).__name__, "message": str(exc)}
    except NumericalError as exc:
        status = EXIT_NUMERICAL
        manifest["error"] = {"type": type(exc).__name__, "message": str(exc), "residual": _jsonable(exc.residual)}
    manifest["exit_status"] = status
    manifest["wall_time_s"] = time.perf_counter() - start
    (outdir / "manifest.json").write_text(json.dumps(_jsonable(manifest), sort_keys=True, indent=2))
    return status, outdir


# --------------------------------------------------------------------------------------
# argument parsing


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--backend", choices=("shift", "circle"))
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--potential", help="const:V | random | bernoulli:p[,..] | coeffs:a,b,.. | file:PATH | cos:AMP[,FREQ]")
    p.add_argument("--seed", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--spacing", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--coords", help="comma-separated chart coordinates (direction or point)")
    p.add_argument("--m", type=int, help="tangent dimension on the circle backend")
    p.add_argument("--levels", type=int)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gibbsgeo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gibbsgeo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("run", help="run one experiment"))
    conv = sub.add_parser("converge", help="refinement study along one axis")
    _add_run_flags(conv)
    conv.add_argument("--axis", choices=AXES)
    acc = sub.add_parser("acceptance", help="evaluate acceptance checks")
    acc.add_argument("--criterion", type=int, action="append", choices=range(1, 13), metavar="N",
                     help="criterion number (repeatable); default all")
    return parser


def _load_config(path):
    if path is None:
        return {}
    try:
        data = json.loads(pathlib.Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path!r}: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("config file must hold a JSON object")
    return data


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID

    if args.command == "acceptance":
        from . import acceptance

        failed = False
        for r in acceptance.run(args.criterion):
            print(acceptance.format_line(r))
            failed |= not r.passed
        return EXIT_FAIL if failed else EXIT_OK

    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if args.command == "converge":
        flags["experiment"] = "converge"
    try:
        cfg = resolve_config(_load_config(args.config), flags)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        status, outdir = execute(cfg)
    except GibbsGeoError as exc:  # failures while writing artifacts
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc, NumericalError) else EXIT_INVALID
    manifest = json.loads((outdir / "manifest.json").read_text())
    if status:
        print(f"error ({manifest['error']['type']}): {manifest['error']['message']}", file=sys.stderr)
    print(outdir)
    return status


if __name__ == "__main__":
    sys.exit(main())
