import csv
import dataclasses
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsgeo import curvature as K
from gibbsgeo import geodesy as D
from gibbsgeo import geometry as G
from gibbsgeo import transfer as T
from gibbsgeo.errors import AccuracyError
from gibbsgeo.function_space import CylinderFunction, shift_compose


@pytest.fixture(scope="module")
def setup22():
    rng = np.random.default_rng(2)
    A = G.random_normalized_potential(rng, 2, 2)
    chart = D.Chart.build(A)
    X, Y = K.random_plane(rng, chart)
    return A, chart, X, Y, K.sectional_curvature(A, X, Y, chart=chart)


# --- oracles -----------------------------------------------------------------------------------


def test_uniform_three_symbol_simplex_has_curvature_one_quarter():
    # depth-one potentials on 3 symbols form the probability simplex with the Fisher metric,
    # i.e. a piece of the sphere of radius 2
    A = G.bernoulli_potential([1 / 3, 1 / 3, 1 / 3], 1)
    chart = D.Chart.build(A)
    rep = K.sectional_curvature(A, [1.0, 0.0], [0.0, 1.0], chart=chart)
    assert rep.K_energy == pytest.approx(0.25, abs=1e-4)
    assert rep.brioschi == pytest.approx(0.25, abs=1e-3)
    assert rep.diagnostics["K_tensor"] == pytest.approx(0.25, abs=1e-4)


@pytest.mark.parametrize("p", [0.5, 0.3])
def test_markov_coin_family_has_curvature_one(p):
    A = G.bernoulli_potential(p, 2)
    chart = D.Chart.build(A)
    assert K.tensor_curvature(chart, [1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0, abs=1e-3)


def test_closed_form_vanishes_on_depth_one_models():
    # on depth-one families Y_t + Xbar Y / 2 is zero at the centre, although the curvature is 1/4
    A = G.bernoulli_potential([0.2, 0.3, 0.5], 1)
    chart = D.Chart.build(A)
    X, Y = K.random_plane(np.random.default_rng(0), chart)
    # f is pure discretization noise here, so the stencil check is off
    rep = K.sectional_curvature(A, X, Y, chart=chart, check=False)
    assert rep.K_formula <= 1e-6
    assert rep.K_energy == pytest.approx(0.25, abs=1e-4)


# --- routes agree where they should ---------------------------------------------------------


def test_energy_tensor_and_brioschi_routes_agree(setup22):
    *_, rep = setup22
    assert rep.K_energy == pytest.approx(rep.diagnostics["K_tensor"], abs=1e-4)
    assert rep.K_energy == pytest.approx(rep.brioschi, abs=1e-3)


def test_formula_route_is_a_sum_of_squares(setup22):
    *_, rep = setup22
    assert rep.K_formula >= 0


def test_swap_invariance(setup22):
    A, chart, X, Y, rep = setup22
    swapped = K.sectional_curvature(A, Y, X, chart=chart)
    assert swapped.K_formula == pytest.approx(rep.K_formula, abs=2e-4)
    assert swapped.K_energy == pytest.approx(rep.K_energy, abs=2e-4)


@pytest.mark.parametrize("theta", [np.pi / 6, np.pi / 4])
def test_energy_route_depends_only_on_the_plane(setup22, theta):
    A, chart, X, Y, rep = setup22
    c, s = np.cos(theta), np.sin(theta)
    rot = K.sectional_curvature(A, c * X + s * Y, -s * X + c * Y, chart=chart)
    assert rot.K_energy == pytest.approx(rep.K_energy, abs=1e-4)


def test_formula_route_changes_under_rotation(setup22):
    A, chart, X, Y, rep = setup22
    c = s = np.sqrt(0.5)
    rot = K.sectional_curvature(A, c * X + s * Y, -s * X + c * Y, chart=chart)
    assert abs(rot.K_formula - rep.K_formula) > 1e-2


def test_coboundary_representative_gives_same_curvature(setup22):
    A, chart, X, Y, rep = setup22
    rng = np.random.default_rng(9)
    g = CylinderFunction(A.space, rng.uniform(-1, 1, 4))
    B = A + shift_compose(g) - g + 0.7
    A2 = T.normalize(B).reduce(2, atol=1e-9)
    chart2 = D.Chart.build(A2)
    np.testing.assert_allclose(chart2.basis, chart.basis, atol=1e-9)
    rep2 = K.sectional_curvature(A2, X, Y, chart=chart2)
    assert rep2.K_formula == pytest.approx(rep.K_formula, abs=1e-6)


def test_tangent_vector_inputs(setup22):
    A, chart, X, Y, rep = setup22
    Xv = G.TangentVector.at(A, CylinderFunction(A.space, X @ chart.basis))
    Yv = G.TangentVector.at(A, CylinderFunction(A.space, Y @ chart.basis))
    rep2 = K.sectional_curvature(A, Xv, Yv, chart=chart)
    assert rep2.K_energy == pytest.approx(rep.K_energy, abs=1e-6)


# --- f and the audit ------------------------------------------------------------------------------


def test_f_has_zero_mean_and_converges(setup22):
    A, chart, X, Y, _ = setup22
    f1, diag = K.extract_f(D.fermi_surface(chart, X, Y, spacing=0.01))
    f2, _ = K.extract_f(D.fermi_surface(chart, X, Y, spacing=0.005))
    assert abs(diag["int_f"]) <= 1e-5
    assert np.max(np.abs(f1 - f2)) <= 1e-4


def test_coarse_grid_detection(setup22):
    _, chart, X, Y, _ = setup22
    surf = D.fermi_surface(chart, X, Y)
    noisy = dataclasses.replace(surf, P=surf.P + 1e-4 * np.random.default_rng(0).standard_normal(surf.P.shape))
    with pytest.raises(AccuracyError):
        K.extract_f(noisy)


def test_audit_identities_that_hold(setup22):
    *_, rep = setup22
    for key in ("int_f", "int_G", "int_g_plus_half", "int_Xprime_plus_one"):
        assert abs(rep.residuals[key]) <= 1e-5, key
    assert abs(rep.residuals["inner_XbarY"]) <= 1e-6


def test_audit_reports_unit_speed_value_of_int_q(setup22):
    # s-curves are unit-speed geodesics, so int Q dmu equals int g dmu = -1/2 rather than 0
    *_, rep = setup22
    assert rep.residuals["int_Q"] == pytest.approx(-0.5, abs=1e-6)
    assert not rep.accepted


def test_report_serializes(setup22):
    *_, rep = setup22
    data = json.loads(json.dumps(rep.to_dict()))
    assert set(K.AUDIT_KEYS) <= set(data["residuals"])
    assert data["steps"]["t_step"] == pytest.approx(0.02)


# --- scans ------------------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_scan():
    return K.curvature_scan(2, 2, 6, seed=5, workers=1)


def test_scan_is_deterministic(small_scan):
    again = K.curvature_scan(2, 2, 6, seed=5, workers=1)
    assert K.scan_to_csv(again) == K.scan_to_csv(small_scan)
    assert K.scan_to_json(again) == K.scan_to_json(small_scan)


def test_scan_independent_of_workers(small_scan):
    par = K.curvature_scan(2, 2, 6, seed=5, workers=2)
    assert K.scan_to_csv(par) == K.scan_to_csv(small_scan)
    assert K.scan_to_json(par) == K.scan_to_json(small_scan)


def test_scan_prefix_property(small_scan):
    # sample i depends only on (seed, i)
    short = K.curvature_scan(2, 2, 3, seed=5)
    assert K.scan_to_json({"rows": short["rows"], "summary": {}}) == K.scan_to_json(
        {"rows": small_scan["rows"][:3], "summary": {}})


def test_scan_csv_schema(small_scan):
    rows = list(csv.reader(io.StringIO(K.scan_to_csv(small_scan))))
    assert tuple(rows[0]) == K.CSV_COLUMNS
    assert len(rows) == 6 + 2
    assert rows[-1][1] == "summary"
    assert all(r[0] == str(K.SCHEMA_VERSION) for r in rows[1:])
    assert min(float(r[5]) for r in rows[1:-1]) >= 0


def test_scan_summary(small_scan):
    s = small_scan["summary"]
    assert s["samples"] == 6 and s["failed"] == 0
    assert s["min_K_formula"] >= 0
    assert s["min_K_energy"] == min(r["K_energy"] for r in small_scan["rows"])


def test_scan_records_failures_without_aborting():
    scan = K.curvature_scan(2, 2, 2, seed=0, spread=30.0)
    assert all(r["error"].startswith("StructuralError") for r in scan["rows"])
    assert scan["summary"]["failed"] == 2
    assert "StructuralError" in K.scan_to_csv(scan)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**20))
def test_formula_route_nonnegative_on_random_samples(seed):
    row = K.curvature_scan(2, 2, 1, seed=seed)["rows"][0]
    assert row["error"] or row["K_formula"] >= 0


# --- Bernoulli probe -----------------------------------------------------------------------------


def test_bernoulli_probe_structure():
    probe = K.bernoulli_probe(ps=(0.5, 0.2))
    assert [r["p"] for r in probe["rows"]] == [0.5, 0.2]
    for r in probe["rows"]:
        assert r["K_energy"] == pytest.approx(1.0, abs=1e-3)
    assert probe["increasing_energy"] is False
    assert probe["increasing_formula"] is True
