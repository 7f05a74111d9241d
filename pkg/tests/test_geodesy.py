import numpy as np
import pytest

from gibbsgeo import geodesy as D
from gibbsgeo import geometry as G
from gibbsgeo.curvature import random_plane, tensor_curvature
from gibbsgeo.errors import AccuracyError, ChartBoundaryError, StructuralError, ValidationError


class SphereEngine:
    """Unit sphere in (latitude, longitude): M = diag(1, cos^2 u)."""

    approximate = False

    def metric(self, c):
        u = c[0]
        M = np.diag([1.0, np.cos(u) ** 2])
        return M, np.asarray(c, float).copy(), np.zeros(2), np.eye(2)

    def jet(self, c, step):
        u = c[0]
        dM = np.zeros((2, 2, 2))
        dM[0, 1, 1] = -2 * np.cos(u) * np.sin(u)
        return self.metric(c)[0], dM

    def potential(self, P):
        return np.asarray(P)


def sphere_chart():
    return D.Chart(base=None, basis=np.eye(2), engine=SphereEngine(), radius=1.0)


@pytest.fixture(scope="module")
def chart22():
    A = G.random_normalized_potential(np.random.default_rng(0), 2, 2)
    return D.Chart.build(A)


def unit(chart, v):
    v = np.asarray(v, float)
    return v / np.sqrt(v @ chart.metric_field(np.zeros(chart.m)) @ v)


# --- analytic oracles ------------------------------------------------------------------------


def test_christoffel_from_jet_polar():
    # polar coordinates: M = diag(1, r^2); Gamma^r_{tt} = -r, Gamma^t_{rt} = 1/r
    r = 1.7
    M = np.diag([1.0, r * r])
    dM = np.zeros((2, 2, 2))
    dM[0, 1, 1] = 2 * r
    Gam = D.christoffel_from_jet(M, dM)
    assert Gam[0, 1, 1] == pytest.approx(-r)
    assert Gam[1, 0, 1] == pytest.approx(1 / r)
    assert Gam[1, 1, 0] == pytest.approx(1 / r)
    assert np.count_nonzero(np.abs(Gam) > 1e-15) == 3


@pytest.mark.parametrize("a", [0.0, 0.7, 1.3])
def test_rk4_follows_great_circles(a):
    chart = sphere_chart()
    path = D.geodesic_shoot(chart, np.array([np.sin(a), np.cos(a)]), rho=0.5, step=0.005, check=False)
    t = path.times
    u = np.arcsin(np.sin(a) * np.sin(t))
    v = np.arctan2(np.cos(a) * np.sin(t), np.cos(t))
    assert np.max(np.abs(path.coords[:, 0] - u)) <= 1e-10
    assert np.max(np.abs(path.coords[:, 1] - v)) <= 1e-10


def test_tensor_route_on_sphere():
    chart = sphere_chart()
    assert tensor_curvature(chart, [1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0, abs=1e-5)


# --- chart --------------------------------------------------------------------------------------


@pytest.mark.parametrize("d,k", [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2)])
def test_metric_is_identity_at_centre(d, k):
    A = G.random_normalized_potential(np.random.default_rng(d + k), d, k)
    chart = D.Chart.build(A)
    M = chart.metric_field(np.zeros(chart.m))
    assert np.max(np.abs(M - np.eye(chart.m))) <= 1e-8
    np.testing.assert_array_equal(M, M.T)


def test_metric_off_centre(chart22):
    M = chart22.metric_field(np.array([0.1, 0.0]))
    np.testing.assert_array_equal(M, M.T)
    w = np.linalg.eigvalsh(M)
    assert 0.5 < w.min() and w.max() < 2.0


def test_chart_map_is_normalized(chart22):
    from gibbsgeo.transfer import normalization_defect

    P = chart22.map(np.array([0.05, -0.1]))
    assert normalization_defect(P) <= 1e-12
    np.testing.assert_allclose(chart22.map(np.zeros(2)).coeffs, chart22.base.coeffs, atol=1e-14)


def test_christoffel_matches_metric_differences(chart22):
    c = np.array([0.03, -0.02])

    def diff(h):
        return np.array([(chart22.metric_field(c + h * e) - chart22.metric_field(c - h * e)) / (2 * h) for e in np.eye(2)])

    dM = (4 * diff(2e-3) - diff(4e-3)) / 3
    expect = D.christoffel_from_jet(chart22.metric_field(c), dM)
    np.testing.assert_allclose(chart22.christoffel(c), expect, atol=1e-6)
    Gam = chart22.christoffel(c)
    np.testing.assert_allclose(Gam, np.transpose(Gam, (0, 2, 1)), atol=1e-10)


def test_chart_boundary_errors(chart22):
    with pytest.raises(ChartBoundaryError):
        chart22.metric_field(np.array([chart22.radius * 1.01, 0.0]))
    with pytest.raises(ValidationError):
        chart22.metric_field(np.zeros(3))


def test_condition_guard_shrinks_then_fails():
    A = G.random_normalized_potential(np.random.default_rng(1), 2, 2)
    with pytest.raises(StructuralError):
        D.Chart.build(A, cond_max=1.0)


# --- geodesics --------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def path22(chart22):
    X0 = unit(chart22, [0.6, 0.8])
    return D.geodesic_shoot(chart22, X0, rho=0.2)


def test_energy_and_tangency(path22):
    assert path22.energy_drift <= 1e-6
    assert path22.tangency_max <= 1e-8


def test_constant_energy_identities(path22):
    assert np.max(np.abs(path22.acceleration_integrals() + 1.0)) <= 1e-5
    assert np.max(np.abs(path22.energy_identity_rate())) <= 1e-4


def test_leibniz_rule_for_transported_field(chart22):
    X0, Y0 = random_plane(np.random.default_rng(3), chart22)
    path = D.geodesic_shoot(chart22, X0, rho=0.1, transport=[Y0])
    Ypot = np.array([path.transported[0, i] @ chart22.evaluate(c)[3] for i, c in enumerate(path.coords)])
    lhs = np.sum(Ypot * path.mu, axis=1)  # int Y dmu, zero for tangent fields
    dY = (Ypot[2:] - Ypot[:-2]) / (2 * path.step)
    rhs = np.sum((dY + Ypot[1:-1] * path.potential_velocity[1:-1]) * path.mu[1:-1], axis=1)
    dlhs = (lhs[2:] - lhs[:-2]) / (2 * path.step)
    assert np.max(np.abs(dlhs - rhs)) <= 1e-4


def test_reversal_symmetry(chart22, path22):
    back = D.geodesic_shoot(chart22, -path22.velocity[len(path22.times) // 2], rho=0.2)
    assert np.max(np.abs(back.coords[::-1] - path22.coords)) <= 1e-10


@pytest.mark.parametrize("p0", [0.5, 0.3, 0.8])
def test_one_dimensional_chart_matches_closed_form(p0):
    # on {Bernoulli(p)} the unit-speed geodesic is p(t) = sin^2(arcsin sqrt(p0) + t/2),
    # and the chart coordinate is the rescaled logit shift along the normalized basis vector
    chart = D.Chart.build(G.bernoulli_potential(p0, 1))
    sign = np.sign(chart.basis[0, 0])
    path = D.geodesic_shoot(chart, np.array([1.0]), rho=0.2)
    p = np.sin(np.arcsin(np.sqrt(p0)) + sign * path.times / 2) ** 2
    s = np.sqrt(p0 * (1 - p0))
    c = sign * s * (np.log(p / (1 - p)) - np.log(p0 / (1 - p0)))
    assert np.max(np.abs(path.coords[:, 0] - c)) <= 1e-8


def test_geodesic_input_validation(chart22):
    with pytest.raises(ValidationError):
        D.geodesic_shoot(chart22, np.array([1.0, 1.0]))
    with pytest.raises(ValidationError):
        D.geodesic_shoot(chart22, np.array([1.0, 0.0]), rho=1.0)
    with pytest.raises(ValidationError):
        D.geodesic_shoot(chart22, np.array([1.0, 0.0, 0.0]))


def test_coarse_step_raises_accuracy_error(chart22):
    with pytest.raises(AccuracyError):
        D.geodesic_shoot(chart22, unit(chart22, [1.0, 0.0]), rho=0.2, step=0.2)


def test_leaving_the_chart_raises(chart22):
    r = chart22.radius
    origin = np.array([0.9 * r, 0.0])
    v = np.array([1.0, 0.0]) / np.sqrt(chart22.metric_field(origin)[0, 0])
    with pytest.raises(ChartBoundaryError):
        D.geodesic_shoot(chart22, v, rho=0.2 * r, origin=origin)


def test_path_time_lookup_and_json(path22):
    assert path22.index_of(0.0) == len(path22.times) // 2
    with pytest.raises(ValidationError):
        path22.index_of(0.0123456)
    assert '"energy_drift"' in path22.to_json()


def test_ode_step_refinement_is_fourth_order(chart22):
    X0 = unit(chart22, [0.6, 0.8])
    ends = [D.geodesic_shoot(chart22, X0, rho=0.2, step=s).coords[-1] for s in (0.05, 0.025, 0.0125)]
    d1 = np.max(np.abs(ends[1] - ends[0]))
    d2 = np.max(np.abs(ends[2] - ends[1]))
    assert d1 / d2 >= 12


# --- parallel transport --------------------------------------------------------------------------


def test_transport_preserves_norm_and_angle():
    A = G.random_normalized_potential(np.random.default_rng(4), 2, 3)
    chart = D.Chart.build(A)
    X0, Y0 = random_plane(np.random.default_rng(5), chart)
    path = D.geodesic_shoot(chart, X0, rho=0.8 * chart.radius)
    tr = D.parallel_transport(path, Y0)
    assert tr.norm_drift <= 1e-6
    assert tr.angle_drift <= 1e-6
    np.testing.assert_allclose(tr.path.coords, path.coords, atol=1e-14)


def test_self_transport_is_the_velocity(path22):
    tr = D.parallel_transport(path22, path22.velocity[len(path22.times) // 2])
    assert np.max(np.abs(tr.Y - path22.velocity)) <= 1e-8


# --- Fermi surfaces -----------------------------------------------------------------------------


@pytest.fixture(scope="module")
def surface(chart22):
    X0, Y0 = random_plane(np.random.default_rng(6), chart22)
    return D.fermi_surface(chart22, X0, Y0)


def test_fermi_centre_is_base(surface, chart22):
    i0, j0 = surface.centre
    np.testing.assert_allclose(surface.P[i0, j0], chart22.base.coeffs, atol=1e-13)


def test_fermi_base_row_is_the_geodesic(surface):
    j0 = surface.centre[1]
    for i, t in enumerate(surface.tgrid):
        b = surface.base.index_of(t)
        assert np.max(np.abs(surface.P[i, j0] - surface.base.potentials[b])) <= 1e-10


def test_fermi_centre_perpendicular(surface):
    assert abs(surface.diagnostics["centre_inner"]) <= 1e-6


def test_fermi_requires_orthonormal_pair(chart22):
    with pytest.raises(ValidationError):
        D.fermi_surface(chart22, np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    with pytest.raises(ValidationError):
        D.fermi_surface(chart22, np.array([1.0, 0.0]), np.array([0.0, 1.0]), points=4)


# --- truncation --------------------------------------------------------------------------------


def test_truncation_gap_is_quadratic_in_rho():
    A = G.random_normalized_potential(np.random.default_rng(0), 2, 2)
    X0 = np.array([0.6, 0.8])
    g = [D.truncation_stability(A, X0, rho=r, step=r / 8)["gaps"][3] for r in (0.04, 0.02)]
    assert 3.0 <= g[0] / g[1] <= 5.0


def test_truncation_rejects_small_deep_chart():
    A = G.random_normalized_potential(np.random.default_rng(0), 2, 2)
    with pytest.raises(ValidationError):
        D.truncation_stability(A, np.array([0.6, 0.8]), rho=0.2, extra=(3,))
