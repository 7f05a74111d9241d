import itertools

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsgeo import transfer as T
from gibbsgeo.errors import NumericalError, ResourceError, StructuralError, ValidationError
from gibbsgeo.function_space import CylinderFunction, ShiftSpace, shift_compose
from gibbsgeo.geometry import bernoulli_potential, random_normalized_potential, tangent_project


def rand_pot(seed, d=2, k=2, spread=1.0):
    rng = np.random.default_rng(seed)
    return CylinderFunction(ShiftSpace(d, k), rng.uniform(-spread, spread, d**k))


# --- matrix ----------------------------------------------------------------------------------


def test_uniform_potential_is_stochastic():
    M = T.build_matrix(CylinderFunction.constant(3, 2, -np.log(3)))
    np.testing.assert_allclose(M.apply(np.ones(9)), 1.0, atol=1e-15)


def test_zero_potential_doubles_ones():
    M = T.build_matrix(CylinderFunction.constant(2, 2, 0.0))
    np.testing.assert_array_equal(M.apply(np.ones(4)), 2.0)


@pytest.mark.parametrize("d,k", [(2, 2), (2, 3), (3, 2)])
def test_matrix_matches_definitional_sum(d, k):
    A = rand_pot(1, d, k)
    f = rand_pot(2, d, k)
    Lf = T.apply_transfer(A, f)
    for w in itertools.product(range(d), repeat=k):
        # (L f)(x) = sum_a exp(A(a x)) f(a x), with a x truncated to k symbols
        expect = sum(np.exp(A((a,) + w)) * f((a,) + w) for a in range(d))
        assert Lf(w) == pytest.approx(expect, abs=1e-14)


# --- eigendata ---------------------------------------------------------------------------


def test_zero_potential_eigendata():
    g = T.gibbs(CylinderFunction.constant(2, 1, 0.0))
    assert g.lam == pytest.approx(2.0, abs=1e-14)
    np.testing.assert_allclose(g.h.coeffs, 1.0, atol=1e-14)
    np.testing.assert_allclose(g.nu, 0.5, atol=1e-15)
    np.testing.assert_allclose(g.mu, 0.5, atol=1e-15)


def test_bernoulli_eigendata():
    g = T.gibbs(CylinderFunction(ShiftSpace(2, 1), np.log([0.25, 0.75])))
    assert g.lam == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(g.mu, [0.25, 0.75], atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_eigendata_against_scipy(seed):
    A = rand_pot(seed, 2, 2)
    M = T.build_matrix(A).entries
    vals, left, right = scipy.linalg.eig(M, left=True, right=True)
    i = np.argmax(vals.real)
    h = np.abs(right[:, i].real)
    nu = np.abs(left[:, i].real)
    nu /= nu.sum()
    h /= h @ nu
    for method in ("dense", "power"):
        g = T.gibbs(A, method=method)
        assert g.lam == pytest.approx(vals[i].real, abs=1e-10)
        np.testing.assert_allclose(g.h.coeffs, h, atol=1e-10)
        np.testing.assert_allclose(g.nu, nu, atol=1e-10)


@pytest.mark.parametrize("d,k", [(2, 4), (3, 3), (2, 6)])
def test_residuals_relative_to_lambda(d, k):
    g = T.gibbs(rand_pot(7, d, k))
    assert g.residuals["eigenfunction"] <= 1e-10 * g.lam
    assert g.residuals["eigenmeasure"] <= 1e-10 * g.lam


def test_auto_switches_to_power_above_dense_limit():
    assert T.gibbs(rand_pot(0, 2, 3)).method == "dense"
    assert T.gibbs(rand_pot(0, 2, 7)).method == "power"


def test_gibbs_json_roundtrip():
    g = T.gibbs(rand_pot(3))
    back = T.GibbsData.from_dict(g.to_dict())
    assert back.lam == g.lam
    np.testing.assert_array_equal(back.mu, g.mu)


def test_non_primitive_matrix_is_structural():
    with pytest.raises(StructuralError):
        T.eigentriple(np.array([[0.0, 1.0], [1.0, 0.0]]), "dense")


def test_power_nonconvergence_carries_residual():
    with pytest.raises(NumericalError) as info:
        T._power_eigen(T.build_matrix(rand_pot(4, 2, 3)).entries, maxiter=2)
    assert info.value.residual > 0


def test_unknown_method():
    with pytest.raises(ValidationError):
        T.gibbs(rand_pot(0), method="lanczos")


# --- pressure and normalization ------------------------------------------------------------


def test_pressure_of_constants():
    assert T.pressure(CylinderFunction.constant(2, 2, 0.0)) == pytest.approx(np.log(2), abs=1e-14)
    assert T.pressure(CylinderFunction.constant(3, 2, 0.4)) == pytest.approx(0.4 + np.log(3), abs=1e-14)


def test_normalized_potential_has_zero_pressure():
    A = random_normalized_potential(np.random.default_rng(0), 2, 3)
    assert abs(T.pressure(A)) <= 1e-10


def test_normalize_constant():
    np.testing.assert_allclose(T.normalize(CylinderFunction.constant(3, 2, 5.0)).coeffs, -np.log(3), atol=1e-12)


def test_normalize_fixed_point():
    A = random_normalized_potential(np.random.default_rng(1), 2, 3)
    np.testing.assert_allclose(T.normalize(A).coeffs, A.coeffs, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_normalize_preserves_measure(seed):
    B = rand_pot(seed)
    P = T.normalize(B)
    assert T.normalization_defect(P) <= 1e-12
    np.testing.assert_allclose(T.gibbs(P).mu, T.gibbs(B).mu, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 3), st.integers(1, 3), st.floats(-2, 2), st.integers(0, 2**31))
def test_coboundary_invariance(d, k, c, seed):
    rng = np.random.default_rng(seed)
    B = CylinderFunction(ShiftSpace(d, k), rng.uniform(-1, 1, d**k))
    g = CylinderFunction(ShiftSpace(d, k), rng.uniform(-1, 1, d**k))
    B2 = B + shift_compose(g) - g - c
    mu1 = T.gibbs(B).mu
    mu2 = T.marginal(T.gibbs(B2).mu, d, k)
    np.testing.assert_allclose(mu2, mu1, atol=1e-10)
    assert T.pressure(B2) == pytest.approx(T.pressure(B) - c, abs=1e-10)


# --- measures ---------------------------------------------------------------------------------


def test_integrate_constant_and_indicator():
    g = T.gibbs(bernoulli_potential(0.5, 2))
    assert T.integrate(CylinderFunction.constant(2, 1, 1.0), g) == pytest.approx(1.0, abs=1e-15)
    assert T.integrate(CylinderFunction.indicator(2, (0,)), g) == pytest.approx(0.5, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 3), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31))
def test_shift_invariance_of_integrals(d, k, j, seed):
    rng = np.random.default_rng(seed)
    A = CylinderFunction(ShiftSpace(d, k), rng.uniform(-1, 1, d**k))
    f = CylinderFunction(ShiftSpace(d, j), rng.standard_normal(d**j))
    g = T.gibbs(A)
    assert T.integrate(shift_compose(f), g) == pytest.approx(T.integrate(f, g), abs=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_markov_extension_is_consistent(seed):
    A = rand_pot(seed, 2, 3)
    mu = T.gibbs(A).mu
    deep = T.extend_measure(mu, 2, 6)
    for j in range(1, 6):
        np.testing.assert_allclose(T.marginal(T.extend_measure(mu, 2, j + 1), 2, j), T.marginal(deep, 2, j), atol=1e-14)
    # the direct deeper computation gives the same weights
    np.testing.assert_allclose(T.gibbs(A, k=6).mu, deep, atol=1e-12)


def test_extension_cap():
    with pytest.raises(ResourceError):
        T.extend_measure(np.full(4, 0.25), 2, 30)


@pytest.mark.parametrize("seed", range(4))
def test_duality(seed):
    A = rand_pot(seed, 2, 3)
    g = T.gibbs(A)
    f = np.random.default_rng(seed).standard_normal(8)
    M = T.build_matrix(A)
    assert g.nu @ M.apply(f) == pytest.approx(g.lam * (g.nu @ f), abs=1e-12)


def test_variational_principle():
    rng = np.random.default_rng(11)
    for d, k in [(2, 1), (2, 2), (3, 2), (2, 3)]:
        A = CylinderFunction(ShiftSpace(d, k), rng.uniform(-1, 1, d**k))
        P = T.pressure(A)
        for _ in range(20):
            assert T.free_energy(A, T.random_markov_measure(rng, d, k)) <= P + 1e-8
        assert T.free_energy(A, T.gibbs(A).mu) == pytest.approx(P, abs=1e-8)


def test_markov_entropy_of_uniform():
    assert T.markov_entropy(np.full(9, 1 / 9), 3) == pytest.approx(np.log(3), abs=1e-15)


# --- derivative of the pressure -------------------------------------------------------------


def test_pressure_derivative_of_constant_direction():
    A = random_normalized_potential(np.random.default_rng(2), 2, 2)
    out = T.pressure_derivative_check(A, CylinderFunction.constant(2, 2, 1.0))
    assert out["first_formula"] == pytest.approx(1.0, abs=1e-14)
    assert out["first_fd@0.01"] == pytest.approx(1.0, abs=1e-10)


def test_pressure_derivative_vanishes_on_tangent():
    rng = np.random.default_rng(3)
    A = random_normalized_potential(rng, 2, 2)
    X = tangent_project(CylinderFunction(A.space, rng.standard_normal(4)), A)
    out = T.pressure_derivative_check(A, X.value)
    assert abs(out["first_formula"]) <= 1e-14
    assert abs(out["first_fd@0.01"]) <= 1e-4


@pytest.mark.parametrize("seed", range(4))
def test_pressure_derivative_richardson(seed):
    rng = np.random.default_rng(seed)
    A = random_normalized_potential(rng, 2, 2)
    out = T.pressure_derivative_check(A, CylinderFunction(A.space, rng.standard_normal(4)))
    assert 3.5 <= out["first_ratio"] <= 4.5


def test_second_derivative_matches_metric_for_tangent_direction():
    rng = np.random.default_rng(4)
    A = random_normalized_potential(rng, 2, 2)
    X = tangent_project(CylinderFunction(A.space, rng.standard_normal(4)), A)
    out = T.pressure_derivative_check(A, X.value, 1e-2)
    assert out["second_fd@0.005"] == pytest.approx(out["second_formula"], rel=1e-4)
    assert out["asymptotic_variance"] == pytest.approx(out["second_formula"], rel=1e-10)


def test_pressure_derivative_rejects_bad_eps():
    with pytest.raises(ValidationError):
        T.pressure_derivative_check(bernoulli_potential(0.5, 1), CylinderFunction.constant(2, 1, 1.0), 0.5)
