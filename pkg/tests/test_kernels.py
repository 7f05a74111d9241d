import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsgeo import _kernels_py as py
from gibbsgeo import kernels

try:
    from gibbsgeo import _kernels as cy
except ImportError:  # extension not built
    cy = None

needs_compiled = pytest.mark.skipif(cy is None, reason="compiled extension not built")
IMPLS = [pytest.param(py, id="python"), pytest.param(cy, id="compiled", marks=needs_compiled)]


def random_B(seed, d, k):
    return np.random.default_rng(seed).uniform(-1, 1, d**k)


def dense_matrix(B, d, k):
    # (L f)(w) = sum_a exp(B(a w)) f(a w[:-1]) on depth-k words, lexicographic index
    n = d**k
    M = np.zeros((n, n))
    for w in range(n):
        for a in range(d):
            aw = a * d ** (k - 1) + w // d
            M[w, aw] += np.exp(B[aw])
    return M


@pytest.mark.parametrize("impl", IMPLS)
@pytest.mark.parametrize("d,k", [(2, 1), (2, 2), (2, 4), (3, 2), (3, 3)])
def test_normalize_against_dense_eigensolver(impl, d, k):
    B = random_B(d * 7 + k, d, k)
    P, log_lam = impl.normalize(B, d, k)
    lam = np.max(scipy.linalg.eigvals(dense_matrix(B, d, k)).real)
    assert log_lam == pytest.approx(np.log(lam), abs=1e-12)
    # normalized: sum over preimages of exp(P) is one
    assert np.max(np.abs(dense_matrix(P, d, k).sum(axis=1) - 1)) <= 1e-12


@pytest.mark.parametrize("impl", IMPLS)
@pytest.mark.parametrize("d,k", [(2, 1), (2, 3), (3, 2)])
def test_stationary_is_left_fixed_point(impl, d, k):
    P = py.normalize(random_B(k, d, k), d, k)[0]
    mu = impl.stationary(P, d, k)
    assert mu.sum() == pytest.approx(1.0, abs=1e-14)
    # shift invariance of the cylinder weights: marginals on the first and last k-1 symbols agree
    if k > 1:
        np.testing.assert_allclose(mu.reshape(d, -1).sum(0), mu.reshape(-1, d).sum(1), atol=1e-14)


@needs_compiled
@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.integers(1, 4), st.integers(0, 2**31))
def test_compiled_matches_python(d, k, seed):
    B = random_B(seed, d, k)
    P1, l1 = py.normalize(B, d, k)
    P2, l2 = cy.normalize(B, d, k)
    np.testing.assert_allclose(P2, P1, atol=1e-13)
    assert l2 == pytest.approx(l1, abs=1e-13)
    np.testing.assert_allclose(cy.stationary(P1, d, k), py.stationary(P1, d, k), atol=1e-14)


@needs_compiled
def test_compiled_metric_and_jet_match_python():
    d, k = 2, 3
    rng = np.random.default_rng(3)
    A0 = py.normalize(rng.uniform(-1, 1, 8), d, k)[0]
    E = rng.standard_normal((2, 8))
    c = np.array([0.02, -0.01])
    for a, b in zip(py.metric(A0, E, c, d, k, 1e-4), cy.metric(A0, E, c, d, k, 1e-4)):
        np.testing.assert_allclose(b, a, atol=1e-10)
    M1, dM1 = py.metric_jet(A0, E, c, d, k, 1e-4, 2e-3)
    M2, dM2 = cy.metric_jet(A0, E, c, d, k, 1e-4, 2e-3)
    np.testing.assert_allclose(M2, M1, atol=1e-10)
    np.testing.assert_allclose(dM2, dM1, atol=1e-7)


def test_backend_flag_is_consistent():
    assert kernels.BACKEND in ("compiled", "python")
    if cy is not None and os.environ.get("GIBBSGEO_PURE_PYTHON", "") in ("", "0"):
        assert kernels.BACKEND == "compiled"


def test_pure_python_switch():
    env = {**os.environ, "GIBBSGEO_PURE_PYTHON": "1"}
    code = "from gibbsgeo import kernels, transfer, geometry; import numpy as np; " \
           "A = geometry.random_normalized_potential(np.random.default_rng(0), 2, 3); " \
           "print(kernels.BACKEND, repr(float(transfer.gibbs(A).mu[0])))"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, mu0 = out.stdout.split()
    assert backend == "python"
    from gibbsgeo import geometry, transfer

    A = geometry.random_normalized_potential(np.random.default_rng(0), 2, 3)
    assert float(mu0) == pytest.approx(float(transfer.gibbs(A).mu[0]), abs=1e-14)
