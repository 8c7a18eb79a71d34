import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import wzlab as wz
from wzlab.meshpaths import ConfigurationError
from wzlab.spectral import jacobi_eigenvalues, theorem_rate


def test_lognorm_basic_values():
    assert wz.lognorm(np.eye(2)) == pytest.approx(1.0, abs=1e-12)
    assert wz.lognorm([[ -3.5 ]]) == pytest.approx(-3.5)
    assert wz.lognorm([[0.0, 1.0], [0.0, 0.0]]) == pytest.approx(0.5, abs=1e-12)


def test_lognorm_input_validation():
    with pytest.raises(ValueError):
        wz.lognorm([[np.nan, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        wz.lognorm(np.zeros((2, 3)))


def test_jacobi_matches_lapack_on_random_symmetric():
    rng = np.random.Generator(np.random.Philox(key=7))
    for n in (2, 3, 5, 8):
        for _ in range(5):
            a = rng.normal(size=(n, n))
            s = 0.5 * (a + a.T)
            ours = jacobi_eigenvalues(s)
            ref = np.linalg.eigvalsh(s)
            np.testing.assert_allclose(ours, ref, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, (3, 3), elements=st.floats(-10, 10)))
def test_lognorm_invariants(a):
    val = wz.lognorm(a)
    assert val >= np.max(np.diag(a)) - 1e-9  # Rayleigh quotient at basis vectors
    sym = 0.5 * (a + a.T)
    assert wz.lognorm(sym) == pytest.approx(val, abs=1e-9)


def test_certify_linear_models():
    model = wz.linear1d(-1.0)
    rep = wz.certify(model, "H_b", grid_n=101)
    assert rep.sup_value == pytest.approx(-1.0)
    assert rep.lam == pytest.approx(1.0)
    assert rep.holds
    # constant sigma: all three conditions coincide
    for cond in ("H_bsigma", "H_sigma"):
        alt = wz.certify(model, cond, grid_n=101)
        assert alt.sup_value == pytest.approx(rep.sup_value, abs=1e-12)
    # box/grid independence for linear drift
    other = wz.certify(model, "H_b", box=(-17.0, 3.0), grid_n=11)
    assert other.sup_value == pytest.approx(-1.0)


def test_certify_linear_nd_equals_lognorm_of_A():
    A = np.array([[-2.0, 1.0], [0.0, -1.0]])
    model = wz.linear_nd(A=A, Sigma=np.eye(2))
    rep = wz.certify(model, "H_b", grid_n=5)
    assert rep.sup_value == pytest.approx(wz.lognorm(A), abs=1e-10)


def test_certify_stable_nonlinear_against_dense_scan():
    model = wz.stable_nonlinear1d()
    rep = wz.certify(model, "H_b", grid_n=1001)
    dense = np.linspace(-5, 5, 100001)[:, None]
    oracle = model.grad_b(dense)[..., 0, 0].max()
    assert rep.sup_value == pytest.approx(oracle, abs=1e-6)
    assert rep.sup_value == pytest.approx(-1.0, abs=1e-8)
    assert abs(rep.arg_point[0]) < 1e-9  # attained where cos x = 1


def test_certify_bounded_sigma_conditions():
    model = wz.bounded_sigma1d()
    # grad b_sigma = -2 - cos(2x)/2 in [-2.5, -1.5]
    rep = wz.certify(model, "H_bsigma", grid_n=2001)
    assert rep.sup_value == pytest.approx(-1.5, abs=1e-4)
    # S_sigma = -1.75 - 0.75 cos(2x), sup = -1 at x = pi/2
    rep = wz.certify(model, "H_sigma", grid_n=2001)
    assert rep.sup_value == pytest.approx(-1.0, abs=1e-4)
    assert rep.holds and rep.lam == pytest.approx(1.0, abs=1e-4)
    dense = np.linspace(-5, 5, 100001)[:, None]
    oracle = np.max(-1.75 - 0.75 * np.cos(2.0 * dense[..., 0]))
    assert rep.sup_value == pytest.approx(oracle, abs=1e-4)


def test_certify_grid_guards():
    model = wz.linear1d(-1.0)
    with pytest.raises(ConfigurationError):
        wz.certify(model, "H_b", grid_n=1)
    with pytest.raises(ConfigurationError):
        wz.certify(model, "H_b", grid_n=2_000_000)
    with pytest.raises(ConfigurationError):
        wz.certify(model, "H_q", grid_n=11)
    big = wz.linear_nd(A=-np.eye(5), Sigma=np.eye(5))
    with pytest.raises(ConfigurationError):
        wz.certify(big, "H_b", grid_n=3)  # r > 4 tensor grid


def test_failed_certification_reported():
    rep = wz.certify(wz.linear1d(0.5), "H_b", grid_n=11)
    assert not rep.holds
    assert rep.lam is None
    assert rep.sup_value == pytest.approx(0.5)


def test_theorem_rate_linear():
    # lambda(delta) = (1 - delta)(lambda_b - delta ||grad b||^2) = 0.9 * 0.9 for a = -1
    val = theorem_rate(wz.linear1d(-1.0), delta=0.1, grid_n=11)
    assert val == pytest.approx(0.81)
    assert theorem_rate(wz.linear1d(1.0), grid_n=11) is None
