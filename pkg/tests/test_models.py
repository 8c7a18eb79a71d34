import pickle

import numpy as np
import pytest

import wzlab as wz
from wzlab.meshpaths import ConfigurationError
from wzlab.models import fd_grad_b, fd_grad_sigma, grad_ito_correction


def _rng():
    return np.random.Generator(np.random.Philox(key=1234))


def test_ito_correction_constant_sigma_is_identity():
    model = wz.linear_nd(A=[[-1.0, 0.5], [0.0, -2.0]], Sigma=[[1.0, 0.0], [0.3, 0.7]])
    x = _rng().uniform(-3, 3, size=(40, 2))
    np.testing.assert_allclose(wz.ito_correction(model, x), model.b(x), atol=0)


def test_ito_correction_linear_sigma():
    # sigma(x) = x in 1-d: b_sigma = b + x/2
    model = wz.make_model("gbm-like", 1, 1, lambda x: -x,
                          lambda x: x[..., None])
    x = np.linspace(-2, 2, 9)[:, None]
    np.testing.assert_allclose(wz.ito_correction(model, x), -x + 0.5 * x, rtol=1e-9)


def test_ito_correction_symbolic_case():
    # sigma = 2 + cos x, b = -2x: b_sigma = -2x - (2 + cos x) sin x / 2
    model = wz.make_model("trig", 1, 1, lambda x: -2.0 * x,
                          lambda x: (2.0 + np.cos(x))[..., None])
    x = np.linspace(-4, 4, 17)[:, None]
    expected = -2.0 * x - 0.5 * (2.0 + np.cos(x)) * np.sin(x)
    np.testing.assert_allclose(wz.ito_correction(model, x), expected, rtol=1e-9, atol=1e-9)


def test_builtin_bsigma_matches_generic_composition():
    model = wz.bounded_sigma1d()
    x = np.linspace(-5, 5, 101)[:, None]
    generic = model.b(x) + 0.5 * np.einsum(
        "...kj,...jki->...i", model.sigma(x), model.grad_sigma(x))
    np.testing.assert_allclose(model.bsigma(x), generic, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(wz.levy_tensor(model, x)[..., 0, 0, :],
                               -(2.0 + np.cos(x)) * np.sin(x), atol=1e-12)


def test_commutation_trivial_cases():
    pts = _rng().uniform(-3, 3, size=(10, 1))
    for model in (wz.linear1d(-1.0), wz.bounded_sigma1d()):
        rep = wz.check_commutation(model, pts)
        assert rep.max_violation == 0.0  # single column always commutes
    const = wz.linear_nd(A=[[-1.0, 0.0], [0.0, -1.0]], Sigma=[[1.0, 2.0], [0.0, 1.0]])
    rep = wz.check_commutation(const, _rng().uniform(-3, 3, size=(10, 2)))
    assert rep.max_violation == 0.0


def test_commutation_detects_violation():
    # sigma_1 = (x_2, 0)', sigma_2 = (0, 0)': commutes; sigma_2 = (x_1, 0)': does not
    def sigma_ok(x):
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = x[..., 1]
        return out

    def sigma_bad(x):
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = x[..., 1]
        out[..., 0, 1] = x[..., 0]
        return out

    b = lambda x: -x
    pts = _rng().uniform(-3, 3, size=(10, 2))
    ok = wz.make_model("comm-ok", 2, 2, b, sigma_ok)
    assert wz.check_commutation(ok, pts).max_violation <= 1e-9
    bad = wz.make_model("comm-bad", 2, 2, b, sigma_bad)
    rep = wz.check_commutation(bad, pts)
    # oracle by direct evaluation: grad sigma_2' sigma_1 = (x_2, 0)' while
    # grad sigma_1' sigma_2 = 0, so the worst violation is max |x_2|
    expected = np.max(np.abs(pts[:, 1]))
    assert rep.max_violation == pytest.approx(expected, rel=1e-6)
    assert not rep.passed


def test_registry_contents_and_lookup():
    names = set(wz.builtin_models())
    assert names == {"linear1d", "linear_nd", "stable_nonlinear1d", "bounded_sigma1d"}
    with pytest.raises(ConfigurationError, match="linear1d"):
        wz.get_model("glub")
    model = wz.get_model("linear1d", a=-3.0)
    x = np.linspace(-5, 5, 7)[:, None]
    assert np.all(model.grad_b(x)[..., 0, 0] == -3.0)


def test_stable_nonlinear_drift_bound():
    model = wz.stable_nonlinear1d()
    x = np.linspace(-5, 5, 100001)[:, None]
    sup = model.grad_b(x)[..., 0, 0].max()
    assert sup == pytest.approx(-1.0, abs=1e-8)  # attained where cos x = 1


def test_bounded_sigma_range():
    model = wz.bounded_sigma1d()
    x = np.linspace(-5, 5, 10001)[:, None]
    s = model.sigma(x)[..., 0, 0]
    assert s.min() >= 1.0 and s.max() <= 3.0


@pytest.mark.parametrize("name,params", [
    ("linear1d", {"a": -1.0}),
    ("linear_nd", {"A": [[-1.0, 0.4], [-0.2, -2.0]], "Sigma": [[1.0, 0.0], [0.5, 1.0]]}),
    ("stable_nonlinear1d", {}),
    ("bounded_sigma1d", {}),
])
def test_analytic_jacobians_match_finite_differences(name, params):
    model = wz.get_model(name, **params)
    x = _rng().uniform(-5, 5, size=(100, model.r))
    fd = fd_grad_b(model.b, x)
    an = model.grad_b(x)
    np.testing.assert_allclose(an, fd, rtol=1e-6, atol=1e-8)
    fds = fd_grad_sigma(model.sigma, x)
    np.testing.assert_allclose(model.grad_sigma(x), fds, rtol=1e-6, atol=1e-8)


def test_grad_ito_correction_consistent_with_fd():
    for model in (wz.bounded_sigma1d(), wz.stable_nonlinear1d()):
        x = _rng().uniform(-4, 4, size=(50, 1))
        fd = fd_grad_b(lambda y: wz.ito_correction(model, y), x)
        np.testing.assert_allclose(grad_ito_correction(model, x), fd, rtol=1e-5, atol=1e-7)


def test_fd_fallback_marks_model_non_analytic():
    model = wz.make_model("plain", 1, 1, lambda x: np.tanh(x),
                          lambda x: np.ones(x.shape[:-1] + (1, 1)))
    assert not model.analytic_derivatives
    x = np.array([[0.3], [-1.2]])
    np.testing.assert_allclose(model.grad_b(x)[..., 0, 0], 1.0 / np.cosh(x[..., 0]) ** 2,
                               rtol=1e-7)


def test_builtin_models_are_picklable():
    for name, factory in wz.builtin_models().items():
        model = wz.get_model("linear_nd", A=[[-1.0]], Sigma=[[1.0]]) if name == "linear_nd" else wz.get_model(name, **({"a": -1.0} if name == "linear1d" else {}))
        clone = pickle.loads(pickle.dumps(model))
        x = np.zeros((3, model.r)) + 0.5
        np.testing.assert_array_equal(clone.b(x), model.b(x))
