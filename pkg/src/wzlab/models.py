"""SDE model definitions and the builtin registry.

A model bundles drift b, diffusion columns sigma_j and their derivatives as
vectorized callables: every callable accepts states of shape (..., r) and
returns arrays with the same leading axes.  Index conventions follow the
gradient-as-matrix layout grad_b[..., l, i] = d_l b^i and
grad_sigma[..., j, l, i] = d_l sigma_j^i.
"""

from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from .meshpaths import ConfigurationError

__all__ = [
    "SdeModel",
    "CommutationReport",
    "make_model",
    "ito_correction",
    "grad_ito_correction",
    "levy_tensor",
    "check_commutation",
    "builtin_models",
    "get_model",
    "linear1d",
    "linear_nd",
    "stable_nonlinear1d",
    "bounded_sigma1d",
]

# central-difference step, scaled by 1 + |x| at evaluation points
FD_STEP = float(np.cbrt(np.finfo(float).eps))


@dataclass(frozen=True, eq=False)
class SdeModel:
    """Drift/diffusion functions with derivatives, vectorized over states.

    ``sigma_const`` is set (to the constant (r, rbar) matrix) when the
    diffusion is homogeneous; flows and experiments use it as a fast path.
    ``bsigma``/``grad_bsigma``/``levy`` are optional fused closed forms of
    the Ito-corrected drift, its Jacobian and the tensor
    nabla_{sigma_l} sigma_k; generic compositions are used when absent.
    """

    name: str
    r: int
    rbar: int
    b: Callable
    sigma: Callable
    grad_b: Callable
    grad_sigma: Callable
    hess_b: Callable | None = None
    hess_sigma: Callable | None = None
    analytic_derivatives: bool = True
    box: tuple = (-5.0, 5.0)
    sigma_const: np.ndarray | None = None
    bsigma: Callable | None = None
    grad_bsigma: Callable | None = None
    levy: Callable | None = None
    params: dict = field(default_factory=dict)


@dataclass
class CommutationReport:
    """Worst violation of the diffusion-column commutation identity."""

    max_violation: float
    arg_point: np.ndarray
    arg_pair: tuple
    tol: float

    @property
    def passed(self):
        return self.max_violation <= self.tol


def fd_grad_b(b, x, step=FD_STEP):
    """Central finite-difference Jacobian of a vector field, [l, i] = d_l b^i."""
    x = np.asarray(x, dtype=float)
    r = x.shape[-1]
    out = np.empty(x.shape[:-1] + (r, r))
    for l in range(r):
        h = step * (1.0 + np.abs(x[..., l]))
        xp = x.copy()
        xm = x.copy()
        xp[..., l] += h
        xm[..., l] -= h
        out[..., l, :] = (b(xp) - b(xm)) / (2.0 * h)[..., None]
    return out


def fd_grad_sigma(sigma, x, step=FD_STEP):
    """Finite-difference diffusion Jacobians, [j, l, i] = d_l sigma_j^i."""
    x = np.asarray(x, dtype=float)
    r = x.shape[-1]
    s0 = np.asarray(sigma(x))
    rbar = s0.shape[-1]
    out = np.empty(x.shape[:-1] + (rbar, r, r))
    for l in range(r):
        h = step * (1.0 + np.abs(x[..., l]))
        xp = x.copy()
        xm = x.copy()
        xp[..., l] += h
        xm[..., l] -= h
        d = (sigma(xp) - sigma(xm)) / (2.0 * h)[..., None, None]  # (..., i, j)
        out[..., :, l, :] = np.swapaxes(d, -1, -2)
    return out


def make_model(name, r, rbar, b, sigma, grad_b=None, grad_sigma=None,
               hess_b=None, hess_sigma=None, box=(-5.0, 5.0),
               sigma_const=None, bsigma=None, grad_bsigma=None, levy=None,
               params=None):
    """Assemble an SdeModel, filling missing Jacobians by central differences."""
    analytic = grad_b is not None and grad_sigma is not None
    if grad_b is None:
        grad_b = partial(fd_grad_b, b)
    if grad_sigma is None:
        grad_sigma = partial(fd_grad_sigma, sigma)
    return SdeModel(
        name=name, r=r, rbar=rbar, b=b, sigma=sigma, grad_b=grad_b,
        grad_sigma=grad_sigma, hess_b=hess_b, hess_sigma=hess_sigma,
        analytic_derivatives=analytic, box=tuple(box), sigma_const=sigma_const,
        bsigma=bsigma, grad_bsigma=grad_bsigma, levy=levy,
        params=dict(params or {}),
    )


def ito_correction(model, x):
    """Ito-corrected drift b_sigma = b + (1/2) sum_j (grad sigma_j)' sigma_j."""
    x = np.asarray(x, dtype=float)
    if model.bsigma is not None:
        return model.bsigma(x)
    s = model.sigma(x)
    gs = model.grad_sigma(x)
    return model.b(x) + 0.5 * np.einsum("...kj,...jki->...i", s, gs)


def grad_ito_correction(model, x):
    """Jacobian of b_sigma; analytic when second derivatives are available."""
    x = np.asarray(x, dtype=float)
    if model.grad_bsigma is not None:
        return model.grad_bsigma(x)
    if model.hess_sigma is not None:
        s = model.sigma(x)
        gs = model.grad_sigma(x)
        hs = model.hess_sigma(x)
        quad = np.einsum("...jlk,...jki->...li", gs, gs)
        curv = np.einsum("...kj,...jlki->...li", s, hs)
        return model.grad_b(x) + 0.5 * (quad + curv)
    return fd_grad_b(partial(ito_correction, model), x)


def levy_tensor(model, x):
    """Tensor G[..., k, l, i] = (nabla_{sigma_l} sigma_k)^i = sum_m d_m sigma_k^i sigma_l^m."""
    x = np.asarray(x, dtype=float)
    if model.levy is not None:
        return model.levy(x)
    s = model.sigma(x)
    gs = model.grad_sigma(x)
    return np.einsum("...kmi,...ml->...kli", gs, s)


def check_commutation(model, points, tol=1e-8):
    """Max over points and column pairs of ||grad sigma_k' sigma_l - grad sigma_l' sigma_k||."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ConfigurationError("check_commutation needs a nonempty point list")
    G = levy_tensor(model, pts)  # (n, rbar, rbar, i); G[k, l] = nabla_{sigma_l} sigma_k
    diff = np.linalg.norm(G - np.swapaxes(G, -3, -2), axis=-1)  # (n, rbar, rbar)
    flat = int(np.argmax(diff))
    n_pt, k, l = np.unravel_index(flat, diff.shape)
    return CommutationReport(float(diff[n_pt, k, l]), pts[n_pt], (int(k), int(l)), tol)


# ---------------------------------------------------------------------------
# builtin models (module-level functions keep the registry picklable)
# ---------------------------------------------------------------------------

def _const_sigma(x, value):
    out = np.empty(x.shape[:-1] + value.shape)
    out[...] = value
    return out


def _zero_grad_sigma(x, rbar, r):
    return np.zeros(x.shape[:-1] + (rbar, r, r))


def _zero_hess_sigma(x, rbar, r):
    return np.zeros(x.shape[:-1] + (rbar, r, r, r))


def _zero_levy(x, rbar, r):
    return np.zeros(x.shape[:-1] + (rbar, rbar, r))


def _linear_b(x, a):
    return a * x


def _linear_grad_b(x, a):
    return np.full(x.shape[:-1] + (1, 1), a)


def _zero_hess_b(x, r):
    return np.zeros(x.shape[:-1] + (r, r, r))


def _linnd_b(x, A):
    return x @ A.T


def _linnd_grad_b(x, A):
    out = np.empty(x.shape[:-1] + A.shape)
    out[...] = A.T
    return out


def _stable_b(x):
    return np.sin(x) - 2.0 * x


def _stable_grad_b(x):
    return (np.cos(x) - 2.0)[..., None]


def _stable_hess_b(x):
    return (-np.sin(x))[..., None, None]


def _bsig_sigma(x):
    return (2.0 + np.cos(x))[..., None]


def _bsig_grad_sigma(x):
    return (-np.sin(x))[..., None, None]


def _bsig_hess_sigma(x):
    return (-np.cos(x))[..., None, None, None]


def _bsig_bsigma(x):
    s = np.sin(x)
    return s - 2.0 * x - 0.5 * (2.0 + np.cos(x)) * s


def _bsig_grad_bsigma(x):
    return (-2.0 - 0.5 * np.cos(2.0 * x))[..., None]


def _bsig_levy(x):
    return (-(2.0 + np.cos(x)) * np.sin(x))[..., None, None]


def linear1d(a):
    """b(x) = a x with unit diffusion."""
    a = float(a)
    b = partial(_linear_b, a=a)
    gb = partial(_linear_grad_b, a=a)
    return SdeModel(
        name="linear1d", r=1, rbar=1, b=b, sigma=partial(_const_sigma, value=np.ones((1, 1))),
        grad_b=gb, grad_sigma=partial(_zero_grad_sigma, rbar=1, r=1),
        hess_b=partial(_zero_hess_b, r=1), hess_sigma=partial(_zero_hess_sigma, rbar=1, r=1),
        sigma_const=np.ones((1, 1)), bsigma=b, grad_bsigma=gb,
        levy=partial(_zero_levy, rbar=1, r=1), params={"a": a},
    )


def linear_nd(A, Sigma):
    """b(x) = A x with constant diffusion matrix Sigma."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    r = A.shape[0]
    if A.shape != (r, r) or Sigma.shape[0] != r:
        raise ConfigurationError(f"linear_nd needs A (r, r) and Sigma (r, rbar); got {A.shape}, {Sigma.shape}")
    rbar = Sigma.shape[1]
    b = partial(_linnd_b, A=A)
    gb = partial(_linnd_grad_b, A=A)
    return SdeModel(
        name="linear_nd", r=r, rbar=rbar, b=b, sigma=partial(_const_sigma, value=Sigma),
        grad_b=gb, grad_sigma=partial(_zero_grad_sigma, rbar=rbar, r=r),
        hess_b=partial(_zero_hess_b, r=r), hess_sigma=partial(_zero_hess_sigma, rbar=rbar, r=r),
        sigma_const=Sigma, bsigma=b, grad_bsigma=gb,
        levy=partial(_zero_levy, rbar=rbar, r=r), params={"A": A, "Sigma": Sigma},
    )


def stable_nonlinear1d():
    """b(x) = -2x + sin x, sigma = 1; grad b = -2 + cos x <= -1 everywhere."""
    return SdeModel(
        name="stable_nonlinear1d", r=1, rbar=1, b=_stable_b,
        sigma=partial(_const_sigma, value=np.ones((1, 1))),
        grad_b=_stable_grad_b, grad_sigma=partial(_zero_grad_sigma, rbar=1, r=1),
        hess_b=_stable_hess_b, hess_sigma=partial(_zero_hess_sigma, rbar=1, r=1),
        sigma_const=np.ones((1, 1)), bsigma=_stable_b, grad_bsigma=_stable_grad_b,
        levy=partial(_zero_levy, rbar=1, r=1),
    )


def bounded_sigma1d():
    """b(x) = -2x + sin x, sigma(x) = 2 + cos x in [1, 3]; Lamperti test model."""
    return SdeModel(
        name="bounded_sigma1d", r=1, rbar=1, b=_stable_b, sigma=_bsig_sigma,
        grad_b=_stable_grad_b, grad_sigma=_bsig_grad_sigma,
        hess_b=_stable_hess_b, hess_sigma=_bsig_hess_sigma,
        bsigma=_bsig_bsigma, grad_bsigma=_bsig_grad_bsigma, levy=_bsig_levy,
    )


_REGISTRY = {
    "linear1d": linear1d,
    "linear_nd": linear_nd,
    "stable_nonlinear1d": stable_nonlinear1d,
    "bounded_sigma1d": bounded_sigma1d,
}


def builtin_models():
    """Name -> factory map of the builtin models."""
    return dict(_REGISTRY)


def get_model(name, **params):
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown model {name!r}; registry has {sorted(_REGISTRY)}"
        ) from None
    return factory(**params)
