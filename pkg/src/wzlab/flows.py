"""The three flows and their local machinery.

* ``wz_flow``         random ODE driven by a smooth driver (classical RK4;
                      the driver slope is constant within each fine cell, so
                      the forced ODE is smooth piece by piece)
* ``ito_flow_fine``   fine-mesh Milstein scheme on the Ito form of the
                      Stratonovich equation (strong order 1; valid without
                      Levy areas only under the commutation identity, which
                      is checked up front)
* ``det_flow``        the unforced drift flow
plus the Milstein one-step predictor, a finite-difference tangent-decay
probe, and the Lamperti change of variables to unit diffusion.

Batch kernels advance a whole chunk of paths at once on (P, ...) arrays;
the public single-path operations wrap them.
"""

from dataclasses import dataclass
from functools import partial

import numpy as np

from .meshpaths import ConfigurationError
from .models import (SdeModel, _const_sigma, _zero_grad_sigma, _zero_levy,
                     check_commutation, ito_correction, levy_tensor)

__all__ = [
    "FlowBlowupError",
    "CoupledSample",
    "MilsteinDecomposition",
    "wz_flow",
    "ito_flow_fine",
    "det_flow",
    "milstein_terms",
    "tangent_decay",
    "adaptive_simpson",
    "LampertiMap",
    "lamperti_transform",
    "simulate_coupled",
]


class FlowBlowupError(RuntimeError):
    """A flow left the finite floats; carries the first offending time."""

    def __init__(self, time, what="flow"):
        self.time = time
        super().__init__(f"{what} became non-finite near t = {time:.6g}")


# ---------------------------------------------------------------------------
# batch kernels
# ---------------------------------------------------------------------------

def _wz_advance_block(model, x, slopes, delta, substeps=1, out=None):
    """Advance x' = b(x) + sigma(x) * slope over fine cells by RK4.

    x: (P, r) states, slopes: (P, J, rbar) one slope per fine cell.  When
    ``out`` (P, J+1, r) is given the state after each cell is recorded
    (out[:, 0] is left to the caller).  Returns the final state.
    """
    P, J, rbar = slopes.shape
    h = delta / substeps
    b = model.b
    sig_t = None if model.sigma_const is None else model.sigma_const.T
    sigma = model.sigma
    for j in range(J):
        eta = slopes[:, j]
        if sig_t is not None:
            c = eta @ sig_t

            def f(y, _c=c):
                return b(y) + _c
        else:

            def f(y, _eta=eta):
                return b(y) + (sigma(y) @ _eta[..., None])[..., 0]

        for _ in range(substeps):
            k1 = f(x)
            k2 = f(x + (0.5 * h) * k1)
            k3 = f(x + (0.5 * h) * k2)
            k4 = f(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if out is not None:
            out[:, j + 1] = x
    return x


def _milstein_block(model, x, incr, delta, out=None):
    """Advance the Ito-form Milstein scheme over fine increments.

    x: (P, r); incr: (P, J, rbar) Brownian increments.  Records post-step
    states into ``out`` (P, J+1, r) when given; returns the final state.
    """
    P, J, rbar = incr.shape
    bfun = model.bsigma if model.bsigma is not None else partial(ito_correction, model)
    if model.sigma_const is not None:
        g = incr @ model.sigma_const.T
        for j in range(J):
            x = x + delta * bfun(x) + g[:, j]
            if out is not None:
                out[:, j + 1] = x
        return x
    levy = model.levy if model.levy is not None else partial(levy_tensor, model)
    sigma = model.sigma
    eye = np.eye(rbar)
    for j in range(J):
        w = incr[:, j]
        sig = sigma(x)
        G = levy(x)
        if rbar == 1:
            diff = sig[..., 0] * w
            lev = 0.5 * G[:, 0, 0, :] * (w * w - delta)
        else:
            diff = (sig @ w[..., None])[..., 0]
            ww = w[:, :, None] * w[:, None, :] - delta * eye
            lev = 0.5 * np.einsum("pklr,pkl->pr", G, ww)
        x = x + delta * bfun(x) + diff + lev
        if out is not None:
            out[:, j + 1] = x
    return x


def _raise_if_blown_up(nodes, delta, what):
    bad = ~np.all(np.isfinite(nodes), axis=-1)
    if bad.any():
        idx = int(np.argmax(np.any(bad.reshape(-1, bad.shape[-1]), axis=0)))
        raise FlowBlowupError(idx * delta, what)


# ---------------------------------------------------------------------------
# public flows
# ---------------------------------------------------------------------------

def _commutation_panel(model):
    lo, hi = model.box
    axis = np.array([lo, 0.5 * lo, 0.0, 0.5 * hi, hi])
    if model.r == 1:
        return axis[:, None]
    grids = np.meshgrid(*([axis[[0, 2, 4]]] * model.r), indexing="ij")
    return np.stack(grids, axis=-1).reshape(-1, model.r)


def wz_flow(model, driver, x0, substeps=1, record_fine=False):
    """Wong-Zakai flow along one driver path, reported at the coarse nodes.

    Integrates x' = b(x) + sigma(x) * slope with ``substeps`` RK4 steps per
    fine cell.  With record_fine=True also returns the fine-node states.
    """
    mesh = driver.mesh
    if driver.dim != model.rbar:
        raise ConfigurationError(f"driver dimension {driver.dim} != model rbar {model.rbar}")
    x = np.asarray(x0, dtype=float).reshape(1, model.r)
    fine = np.empty((1, mesh.n_fine + 1, model.r))
    fine[:, 0] = x
    _wz_advance_block(model, x, driver.slopes[None], mesh.delta, substeps, out=fine)
    _raise_if_blown_up(fine, mesh.delta, "Wong-Zakai flow")
    coarse = fine[0, :: mesh.refine].copy()
    if record_fine:
        return coarse, fine[0]
    return coarse


def ito_flow_fine(model, bp, x0, check=True, commutation_tol=1e-8):
    """Fine-mesh Milstein solution of the Ito form, at all fine nodes.

    The scheme drops Levy-area terms, which is exact only under the
    commutation identity; models failing it are rejected rather than
    silently downgraded to Euler.
    """
    if bp.dim != model.rbar:
        raise ConfigurationError(f"path dimension {bp.dim} != model rbar {model.rbar}")
    if check:
        rep = check_commutation(model, _commutation_panel(model), commutation_tol)
        if not rep.passed:
            raise ConfigurationError(
                f"commutation violated (max {rep.max_violation:.3g} at "
                f"x = {np.array2string(rep.arg_point, precision=3)}); "
                "Milstein without Levy areas does not apply"
            )
    mesh = bp.mesh
    out = np.empty((1, mesh.n_fine + 1, model.r))
    x = np.asarray(x0, dtype=float).reshape(1, model.r)
    out[:, 0] = x
    _milstein_block(model, x, bp.increments()[None], mesh.delta, out=out)
    _raise_if_blown_up(out, mesh.delta, "Ito reference flow")
    return out[0]


def det_flow(model, x0, T, h):
    """Unforced drift flow x' = b(x) by RK4 with steps of (about) h.

    x0 may be a single state (r,) or a batch (..., r); returns (times, states).
    """
    if h <= 0:
        raise ConfigurationError(f"det_flow needs h > 0, got {h}")
    n = max(1, int(round(T / h)))
    h = T / n
    x = np.asarray(x0, dtype=float)
    squeeze = x.ndim == 1
    x = np.atleast_2d(x)
    out = np.empty((n + 1,) + x.shape)
    out[0] = x
    b = model.b
    for i in range(n):
        k1 = b(x)
        k2 = b(x + (0.5 * h) * k1)
        k3 = b(x + (0.5 * h) * k2)
        k4 = b(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        out[i + 1] = x
    if not np.all(np.isfinite(out)):
        raise FlowBlowupError(T, "deterministic flow")
    times = np.arange(n + 1) * h
    return times, (out[:, 0] if squeeze else out)


# ---------------------------------------------------------------------------
# Milstein one-step predictor
# ---------------------------------------------------------------------------

@dataclass
class MilsteinDecomposition:
    """One coarse step split into drift, Gaussian and quadratic terms.

    By definition residual = observed - (drift + gauss + levy), so the four
    pieces always re-sum to the observed increment exactly.
    """

    drift_term: np.ndarray
    gauss_term: np.ndarray
    levy_term: np.ndarray
    residual: np.ndarray | None = None

    @property
    def predicted(self):
        return self.drift_term + self.gauss_term + self.levy_term


def milstein_terms(model, x, eps, chi):
    """Predicted drift/Gauss/levy terms at state x for one coarse step.

    x: (..., r), chi: (..., rbar) standardized increments.  The residual is
    left unset; use ``d.residual = observed - d.predicted`` against data.
    """
    x = np.asarray(x, dtype=float)
    chi = np.asarray(chi, dtype=float)
    drift = ito_correction(model, x) * eps
    sig = model.sigma(x)
    gauss = (sig @ chi[..., None])[..., 0] * np.sqrt(eps)
    G = levy_tensor(model, x)
    if model.rbar == 1:
        lev = 0.5 * eps * G[..., 0, 0, :] * (chi * chi - 1.0)
    else:
        ww = chi[..., :, None] * chi[..., None, :] - np.eye(model.rbar)
        lev = 0.5 * eps * np.einsum("...klr,...kl->...r", G, ww)
    return MilsteinDecomposition(drift, gauss, lev)


# ---------------------------------------------------------------------------
# tangent decay probe
# ---------------------------------------------------------------------------

def tangent_decay(model, x0, delta=1e-5, times=(1.0, 2.0, 4.0), h=1e-3):
    """Finite-difference ||grad Z_t|| estimates along each axis.

    Integrates the base point and the r bumped starts jointly, and reports
    ||Z_t(x0 + delta e_i) - Z_t(x0)|| / delta at each requested time.
    """
    if delta <= 0:
        raise ConfigurationError(f"tangent_decay needs delta > 0, got {delta}")
    x0 = np.asarray(x0, dtype=float).reshape(model.r)
    times = np.sort(np.asarray(times, dtype=float))
    x = np.vstack([x0[None], x0[None] + delta * np.eye(model.r)])
    out = np.empty((len(times), model.r))
    t_prev = 0.0
    for ti, t in enumerate(times):
        seg = t - t_prev
        if seg > 0:
            _, states = det_flow(model, x, seg, h)
            x = states[-1]
        out[ti] = np.linalg.norm(x[1:] - x[0], axis=-1) / delta
        t_prev = t
    return times, out


# ---------------------------------------------------------------------------
# Lamperti transform
# ---------------------------------------------------------------------------

def adaptive_simpson(f, a, b, tol=1e-10, max_depth=30):
    """Adaptive Simpson quadrature of a scalar function on [a, b]."""
    if a == b:
        return 0.0
    if a > b:
        return -adaptive_simpson(f, b, a, tol, max_depth)

    def simp(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, tol, depth):
        mid = 0.5 * (lo + hi)
        fl = f(0.5 * (lo + mid))
        fr = f(0.5 * (mid + hi))
        left = simp(lo, mid, flo, fl, fmid)
        right = simp(mid, hi, fmid, fr, fhi)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (recurse(lo, mid, flo, fl, fmid, left, 0.5 * tol, depth - 1)
                + recurse(mid, hi, fmid, fr, fhi, right, 0.5 * tol, depth - 1))

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    return recurse(a, b, fa, fm, fb, simp(a, b, fa, fm, fb), tol, max_depth)


def _panel_simpson(f, a, x, panels=8):
    """Composite Simpson from per-point anchors a to x, vectorized."""
    h = (x - a) / panels
    pts = a[..., None] + h[..., None] * np.arange(panels + 1)
    vals = f(pts)
    w = np.full(panels + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return (h / 3.0) * (vals @ w)


class LampertiMap:
    """theta(x) = int_0^x dy / sigma(y) with a monotone Newton inverse.

    Node values are accumulated by adaptive Simpson; off-node offsets use a
    short fixed composite rule on the (tiny) residual interval, keeping every
    value within the stated quadrature tolerance.
    """

    def __init__(self, sigma_fn, domain, n_nodes=4001, tol=1e-10):
        lo, hi = domain
        self.sigma_fn = sigma_fn
        self.lo, self.hi = float(lo), float(hi)
        self.nodes = np.linspace(lo, hi, n_nodes)
        f = lambda y: 1.0 / sigma_fn(y)
        self._f = f
        seg_tol = tol / (n_nodes - 1)
        segs = [adaptive_simpson(f, self.nodes[i], self.nodes[i + 1], seg_tol)
                for i in range(n_nodes - 1)]
        cum = np.zeros(n_nodes)
        np.cumsum(segs, out=cum[1:])
        i0 = int(np.clip(np.searchsorted(self.nodes, 0.0), 0, n_nodes - 1))
        offset = cum[i0] + adaptive_simpson(f, self.nodes[i0], 0.0, tol)
        self.table = cum - offset

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lo) or np.any(x > self.hi):
            raise ValueError(f"theta evaluated outside its domain [{self.lo}, {self.hi}]")
        k = np.clip(np.searchsorted(self.nodes, x, side="right") - 1, 0, len(self.nodes) - 2)
        return self.table[k] + _panel_simpson(self._f, self.nodes[k], x)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y < self.table[0]) or np.any(y > self.table[-1]):
            raise ValueError("theta^{-1} evaluated outside the mapped domain")
        x = np.interp(y, self.table, self.nodes)
        for _ in range(4):
            x = x - (self(x) - y) * self.sigma_fn(x)
            x = np.clip(x, self.lo, self.hi)
        return x


def _lamperti_b(y, base, inv):
    x = inv(y[..., 0])[..., None]
    return base.b(x) / base.sigma(x)[..., :, 0]


def _lamperti_grad_b(y, base, inv):
    x = inv(y[..., 0])[..., None]
    bb = base.b(x)[..., 0]
    ss = base.sigma(x)[..., 0, 0]
    db = base.grad_b(x)[..., 0, 0]
    ds = base.grad_sigma(x)[..., 0, 0, 0]
    return (db - bb * ds / ss)[..., None, None]


def lamperti_transform(model, n_nodes=4001, tol=1e-10, pad=None):
    """Map a scalar model with 0 < sigma_- <= sigma <= sigma_+ to unit diffusion.

    Returns (transformed model, theta, theta_inverse) with transformed drift
    b(theta^{-1}(y)) / sigma(theta^{-1}(y)).  theta is anchored at 0.
    """
    if model.r != 1 or model.rbar != 1:
        raise ConfigurationError("lamperti_transform applies to scalar models only")
    lo, hi = model.box
    if pad is None:
        pad = hi - lo
    dom = (min(lo, 0.0) - pad, max(hi, 0.0) + pad)
    sigma_fn = lambda xs: model.sigma(np.asarray(xs, dtype=float)[..., None])[..., 0, 0]
    scan = np.linspace(dom[0], dom[1], 8 * n_nodes)
    smin = float(np.min(sigma_fn(scan)))
    if smin <= 0.0:
        raise ConfigurationError(f"sigma is not positive on {dom} (min {smin:.3g})")
    mp = LampertiMap(sigma_fn, dom, n_nodes=n_nodes, tol=tol)
    b_theta = partial(_lamperti_b, base=model, inv=mp.inverse)
    gb_theta = partial(_lamperti_grad_b, base=model, inv=mp.inverse)
    tmodel = SdeModel(
        name=model.name + "+lamperti", r=1, rbar=1, b=b_theta,
        sigma=partial(_const_sigma, value=np.ones((1, 1))),
        grad_b=gb_theta, grad_sigma=partial(_zero_grad_sigma, rbar=1, r=1),
        analytic_derivatives=True, box=(float(mp(lo)), float(mp(hi))),
        sigma_const=np.ones((1, 1)), bsigma=b_theta, grad_bsigma=gb_theta,
        levy=partial(_zero_levy, rbar=1, r=1), params=dict(model.params),
    )
    return tmodel, mp, mp.inverse


# ---------------------------------------------------------------------------
# coupled sampling convenience
# ---------------------------------------------------------------------------

@dataclass
class CoupledSample:
    """One realization of (X, X-bar, driver) sharing a single Brownian path."""

    x0: np.ndarray
    coarse_x: np.ndarray       # Ito flow at coarse nodes (N+1, r)
    coarse_xbar: np.ndarray    # WZ flow at coarse nodes (N+1, r)
    driver: object
    brownian: object
    fine_x: np.ndarray | None = None
    fine_xbar: np.ndarray | None = None


def simulate_coupled(model, mesh, x0, seed=0, path_id=0, driver_kind="polygonal",
                     substeps=1, keep_fine=False, check=True):
    """Sample one Brownian path and run both flows from it."""
    from .meshpaths import ou_driver, polygonal_driver, sample_brownian

    bp = sample_brownian(mesh, model.rbar, seed, path_id)
    if driver_kind == "polygonal":
        driver = polygonal_driver(bp, mesh)
    elif driver_kind == "ou":
        driver = ou_driver(bp, mesh, mesh.eps)
    else:
        raise ConfigurationError(f"unknown driver kind {driver_kind!r}")
    fine_x = ito_flow_fine(model, bp, x0, check=check)
    coarse_x = fine_x[:: mesh.refine]
    coarse_xbar, fine_xbar = wz_flow(model, driver, x0, substeps=substeps, record_fine=True)
    return CoupledSample(
        x0=np.asarray(x0, dtype=float), coarse_x=coarse_x, coarse_xbar=coarse_xbar,
        driver=driver, brownian=bp,
        fine_x=fine_x if keep_fine else None,
        fine_xbar=fine_xbar if keep_fine else None,
    )
