"""Matrix logarithmic norm and grid certification of the spectral conditions.

The logarithmic norm rho(A) is the largest eigenvalue of the symmetric part
(A + A')/2, computed here by cyclic Jacobi iteration (deterministic, and the
matrices in this artifact never exceed r = 8).  ``certify`` scans a dense
tensor grid on a stated box; a negative grid supremum is the testable
surrogate for the paper-style "uniformly negative on R^r" conditions, and the
report carries the box/grid provenance.
"""

from dataclasses import dataclass

import numpy as np

from .meshpaths import ConfigurationError
from .models import grad_ito_correction

__all__ = [
    "CertificationError",
    "CertReport",
    "lognorm",
    "jacobi_eigenvalues",
    "certify",
    "theorem_rate",
    "CONDITIONS",
]

CONDITIONS = ("H_b", "H_bsigma", "H_sigma")

MAX_GRID_POINTS = 1_000_000


class CertificationError(RuntimeError):
    """A spectral condition required by an experiment failed on its grid."""

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"condition {report.condition} fails: sup = {report.sup_value:.6g} "
            f"at x = {np.array2string(report.arg_point, precision=4)}"
        )


@dataclass
class CertReport:
    condition: str
    sup_value: float
    lam: float | None  # -sup_value when the condition holds on the grid
    arg_point: np.ndarray
    grid_n: int
    box: tuple

    @property
    def holds(self):
        return self.sup_value < 0.0


def jacobi_eigenvalues(S, tol=1e-12, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps.

    Converges quadratically; ``tol`` bounds the final off-diagonal Frobenius
    norm, hence the absolute eigenvalue error.
    """
    a = np.array(S, dtype=float, copy=True)
    n = a.shape[0]
    if n == 1:
        return a[0].copy()
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < tol / (4.0 * n * n):
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
    else:
        raise RuntimeError("Jacobi iteration failed to converge")
    return np.sort(np.diag(a))


def lognorm(A):
    """Logarithmic norm rho(A) = lambda_max((A + A')/2)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.all(np.isfinite(A)):
        raise ValueError("lognorm requires finite entries")
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"lognorm requires a square matrix, got {A.shape}")
    sym = 0.5 * (A + A.T)
    return float(jacobi_eigenvalues(sym)[-1])


def _grid_points(box, grid_n, r):
    lo, hi = box
    if grid_n < 2:
        raise ConfigurationError(f"grid_n must be >= 2, got {grid_n}")
    if r > 4:
        raise ConfigurationError(f"full tensor grids are limited to r <= 4, got r = {r}")
    if grid_n**r > MAX_GRID_POINTS:
        raise ConfigurationError(f"grid too large: {grid_n}^{r} > {MAX_GRID_POINTS}")
    axis = np.linspace(lo, hi, grid_n)
    if r == 1:
        return axis[:, None]
    mesh = np.meshgrid(*([axis] * r), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, r)


def _condition_matrices(model, condition, pts):
    if condition == "H_b":
        J = model.grad_b(pts)
        return 0.5 * (J + np.swapaxes(J, -1, -2))
    if condition == "H_bsigma":
        J = grad_ito_correction(model, pts)
        return 0.5 * (J + np.swapaxes(J, -1, -2))
    if condition == "H_sigma":
        J = grad_ito_correction(model, pts)
        gs = model.grad_sigma(pts)
        quad = np.einsum("...jli,...jmi->...lm", gs, gs)
        return 0.5 * (J + np.swapaxes(J, -1, -2)) + 0.5 * quad
    raise ConfigurationError(f"unknown condition {condition!r}; expected one of {CONDITIONS}")


def certify(model, condition, box=None, grid_n=1001):
    """Grid supremum of the tested log-norm / eigenvalue for one condition.

    H_b and H_bsigma test rho(grad b) and rho(grad b_sigma); H_sigma tests
    lambda_max of S_sigma(x) = (grad b_sigma)_sym + (1/2) sum_k grad sigma_k
    (grad sigma_k)'.  The condition holds on the grid iff sup_value < 0.
    """
    box = tuple(box) if box is not None else tuple(model.box)
    pts = _grid_points(box, grid_n, model.r)
    mats = _condition_matrices(model, condition, pts)
    if model.r == 1:
        vals = mats[..., 0, 0]
    else:
        vals = np.array([jacobi_eigenvalues(mats[g])[-1] for g in range(len(pts))])
    i = int(np.argmax(vals))
    sup = float(vals[i])
    lam = -sup if sup < 0.0 else None
    return CertReport(condition, sup, lam, pts[i], grid_n, box)


def theorem_rate(model, delta=0.1, box=None, grid_n=1001):
    """Contraction rate lambda(delta) = (1 - delta)(lambda_b - delta sup||grad b||_2^2).

    This is the rate surfaced by the homogeneous-diffusion uniform estimate;
    no attempt is made to optimise delta.  Returns None when H_b fails.
    """
    rep = certify(model, "H_b", box=box, grid_n=grid_n)
    if not rep.holds:
        return None
    pts = _grid_points(rep.box, grid_n, model.r)
    J = model.grad_b(pts)
    if model.r == 1:
        norm2 = float(np.max(np.abs(J[..., 0, 0])))
    else:
        norm2 = max(
            float(np.sqrt(jacobi_eigenvalues(J[g] @ J[g].T)[-1])) for g in range(len(pts))
        )
    return (1.0 - delta) * (rep.lam - delta * norm2**2)
