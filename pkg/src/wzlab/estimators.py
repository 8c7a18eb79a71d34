"""Monte Carlo machinery, the exact linear-model oracle, bound evaluators,
and the coupled-error / residual / orthogonality / moment experiments.

All experiments draw their paths from (seed, path_id)-keyed streams, run in
fixed path chunks, and merge per-chunk accumulators in chunk order, so every
report is a deterministic function of (config, seed) regardless of worker
count.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map, path_chunks
from .flows import _milstein_block, _wz_advance_block, milstein_terms
from .meshpaths import (GROUP_CELLS, ChunkedBrownian, ConfigurationError,
                        _ou_advance, make_mesh)
from .spectral import CertificationError, certify

__all__ = [
    "MomentAccumulator",
    "ErrorReport",
    "RateFit",
    "percell_variance",
    "exact_linear_variance",
    "exact_linear_variance_limit",
    "lg_stable_bound",
    "lg_unstable_envelope",
    "rate_fit",
    "coupled_error_experiment",
    "rate_experiment",
    "driver_moment_experiment",
    "milstein_residual_experiment",
    "orthogonality_check",
    "orthogonality_bias_scale",
    "moments_uniform_experiment",
]

DEFAULT_CHUNK = 1024

# elements per streamed block of fine-mesh values, ~50 MB of doubles
_BLOCK_BUDGET = 6_000_000


def _block_cells(n_paths, m):
    """Cells per streamed block: group-aligned, bounded by the memory budget."""
    raw = _BLOCK_BUDGET // max(1, n_paths * m)
    return max(GROUP_CELLS, (raw // GROUP_CELLS) * GROUP_CELLS)


# ---------------------------------------------------------------------------
# streaming moment accumulator
# ---------------------------------------------------------------------------

class MomentAccumulator:
    """Welford-style running moments over (optionally vector-valued) samples.

    Tracks count, mean and the second central sum M2; with track_high=True
    also the third/fourth central sums needed for p = 4 reporting.  ``merge``
    implements the exact parallel combination, so chunked and sequential
    accumulation agree up to floating rounding.
    """

    def __init__(self, shape=(), track_high=False):
        self.n = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)
        self.track_high = track_high
        self.m3 = np.zeros(shape) if track_high else None
        self.m4 = np.zeros(shape) if track_high else None

    @classmethod
    def from_samples(cls, samples, track_high=False):
        """Accumulate samples along axis 0 in one shot."""
        samples = np.asarray(samples, dtype=float)
        acc = cls(samples.shape[1:], track_high)
        acc.n = samples.shape[0]
        if acc.n == 0:
            return acc
        acc.mean = samples.mean(axis=0)
        d = samples - acc.mean
        acc.m2 = np.sum(d * d, axis=0)
        if track_high:
            acc.m3 = np.sum(d**3, axis=0)
            acc.m4 = np.sum(d**4, axis=0)
        return acc

    def add(self, x):
        x = np.asarray(x, dtype=float)
        self.n += 1
        n = self.n
        delta = x - self.mean
        dn = delta / n
        term = delta * dn * (n - 1)
        if self.track_high:
            self.m4 += (term * dn * dn * (n * n - 3 * n + 3)
                        + 6.0 * dn * dn * self.m2 - 4.0 * dn * self.m3)
            self.m3 += term * dn * (n - 2) - 3.0 * dn * self.m2
        self.m2 += term
        self.mean = self.mean + dn

    def merge(self, other):
        """Combined accumulator of the concatenated samples."""
        if self.track_high != other.track_high:
            raise ValueError("cannot merge accumulators with different tracking")
        out = MomentAccumulator(np.shape(self.mean), self.track_high)
        na, nb = self.n, other.n
        n = na + nb
        out.n = n
        if n == 0:
            return out
        d = other.mean - self.mean
        out.mean = self.mean + d * (nb / n)
        out.m2 = self.m2 + other.m2 + d * d * (na * nb / n)
        if self.track_high:
            out.m3 = (self.m3 + other.m3
                      + d**3 * na * nb * (na - nb) / n**2
                      + 3.0 * d * (na * other.m2 - nb * self.m2) / n)
            out.m4 = (self.m4 + other.m4
                      + d**4 * na * nb * (na * na - na * nb + nb * nb) / n**3
                      + 6.0 * d * d * (na * na * other.m2 + nb * nb * self.m2) / n**2
                      + 4.0 * d * (na * other.m3 - nb * self.m3) / n)
        return out

    @property
    def count(self):
        return self.n

    @property
    def variance(self):
        if self.n < 2:
            return np.zeros_like(self.mean)
        return self.m2 / (self.n - 1)

    @property
    def std_error(self):
        if self.n < 1:
            return np.zeros_like(self.mean)
        return np.sqrt(self.variance / self.n)


def _merge_all(accs):
    out = accs[0]
    for a in accs[1:]:
        out = out.merge(a)
    return out


# ---------------------------------------------------------------------------
# exact linear-model oracle and the stable/unstable bounds
# ---------------------------------------------------------------------------

# z^2/12 * (series) expansion of the per-cell variance, for small |a*eps|
_V_SERIES = (1.0, 1.0, 17.0 / 30.0, 7.0 / 30.0, 43.0 / 560.0, 107.0 / 5040.0,
             769.0 / 151200.0)


def percell_variance(a, eps):
    """Per-cell integral v(a, eps) = (1/eps) int_0^eps (e^{as} - avg)^2 ds.

    Equals (e^{2z}-1)/(2z) - ((e^z-1)/z)^2 with z = a*eps; evaluated through
    expm1 plus a small-z series so the cancellation never costs accuracy.
    """
    z = a * eps
    if z == 0.0:
        return 0.0
    if abs(z) < 1e-3:
        acc = 0.0
        for c in reversed(_V_SERIES):
            acc = acc * z + c
        return z * z / 12.0 * acc
    return math.expm1(2.0 * z) / (2.0 * z) - (math.expm1(z) / z) ** 2


def exact_linear_variance(a, eps, n):
    """E[(X_{t_n} - Xbar_{t_n})^2] for b(x) = a x, sigma = 1, polygonal driver.

    Closed form v(a, eps) * eps * sum_{j<n} e^{2 a eps j}; n may be an array.
    """
    n = np.asarray(n)
    if np.any(n < 0):
        raise ConfigurationError("cell count n must be >= 0")
    v = percell_variance(a, eps)
    if a == 0.0:
        return np.zeros(n.shape) if n.shape else 0.0
    geo = np.where(n > 0, np.expm1(2.0 * a * eps * n) / math.expm1(2.0 * a * eps), 0.0)
    out = v * eps * geo
    return out if out.shape else float(out)


def exact_linear_variance_limit(a, eps):
    """n -> infinity limit of the exact variance; finite only for a < 0."""
    if a >= 0.0:
        raise ConfigurationError("the variance limit exists only for a < 0")
    return -percell_variance(a, eps) * eps / math.expm1(2.0 * a * eps)


def lg_stable_bound(a, eps):
    """Time-uniform bound c(eps) eps^2 with c(eps) = e^{2|a|eps} |a|/24, a < 0."""
    if a >= 0.0:
        raise ConfigurationError("the stable bound requires a < 0")
    return math.exp(2.0 * abs(a) * eps) * abs(a) / 24.0 * eps**2


def lg_unstable_envelope(a, eps, t):
    """Lower/upper exponential envelopes c_-+(eps) eps^2 (e^{2at}-1) for a > 0."""
    if a <= 0.0:
        raise ConfigurationError("the unstable envelope requires a > 0")
    t = np.asarray(t, dtype=float)
    grow = np.expm1(2.0 * a * t)
    lo = eps**2 * (a / 24.0) * math.exp(-2.0 * a * eps) * grow
    hi = eps**2 * (a / 24.0) * math.exp(2.0 * a * eps) * grow
    return lo, hi


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------

@dataclass
class RateFit:
    eps: np.ndarray
    err: np.ndarray
    slope: float
    intercept: float
    residual_norm: float
    slope_se: float


def rate_fit(eps_list, err_list):
    """Least-squares slope of log err against log eps."""
    eps = np.asarray(eps_list, dtype=float)
    err = np.asarray(err_list, dtype=float)
    if eps.size < 3:
        raise ConfigurationError("rate_fit needs at least 3 points")
    if np.any(eps <= 0) or np.any(err <= 0):
        raise ConfigurationError("rate_fit needs positive eps and err values")
    x = np.log(eps)
    y = np.log(err)
    xm = x - x.mean()
    sxx = float(np.sum(xm * xm))
    slope = float(np.sum(xm * y) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    rss = float(np.sum(resid * resid))
    dof = max(1, eps.size - 2)
    slope_se = math.sqrt(rss / dof / sxx)
    return RateFit(eps, err, slope, intercept, math.sqrt(rss), slope_se)


# ---------------------------------------------------------------------------
# coupled-error experiment
# ---------------------------------------------------------------------------

@dataclass
class ErrorReport:
    """Per-coarse-node gap moments of one coupled (X, Xbar) experiment."""

    model: str
    driver: str
    eps: float
    horizon: float
    refine: int
    x0: np.ndarray
    n_paths: int
    seed: int
    times: np.ndarray
    l2: np.ndarray
    l2_se: np.ndarray
    p4: np.ndarray | None = None
    p4_se: np.ndarray | None = None
    oracle: np.ndarray | None = None

    @property
    def sup_l2(self):
        return float(np.max(self.l2))

    @property
    def sup_node(self):
        return int(np.argmax(self.l2))


def _ou_slopes_block(incr, y, delta, eps):
    """Per-fine-cell OU driver slopes across a block; returns (slopes, y_out)."""
    P, J, dim = incr.shape
    slopes = np.empty_like(incr)
    for j in range(J):
        y, slopes[:, j] = _ou_advance(y, incr[:, j], delta, eps)
    return slopes, y


def _concat_node_accs(accs, zero_nodes=1):
    """Concatenate per-node accumulators along the node axis (equal counts)."""
    out = MomentAccumulator(())
    out.n = accs[0].n
    zeros = np.zeros(zero_nodes)
    out.mean = np.concatenate([zeros] + [a.mean for a in accs])
    out.m2 = np.concatenate([zeros] + [a.m2 for a in accs])
    return out


def _coupled_error_chunk(task):
    (model, mesh, driver_kind, x0s, want_p4, substeps, seed, lo, hi, node_set) = task
    P = hi - lo
    cb = ChunkedBrownian(mesh, model.rbar, seed, range(lo, hi))
    N, m, delta, eps = mesh.n_coarse, mesh.refine, mesh.delta, mesh.eps
    Q = len(x0s)
    fine = node_set == "fine"
    xs_i = [np.tile(np.asarray(x0, dtype=float), (P, 1)) for x0 in x0s]
    xs_w = [x.copy() for x in xs_i]
    gap2 = None if fine else np.zeros((Q, P, N + 1))
    fine_accs = [[] for _ in range(Q)] if fine else None
    y_state = np.zeros((P, model.rbar))
    block = _block_cells(P, m)
    for k0 in range(0, N, block):
        k1 = min(N, k0 + block)
        jb = (k1 - k0) * m
        fv = cb.fine_values(k0, k1)
        incr = np.diff(fv, axis=2).reshape(P, jb, model.rbar)
        if driver_kind == "polygonal":
            slopes = np.repeat(cb.coarse_slopes(k0, k1), m, axis=1)
        else:
            slopes, y_state = _ou_slopes_block(incr, y_state, delta, eps)
        for q in range(Q):
            rec_i = np.empty((P, jb + 1, model.r))
            rec_i[:, 0] = xs_i[q]
            xs_i[q] = _milstein_block(model, xs_i[q], incr, delta, out=rec_i)
            rec_w = np.empty((P, jb + 1, model.r))
            rec_w[:, 0] = xs_w[q]
            xs_w[q] = _wz_advance_block(model, xs_w[q], slopes, delta, substeps, out=rec_w)
            if not (np.all(np.isfinite(xs_i[q])) and np.all(np.isfinite(xs_w[q]))):
                from .flows import FlowBlowupError

                raise FlowBlowupError(k1 * eps, f"coupled flow (x0 = {x0s[q]})")
            if fine:
                rec_i -= rec_w
                g2 = np.einsum("pjr,pjr->pj", rec_i[:, 1:], rec_i[:, 1:])
                fine_accs[q].append(MomentAccumulator.from_samples(g2))
            else:
                g = rec_i[:, m::m] - rec_w[:, m::m]
                gap2[q][:, k0 + 1 : k1 + 1] = np.einsum("pkr,pkr->pk", g, g)
    out = []
    for q in range(Q):
        if fine:
            out.append((_concat_node_accs(fine_accs[q]), None))
        else:
            acc2 = MomentAccumulator.from_samples(gap2[q])
            acc4 = MomentAccumulator.from_samples(gap2[q] ** 2) if want_p4 else None
            out.append((acc2, acc4))
    return out


def _require_certified(model, grid_n=1001):
    cond = "H_b" if model.sigma_const is not None else "H_sigma"
    rep = certify(model, cond, grid_n=grid_n)
    if not rep.holds:
        raise CertificationError(rep)
    return rep


def coupled_error_experiment(model, driver_kind, eps, T, m, x0_panel, n_paths,
                             p_moments=(2,), seed=0, n_jobs=1, substeps=1,
                             chunk_paths=DEFAULT_CHUNK, certify_first=True,
                             node_set="coarse"):
    """Per-node L^p gap between the fine Ito flow and the WZ flow.

    Runs every x0 in the panel on the same Brownian paths and returns one
    ErrorReport per x0 (ordered like the panel).  node_set = "coarse"
    evaluates the gap on the mesh {t_n} (where the polygonal driver gap
    vanishes, isolating the flow-level error); node_set = "fine" evaluates
    it at every fine node, the space-time-uniform view in which the
    O(sqrt(eps)) driver gap itself is part of the measured error.
    """
    mesh = make_mesh(T, eps, m)
    if certify_first:
        _require_certified(model)
    x0s = [np.atleast_1d(np.asarray(x, dtype=float)) for x in np.atleast_1d(x0_panel).reshape(-1, model.r)]
    want_p4 = 4 in tuple(p_moments)
    tasks = [(model, mesh, driver_kind, x0s, want_p4, substeps, seed, lo, hi, node_set)
             for lo, hi in path_chunks(n_paths, chunk_paths)]
    results = parallel_map(_coupled_error_chunk, tasks, n_jobs)
    times = mesh.fine_times() if node_set == "fine" else mesh.coarse_times()
    reports = []
    for q, x0 in enumerate(x0s):
        acc2 = _merge_all([res[q][0] for res in results])
        acc4 = _merge_all([res[q][1] for res in results]) if want_p4 and node_set == "coarse" else None
        reports.append(ErrorReport(
            model=model.name, driver=driver_kind, eps=eps, horizon=T, refine=m,
            x0=x0, n_paths=n_paths, seed=seed, times=times,
            l2=acc2.mean, l2_se=acc2.std_error,
            p4=None if acc4 is None else acc4.mean,
            p4_se=None if acc4 is None else acc4.std_error,
        ))
    return reports


@dataclass
class RatesReport:
    """sup-over-nodes RMS gap per eps, with its log-log slope, per x0."""

    model: str
    driver: str
    eps_list: np.ndarray
    x0_panel: np.ndarray
    sup_rms: np.ndarray      # (n_x0, n_eps) sup_n sqrt(E||gap||^2)
    sup_rms_se: np.ndarray
    fits: list               # RateFit per x0


def rate_experiment(model, driver_kind, eps_list, T, m, x0_panel, n_paths,
                    seed=0, n_jobs=1, substeps=1, chunk_paths=DEFAULT_CHUNK,
                    node_set="fine"):
    """Space-time-uniform rate experiment: slope of sup-node RMS gap in eps.

    The sup runs over the fine mesh by default: the square-root-of-eps rate
    is a statement about all times, and on the coarse mesh alone the
    polygonal coupling is exact in the driver so the gap decays at a faster
    order there.
    """
    eps_list = np.asarray(eps_list, dtype=float)
    x0s = np.atleast_1d(x0_panel)
    sup = np.empty((len(x0s), len(eps_list)))
    sup_se = np.empty_like(sup)
    for e, eps in enumerate(eps_list):
        reports = coupled_error_experiment(
            model, driver_kind, eps, T, m, x0s, n_paths, seed=seed,
            n_jobs=n_jobs, substeps=substeps, chunk_paths=chunk_paths,
            node_set=node_set)
        for q, rep in enumerate(reports):
            node = rep.sup_node
            sup[q, e] = math.sqrt(rep.l2[node])
            sup_se[q, e] = rep.l2_se[node] / (2.0 * sup[q, e]) if sup[q, e] > 0 else 0.0
    fits = [rate_fit(eps_list, sup[q]) for q in range(len(x0s))]
    return RatesReport(model.name, driver_kind, eps_list, x0s, sup, sup_se, fits)


# ---------------------------------------------------------------------------
# driver gap-moment experiment
# ---------------------------------------------------------------------------

def _driver_moment_chunk(task):
    (mesh, kind, node_idx, seed, lo, hi) = task
    cb = ChunkedBrownian(mesh, 1, seed, range(lo, hi))
    fv = cb.fine_values(0, mesh.n_coarse)  # (P, N, m+1, 1)
    P = hi - lo
    m = mesh.refine
    fine = np.empty((P, mesh.n_fine + 1))
    fine[:, :-1] = fv[:, :, :m, 0].reshape(P, mesh.n_fine)
    fine[:, -1] = fv[:, -1, m, 0]
    if kind == "polygonal":
        coarse = cb.coarse_vals[..., 0]
        u = np.arange(m) / m
        interp = coarse[:, :-1, None] + u * np.diff(coarse, axis=1)[:, :, None]
        bbar = np.concatenate([interp.reshape(P, mesh.n_fine), coarse[:, -1:]], axis=1)
    else:
        incr = np.diff(fine, axis=1)[..., None]
        slopes, _ = _ou_slopes_block(incr, np.zeros((P, 1)), mesh.delta, mesh.eps)
        bbar = np.zeros((P, mesh.n_fine + 1))
        np.cumsum(slopes[..., 0] * mesh.delta, axis=1, out=bbar[:, 1:])
    gap = fine - bbar
    out = {}
    for label, cells in node_idx.items():
        samples = gap[:, cells].reshape(-1)  # pooled over paths (and cells)
        out[label] = (MomentAccumulator.from_samples(samples**2),
                      MomentAccumulator.from_samples(samples**4))
    return out


def driver_moment_experiment(kind, eps, T, m, targets, n_paths, seed=0, n_jobs=1,
                             chunk_paths=DEFAULT_CHUNK):
    """MC estimates of E(B-Bbar)^2 and E(B-Bbar)^4 at chosen mesh positions.

    ``targets``: for the polygonal driver, intra-cell positions u = j/m in
    (0, 1) (gaps are pooled across all coarse cells, which are independent);
    for the OU driver, absolute times t on the fine mesh.  Returns
    {target: (acc2, acc4)} keyed by the given positions/times.
    """
    mesh = make_mesh(T, eps, m)
    node_idx = {}
    for tgt in targets:
        if kind == "polygonal":
            j = int(round(tgt * m))
            if not (0 < j < m) or abs(tgt * m - j) > 1e-9:
                raise ConfigurationError(f"position u = {tgt} must be an interior multiple of 1/m")
            node_idx[tgt] = np.arange(mesh.n_coarse) * m + j
        else:
            j = int(round(tgt / mesh.delta))
            if abs(tgt / mesh.delta - j) > 1e-9 or not (0 <= j <= mesh.n_fine):
                raise ConfigurationError(f"time t = {tgt} is not a fine-mesh node")
            node_idx[tgt] = np.array([j])
    tasks = [(mesh, kind, node_idx, seed, lo, hi) for lo, hi in path_chunks(n_paths, chunk_paths)]
    results = parallel_map(_driver_moment_chunk, tasks, n_jobs)
    return {
        tgt: (_merge_all([r[tgt][0] for r in results]),
              _merge_all([r[tgt][1] for r in results]))
        for tgt in node_idx
    }


# ---------------------------------------------------------------------------
# Milstein residual and orthogonality experiments
# ---------------------------------------------------------------------------

_BIN_LO, _BIN_HI = -4.0, 4.0


def _chi_bin_edges(n_bins):
    return np.linspace(_BIN_LO, _BIN_HI, n_bins + 1)


def _milstein_residual_chunk(task):
    (model, mesh, x0, n_bins, substeps, seed, lo, hi) = task
    P = hi - lo
    cb = ChunkedBrownian(mesh, model.rbar, seed, range(lo, hi))
    N, m, delta, eps = mesh.n_coarse, mesh.refine, mesh.delta, mesh.eps
    sqeps = math.sqrt(eps)
    xi = np.tile(np.asarray(x0, dtype=float), (P, 1))
    xw = xi.copy()
    sum_rx = np.zeros((P, model.r))
    sum_rx2 = np.zeros(P)
    sum_rxb2 = np.zeros(P)
    edges = _chi_bin_edges(n_bins)
    bin_count = np.zeros((model.rbar, n_bins), dtype=np.int64)
    bin_sum = np.zeros((model.rbar, n_bins, model.r))
    block = _block_cells(P, m)
    for k0 in range(0, N, block):
        k1 = min(N, k0 + block)
        fv = cb.fine_values(k0, k1)
        incr = np.diff(fv, axis=2).reshape(P, (k1 - k0) * m, model.rbar)
        slopes = np.repeat(cb.coarse_slopes(k0, k1), m, axis=1)
        chi_block = cb.coarse_incr[:, k0:k1] / sqeps
        for k in range(k0, k1):
            j0 = (k - k0) * m
            chi = chi_block[:, k - k0]
            terms_i = milstein_terms(model, xi, eps, chi)
            terms_w = milstein_terms(model, xw, eps, chi)
            xi_next = _milstein_block(model, xi, incr[:, j0 : j0 + m], delta)
            xw_next = _wz_advance_block(model, xw, slopes[:, j0 : j0 + m], delta, substeps)
            res_i = (xi_next - xi) - terms_i.predicted
            res_w = (xw_next - xw) - terms_w.predicted
            sum_rx += res_i
            sum_rx2 += np.einsum("pr,pr->p", res_i, res_i)
            sum_rxb2 += np.einsum("pr,pr->p", res_w, res_w)
            for j in range(model.rbar):
                which = np.clip(np.digitize(chi[:, j], edges) - 1, 0, n_bins - 1)
                bin_count[j] += np.bincount(which, minlength=n_bins)
                for i in range(model.r):
                    bin_sum[j, :, i] += np.bincount(which, weights=res_i[:, i],
                                                    minlength=n_bins)
            xi, xw = xi_next, xw_next
    return {
        "mean_vec": MomentAccumulator.from_samples(sum_rx / N),
        "x_l2": MomentAccumulator.from_samples(sum_rx2 / N),
        "xbar_l2": MomentAccumulator.from_samples(sum_rxb2 / N),
        "bin_count": bin_count,
        "bin_sum": bin_sum,
    }


@dataclass
class MilsteinResidualReport:
    """L^2 residual scaling of the one-step Milstein decompositions."""

    model: str
    eps_list: np.ndarray
    horizon: float
    x0: np.ndarray
    n_paths: int
    xbar_l2: np.ndarray        # per eps: sqrt E[residual(Xbar)^2]
    xbar_l2_se: np.ndarray
    x_l2: np.ndarray           # per eps: sqrt E[residual(X)^2]
    x_l2_se: np.ndarray
    x_mean_abs: np.ndarray     # per eps: ||E residual(X)||
    x_mean_se: np.ndarray
    condmean_l2: np.ndarray    # per eps: chi-binned conditional-mean L2
    fits: dict = field(default_factory=dict)


def milstein_residual_experiment(model, eps_list, T, m, x0, n_paths, seed=0,
                                 n_jobs=1, n_bins=20, substeps=1,
                                 chunk_paths=DEFAULT_CHUNK, check=True):
    """Residuals of the coarse-step Milstein decompositions across eps.

    The X residual carries eps*dM + eps^(3/2)*dR, so its L2 norm is O(eps)
    while its plain mean (killing the martingale part) and the WZ-flow
    residual decay faster; the chi-binned conditional mean isolates the
    non-martingale component statistically.
    """
    if check:
        from .flows import _commutation_panel
        from .models import check_commutation

        rep = check_commutation(model, _commutation_panel(model))
        if not rep.passed:
            raise ConfigurationError(f"commutation violated: {rep.max_violation:.3g}")
    eps_list = np.asarray(eps_list, dtype=float)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    cols = {k: [] for k in ("xbar_l2", "xbar_se", "x_l2", "x_se", "mean_abs", "mean_se", "cond")}
    for eps in eps_list:
        mesh = make_mesh(T, eps, m)
        tasks = [(model, mesh, x0, n_bins, substeps, seed, lo, hi)
                 for lo, hi in path_chunks(n_paths, chunk_paths)]
        results = parallel_map(_milstein_residual_chunk, tasks, n_jobs)
        mean_vec = _merge_all([r["mean_vec"] for r in results])
        x_l2 = _merge_all([r["x_l2"] for r in results])
        xbar_l2 = _merge_all([r["xbar_l2"] for r in results])
        count = np.sum([r["bin_count"] for r in results], axis=0)
        total = np.sum([r["bin_sum"] for r in results], axis=0)
        nz = count > 0
        w = count / count.sum(axis=-1, keepdims=True)
        mu = np.zeros_like(total)
        mu[nz] = total[nz] / count[nz][:, None]
        # L2 norm of the binned conditional-mean function, worst driver coord
        cond = float(np.sqrt(np.max(np.sum(w * np.einsum("jbr,jbr->jb", mu, mu),
                                           axis=-1))))
        v = float(np.sqrt(max(x_l2.mean, 0.0)))
        vb = float(np.sqrt(max(xbar_l2.mean, 0.0)))
        cols["x_l2"].append(v)
        cols["x_se"].append(float(x_l2.std_error) / (2.0 * v) if v > 0 else 0.0)
        cols["xbar_l2"].append(vb)
        cols["xbar_se"].append(float(xbar_l2.std_error) / (2.0 * vb) if vb > 0 else 0.0)
        cols["mean_abs"].append(float(np.linalg.norm(mean_vec.mean)))
        cols["mean_se"].append(float(np.linalg.norm(mean_vec.std_error)))
        cols["cond"].append(cond)
    fits = {
        "xbar_l2": rate_fit(eps_list, cols["xbar_l2"]),
        "x_l2": rate_fit(eps_list, cols["x_l2"]),
        "x_mean_abs": rate_fit(eps_list, cols["mean_abs"]),
        "condmean_l2": rate_fit(eps_list, cols["cond"]),
    }
    return MilsteinResidualReport(
        model=model.name, eps_list=eps_list, horizon=T, x0=x0, n_paths=n_paths,
        xbar_l2=np.array(cols["xbar_l2"]), xbar_l2_se=np.array(cols["xbar_se"]),
        x_l2=np.array(cols["x_l2"]), x_l2_se=np.array(cols["x_se"]),
        x_mean_abs=np.array(cols["mean_abs"]), x_mean_se=np.array(cols["mean_se"]),
        condmean_l2=np.array(cols["cond"]), fits=fits,
    )


def _orthogonality_chunk(task):
    (model, mesh, x0, seed, lo, hi) = task
    P = hi - lo
    cb = ChunkedBrownian(mesh, model.rbar, seed, range(lo, hi))
    N, m, delta, eps = mesh.n_coarse, mesh.refine, mesh.delta, mesh.eps
    sqeps = math.sqrt(eps)
    xi = np.tile(np.asarray(x0, dtype=float), (P, 1))
    s_dm = np.zeros((P, model.r))
    s_chi_dm = np.zeros((P, model.rbar, model.r))
    s_chi2_dm = np.zeros((P, model.rbar, model.rbar, model.r))
    block = _block_cells(P, m)
    for k0 in range(0, N, block):
        k1 = min(N, k0 + block)
        fv = cb.fine_values(k0, k1)
        incr = np.diff(fv, axis=2).reshape(P, (k1 - k0) * m, model.rbar)
        chi_block = cb.coarse_incr[:, k0:k1] / sqeps
        for k in range(k0, k1):
            j0 = (k - k0) * m
            chi = chi_block[:, k - k0]
            terms = milstein_terms(model, xi, eps, chi)
            xi_next = _milstein_block(model, xi, incr[:, j0 : j0 + m], delta)
            dm = ((xi_next - xi) - terms.predicted) / eps
            s_dm += dm
            s_chi_dm += chi[:, :, None] * dm[:, None, :]
            s_chi2_dm += chi[:, :, None, None] * chi[:, None, :, None] * dm[:, None, None, :]
            xi = xi_next
    return {
        "dM": MomentAccumulator.from_samples(s_dm / N),
        "chi_dM": MomentAccumulator.from_samples(s_chi_dm / N),
        "chi2_dM": MomentAccumulator.from_samples(s_chi2_dm / N),
    }


@dataclass
class OrthogonalityReport:
    """MC means/SEs of E[dM], E[chi dM] and E[chi chi dM]."""

    model: str
    eps: float
    horizon: float
    x0: np.ndarray
    n_paths: int
    entries: dict  # name -> (mean array, se array)

    def worst(self):
        """Max over all entries of (|mean|, se) pairs flattened."""
        worst_abs = 0.0
        for mean, se in self.entries.values():
            worst_abs = max(worst_abs, float(np.max(np.abs(mean))))
        return worst_abs


def orthogonality_check(model, eps, T, m, x0, n_paths, seed=0, n_jobs=1,
                        chunk_paths=DEFAULT_CHUNK, check=True):
    """Estimate the martingale-orthogonality moments of the X decomposition.

    dM is extracted as (observed - predicted)/eps, so each entry carries an
    O(sqrt(eps)) bias from the eps^(3/2) remainder; gates must allow for it.
    """
    if check:
        from .flows import _commutation_panel
        from .models import check_commutation

        rep = check_commutation(model, _commutation_panel(model))
        if not rep.passed:
            raise ConfigurationError(f"commutation violated: {rep.max_violation:.3g}")
    mesh = make_mesh(T, eps, m)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    tasks = [(model, mesh, x0, seed, lo, hi) for lo, hi in path_chunks(n_paths, chunk_paths)]
    results = parallel_map(_orthogonality_chunk, tasks, n_jobs)
    entries = {}
    for key in ("dM", "chi_dM", "chi2_dM"):
        acc = _merge_all([r[key] for r in results])
        entries[key] = (acc.mean, acc.std_error)
    return OrthogonalityReport(model.name, eps, T, x0, n_paths, entries)


def orthogonality_bias_scale(report):
    """Fit the O(sqrt(eps)) bias constant c from a reference report."""
    c = 0.0
    for mean, se in report.entries.values():
        c = max(c, float(np.max(np.abs(mean) + 4.0 * se)))
    return c / math.sqrt(report.eps)


# ---------------------------------------------------------------------------
# uniform moments of the WZ flow
# ---------------------------------------------------------------------------

def _moments_chunk(task):
    (model, mesh, x0, p, substeps, seed, lo, hi) = task
    P = hi - lo
    cb = ChunkedBrownian(mesh, model.rbar, seed, range(lo, hi))
    N, m, delta = mesh.n_coarse, mesh.refine, mesh.delta
    xw = np.tile(np.asarray(x0, dtype=float), (P, 1))
    powed = np.zeros((P, N + 1))
    powed[:, 0] = np.linalg.norm(xw, axis=-1) ** p
    slopes_all = cb.coarse_slopes(0, N)
    for k in range(N):
        slope = np.repeat(slopes_all[:, k : k + 1], m, axis=1)
        xw = _wz_advance_block(model, xw, slope, delta, substeps)
        powed[:, k + 1] = np.linalg.norm(xw, axis=-1) ** p
    if not np.all(np.isfinite(xw)):
        from .flows import FlowBlowupError

        raise FlowBlowupError(mesh.horizon, "WZ flow (moment experiment)")
    return MomentAccumulator.from_samples(powed)


@dataclass
class MomentsReport:
    model: str
    eps: float
    x0: np.ndarray
    n_paths: int
    p: int
    per_T: dict  # T -> dict(times, mean, se, sup, sup_node)


def moments_uniform_experiment(model, eps, T_list, x0, n_paths, p=4, m=1,
                               substeps=64, seed=0, n_jobs=1,
                               chunk_paths=DEFAULT_CHUNK):
    """sup-node E||Xbar||^p across horizons, polygonal driver.

    The WZ flow under the polygonal driver is a function of the coarse
    increments only, so m = 1 with RK4 substeps reproduces the same flow as
    a refined mesh at a fraction of the cost; with a shared seed the shorter
    horizon's paths are exact prefixes of the longer one's.
    """
    per_T = {}
    for T in T_list:
        mesh = make_mesh(T, eps, m)
        tasks = [(model, mesh, np.atleast_1d(np.asarray(x0, dtype=float)), p, substeps, seed, lo, hi)
                 for lo, hi in path_chunks(n_paths, chunk_paths)]
        acc = _merge_all(parallel_map(_moments_chunk, tasks, n_jobs))
        sup_node = int(np.argmax(acc.mean))
        per_T[T] = {
            "times": mesh.coarse_times(),
            "mean": acc.mean,
            "se": acc.std_error,
            "sup": float(acc.mean[sup_node]),
            "sup_node": sup_node,
        }
    return MomentsReport(model.name, eps, np.atleast_1d(x0), n_paths, p, per_T)
