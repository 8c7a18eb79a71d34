"""Time meshes, coupled Brownian sampling, and the two smooth drivers.

Brownian paths are generated coarse-increments-first from a counter-based
stream keyed by (seed, path_id), then filled in on the fine mesh by dyadic
Brownian-bridge bisection.  Coarse-node values are therefore bit-identical
across refinement factors, and everything derived from a path (drivers,
flows) is a pure function of (seed, path_id) and the mesh.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConfigurationError",
    "TimeMesh",
    "BrownianPath",
    "DriverPath",
    "make_mesh",
    "sample_brownian",
    "polygonal_driver",
    "ou_driver",
    "driver_gap_moments",
    "ChunkedBrownian",
]


class ConfigurationError(ValueError):
    """Raised when mesh, driver or experiment parameters violate a contract."""


@dataclass(frozen=True)
class TimeMesh:
    """Uniform coarse mesh of step ``eps`` with ``refine`` fine substeps per cell.

    The fine step is ``delta = eps / refine``.  ``refine`` is a power of two so
    that fine node ``j*delta`` coincides bit-exactly with coarse node ``k*eps``
    whenever ``j == k*refine``.
    """

    horizon: float
    eps: float
    refine: int

    @property
    def n_coarse(self):
        return int(round(self.horizon / self.eps))

    @property
    def n_fine(self):
        return self.n_coarse * self.refine

    @property
    def delta(self):
        return self.eps / self.refine

    def coarse_times(self):
        return np.arange(self.n_coarse + 1) * self.eps

    def fine_times(self):
        return np.arange(self.n_fine + 1) * self.delta


def make_mesh(T, eps, m):
    """Build a TimeMesh, checking that T/eps is integral and m a power of two."""
    if T <= 0 or eps <= 0:
        raise ConfigurationError(f"horizon and step must be positive, got T={T}, eps={eps}")
    n = T / eps
    if abs(n - round(n)) > 1e-9 * max(1.0, abs(n)) or round(n) < 1:
        raise ConfigurationError(f"T/eps must be a positive integer, got {T}/{eps} = {n}")
    m = int(m)
    if m < 1 or (m & (m - 1)) != 0:
        raise ConfigurationError(f"refinement factor must be a power of two >= 1, got {m}")
    return TimeMesh(float(T), float(eps), m)


@dataclass
class BrownianPath:
    """Multi-dimensional Brownian values on the fine mesh of ``mesh``."""

    mesh: TimeMesh
    values: np.ndarray  # (n_fine + 1, dim)

    @property
    def dim(self):
        return self.values.shape[-1]

    def coarse_values(self):
        return self.values[:: self.mesh.refine]

    def increments(self):
        return np.diff(self.values, axis=0)


@dataclass
class DriverPath:
    """A smooth driver B-bar evaluated on the fine mesh.

    ``slopes`` holds the per-fine-cell derivative, chosen so that
    ``values[j+1] - values[j] == delta * slopes[j]`` exactly; all driver
    integrals and flows consume the slopes.  For the OU driver the underlying
    smoothing state Y is kept in ``ou_state`` (the stored slope is the
    trapezoid mean of Y over the cell).
    """

    kind: str  # "polygonal" | "ou"
    mesh: TimeMesh
    values: np.ndarray  # (n_fine + 1, dim)
    slopes: np.ndarray  # (n_fine, dim)
    eps: float          # smoothing scale
    ou_state: np.ndarray | None = None

    @property
    def dim(self):
        return self.values.shape[-1]


# cells per bridge substream; fine_values consumes whole groups at a time
GROUP_CELLS = 64


def _stream(seed, word):
    key = np.array([seed, word], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _bridge_fill(left, right, delta, z):
    """Dyadic Brownian-bridge refinement of each cell.

    left, right: (..., dim) endpoint values; z: (..., m-1, dim) unit normals
    consumed level by level, left to right.  Returns (..., m+1, dim).
    """
    m = z.shape[-2] + 1
    dim = left.shape[-1]
    out = np.empty(left.shape[:-1] + (m + 1, dim))
    out[..., 0, :] = left
    out[..., m, :] = right
    pos = 0
    step = m
    while step > 1:
        half = step // 2
        mids = np.arange(half, m, step)
        zlev = z[..., pos : pos + mids.size, :]
        pos += mids.size
        sd = math.sqrt(step * delta / 4.0)
        out[..., mids, :] = 0.5 * (out[..., mids - half, :] + out[..., mids + half, :]) + sd * zlev
        step = half
    return out


class ChunkedBrownian:
    """One chunk of coupled Brownian paths, streamed a group of cells at a time.

    Coarse increments come from the (seed, path_id) stream.  Bridge noise for
    each group of GROUP_CELLS coarse cells comes from its own substream keyed
    by (seed, path_id, group) and is consumed level by level, so values
    depend only on (seed, path_id) and the mesh -- never on chunking or
    thread count -- and a path at refinement 2m restricts bit-exactly to the
    same path at refinement m (the extra level only appends draws).
    ``fine_values`` must be called with contiguous group-aligned cell ranges.
    """

    def __init__(self, mesh, dim, seed, path_ids):
        self.mesh = mesh
        self.dim = dim
        self.seed = int(seed)
        self.path_ids = [int(p) for p in path_ids]
        if any(p < 0 or p >= 2**32 for p in self.path_ids):
            raise ConfigurationError("path ids must fit in 32 bits")
        n = mesh.n_coarse
        incr = np.stack([_stream(self.seed, pid).standard_normal((n, dim))
                         for pid in self.path_ids])
        incr *= math.sqrt(mesh.eps)
        self.coarse_incr = incr  # (P, n_coarse, dim)
        vals = np.zeros((len(self.path_ids), n + 1, dim))
        np.cumsum(incr, axis=1, out=vals[:, 1:])
        self.coarse_vals = vals  # (P, n_coarse + 1, dim)
        self._cursor = 0

    @property
    def n_paths(self):
        return len(self.path_ids)

    def coarse_slopes(self, k0, k1):
        return self.coarse_incr[:, k0:k1] / self.mesh.eps

    def _group_normals(self, group, width):
        """Bridge normals of one cell group, (P, width, m-1, dim), level-major."""
        m = self.mesh.refine
        gens = [_stream(self.seed, pid | ((group + 1) << 32)) for pid in self.path_ids]
        z = np.empty((self.n_paths, width, m - 1, self.dim))
        pos = 0
        lev = 1
        while lev < m:
            for i, g in enumerate(gens):
                z[i, :, pos : pos + lev] = g.standard_normal((width, lev, self.dim))
            pos += lev
            lev *= 2
        return z

    def fine_values(self, k0, k1):
        """Fine-mesh values on coarse cells [k0, k1), shape (P, K, m+1, dim).

        k0 must be group-aligned and k1 group-aligned or the final cell.
        """
        n = self.mesh.n_coarse
        if k0 != self._cursor:
            raise RuntimeError(f"bridge stream consumed out of order: expected cell {self._cursor}, got {k0}")
        if k0 % GROUP_CELLS != 0 or (k1 % GROUP_CELLS != 0 and k1 != n):
            raise RuntimeError(f"cell range [{k0}, {k1}) is not group-aligned")
        self._cursor = k1
        m = self.mesh.refine
        left = self.coarse_vals[:, k0:k1]
        right = self.coarse_vals[:, k0 + 1 : k1 + 1]
        if m == 1:
            return np.stack([left, right], axis=2)
        z = np.empty((self.n_paths, k1 - k0, m - 1, self.dim))
        for g0 in range(k0, k1, GROUP_CELLS):
            g1 = min(g0 + GROUP_CELLS, k1)
            z[:, g0 - k0 : g1 - k0] = self._group_normals(g0 // GROUP_CELLS, g1 - g0)
        return _bridge_fill(left, right, self.mesh.delta, z)


def sample_brownian(mesh, dim, seed, path_id):
    """Sample one Brownian path on the fine mesh of ``mesh``.

    Coarse increments are drawn first as N(0, eps I) from the (seed, path_id)
    stream; fine nodes are filled by bridge bisection, so coarse-node values
    do not depend on the refinement factor.
    """
    if dim < 1:
        raise ConfigurationError(f"driver dimension must be >= 1, got {dim}")
    chunk = ChunkedBrownian(mesh, dim, seed, [path_id])
    m = mesh.refine
    fv = chunk.fine_values(0, mesh.n_coarse)  # (1, N, m+1, dim)
    values = np.empty((mesh.n_fine + 1, dim))
    values[:-1] = fv[0, :, :m, :].reshape(mesh.n_fine, dim)
    values[-1] = fv[0, -1, m, :]
    return BrownianPath(mesh, values)


def polygonal_driver(bp, mesh):
    """Piecewise-linear interpolant of ``bp`` through the coarse nodes."""
    if mesh is not bp.mesh and mesh != bp.mesh:
        raise ConfigurationError("driver mesh does not match the sampled path's mesh")
    m = mesh.refine
    coarse = bp.values[::m]
    cincr = np.diff(coarse, axis=0)
    slopes = np.repeat(cincr / mesh.eps, m, axis=0)
    u = (np.arange(m) / m)[:, None]
    cells = coarse[:-1, None, :] + u * cincr[:, None, :]
    values = np.concatenate([cells.reshape(mesh.n_fine, bp.dim), coarse[-1:]], axis=0)
    return DriverPath("polygonal", mesh, values, slopes, mesh.eps)


def _ou_advance(y, dB, delta, eps):
    """One explicit-Euler OU step; returns (Y_next, cell slope)."""
    y_next = y * (1.0 - delta / eps) + dB / eps
    return y_next, 0.5 * (y + y_next)


def ou_driver(bp, mesh, eps):
    """Smooth driver obtained by integrating an OU state with relaxation time eps.

    The OU state Y is advanced by explicit Euler on the fine mesh, driven by
    the same fine increments as ``bp`` (this preserves the pathwise coupling);
    B-bar is the trapezoid integral of Y.
    """
    if eps != mesh.eps:
        raise ConfigurationError(f"OU smoothing scale must equal the coarse step, got {eps} != {mesh.eps}")
    if mesh.delta / eps >= 1.0:
        raise ConfigurationError("refinement too coarse for the OU update (delta/eps >= 1)")
    dB = bp.increments()
    n_fine, dim = dB.shape
    ou_state = np.empty((n_fine + 1, dim))
    slopes = np.empty((n_fine, dim))
    ou_state[0] = 0.0
    y = ou_state[0]
    for j in range(n_fine):
        y, slopes[j] = _ou_advance(y, dB[j], mesh.delta, eps)
        ou_state[j + 1] = y
    values = np.zeros((n_fine + 1, dim))
    np.cumsum(slopes * mesh.delta, axis=0, out=values[1:])
    return DriverPath("ou", mesh, values, slopes, eps, ou_state=ou_state)


def driver_gap_moments(kind, eps, t, p):
    """Closed-form E[(B_t - Bbar_t)^(2p)] for the polygonal and OU drivers.

    Polygonal: (2p)!/(p! 2^p) * eps^p * (u(1-u))^p with u the position of t
    inside its coarse cell.  OU: (2p)!/(p! 2^(2p)) * eps^p * (1-e^(-2t/eps))^p.
    """
    p = int(p)
    if p < 1:
        raise ConfigurationError(f"moment order p must be >= 1, got {p}")
    t = np.asarray(t, dtype=float)
    if kind == "polygonal":
        coeff = math.factorial(2 * p) / (math.factorial(p) * 2**p)
        u = t / eps - np.floor(t / eps)
        return coeff * eps**p * (u * (1.0 - u)) ** p
    if kind == "ou":
        coeff = math.factorial(2 * p) / (math.factorial(p) * 2 ** (2 * p))
        return coeff * eps**p * (-np.expm1(-2.0 * t / eps)) ** p
    raise ConfigurationError(f"unknown driver kind {kind!r}; expected 'polygonal' or 'ou'")
