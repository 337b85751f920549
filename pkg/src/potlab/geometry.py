"""Weighted graphs with a Dirichlet boundary layer, and their metric geometry.

A :class:`GraphWithBoundary` is the discrete stand-in for a noncompact space
truncated at a finite radius: a symmetric conductance matrix, a positive
vertex measure, a connected interior, and a boundary shell used to impose
Dirichlet data.  Three generator families are provided:

* ``lattice(n, R)`` -- integer box of sup-norm radius R+1, unit weights;
* ``radial(alpha, R)`` -- rooted layered graph whose sphere of radius r holds
  ceil(r^(alpha-1)) vertices, so ball volumes grow like r^alpha;
* ``product(base, m)`` -- Cartesian product of a base family with a cycle of
  length m.

On top of the graphs this module measures growth: metric balls and their
volumes, two-sided growth exponents, exhaustions by balls with linear cutoff
functions, and the volume summability tests used by the parabolicity module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph


class GeometryError(ValueError):
    pass


class DegenerateGeometryError(GeometryError):
    pass


class ResourceLimitError(RuntimeError):
    pass


DEFAULT_MAX_VERTICES = 400_000


@dataclass(frozen=True)
class GeometrySpec:
    """Declarative description of a generator family instance."""

    family: str
    radius: int
    dimension: Optional[int] = None
    alpha: Optional[float] = None
    base: Optional["GeometrySpec"] = None
    cycle: Optional[int] = None

    def __post_init__(self):
        if self.family not in ("lattice", "radial", "product"):
            raise GeometryError(f"unknown family {self.family!r}")
        if self.family == "lattice":
            if self.dimension is None or self.dimension < 1:
                raise GeometryError("lattice needs dimension n >= 1")
            if self.radius < 1:
                raise GeometryError("lattice needs radius R >= 1")
        elif self.family == "radial":
            if self.alpha is None or self.alpha <= 1:
                raise GeometryError("radial needs alpha > 1")
            if self.radius < 1:
                raise GeometryError("radial needs radius R >= 1")
        else:
            if self.base is None or self.cycle is None or self.cycle < 3:
                raise GeometryError("product needs a base spec and cycle length m >= 3")

    @staticmethod
    def lattice(dimension, radius):
        return GeometrySpec(family="lattice", dimension=dimension, radius=radius)

    @staticmethod
    def radial(alpha, radius):
        return GeometrySpec(family="radial", alpha=alpha, radius=radius)

    @staticmethod
    def product(base, cycle):
        return GeometrySpec(family="product", radius=base.radius, base=base, cycle=cycle)

    def with_radius(self, radius):
        if self.family == "product":
            return GeometrySpec.product(self.base.with_radius(radius), self.cycle)
        if self.family == "lattice":
            return GeometrySpec.lattice(self.dimension, radius)
        return GeometrySpec.radial(self.alpha, radius)

    def describe(self):
        if self.family == "lattice":
            return f"lattice(n={self.dimension}, R={self.radius})"
        if self.family == "radial":
            return f"radial(alpha={self.alpha}, R={self.radius})"
        return f"product({self.base.describe()}, m={self.cycle})"


class GraphWithBoundary:
    """Finite weighted graph split into a connected interior and a boundary.

    Parameters
    ----------
    vertices : list of hashable labels, in canonical order
    weights : symmetric nonnegative sparse matrix of conductances
    measure : positive vertex measure
    interior_mask : boolean mask of interior vertices
    origin : label of the distinguished interior vertex
    spec : optional GeometrySpec recording how the graph was generated
    """

    def __init__(self, vertices, weights, measure, interior_mask, origin,
                 spec=None, validate=True):
        self.vertices = list(vertices)
        self.index = {v: i for i, v in enumerate(self.vertices)}
        self.W = weights.tocsr()
        self.W.sum_duplicates()
        self.mu = np.asarray(measure, dtype=float)
        self.interior_mask = np.asarray(interior_mask, dtype=bool)
        self.interior = np.flatnonzero(self.interior_mask)
        self.boundary = np.flatnonzero(~self.interior_mask)
        self.origin = self.index[origin] if origin in self.index else int(origin)
        self.spec = spec
        n = len(self.vertices)
        self.n_vertices = n
        self.n_interior = int(self.interior.size)
        # position of each global vertex inside the interior ordering (-1 outside)
        self.interior_pos = -np.ones(n, dtype=int)
        self.interior_pos[self.interior] = np.arange(self.n_interior)
        self._dist_cache = {}
        self._unit_ball_volumes = None
        if validate:
            self._validate()

    # -- construction checks ------------------------------------------------

    def _validate(self):
        n = self.n_vertices
        if self.W.shape != (n, n):
            raise GeometryError("weight matrix shape mismatch")
        if self.mu.shape != (n,) or np.any(self.mu <= 0):
            raise GeometryError("measure must be positive on every vertex")
        asym = abs(self.W - self.W.T)
        if asym.nnz and asym.max() > 0:
            raise GeometryError("conductances must be symmetric")
        if self.W.nnz and self.W.data.min() <= 0:
            raise GeometryError("conductances must be positive on edges")
        if np.any(self.W.diagonal() != 0):
            raise GeometryError("no self-loops allowed")
        if self.n_interior == 0:
            raise GeometryError("interior must be nonempty")
        if not self.interior_mask[self.origin]:
            raise GeometryError("origin must be an interior vertex")
        W_II = self.W[self.interior][:, self.interior]
        ncomp, _ = csgraph.connected_components(W_II, directed=False)
        if ncomp != 1:
            raise GeometryError("interior subgraph must be connected")

    # -- basic structure ------------------------------------------------------

    @property
    def interior_matrix_parts(self):
        """(W_II, W_IB, degree) blocks used by operator assembly."""
        W_II = self.W[self.interior][:, self.interior].tocsr()
        W_IB = self.W[self.interior][:, self.boundary].tocsr()
        deg = np.asarray(self.W.sum(axis=1)).ravel()[self.interior]
        return W_II, W_IB, deg

    def neighbors(self, x):
        row = self.W.getrow(x)
        return row.indices

    # -- metric -----------------------------------------------------------

    def hop_distances(self, source):
        """Hop distances from `source` to every vertex on the full graph."""
        src = int(source)
        if src not in self._dist_cache:
            d = csgraph.dijkstra(self.W, directed=False, indices=src,
                                 unweighted=True)
            self._dist_cache[src] = d
        return self._dist_cache[src]

    def distances_from_origin(self):
        return self.hop_distances(self.origin)

    def ball_indices(self, x, r):
        d = self.hop_distances(x)
        return np.flatnonzero(d <= r)

    def ball_volume(self, x, r):
        """mu-volume of the closed metric ball of radius r around x."""
        if r < 0:
            raise GeometryError("radius must be nonnegative")
        return float(self.mu[self.ball_indices(x, r)].sum())

    def interior_ball(self, r, center=None):
        """Interior vertices within hop distance r of the origin (or center)."""
        c = self.origin if center is None else int(center)
        d = self.hop_distances(c)
        return np.flatnonzero((d <= r) & self.interior_mask)

    def unit_ball_volumes(self):
        """V(x, 1) for every vertex; the weight entering the L^p_V scale."""
        if self._unit_ball_volumes is None:
            adj = self.W.copy()
            adj.data = np.ones_like(adj.data)
            self._unit_ball_volumes = self.mu + adj @ self.mu
        return self._unit_ball_volumes

    def origin_boundary_distance(self):
        """Hop distance from the origin to the nearest boundary vertex."""
        d = self.distances_from_origin()
        return float(d[self.boundary].min())

    def interior_radius(self):
        d = self.distances_from_origin()
        return float(d[self.interior].max())

    def edge_list(self):
        """Canonically oriented edges (i < j) with weights."""
        coo = sp.triu(self.W, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]

    def __repr__(self):
        tag = self.spec.describe() if self.spec is not None else "custom"
        return (f"GraphWithBoundary({tag}, |V|={self.n_vertices}, "
                f"|int|={self.n_interior})")


# -- generators -------------------------------------------------------------


def _lattice_graph(n, R, max_vertices):
    side = 2 * (R + 1) + 1
    total = side ** n
    if total > max_vertices:
        raise ResourceLimitError(
            f"lattice would have {total} vertices (cap {max_vertices})")
    axes = [np.arange(-(R + 1), R + 2)] * n
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    vertices = [tuple(int(c) for c in row) for row in grid]
    index = {v: i for i, v in enumerate(vertices)}
    rows, cols = [], []
    for i, v in enumerate(vertices):
        for axis in range(n):
            w = list(v)
            w[axis] += 1
            j = index.get(tuple(w))
            if j is not None:
                rows += [i, j]
                cols += [j, i]
    W = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(total, total))
    sup = np.abs(grid).max(axis=1)
    interior = sup <= R
    mu = np.ones(total)
    return GraphWithBoundary(vertices, W, mu, interior, tuple([0] * n))


def _radial_graph(alpha, R, max_vertices):
    sizes = [1] + [int(np.ceil(r ** (alpha - 1))) for r in range(1, R + 2)]
    total = int(np.sum(sizes))
    if total > max_vertices:
        raise ResourceLimitError(
            f"radial graph would have {total} vertices (cap {max_vertices})")
    vertices = []
    for r, size in enumerate(sizes):
        vertices += [(r, i) for i in range(size)]
    index = {v: i for i, v in enumerate(vertices)}
    rows, cols = [], []

    def add_edge(u, v):
        rows.extend((index[u], index[v]))
        cols.extend((index[v], index[u]))

    for r in range(1, R + 2):
        n_par, n_chi = sizes[r - 1], sizes[r]
        for i in range(n_chi):
            # child i attaches to parent floor(i * n_par / n_chi): every parent
            # gets floor or ceil of n_chi / n_par children
            add_edge((r, i), (r - 1, (i * n_par) // n_chi))
        if sizes[r] == 2:
            add_edge((r, 0), (r, 1))
        elif sizes[r] >= 3:
            for i in range(sizes[r]):
                add_edge((r, i), (r, (i + 1) % sizes[r]))
    W = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(total, total))
    W.sum_duplicates()
    if W.nnz and W.data.max() > 1:
        W.data = np.minimum(W.data, 1.0)
    sphere = np.array([v[0] for v in vertices])
    interior = sphere <= R
    mu = np.ones(total)
    return GraphWithBoundary(vertices, W, mu, interior, (0, 0))


def _product_graph(base, m, max_vertices):
    nb = base.n_vertices
    total = nb * m
    if total > max_vertices:
        raise ResourceLimitError(
            f"product graph would have {total} vertices (cap {max_vertices})")
    vertices = [(v, k) for v in base.vertices for k in range(m)]
    # global index of (base i, cycle k) is i * m + k
    I = sp.identity(m, format="csr")
    C = sp.csr_matrix((np.ones(2 * m),
                       (list(range(m)) * 2,
                        [(k + 1) % m for k in range(m)] +
                        [(k - 1) % m for k in range(m)])), shape=(m, m))
    W = sp.kron(base.W, I, format="csr") + sp.kron(
        sp.identity(nb, format="csr"), C, format="csr")
    mu = np.repeat(base.mu, m)
    interior = np.repeat(base.interior_mask, m)
    origin = (base.vertices[base.origin], 0)
    return GraphWithBoundary(vertices, W, mu, interior, origin)


def generate_graph(spec: GeometrySpec, max_vertices=DEFAULT_MAX_VERTICES):
    """Instantiate a geometry family; raises ResourceLimitError above the cap."""
    if spec.family == "lattice":
        g = _lattice_graph(spec.dimension, spec.radius, max_vertices)
    elif spec.family == "radial":
        g = _radial_graph(spec.alpha, spec.radius, max_vertices)
    else:
        base = generate_graph(spec.base, max_vertices=max_vertices)
        g = _product_graph(base, spec.cycle, max_vertices)
    g.spec = spec
    return g


def ball_volume(g: GraphWithBoundary, x, r):
    """Module-level alias for g.ball_volume with label lookup."""
    if not isinstance(x, (int, np.integer)):
        x = g.index[x]
    return g.ball_volume(int(x), r)


# -- exhaustions ------------------------------------------------------------


class Exhaustion:
    """Nested interior balls Omega_0 c Omega_1 c ... used for tail limits.

    `sets[k]` holds interior vertex indices of the ball of radius radii[k]
    around the origin; `complement(k)` is the discrete "neighborhood of
    infinity" interior \\ Omega_k.  `cutoff(k)` interpolates linearly in the
    hop distance between 1 on Omega_k and 0 outside Omega_{k+1}.
    """

    def __init__(self, graph: GraphWithBoundary, radii, sets):
        self.graph = graph
        self.radii = list(radii)
        self.sets = sets

    def __len__(self):
        return len(self.sets)

    def complement(self, k):
        return np.flatnonzero(self.complement_mask(k))

    def complement_mask(self, k):
        mask = self.graph.interior_mask.copy()
        mask[self.sets[k]] = False
        return mask

    def cutoff(self, k):
        if k + 1 >= len(self.sets):
            raise GeometryError("cutoff(k) needs level k+1 in the exhaustion")
        d = self.graph.distances_from_origin()
        r0, r1 = self.radii[k], self.radii[k + 1]
        chi = np.clip((r1 - d) / (r1 - r0), 0.0, 1.0)
        chi[~np.isfinite(d)] = 0.0
        return chi

    def covers_interior(self):
        return self.sets[-1].size == self.graph.n_interior


def build_exhaustion(g: GraphWithBoundary, radii: Sequence[int]) -> Exhaustion:
    radii = [int(r) for r in radii]
    if len(radii) == 0:
        raise GeometryError("need at least one radius")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise GeometryError("radii must be strictly increasing")
    if radii[0] < 0:
        raise GeometryError("radii must be nonnegative")
    if radii[-1] >= g.origin_boundary_distance():
        raise GeometryError(
            f"largest radius {radii[-1]} must stay below the distance "
            f"{g.origin_boundary_distance():.0f} from origin to boundary")
    sets = [g.interior_ball(r) for r in radii]
    if sets[0].size == 0:
        raise GeometryError("first exhaustion set is empty")
    return Exhaustion(g, radii, sets)


# -- growth exponents -------------------------------------------------------


@dataclass(frozen=True)
class GrowthExponents:
    """Fitted two-sided volume growth envelope.

    (r/s)^nu_prime <= V(x,r)/V(x,s) <= (r/s)^nu holds (times `constant`)
    on every sampled pair, up to `residual` in log scale.
    """

    nu: float
    nu_prime: float
    constant: float
    residual: float
    n_pairs: int = 0

    def __post_init__(self):
        if self.nu < self.nu_prime:
            raise GeometryError("envelope must satisfy nu >= nu_prime")


def fit_growth_exponents(g: GraphWithBoundary, sample_pairs=200, seed=0,
                         radius_window=None, max_anchors=8) -> GrowthExponents:
    """Fit two-sided growth exponents from log-volume regression slopes.

    Anchors are sampled near the origin; per anchor the radii are confined to
    a window where balls are complete (they do not leak past the boundary
    shell), by default [max(4, ceil(h/2)), h] with h the anchor's distance to
    the boundary.  Each anchor contributes its least-squares slope of
    log V(x, r) - log V(x, s) against log(r/s); the envelope over anchors
    gives (nu, nu'), and the residual records the worst per-pair violation of
    the resulting two-sided bound.
    """
    if sample_pairs < 1:
        raise GeometryError("sample_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    d0 = g.distances_from_origin()
    near = np.flatnonzero((d0 <= 2) & g.interior_mask &
                          (np.arange(g.n_vertices) != g.origin))
    if near.size > max_anchors - 1:
        keep = rng.choice(near.size, size=max_anchors - 1, replace=False)
        near = near[np.sort(keep)]
    near = np.concatenate([[g.origin], near])
    obd = g.origin_boundary_distance()
    slopes = []
    pairs = []
    budget = max(1, sample_pairs // max(1, near.size))
    for x in near:
        hi = int(obd - d0[x])
        if radius_window is not None:
            lo = max(2, int(radius_window[0]))
            hi = min(hi, int(radius_window[1]))
        else:
            lo = max(4, int(np.ceil(hi / 2)))
            if hi <= lo:
                # small truncations: fall back to the widest usable window
                lo = max(2, hi // 2)
        if hi <= lo:
            continue
        vols = {r: g.ball_volume(int(x), r) for r in range(lo, hi + 1)}
        anchor_pairs = [(np.log(vols[r] / vols[s]), np.log(r / s))
                        for s in range(lo, hi)
                        for r in range(s + 1, hi + 1)]
        if len(anchor_pairs) > budget:
            keep = rng.choice(len(anchor_pairs), size=budget, replace=False)
            anchor_pairs = [anchor_pairs[i] for i in np.sort(keep)]
        dv = np.array([a for a, _ in anchor_pairs])
        dr = np.array([b for _, b in anchor_pairs])
        if np.all(dv == 0):
            continue
        slopes.append(float(np.sum(dv * dr) / np.sum(dr * dr)))
        pairs.extend(anchor_pairs)
    if not pairs:
        raise DegenerateGeometryError(
            "no admissible radius pairs with varying volumes to fit")
    nu, nu_prime = float(max(slopes)), float(min(slopes))
    dlogv = np.array([a for a, _ in pairs])
    dlogr = np.array([b for _, b in pairs])
    viol = np.maximum(nu_prime * dlogr - dlogv, dlogv - nu * dlogr)
    return GrowthExponents(nu=nu, nu_prime=nu_prime, constant=1.0,
                           residual=float(max(0.0, float(viol.max()))),
                           n_pairs=len(pairs))


# -- volume criteria --------------------------------------------------------


@dataclass
class VolumeCriteriaReport:
    p: float
    horizon: int
    vp_partial_sums: np.ndarray
    vp_classification: str
    tilde_vp_partial_sums: np.ndarray
    tilde_vp_classification: str
    lower_growth_constant: float
    vp_decay_exponent: float = field(default=np.nan)
    tilde_vp_decay_exponent: float = field(default=np.nan)


def _classify_decay(summands, margin=0.1, band=0.1):
    """Classify sum_t a_t from the fitted decay a_t ~ t^{-s} on the tail.

    converges iff s > 1 + margin, diverges iff s < 1 - band, else marginal
    (finite data cannot settle the borderline case).
    """
    t = np.arange(1, len(summands) + 1, dtype=float)
    tail = slice(len(summands) // 2, None)
    a = np.asarray(summands, dtype=float)[tail]
    tt = t[tail]
    good = a > 0
    if good.sum() < 2:
        return "converges", np.inf  # summands vanish identically on the tail
    s = -np.polyfit(np.log(tt[good]), np.log(a[good]), 1)[0]
    if s > 1 + margin:
        return "converges", float(s)
    if s < 1 - band:
        return "diverges", float(s)
    return "marginal", float(s)


def volume_criteria(g: GraphWithBoundary, p: float, horizon: int) -> VolumeCriteriaReport:
    """Truncated volume summability tests and the power-growth constant.

    Computes the partial sums of (t/V(o,t))^{1/(p-1)} and V(o,t)^{-1/p} up to
    the horizon, classifies each tail, and fits the best constant C with
    V(o,t) >= C t^p on [1, horizon].
    """
    if p <= 1:
        raise GeometryError("volume criteria need p > 1")
    if horizon < 2:
        raise GeometryError("horizon must be >= 2")
    if horizon > g.interior_radius():
        raise GeometryError("horizon exceeds the interior radius")
    t = np.arange(1, horizon + 1)
    vols = np.array([g.ball_volume(g.origin, r) for r in t])
    vp_terms = (t / vols) ** (1.0 / (p - 1.0))
    tvp_terms = vols ** (-1.0 / p)
    vp_class, vp_s = _classify_decay(vp_terms)
    tvp_class, tvp_s = _classify_decay(tvp_terms)
    c_lower = float(np.min(vols / t.astype(float) ** p))
    return VolumeCriteriaReport(
        p=p, horizon=horizon,
        vp_partial_sums=np.cumsum(vp_terms),
        vp_classification=vp_class,
        tilde_vp_partial_sums=np.cumsum(tvp_terms),
        tilde_vp_classification=tvp_class,
        lower_growth_constant=c_lower,
        vp_decay_exponent=vp_s,
        tilde_vp_decay_exponent=tvp_s,
    )
