"""Schrodinger operators P = Delta_mu + V on graphs with boundary.

The interior matrix acts on functions that vanish on the boundary:

    (P u)(x) = (1/mu(x)) * sum_y w_xy (u(x) - u(y)) + V(x) u(x)

for interior x, with neighbors y running over the full graph.  Boundary data
enters Dirichlet problems as an affine term, never as matrix unknowns.  The
matrix is self-adjoint for the mu-weighted inner product; the symmetrized
form S = M^{1/2} P M^{-1/2} backs all spectral computations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import _solvers
from .geometry import Exhaustion, GraphWithBoundary


class OperatorError(ValueError):
    pass


class Potential:
    """Real vertex function with positive / negative part decomposition."""

    def __init__(self, graph: GraphWithBoundary, values):
        self.graph = graph
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (graph.n_vertices,):
            raise OperatorError("potential must be defined on every vertex")

    @property
    def plus(self):
        return np.maximum(self.values, 0.0)

    @property
    def minus(self):
        return np.maximum(-self.values, 0.0)

    def __neg__(self):
        return Potential(self.graph, -self.values)

    def __add__(self, other):
        if isinstance(other, Potential):
            return Potential(self.graph, self.values + other.values)
        return NotImplemented

    def scaled(self, s):
        return Potential(self.graph, s * self.values)

    def abs(self):
        return Potential(self.graph, np.abs(self.values))

    def positive_part(self):
        return Potential(self.graph, self.plus)

    def negative_part(self):
        """The function V_-; note V = V_+ - V_-."""
        return Potential(self.graph, self.minus)

    def support(self):
        return np.flatnonzero(self.values != 0)

    # -- closed-form families ------------------------------------------------

    @staticmethod
    def zero(graph):
        return Potential(graph, np.zeros(graph.n_vertices))

    @staticmethod
    def point_mass(graph, vertex, amplitude):
        v = np.zeros(graph.n_vertices)
        if not isinstance(vertex, (int, np.integer)):
            vertex = graph.index[vertex]
        v[int(vertex)] = amplitude
        return Potential(graph, v)

    @staticmethod
    def bump(graph, amplitude, radius, center=None):
        c = graph.origin if center is None else int(center)
        d = graph.hop_distances(c)
        v = np.where(d <= radius, float(amplitude), 0.0)
        return Potential(graph, v)

    @staticmethod
    def power_decay(graph, amplitude, beta):
        """V(x) = amplitude * d(x, o)^(-beta), with V(o) = amplitude."""
        d = np.maximum(graph.distances_from_origin(), 1.0)
        return Potential(graph, amplitude * d ** (-float(beta)))


@dataclass
class QuadraticFormValue:
    value: float
    gradient_energy: float
    potential_term: float


class SchrodingerOperator:
    """Assembled interior matrix of Delta_mu + V plus solver plumbing.

    Instances are cached per graph and potential so repeated assembly reuses
    factorizations and spectral bounds; construct via assemble_schrodinger
    or with_potential rather than the bare constructor when reuse matters.
    """

    def __init__(self, graph: GraphWithBoundary, potential: Potential):
        if potential.graph is not graph:
            raise OperatorError("potential was built for a different graph")
        self.graph = graph
        self.potential = potential
        W_II, W_IB, deg = graph.interior_matrix_parts
        self.W_II = W_II
        self.W_IB = W_IB
        mu = graph.mu[graph.interior]
        self.mu_interior = mu
        v = potential.values[graph.interior]
        inv_mu = sp.diags(1.0 / mu)
        lap = inv_mu @ (sp.diags(deg) - W_II)
        self.matrix = (lap + sp.diags(v)).tocsr()
        # mu-symmetrized form and the quadratic-form matrix M P
        sq = np.sqrt(mu)
        self.sqrt_mu = sq
        self.sym_matrix = (sp.diags(sq) @ self.matrix @ sp.diags(1.0 / sq)).tocsr()
        self.sym_matrix = (0.5 * (self.sym_matrix + self.sym_matrix.T)).tocsr()
        self.form_matrix = (sp.diags(mu) @ self.matrix).tocsr()
        self.form_matrix = (0.5 * (self.form_matrix + self.form_matrix.T)).tocsr()
        self._pencil = None
        self._form_pencil = None
        self._unit_measure = bool(np.all(mu == 1.0))

    @property
    def n(self):
        return self.graph.n_interior

    @property
    def pencil(self) -> _solvers.SymmetricPencil:
        if self._pencil is None:
            self._pencil = _solvers.SymmetricPencil(self.sym_matrix)
            self._install_box_bounds()
        return self._pencil

    @property
    def form_pencil(self) -> _solvers.SymmetricPencil:
        """Factorized quadratic-form matrix M P (equals the symmetrized
        matrix for a unit measure, so the factorization is shared)."""
        if self._unit_measure:
            return self.pencil
        if self._form_pencil is None:
            self._form_pencil = _solvers.SymmetricPencil(self.form_matrix)
        return self._form_pencil

    def _install_box_bounds(self):
        # closed-form bottom eigenvalue of the unit Dirichlet box: saves an
        # iterative eigensolve on every large lattice operator.  A potential
        # with negative part V_- supported on a modest set scales the bound
        # by (1 - m), m the mass-vs-energy eigenvalue of V_- (low-rank exact)
        g = self.graph
        spec = g.spec
        if (spec is None or spec.family != "lattice"
                or self.n <= _solvers.DENSE_SPECTRAL_MAX
                or np.any(g.mu != 1.0) or np.any(g.W.data != 1.0)):
            return
        m1 = 2 * spec.radius + 1
        lam = 2.0 * spec.dimension * (1.0 - np.cos(np.pi / (m1 + 1)))
        hi = self._pencil.gershgorin_upper()
        vminus = self.potential.minus[g.interior]
        idx = np.flatnonzero(vminus > 0)
        if idx.size == 0:
            self._pencil.set_lambda_bounds(lam, hi)
            return
        if idx.size > 2000:
            return
        base = assemble_schrodinger(g, Potential.zero(g))
        m = _solvers.pencil_lambda_max_lowrank(
            vminus[idx] * self.mu_interior[idx], base.form_pencil, idx)
        if m < 1:
            self._pencil.set_lambda_bounds((1.0 - m) * lam, hi)

    def lambda_min(self):
        """Smallest eigenvalue of the symmetrized interior matrix."""
        return self.pencil.lambda_min()

    def norm_scale(self):
        return self.pencil.gershgorin_upper()

    # -- actions -------------------------------------------------------------

    def apply(self, u_interior):
        return self.matrix @ u_interior

    def apply_full(self, u_full):
        """P u for u given on all vertices (interior result; boundary data used)."""
        u = np.asarray(u_full, dtype=float)
        g = self.graph
        out = self.matrix @ u[g.interior]
        out -= (self.W_IB @ u[g.boundary]) / self.mu_interior
        return out

    def boundary_term(self, f_boundary):
        """Affine Dirichlet contribution (1/mu) W_IB f of boundary data f."""
        return (self.W_IB @ np.asarray(f_boundary, dtype=float)) / self.mu_interior

    def solve(self, rhs_interior, tol=_solvers.CG_TOL):
        """P^{-1} applied to an interior function (zero boundary data)."""
        rhs = np.asarray(rhs_interior, dtype=float)
        sq = self.sqrt_mu
        if rhs.ndim == 1:
            return self.pencil.solve(sq * rhs, tol=tol) / sq
        return self.pencil.solve(sq[:, None] * rhs, tol=tol) / sq[:, None]

    def solve_dirichlet(self, boundary_values, rhs_interior=None):
        """Solve P u = rhs in the interior with u = boundary_values on the shell.

        Returns u on all vertices.
        """
        g = self.graph
        f = np.asarray(boundary_values, dtype=float)
        if f.shape == (g.n_vertices,):
            f = f[g.boundary]
        rhs = np.zeros(self.n) if rhs_interior is None else np.asarray(rhs_interior)
        u_int = self.solve(rhs + self.boundary_term(f))
        u = np.zeros(g.n_vertices)
        u[g.interior] = u_int
        u[g.boundary] = f
        return u

    def to_interior(self, u_full):
        return np.asarray(u_full, dtype=float)[self.graph.interior]

    def from_interior(self, u_interior, boundary_values=0.0):
        u = np.full(self.graph.n_vertices, 0.0)
        u[self.graph.interior] = u_interior
        if np.ndim(boundary_values) == 0:
            u[self.graph.boundary] = boundary_values
        else:
            u[self.graph.boundary] = np.asarray(boundary_values)[self.graph.boundary]
        return u

    def with_potential(self, potential: Potential):
        return assemble_schrodinger(self.graph, potential)

    def __repr__(self):
        return f"SchrodingerOperator(n_interior={self.n})"


def assemble_schrodinger(g: GraphWithBoundary, v: Potential) -> SchrodingerOperator:
    cache = getattr(g, "_operator_cache", None)
    if cache is None:
        cache = {}
        g._operator_cache = cache
    key = v.values.tobytes()
    if key not in cache:
        cache[key] = SchrodingerOperator(g, v)
    return cache[key]


def laplacian(g: GraphWithBoundary) -> SchrodingerOperator:
    return assemble_schrodinger(g, Potential.zero(g))


def quadratic_form(op: SchrodingerOperator, u_full) -> QuadraticFormValue:
    """Energy q(u) = 1/2 sum w_xy (u(x)-u(y))^2 + sum V u^2 mu, u = 0 on boundary."""
    g = op.graph
    u = np.asarray(u_full, dtype=float)
    if u.shape == (g.n_interior,):
        u = op.from_interior(u)
    if np.any(u[g.boundary] != 0):
        raise OperatorError("quadratic form requires u = 0 on the boundary")
    rows, cols, w = g.edge_list()
    grad = float(np.sum(w * (u[rows] - u[cols]) ** 2))
    pot = float(np.sum(op.potential.values * u ** 2 * g.mu))
    return QuadraticFormValue(value=grad + pot, gradient_energy=grad,
                              potential_term=pot)


def split_potential(v: Potential, ex: Exhaustion, k: int):
    """Split V_- into the compactly supported head V_- * 1_{Omega_k} and tail.

    Returns (V_minus_head, V_minus_tail, V_plus) as Potentials; the head is
    the hard indicator restriction so the split is idempotent.
    """
    if not (0 <= k < len(ex.sets)):
        raise OperatorError("invalid exhaustion index")
    minus = v.minus
    head = np.zeros_like(minus)
    head[ex.sets[k]] = minus[ex.sets[k]]
    tail = minus - head
    return (Potential(v.graph, head), Potential(v.graph, tail),
            Potential(v.graph, v.plus))


H_TRANSFORM_RTOL = 1e-8


def h_transform(op: SchrodingerOperator, h):
    """Ground-state (Doob) transform by a positive P-harmonic function h.

    Returns (transformed graph, transformed operator) with conductances
    w h(x) h(y), measure h^2 mu and zero potential.  The transformed matrix
    conjugates the original one exactly: diag(h)^{-1} P diag(h); the constant
    function is annihilated by construction.
    """
    g = op.graph
    h = np.asarray(h, dtype=float)
    if h.shape != (g.n_vertices,):
        raise OperatorError("h must be defined on every vertex")
    if np.any(h <= 0):
        raise OperatorError("h must be strictly positive")
    res = np.max(np.abs(op.apply_full(h)))
    tol = H_TRANSFORM_RTOL * (1.0 + op.norm_scale() * np.max(np.abs(h)))
    if res > tol:
        raise OperatorError(
            f"h is not P-harmonic: residual {res:.3e} exceeds {tol:.3e}")
    H = sp.diags(h)
    W_new = (H @ g.W @ H).tocsr()
    mu_new = h ** 2 * g.mu
    g_new = GraphWithBoundary(g.vertices, W_new, mu_new, g.interior_mask,
                              g.vertices[g.origin], spec=g.spec, validate=False)
    op_new = SchrodingerOperator(g_new, Potential.zero(g_new))
    return g_new, op_new


def conjugation_residual(op: SchrodingerOperator, h, op_transformed):
    """Max-norm of diag(h)^{-1} P diag(h) - P_h over the interior block."""
    g = op.graph
    hi = h[g.interior]
    conj = sp.diags(1.0 / hi) @ op.matrix @ sp.diags(hi)
    diff = conj - op_transformed.matrix
    # off-diagonals agree exactly; the diagonal residue equals (P h)/h
    return abs(diff).max() if diff.nnz else 0.0
