"""Dirichlet Green functions on exhaustion domains and criticality analysis.

A kernel table stores G(x, y) with the measure convention

    (G f)(x) = sum_y G(x, y) f(y) mu(y),

so applying the kernel is exactly the interior solve P^{-1} f.  Tables are
dense below the spectral cap and solver-backed (column on demand) above it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse.linalg as spla

from . import _solvers
from .geometry import Exhaustion
from .operators import Potential, SchrodingerOperator

LAMBDA_SIGN_RTOL = 1e-10
MONOTONICITY_SLACK = 1e-12


class GreenError(RuntimeError):
    pass


class NotPositiveError(GreenError):
    def __init__(self, message, lambda_min=None):
        super().__init__(message)
        self.lambda_min = lambda_min


class KernelTable:
    """Symmetric kernel K(x, y) over a domain of interior vertices.

    `domain` holds global vertex indices; `entries` materializes the dense
    matrix when the domain is small enough, while `apply` and `column`
    work at any size through the factorized solver.
    """

    def __init__(self, op: SchrodingerOperator, domain, pencil=None,
                 dense=None, mu=None):
        self.op = op
        self.domain = np.asarray(domain, dtype=int)
        self.mu = (op.graph.mu[self.domain] if mu is None else np.asarray(mu))
        self._dense = dense
        self._pencil = pencil
        self._sqrt_mu = np.sqrt(self.mu)

    @property
    def n(self):
        return self.domain.size

    def _solve(self, rhs):
        sq = self._sqrt_mu
        if rhs.ndim == 1:
            return self._pencil.solve(sq * rhs) / sq
        return self._pencil.solve(sq[:, None] * rhs) / sq[:, None]

    @property
    def entries(self):
        """Dense G matrix; materialized only below the dense spectral cap."""
        if self._dense is None:
            if self.n > _solvers.DENSE_SPECTRAL_MAX:
                raise _solvers.SolverError(
                    f"kernel table too large to materialize ({self.n})")
            inv = self._solve(np.eye(self.n))
            self._dense = inv / self.mu[None, :]
            self._dense = 0.5 * (self._dense + self._dense.T)
        return self._dense

    def apply(self, f_domain):
        """(G f)(x) = sum_y G(x,y) f(y) mu(y), i.e. the interior solve."""
        f = np.asarray(f_domain, dtype=float)
        if self._dense is not None:
            return self._dense @ (f * self.mu)
        return self._solve(f)

    def column(self, y_pos):
        """G(., y) for y given by its position in the domain ordering."""
        if self._dense is not None:
            return self._dense[:, y_pos].copy()
        e = np.zeros(self.n)
        e[y_pos] = 1.0
        return self._solve(e) / self.mu[y_pos]

    def diagonal_entry(self, pos):
        return float(self.column(pos)[pos])

    def pad_to(self, frame):
        """Dense entries zero-padded onto a larger index frame."""
        frame = np.asarray(frame, dtype=int)
        pos = {g: i for i, g in enumerate(frame)}
        idx = np.array([pos[g] for g in self.domain])
        out = np.zeros((frame.size, frame.size))
        out[np.ix_(idx, idx)] = self.entries
        return out


def _restricted_pencil(op: SchrodingerOperator, domain):
    """Symmetrized restriction of the interior matrix to `domain`."""
    pos = op.graph.interior_pos[domain]
    if np.any(pos < 0):
        raise GreenError("domain must consist of interior vertices")
    S = op.sym_matrix[pos][:, pos].tocsr()
    return _solvers.SymmetricPencil(S)


def dirichlet_green(op: SchrodingerOperator, domain=None) -> KernelTable:
    """Green function of P on a subdomain with Dirichlet conditions.

    Requires the restricted operator to be positive definite; the error
    carries the offending smallest eigenvalue.
    """
    if domain is None:
        domain = op.graph.interior
    domain = np.asarray(domain, dtype=int)
    if domain.size == op.graph.n_interior and np.array_equal(
            domain, op.graph.interior):
        pencil = op.pencil
    else:
        pencil = _restricted_pencil(op, domain)
    lam = pencil.lambda_min()
    if lam <= 0:
        raise NotPositiveError(
            f"restricted operator is not positive definite "
            f"(lambda_min={lam:.6e})", lambda_min=lam)
    return KernelTable(op, domain, pencil=pencil)


@dataclass
class MonotonicityReport:
    increasing: bool
    max_violation: float
    tail_increment: float
    diagonal_trace: np.ndarray


def exhaustion_green(op: SchrodingerOperator, ex: Exhaustion):
    """Green functions along an exhaustion plus the extrapolated table.

    Verifies the entrywise monotone increase of G^{Omega_n} (zero-padded),
    returns the largest-domain table as the extrapolation together with the
    Cauchy tail increment between the last two levels.
    """
    tables: List[KernelTable] = [dirichlet_green(op, dom) for dom in ex.sets]
    trace = np.array([t.column(_origin_pos(t, op))[
        _origin_pos(t, op)] for t in tables])
    small = all(t.n <= _solvers.DENSE_SPECTRAL_MAX for t in tables)
    max_violation = 0.0
    tail = np.inf
    if small:
        frame = ex.sets[-1]
        padded = [t.pad_to(frame) for t in tables]
        for A, B in zip(padded, padded[1:]):
            max_violation = max(max_violation, float(np.max(A - B)))
        tail = float(np.max(np.abs(padded[-1] - padded[-2]))) if len(padded) > 1 else np.inf
    else:
        cols = [t.column(_origin_pos(t, op)) for t in tables]
        for ta, ca, tb, cb in zip(tables, cols, tables[1:], cols[1:]):
            pos = {g: i for i, g in enumerate(tb.domain)}
            idx = np.array([pos[g] for g in ta.domain])
            max_violation = max(max_violation, float(np.max(ca - cb[idx])))
        tail = float(abs(trace[-1] - trace[-2])) if len(tables) > 1 else np.inf
    if max_violation > MONOTONICITY_SLACK:
        raise GreenError(
            f"Green monotonicity violated by {max_violation:.3e}; solver bug")
    report = MonotonicityReport(increasing=True, max_violation=max_violation,
                                tail_increment=tail, diagonal_trace=trace)
    return tables, tables[-1], report


def _origin_pos(table: KernelTable, op: SchrodingerOperator):
    pos = np.flatnonzero(table.domain == op.graph.origin)
    if pos.size == 0:
        raise GreenError("origin not contained in the domain")
    return int(pos[0])


@dataclass
class CriticalityReport:
    classification: str  # nonnegative-subcritical | critical | supercritical
    lambda_min: float
    ground_state: np.ndarray
    green_diagonal_trace: np.ndarray
    trace_classification: str
    trace_decay_exponent: float
    confidence: str = field(default="heuristic")

    @property
    def is_subcritical(self):
        return self.classification == "nonnegative-subcritical"


def _trace_growth(trace, radii):
    """Fit the decay of successive diagonal increments against the radius.

    Exponent < -0.5 reads as a convergent (bounded) trace, the discrete
    surrogate for transience; otherwise divergent.
    """
    trace = np.asarray(trace, dtype=float)
    if trace.size < 3:
        return "bounded", -np.inf
    inc = np.diff(trace)
    r = np.asarray(radii, dtype=float)[:-1]
    rel = inc / max(trace[-1], 1e-300)
    if np.all(rel < 1e-12):
        return "bounded", -np.inf
    good = inc > 0
    if good.sum() < 2:
        return "bounded", -np.inf
    slope = np.polyfit(np.log(r[good]), np.log(inc[good]), 1)[0]
    if slope < -0.5:
        return "bounded", float(slope)
    return "divergent", float(slope)


def classify_criticality(op: SchrodingerOperator, ex: Exhaustion) -> CriticalityReport:
    """Classify P as subcritical / critical / supercritical from finite data.

    Sign of the bottom eigenvalue decides nonnegativity; among nonnegative
    operators the growth of G^{Omega_n}(o, o) decides sub vs critical.
    Always returns a report; the trace rule is an explicit heuristic.
    """
    lam = op.lambda_min()
    tol = LAMBDA_SIGN_RTOL * max(op.norm_scale(), 1.0)
    n = op.n
    if n <= _solvers.DENSE_SPECTRAL_MAX:
        w, V = op.pencil.eigh()
        psi = V[:, 0]
    else:
        rng = np.random.default_rng(0xecce)
        X = rng.standard_normal((n, 2))
        vals, vecs = spla.lobpcg(op.sym_matrix, X, largest=False,
                                 tol=1e-7, maxiter=2000)
        psi = vecs[:, int(np.argmin(vals))]
    ground = psi / op.sqrt_mu
    if ground[np.argmax(np.abs(ground))] < 0:
        ground = -ground
    if lam < -tol:
        return CriticalityReport(
            classification="supercritical", lambda_min=lam, ground_state=ground,
            green_diagonal_trace=np.array([]), trace_classification="n/a",
            trace_decay_exponent=np.nan, confidence="eigenvalue")
    trace = []
    for dom in ex.sets:
        pencil = _restricted_pencil(op, dom)
        if pencil.lambda_min() <= 0:
            # proper subdomains of a nonnegative operator stay positive;
            # numerical zero here means effectively critical already
            break
        table = KernelTable(op, dom, pencil=pencil)
        trace.append(table.diagonal_entry(_origin_pos(table, op)))
    trace = np.array(trace)
    trace_cls, slope = _trace_growth(trace, ex.radii[:len(trace)])
    if trace_cls == "bounded":
        cls = "nonnegative-subcritical"
    else:
        cls = "critical"
    return CriticalityReport(
        classification=cls, lambda_min=lam, ground_state=ground,
        green_diagonal_trace=trace, trace_classification=trace_cls,
        trace_decay_exponent=slope)


def strong_subcriticality_epsilon(op_base: SchrodingerOperator,
                                  vminus: Potential) -> float:
    """Largest epsilon with  int V_- u^2 <= (1-eps) (q(u) + int V_+ u^2).

    op_base must be the assembled P + V_+ (positive definite); returns
    1 - lambda_max of the V_- mass form against the base quadratic form.
    Positive epsilon certifies strong subcriticality of V_-.
    """
    lam_base = op_base.lambda_min()
    if lam_base <= 0:
        raise NotPositiveError(
            f"base form is not positive (lambda_min={lam_base:.3e})",
            lambda_min=lam_base)
    g = op_base.graph
    if np.any(vminus.values < 0):
        raise GreenError("vminus must be the nonnegative part V_- itself")
    w = vminus.values[g.interior] * op_base.mu_interior
    idx = np.flatnonzero(w > 0)
    if idx.size == 0:
        return 1.0
    pencil = op_base.form_pencil
    if idx.size <= 300:
        # diagonal mass form: the pencil reduces exactly to a small matrix
        lam = _solvers.pencil_lambda_max_lowrank(w[idx], pencil, idx)
    else:
        import scipy.sparse as sp
        lam = _solvers.pencil_lambda_max(sp.diags(w), pencil)
    return 1.0 - lam
