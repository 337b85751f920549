"""Heat kernels of Delta + V, Gaussian envelope fits and kernel identities.

Kernels follow the measure convention (e^{-tP} f)(x) = sum_y p_t(x,y) f(y) mu(y),
which makes every table symmetric.  Below the dense spectral cap the kernel
comes from one cached eigendecomposition; above it only selected columns are
computed, through the exponential-times-vector evaluation of the symmetrized
matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _solvers
from .operators import Potential, SchrodingerOperator, h_transform

DENSE_KERNEL_MAX = _solvers.DENSE_SPECTRAL_MAX


class HeatError(RuntimeError):
    pass


class KernelSizeError(HeatError):
    pass


@dataclass
class HeatKernelTable:
    """p_t(x, y) for x over the interior and y over `targets`.

    `targets` holds positions in the interior ordering; None means the full
    interior (dense table).  `entries[i, j] = p_t(interior[i], targets[j])`.
    """

    t: float
    entries: np.ndarray
    operator: SchrodingerOperator
    targets: Optional[np.ndarray] = None

    @property
    def is_full(self):
        return self.targets is None

    def column(self, j):
        return self.entries[:, j]

    def symmetric_defect(self):
        if not self.is_full:
            sub = self.entries[self.targets, :]
            return float(np.max(np.abs(sub - sub.T)))
        return float(np.max(np.abs(self.entries - self.entries.T)))


def heat_kernel(op: SchrodingerOperator, t: float,
                targets: Optional[Sequence[int]] = None) -> HeatKernelTable:
    """Heat kernel table at time t.

    Dense spectra below DENSE_KERNEL_MAX interior vertices; larger operators
    must pass `targets` (interior positions) and get those columns only.
    """
    if t <= 0:
        raise HeatError("time must be positive")
    n = op.n
    sq = op.sqrt_mu
    if targets is None:
        if n > DENSE_KERNEL_MAX:
            raise KernelSizeError(
                f"full kernel needs <= {DENSE_KERNEL_MAX} interior vertices "
                f"(got {n}); pass targets for column evaluation")
        w, V = op.pencil.eigh()
        ew = np.exp(-t * w)
        K = (V * ew[None, :]) @ V.T
        K = K / sq[:, None] / sq[None, :]
        K = 0.5 * (K + K.T)
        return HeatKernelTable(t=t, entries=K, operator=op, targets=None)
    targets = np.asarray(targets, dtype=int)
    B = np.zeros((n, targets.size))
    B[targets, np.arange(targets.size)] = 1.0 / sq[targets]
    cols = op.pencil.expm_apply(t, B)
    cols = cols / sq[:, None]
    # enforce the exact symmetry of the continuous object on the overlap
    sub = cols[targets, :]
    cols[targets, :] = 0.5 * (sub + sub.T)
    return HeatKernelTable(t=t, entries=cols, operator=op, targets=targets)


def kernel_mu_product(a: HeatKernelTable, b: HeatKernelTable) -> np.ndarray:
    """Chapman-Kolmogorov composition (p_a *_mu p_b), dense tables only."""
    if a.operator is not b.operator:
        raise HeatError("kernels must come from the same operator")
    if not (a.is_full and b.is_full):
        raise HeatError("composition of column tables goes through "
                        "semigroup_defect")
    mu = a.operator.mu_interior
    return a.entries @ (mu[:, None] * b.entries)


def semigroup_defect(op: SchrodingerOperator, t: float, s: float,
                     targets=None) -> float:
    """max |p_{t+s} - p_t *_mu p_s| over the computed entries."""
    if targets is None and op.n <= DENSE_KERNEL_MAX:
        kt = heat_kernel(op, t)
        ks = heat_kernel(op, s) if s != t else kt
        kts = heat_kernel(op, t + s)
        comp = kernel_mu_product(kt, ks)
        return float(np.max(np.abs(kts.entries - comp)))
    if targets is None:
        raise KernelSizeError("large operators need explicit targets")
    targets = np.asarray(targets, dtype=int)
    ks = heat_kernel(op, s, targets=targets)
    mu = op.mu_interior
    sq = op.sqrt_mu
    comp = op.pencil.expm_apply(t, sq[:, None] * ks.entries) / sq[:, None]
    kts = heat_kernel(op, t + s, targets=targets)
    return float(np.max(np.abs(kts.entries - comp)))


@dataclass
class DominationReport:
    nonnegative: bool
    min_entry: float
    max_violation_vs_negative_part: float
    max_violation_vs_base: Optional[float]
    passed: bool


def domination_check(kernel_base: HeatKernelTable, kernel_v: HeatKernelTable,
                     kernel_neg: HeatKernelTable,
                     slack: float = 1e-11) -> DominationReport:
    """Check 0 <= p_t^V <= p_t^{-V_-} entrywise, and p_t^V <= p_t for V >= 0.

    `kernel_base` is the V = 0 kernel, `kernel_neg` the one for -V_-.
    """
    for k in (kernel_v, kernel_neg, kernel_base):
        if k.t != kernel_base.t:
            raise HeatError("kernels must share the time")
    pv = kernel_v.entries
    pneg = kernel_neg.entries
    min_entry = float(pv.min())
    viol_neg = float(np.max(pv - pneg))
    v_values = kernel_v.operator.potential.values
    viol_base = None
    if np.all(v_values >= 0):
        viol_base = float(np.max(pv - kernel_base.entries))
    scale = float(np.max(np.abs(pv))) + 1e-300
    passed = (min_entry >= -slack * scale and viol_neg <= slack * scale and
              (viol_base is None or viol_base <= slack * scale))
    return DominationReport(nonnegative=min_entry >= -slack * scale,
                            min_entry=min_entry,
                            max_violation_vs_negative_part=viol_neg,
                            max_violation_vs_base=viol_base, passed=passed)


# -- Gaussian envelopes ------------------------------------------------------


C_GRID = tuple(0.05 * j for j in range(1, 41))
ENVELOPE_BUDGET = 3.0


@dataclass
class GaussianFit:
    c_upper: float
    C_upper: float
    c_lower: Optional[float]
    C_lower: Optional[float]
    samples: list
    max_violation: float = 0.0


def gaussian_envelope_fit(kernels: Sequence[HeatKernelTable],
                          d_max: float, t_range=None, per_distance=4,
                          fit_lower=True, interior_margin=True,
                          require_grid=True) -> GaussianFit:
    """Fit Gaussian envelope constants over a sampled (x, y, t) grid.

    Sources y are the kernels' target columns (the full interior collapses to
    the origin column); per source, up to `per_distance` witnesses x are kept
    at every hop distance <= d_max.  For each c on a fixed grid,
    C(c) = max over samples of p_t(x,y) V(x, sqrt t) exp(+c d(x,y)^2 / t);
    the fit keeps the largest c whose constant stays within a fixed budget of
    the c -> 0 constant, so envelopes of different operators are comparable.
    The lower envelope is fitted symmetrically (smallest c within budget of
    the most permissive constant).  Samples keep x and y away from the
    Dirichlet shell by a quarter of the origin depth.
    """
    if not kernels:
        raise HeatError("need at least one kernel")
    op = kernels[0].operator
    g = op.graph
    interior = g.interior
    d_origin = g.distances_from_origin()
    depth = g.origin_boundary_distance()

    def deep_enough(global_idx):
        return (depth - d_origin[global_idx]) >= depth / 4.0

    samples = []
    for K in kernels:
        if t_range is not None and not (t_range[0] <= K.t <= t_range[1]):
            continue
        if K.is_full:
            cols = [int(g.interior_pos[g.origin])]
        else:
            cols = list(range(K.targets.size))
        for j in cols:
            y_pos = j if K.is_full else int(K.targets[j])
            y_global = interior[y_pos]
            if interior_margin and not deep_enough(y_global):
                continue
            dx = g.hop_distances(y_global)
            for d in range(int(d_max) + 1):
                at_d = np.flatnonzero((dx[interior] == d))
                kept = 0
                for i in at_d:
                    x_global = interior[i]
                    if interior_margin and not deep_enough(x_global):
                        continue
                    vol = g.ball_volume(int(x_global), np.sqrt(K.t))
                    samples.append((int(i), j, K.t, float(d),
                                    float(K.entries[i, j]), vol))
                    kept += 1
                    if kept >= per_distance:
                        break
    if not samples:
        raise HeatError("no admissible samples for the envelope fit")
    if require_grid:
        n_t = len({s[2] for s in samples})
        n_d = len({s[3] for s in samples})
        if n_t < 3 or n_d < 3:
            raise HeatError(
                f"envelope fit needs >= 3 times and >= 3 distances "
                f"(got {n_t} times, {n_d} distances)")
    p = np.array([s[4] for s in samples])
    vol = np.array([s[5] for s in samples])
    d2t = np.array([s[3] ** 2 / s[2] for s in samples])
    base = p * vol
    C0 = float(np.max(base))
    c_upper, C_upper = 0.0, C0
    for c in C_GRID:
        Cc = float(np.max(base * np.exp(c * d2t)))
        if Cc <= ENVELOPE_BUDGET * C0:
            c_upper, C_upper = c, Cc
        else:
            break
    c_lower = C_lower = None
    if fit_lower:
        if np.any(p <= 0):
            raise HeatError("negative kernel entries in the lower-fit region")
        cmax = C_GRID[-1]
        ref = float(np.min(base * np.exp(cmax * d2t)))
        for c in C_GRID:
            Cc = float(np.min(base * np.exp(c * d2t)))
            if Cc >= ref / ENVELOPE_BUDGET:
                c_lower, C_lower = c, Cc
                break
    return GaussianFit(c_upper=c_upper, C_upper=C_upper, c_lower=c_lower,
                       C_lower=C_lower, samples=samples)


def envelope_constant_at(fit_samples, c):
    """Upper constant of a sample set at a prescribed decay rate c."""
    p = np.array([s[4] for s in fit_samples])
    vol = np.array([s[5] for s in fit_samples])
    d2t = np.array([s[3] ** 2 / s[2] for s in fit_samples])
    return float(np.max(p * vol * np.exp(c * d2t)))


def envelope_violations(fit: GaussianFit):
    """Re-assert the envelope inequalities on the fit's own samples."""
    worst_upper = 0.0
    worst_lower = 0.0
    for (_, _, t, d, p, vol) in fit.samples:
        upper = fit.C_upper / vol * np.exp(-fit.c_upper * d * d / t)
        worst_upper = max(worst_upper, p - upper)
        if fit.c_lower is not None:
            lower = fit.C_lower / vol * np.exp(-fit.c_lower * d * d / t)
            worst_lower = max(worst_lower, lower - p)
    return worst_upper, worst_lower


_PATH_SPECTRA = {}


def path_interior_spectrum(m: int):
    """Eigendecomposition of the Dirichlet path Laplacian tridiag(-1, 2, -1).

    The interior heat kernel of lattice(n, R) is the n-fold Kronecker factor
    of this m = 2R+1 point kernel, since the box Laplacian is a Kronecker sum.
    """
    if m not in _PATH_SPECTRA:
        S = (2.0 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1))
        _PATH_SPECTRA[m] = np.linalg.eigh(S)
    return _PATH_SPECTRA[m]


def path_heat_kernel(m: int, t: float):
    w, V = path_interior_spectrum(m)
    return (V * np.exp(-t * w)[None, :]) @ V.T


def h_transform_kernel_check(opV: SchrodingerOperator, g_solution,
                             ts: Sequence[float], targets=None) -> float:
    """Max relative error of the transform identity p_t^h g(x) g(y) = p_t^V.

    Builds the ground-state transform of Delta + V by g, computes both heat
    kernels and compares them on the shared sample.
    """
    g_vec = np.asarray(
        getattr(g_solution, "g", g_solution), dtype=float)
    _, op_h = h_transform(opV, g_vec)
    gi = g_vec[opV.graph.interior]
    worst = 0.0
    for t in ts:
        kv = heat_kernel(opV, t, targets=targets)
        kh = heat_kernel(op_h, t, targets=targets)
        if kv.is_full:
            lhs = kh.entries * gi[:, None] * gi[None, :]
        else:
            lhs = kh.entries * gi[:, None] * gi[kv.targets][None, :]
        scale = float(np.max(np.abs(kv.entries)))
        worst = max(worst, float(np.max(np.abs(lhs - kv.entries))) / scale)
    return worst
