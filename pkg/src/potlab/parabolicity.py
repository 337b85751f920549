"""p-capacities, parabolic / hyperbolic classification and the parabolic
dimension of truncation families.

The p-capacity of a target set is the minimum of the edge Dirichlet p-energy
sum_e w_e |u(x) - u(y)|^p over functions pinned to 1 on the target and 0 on
the boundary shell.  p = 2 is one linear solve; other p run damped
iteratively reweighted linear solves.  A family of growing truncations is
classified parabolic when the capacities decay to zero, hyperbolic when they
saturate at a positive limit; bisection over p locates the crossover
exponent and brackets the parabolic dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import _solvers
from .geometry import GraphWithBoundary
from .operators import laplacian


class CapacityError(RuntimeError):
    pass


IRLS_MAX_ITER = 500
IRLS_DAMPING = 0.5
IRLS_DELTA_FACTOR = 1e-8


@dataclass
class CapacityResult:
    value: float
    minimizer: np.ndarray
    p: float
    iterations: int
    final_decrement: float
    converged: bool


def _edge_structure(g: GraphWithBoundary):
    rows, cols, w = g.edge_list()
    n = g.n_vertices
    ne = rows.size
    data = np.concatenate([np.ones(ne), -np.ones(ne)])
    idx = np.concatenate([np.arange(ne), np.arange(ne)])
    jdx = np.concatenate([cols, rows])
    D = sp.csr_matrix((data, (idx, jdx)), shape=(ne, n))
    return D, w


def p_energy(g: GraphWithBoundary, u, p):
    D, w = _edge_structure(g)
    return float(np.sum(w * np.abs(D @ u) ** p))


def p_capacity(g: GraphWithBoundary, target, p, tol=1e-8,
               max_iter=IRLS_MAX_ITER, x0=None) -> CapacityResult:
    """Minimize the edge p-energy with u = 1 on target, 0 on the boundary.

    Exact linear solve at p = 2; otherwise IRLS with regularized weights
    (|du|^2 + delta^2)^{(p-2)/2}, halving steps whenever the true energy
    increases, until the relative energy decrement falls below tol.
    """
    if p <= 1:
        raise CapacityError("capacity needs p > 1")
    target = np.asarray(target, dtype=int)
    if target.size == 0:
        raise CapacityError("target must be nonempty")
    if not np.all(g.interior_mask[target]):
        raise CapacityError("target must consist of interior vertices")
    n = g.n_vertices
    fixed = np.zeros(n, dtype=bool)
    fixed[target] = True
    fixed[g.boundary] = True
    free = np.flatnonzero(~fixed)
    u = np.zeros(n)
    u[target] = 1.0
    D, w = _edge_structure(g)

    def solve_weighted(edge_w):
        L = D.T @ sp.diags(edge_w * w) @ D
        L_ff = L[free][:, free].tocsr()
        rhs = -(L[free][:, fixed] @ u[fixed])
        pencil = _solvers.SymmetricPencil(L_ff)
        return pencil.solve(rhs)

    if free.size == 0:
        val = p_energy(g, u, p)
        return CapacityResult(value=val, minimizer=u, p=p, iterations=0,
                              final_decrement=0.0, converged=True)
    # p = 2 solve doubles as the IRLS warm start
    u[free] = solve_weighted(np.ones(w.size))
    if p == 2:
        val = p_energy(g, u, 2)
        return CapacityResult(value=val, minimizer=np.clip(u, 0.0, 1.0), p=p,
                              iterations=1, final_decrement=0.0, converged=True)
    if x0 is not None:
        u[free] = np.asarray(x0, dtype=float)[free]
    jump0 = float(np.max(np.abs(D @ u))) or 1.0
    delta = IRLS_DELTA_FACTOR * jump0
    energy = p_energy(g, u, p)
    it = 0
    decrement = np.inf
    converged = False
    while it < max_iter:
        it += 1
        du = D @ u
        ew = (du ** 2 + delta ** 2) ** ((p - 2.0) / 2.0)
        v = u.copy()
        v[free] = solve_weighted(ew)
        step = 1.0
        new_energy = p_energy(g, v, p)
        while new_energy > energy and step > 1e-8:
            # damping on true-energy increase keeps the iteration monotone
            step *= IRLS_DAMPING
            v[free] = step * v[free] + (1 - step) * u[free]
            new_energy = p_energy(g, v, p)
        decrement = (energy - new_energy) / max(energy, 1e-300)
        u = v
        energy = new_energy
        if 0 <= decrement < tol:
            converged = True
            break
    u = np.clip(u, 0.0, 1.0)
    return CapacityResult(value=p_energy(g, u, p), minimizer=u, p=p,
                          iterations=it, final_decrement=float(decrement),
                          converged=converged)


# -- parabolic / hyperbolic classification -----------------------------------


HYPERBOLIC_LIMIT_RATIO = 0.45
SATURATION_DECREMENT = 0.05


@dataclass
class ClassificationTrace:
    radii: List[float]
    capacities: List[float]
    limit_fit: float
    decay_rate: float
    rel_last_decrement: float
    classification: str


def _extrapolate_capacity_limit(radii, caps):
    """Extrapolated limit of cap(R) under the model c + a R^(-b).

    The decrements d_i = y_i - y_{i+1} do not see c, so the decay rate b is
    solved from the ratio of the last to the first decrement (bisection on a
    monotone function of b), and c from the last level.  Returns (c, b);
    c is clipped to [0, min cap].
    """
    R = np.asarray(radii, dtype=float)
    y = np.asarray(caps, dtype=float)
    d = y[:-1] - y[1:]
    target = d[-1] / d[0]

    def decrement_ratio(b):
        return ((R[-2] ** -b - R[-1] ** -b)
                / (R[0] ** -b - R[1] ** -b))

    # b -> 0 limit of the ratio; a measured ratio at or above it means the
    # sequence is flatter than any power decay toward a positive limit
    limit0 = np.log(R[-1] / R[-2]) / np.log(R[1] / R[0])
    if target >= limit0 * (1 - 1e-9):
        return float(y[-1]), 0.0
    lo, hi = 1e-3, 12.0
    if target <= decrement_ratio(hi):
        return 0.0, hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if decrement_ratio(mid) > target:
            lo = mid
        else:
            hi = mid
    b = 0.5 * (lo + hi)
    a = d[0] / (R[0] ** -b - R[1] ** -b)
    c = float(y[-1] - a * R[-1] ** -b)
    return float(np.clip(c, 0.0, y.min())), float(b)


def classify_p_parabolic(family: Sequence[GraphWithBoundary], p,
                         tol=1e-8):
    """Classify a truncation family as p-parabolic or p-hyperbolic.

    Computes Cap_p of the unit ball at the origin inside each truncation.
    Saturated sequences (last relative decrement below 5%) read as
    hyperbolic directly; otherwise the capacity limit extrapolated from the
    decrement decay decides: a limit that retains at least 45% of the last
    value is hyperbolic, a smaller one parabolic.  Non-monotone data is
    flagged inconclusive.
    """
    if len(family) < 3:
        raise CapacityError("need at least 3 family members")
    radii = []
    caps = []
    for g in family:
        target = g.interior_ball(1)
        res = p_capacity(g, target, p, tol=tol)
        radii.append(g.origin_boundary_distance())
        caps.append(res.value)
    caps_arr = np.array(caps)
    rel_decr = float((caps_arr[-2] - caps_arr[-1]) / max(caps_arr[-2], 1e-300))
    decreasing = bool(np.all(np.diff(caps_arr) <= 1e-9 * caps_arr[0]))
    if not decreasing:
        limit, rate, cls = float(caps_arr[-1]), np.nan, "inconclusive"
    elif rel_decr < SATURATION_DECREMENT:
        limit, rate, cls = float(caps_arr[-1]), 0.0, "hyperbolic"
    else:
        limit, rate = _extrapolate_capacity_limit(radii, caps)
        ratio = limit / max(caps_arr[-1], 1e-300)
        cls = "hyperbolic" if ratio >= HYPERBOLIC_LIMIT_RATIO else "parabolic"
    trace = ClassificationTrace(radii=list(map(float, radii)),
                                capacities=caps, limit_fit=limit,
                                decay_rate=rate,
                                rel_last_decrement=rel_decr,
                                classification=cls)
    return cls, trace


@dataclass
class ParabolicDimension:
    kappa: float
    bracket: tuple
    evidence: dict
    exponent_window: Optional[tuple] = None
    consistent_with_exponents: Optional[bool] = None


def parabolic_dimension(family: Sequence[GraphWithBoundary], p_range,
                        bisection_steps=4, exponents=None,
                        tol=1e-8) -> ParabolicDimension:
    """Bisect on p between a hyperbolic and a parabolic endpoint.

    Inconclusive probes stop the bisection with the current bracket; kappa is
    reported as the bracket midpoint, never a point claim.  When growth
    exponents are supplied the bracket is checked against
    [nu' - 0.5, nu + 0.5].
    """
    p_lo, p_hi = float(p_range[0]), float(p_range[1])
    evidence = {}

    def probe(p):
        cls, trace = classify_p_parabolic(family, p, tol=tol)
        evidence[round(p, 6)] = trace
        return cls

    lo_cls = probe(p_lo)
    hi_cls = probe(p_hi)
    if lo_cls != "hyperbolic" or hi_cls != "parabolic":
        raise CapacityError(
            f"endpoints must bracket the transition: got {lo_cls} at {p_lo}, "
            f"{hi_cls} at {p_hi}")
    for _ in range(bisection_steps):
        mid = 0.5 * (p_lo + p_hi)
        cls = probe(mid)
        if cls == "hyperbolic":
            p_lo = mid
        elif cls == "parabolic":
            p_hi = mid
        else:
            break
    kappa = 0.5 * (p_lo + p_hi)
    window = None
    consistent = None
    if exponents is not None:
        window = (exponents.nu_prime - 0.5, exponents.nu + 0.5)
        consistent = bool(window[0] <= kappa <= window[1])
    return ParabolicDimension(kappa=kappa, bracket=(p_lo, p_hi),
                              evidence=evidence, exponent_window=window,
                              consistent_with_exponents=consistent)


# -- capacity vs volume -------------------------------------------------------


@dataclass
class CapacityVolumeReport:
    p: float
    radii: List[int]
    capacity_constants: List[float]
    volume_constants: List[float]
    capacity_stability: float
    volume_decay_exponent: float
    capacity_holds: bool
    volume_holds: bool
    consistent: bool


def capacity_volume_equivalence(g: GraphWithBoundary, p_list, r_list,
                                slack=4.0, tol=1e-8):
    """Consistency of the two relative lower bounds linking capacity, volume.

    For each p the capacity side measures the constants
    Cap_p(B(o,r)) r^p / V(o,r) over r (holds when stable within `slack`);
    the volume side fits the decay of (V(o,t)/V(o,r)) / (t/r)^p in t (holds
    when the curve does not decay toward zero).  The directions must agree:
    both hold or both fail.
    """
    reports = []
    horizon = int(g.origin_boundary_distance())
    for p in p_list:
        cap_consts = []
        vol_consts = []
        slopes = []
        for r in r_list:
            target = g.interior_ball(r)
            cap = p_capacity(g, target, p, tol=tol).value
            vol = g.ball_volume(g.origin, r)
            cap_consts.append(cap * float(r) ** p / vol)
            ts = np.arange(r + 1, horizon + 1)
            ratios = np.array([
                (g.ball_volume(g.origin, int(t)) / vol) / (t / r) ** p
                for t in ts])
            vol_consts.append(float(ratios.min()) if ratios.size else np.nan)
            if ratios.size >= 2:
                slopes.append(np.polyfit(np.log(ts), np.log(ratios), 1)[0])
        cap_arr = np.array(cap_consts)
        cap_stab = float(cap_arr.max() / cap_arr.min())
        vol_slope = float(np.min(slopes)) if slopes else np.nan
        cap_holds = bool(cap_stab <= slack)
        vol_holds = bool(vol_slope >= -0.05)
        reports.append(CapacityVolumeReport(
            p=float(p), radii=list(r_list), capacity_constants=cap_consts,
            volume_constants=vol_consts, capacity_stability=cap_stab,
            volume_decay_exponent=vol_slope, capacity_holds=cap_holds,
            volume_holds=vol_holds, consistent=bool(cap_holds == vol_holds)))
    return reports


# -- Hardy weights ------------------------------------------------------------


@dataclass
class HardyReport:
    p: float
    weight: np.ndarray
    lambda_max: float
    scaled_weight: np.ndarray
    ratios: List[float]
    exact: bool
    degenerate: bool = False


def hardy_from_h(g: GraphWithBoundary, h, p, trials=100, seed=0) -> HardyReport:
    """Hardy weight rho = max_e |d log h|^p at each vertex, scaled to hold.

    p = 2: the sharp constant is the top eigenvalue of the rho-mass form
    against the Dirichlet energy, and rho / lambda achieves equality.  Other
    p: random trial functions plus coordinate ascent lower-bound the best
    ratio and the scaled weight is checked against every trial found.
    """
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise CapacityError("h must be positive")
    logh = np.log(h)
    D, w = _edge_structure(g)
    rows, cols, _ = g.edge_list()
    dlog = np.abs(logh[cols] - logh[rows])
    rho = np.zeros(g.n_vertices)
    for e in range(rows.size):
        val = dlog[e] ** p
        rho[rows[e]] = max(rho[rows[e]], val)
        rho[cols[e]] = max(rho[cols[e]], val)
    if np.all(rho[g.interior] == 0):
        return HardyReport(p=p, weight=rho, lambda_max=0.0, scaled_weight=rho,
                           ratios=[], exact=False, degenerate=True)

    interior = g.interior
    mass = rho[interior] * g.mu[interior]

    def ratio(u_int):
        u = np.zeros(g.n_vertices)
        u[interior] = u_int
        num = float(np.sum(rho[interior] * u_int ** 2 * g.mu[interior])) \
            if p == 2 else float(np.sum(rho[interior] * np.abs(u_int) ** p
                                        * g.mu[interior]))
        den = float(np.sum(w * np.abs(D @ u) ** p))
        return num / den if den > 0 else 0.0

    op = laplacian(g)
    if p == 2:
        idx = np.flatnonzero(mass > 0)
        lam = _solvers.pencil_lambda_max_lowrank(
            mass[idx], _solvers.SymmetricPencil(op.form_matrix), idx)
        exact = True
    else:
        rng = np.random.default_rng(seed)
        lam = 0.0
        for _ in range(max(8, trials // 10)):
            u = rng.standard_normal(interior.size)
            r = ratio(u)
            for _ in range(40):  # crude coordinate-free ascent by rescaling
                grad_dir = rng.standard_normal(interior.size)
                for s in (0.3, 0.1, 0.03):
                    cand = u + s * grad_dir * np.linalg.norm(u) / \
                        max(np.linalg.norm(grad_dir), 1e-300)
                    rc = ratio(cand)
                    if rc > r:
                        u, r = cand, rc
                        break
            lam = max(lam, r)
        exact = False
    if lam <= 0:
        raise CapacityError("failed to find a positive Hardy ratio")
    scaled = rho / lam
    rng = np.random.default_rng(seed + 1)
    ratios = []
    for _ in range(trials):
        u = rng.standard_normal(interior.size)
        u_full = np.zeros(g.n_vertices)
        u_full[interior] = u
        num = float(np.sum(scaled[interior] * np.abs(u) ** p * g.mu[interior]))
        den = float(np.sum(w * np.abs(D @ u_full) ** p))
        ratios.append(num / den if den > 0 else 0.0)
    return HardyReport(p=p, weight=rho, lambda_max=lam, scaled_weight=scaled,
                       ratios=ratios, exact=exact)
