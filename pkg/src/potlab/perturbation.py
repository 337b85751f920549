"""Perturbation-class norms and tail profiles for potentials.

Everything here measures a potential V against the Green function of a
reference operator: the h-weighted Green norm, its tail along an exhaustion
(Kato-type smallness at infinity), the double-Green profile used for small /
G-bounded perturbations, and a weighted-integrability predictor of the tail
behavior built from growth exponents.

All suprema over vertices are exact maxima over the interior; the tail sums
reduce to single interior solves, so profiles scale to large graphs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import _solvers
from .geometry import Exhaustion, GraphWithBoundary, GrowthExponents
from .green import KernelTable
from .operators import Potential


TENDS_TO_ZERO_FACTOR = 0.05
PROFILE_MONOTONE_SLACK = 1e-12


class PerturbationError(RuntimeError):
    pass


@dataclass
class TailProfile:
    """sup_x tail quantities along an exhaustion, with a trend classification.

    classification is one of 'tends-to-zero', 'below-epsilon', 'bounded',
    'unbounded'; `epsilon` records the threshold when one was supplied.
    """

    values: np.ndarray
    limit_estimate: float
    classification: str
    epsilon: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(np.diff(v) > PROFILE_MONOTONE_SLACK * max(1.0, v[0] if v.size else 1.0)):
            raise PerturbationError("tail profile must be non-increasing")


def _h_weighted_green_sum(green: KernelTable, weight_values, h):
    """sup-normalized Green sum: max_x (G(w))/h at interior vertices.

    weight_values live on the kernel's domain; returns the full vector
    G w / h over the domain.
    """
    return green.apply(weight_values) / h


def h_bounded_norm(green: KernelTable, v: Potential, h) -> float:
    """The weighted Green norm  sup_x sum_y G(x,y) |V(y)| h(y) mu(y) / h(x)."""
    h = np.asarray(h, dtype=float)
    if np.any(h[green.domain] <= 0):
        raise PerturbationError("h must be positive")
    f = np.abs(v.values[green.domain]) * h[green.domain]
    vec = _h_weighted_green_sum(green, f, h[green.domain])
    return float(vec.max()) if vec.size else 0.0


def _classify_profile(values, epsilon):
    values = np.asarray(values, dtype=float)
    first = values[0] if values.size else 0.0
    last = values[-1] if values.size else 0.0
    diag = {}
    if first <= 0:
        cls = "tends-to-zero"
        limit = 0.0
    else:
        rel = last / first
        ks = np.arange(1, values.size + 1, dtype=float)
        pos = values > 0
        slope = 0.0
        if pos.sum() >= 2:
            slope = np.polyfit(ks[pos], np.log(values[pos]), 1)[0]
        diag["relative_last"] = float(rel)
        diag["log_slope_per_level"] = float(slope)
        if rel < TENDS_TO_ZERO_FACTOR and slope < 0:
            cls = "tends-to-zero"
            limit = 0.0
        elif slope <= 0.0:
            cls = "bounded"
            limit = float(last)
        else:
            cls = "unbounded"
            limit = float(last)
    if epsilon is not None:
        diag["below_epsilon"] = bool(limit < epsilon)
        if cls == "bounded" and limit < epsilon:
            cls = "below-epsilon"
    return cls, limit, diag


def kato_tail_profile(green: KernelTable, v: Potential, h, ex: Exhaustion,
                      epsilon=None) -> TailProfile:
    """Tail Green sums sup_x sum_{y outside Omega_k} G(x,y)|V(y)|h(y)mu(y)/h(x).

    The supremum runs over all interior x (the maximum-principle form); a
    vanishing profile is the discrete reading of Kato smallness at infinity,
    and `epsilon` marks the sub-epsilon variant.
    """
    h = np.asarray(h, dtype=float)
    f_full = np.abs(v.values[green.domain]) * h[green.domain]
    dom_pos = {g_idx: i for i, g_idx in enumerate(green.domain)}
    values = []
    for k in range(len(ex.sets)):
        mask = np.ones(green.domain.size, dtype=bool)
        inside = [dom_pos[i] for i in ex.sets[k] if i in dom_pos]
        mask[inside] = False
        f = np.where(mask, f_full, 0.0)
        vec = _h_weighted_green_sum(green, f, h[green.domain])
        values.append(float(vec.max()) if vec.size else 0.0)
    values = np.array(values)
    cls, limit, diag = _classify_profile(values, epsilon)
    return TailProfile(values=values, limit_estimate=limit,
                       classification=cls, epsilon=epsilon, diagnostics=diag)


def small_perturbation_profile(green: KernelTable, v: Potential,
                               ex: Exhaustion, size_cap=1500):
    """Double-Green tail ratios and the global G-bounded norm.

    values[k] = max over x,y outside Omega_k of
        sum_{z outside Omega_k} G(x,z)|V(z)|G(z,y)mu(z) / G(x,y);
    the global norm takes all x, y, z.  Needs the dense kernel, hence the
    interior size cap.
    """
    if green.n > size_cap:
        raise PerturbationError(
            f"double-Green profile restricted to <= {size_cap} interior vertices")
    G = green.entries
    if np.any(G <= 0):
        raise PerturbationError("Green entries must be positive for the ratio")
    absv = np.abs(v.values[green.domain])
    mu = green.mu
    dom_pos = {g_idx: i for i, g_idx in enumerate(green.domain)}
    weighted = absv * mu

    def ratio_max(active_mask):
        w = np.where(active_mask, weighted, 0.0)
        N = (G * w[None, :]) @ G
        R = N / G
        sub = R[np.ix_(active_mask, active_mask)]
        return float(sub.max()) if sub.size else 0.0

    N = (G * weighted[None, :]) @ G
    global_norm = float((N / G).max())
    values = []
    for k in range(len(ex.sets)):
        mask = np.ones(green.n, dtype=bool)
        inside = [dom_pos[i] for i in ex.sets[k] if i in dom_pos]
        mask[inside] = False
        values.append(ratio_max(mask))
    values = np.array(values)
    cls, limit, diag = _classify_profile(values, None)
    diag["global_norm"] = global_norm
    profile = TailProfile(values=values, limit_estimate=limit,
                          classification=cls, diagnostics=diag)
    return profile, global_norm


@dataclass
class WeightedKatoReport:
    norm_lower_exponent: float
    norm_upper_exponent: float
    q_lower: float
    q_upper: float
    inverse_sup_bound: float
    lp_condition: float
    predicted_kato: bool
    details: dict = field(default_factory=dict)


def weighted_lp_norm(g: GraphWithBoundary, values, q, interior_only=True):
    """l^q norm against the measure mu(x)/V(x,1) (the weighted L^p scale)."""
    w = g.mu / g.unit_ball_volumes()
    vals = np.abs(np.asarray(values, dtype=float))
    if interior_only:
        w = w[g.interior]
        vals = vals[g.interior]
    if np.isinf(q):
        return float(vals.max()) if vals.size else 0.0
    return float(np.sum(vals ** q * w) ** (1.0 / q))


def weighted_kato_predictor(op, v: Potential, exponents: GrowthExponents,
                            eps: float, p_local=None) -> WeightedKatoReport:
    """Weighted-integrability surrogate for membership in the Kato tail class.

    Computes |V| in the weighted l^q scales at q = nu'/2 - eps and nu/2 + eps,
    the sup of the resolvent smoothing Delta^{-1}|V|, and the local l^p
    bound max_x ||V||_{l^p(B(x,1))} / V(x,1)^{1/p'}.  The boolean prediction
    on a single finite graph is finiteness of the norms; the scale trend
    across radii is assembled by `weighted_kato_scaling`.
    """
    q1 = exponents.nu_prime / 2.0 - eps
    q2 = exponents.nu / 2.0 + eps
    if q1 <= 0:
        raise PerturbationError("need nu'/2 - eps > 0")
    g = op.graph
    n1 = weighted_lp_norm(g, v.values, q1)
    n2 = weighted_lp_norm(g, v.values, q2)
    sup_bound = float(np.max(op.solve(np.abs(v.values[g.interior]))))
    p_loc = p_local if p_local is not None else max(2.0, exponents.nu)
    vols1 = g.unit_ball_volumes()
    adj = g.W.copy()
    adj.data = np.ones_like(adj.data)
    local_p = (adj @ (np.abs(v.values) ** p_loc * g.mu)
               + np.abs(v.values) ** p_loc * g.mu)
    pprime = p_loc / (p_loc - 1.0)
    lp_cond = float(np.max(local_p[g.interior] ** (1.0 / p_loc)
                           / vols1[g.interior] ** (1.0 / pprime)))
    predicted = bool(np.isfinite(n1) and np.isfinite(n2))
    return WeightedKatoReport(
        norm_lower_exponent=n1, norm_upper_exponent=n2, q_lower=q1, q_upper=q2,
        inverse_sup_bound=sup_bound, lp_condition=lp_cond,
        predicted_kato=predicted,
        details={"eps": eps, "p_local": p_loc})


GROWTH_SLOPE_BOUNDED = 0.5


def weighted_kato_scaling(reports, radii):
    """Classify the scale trend of the weighted norms across radii.

    Fits the log-log slope of each norm against the radius; the predictor is
    positive when both slopes stay below GROWTH_SLOPE_BOUNDED (sub-linear
    growth reads as finiteness of the continuum norm).
    """
    r = np.log(np.asarray(radii, dtype=float))
    n1 = np.array([rep.norm_lower_exponent for rep in reports])
    n2 = np.array([rep.norm_upper_exponent for rep in reports])
    slope1 = np.polyfit(r, np.log(np.maximum(n1, 1e-300)), 1)[0]
    slope2 = np.polyfit(r, np.log(np.maximum(n2, 1e-300)), 1)[0]
    predicted = bool(slope1 < GROWTH_SLOPE_BOUNDED and slope2 < GROWTH_SLOPE_BOUNDED)
    return {
        "slope_lower": float(slope1),
        "slope_upper": float(slope2),
        "predicted_kato": predicted,
        "norms_lower": n1.tolist(),
        "norms_upper": n2.tolist(),
    }
