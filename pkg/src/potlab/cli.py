"""Declarative experiment runner: config parsing, pipelines, reports.

Configs are flat UTF-8 key=value files with dotted sections::

    geometry.family = lattice
    geometry.n = 3
    geometry.radius = 6
    potential.family = power_decay
    potential.amplitude = -0.3
    potential.beta = 3
    pipeline = green
    seed = 42

Unknown keys are rejected with their line number; every run is fully
deterministic given the seed, and reports re-serialize byte-identically
modulo the provenance timestamp block.  Exit codes: 0 success, 2 assertion
failure, 3 config error, 4 resource limit.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import __version__
from .geometry import (GeometrySpec, GeometryError, ResourceLimitError,
                       build_exhaustion, fit_growth_exponents, generate_graph,
                       volume_criteria)
from .operators import Potential, assemble_schrodinger, laplacian

EXIT_OK = 0
EXIT_ASSERTION = 2
EXIT_CONFIG = 3
EXIT_RESOURCE = 4

PIPELINES = ("green", "kato", "possol", "heat", "parabolic", "riesz", "full")

OUTPUT_ENV_VAR = "POTLAB_OUT"


class ConfigError(ValueError):
    def __init__(self, message, line=None, key=None):
        loc = f" (line {line})" if line is not None else ""
        loc += f" [{key}]" if key else ""
        super().__init__(message + loc)
        self.line = line
        self.key = key


@dataclass
class ExperimentConfig:
    geometry: GeometrySpec
    potential_terms: List[dict]
    pipeline: str
    seed: int
    radii: Optional[List[int]] = None
    tol: float = 1e-10
    p_grid: List[float] = field(default_factory=lambda: [1.5, 2.0, 3.0])
    t_grid: List[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    output_path: Optional[str] = None
    output_format: str = "json"
    max_vertices: int = 400_000
    raw: dict = field(default_factory=dict)


_GEOMETRY_KEYS = {"geometry.family", "geometry.n", "geometry.radius",
                  "geometry.alpha", "geometry.cycle", "geometry.base.family",
                  "geometry.base.n", "geometry.base.radius",
                  "geometry.base.alpha"}
_SCALAR_KEYS = {"pipeline", "seed", "tol", "p_grid", "t_grid",
                "exhaustion.radii", "output.path", "output.format",
                "max_vertices"}
_POTENTIAL_FIELDS = {"family", "amplitude", "radius", "beta", "vertex",
                     "values"}


def _parse_lines(text):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("expected key = value", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError("empty key", line=lineno)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r}", line=lineno, key=key)
        entries[key] = (value, lineno)
    return entries


def _known_key(key):
    if key in _GEOMETRY_KEYS or key in _SCALAR_KEYS:
        return True
    parts = key.split(".")
    if parts[0] == "potential":
        if len(parts) == 2 and parts[1] in _POTENTIAL_FIELDS:
            return True
        if (len(parts) == 3 and parts[1].isdigit()
                and parts[2] in _POTENTIAL_FIELDS):
            return True
    return False


def _coerce(value, kind, key, line):
    try:
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        return value
    except ValueError as exc:
        raise ConfigError(f"cannot parse {value!r} as {kind.__name__}",
                          line=line, key=key) from exc


def _float_list(value, key, line):
    try:
        return [float(x) for x in value.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {value!r}", line=line,
                          key=key) from exc


def _build_geometry(entries):
    def get(key, kind=str, default=None, required=False):
        if key in entries:
            value, line = entries[key]
            return _coerce(value, kind, key, line)
        if required:
            raise ConfigError(f"missing required key {key}", key=key)
        return default

    family = get("geometry.family", required=True)
    if family == "lattice":
        return GeometrySpec.lattice(get("geometry.n", int, required=True),
                                    get("geometry.radius", int, required=True))
    if family == "radial":
        return GeometrySpec.radial(get("geometry.alpha", float, required=True),
                                   get("geometry.radius", int, required=True))
    if family == "product":
        base_family = get("geometry.base.family", required=True)
        if base_family == "lattice":
            base = GeometrySpec.lattice(
                get("geometry.base.n", int, required=True),
                get("geometry.base.radius", int, required=True))
        elif base_family == "radial":
            base = GeometrySpec.radial(
                get("geometry.base.alpha", float, required=True),
                get("geometry.base.radius", int, required=True))
        else:
            raise ConfigError(f"unknown base family {base_family!r}",
                              key="geometry.base.family")
        return GeometrySpec.product(base, get("geometry.cycle", int,
                                              required=True))
    raise ConfigError(f"unknown geometry family {family!r}",
                      key="geometry.family")


def _collect_potential_terms(entries):
    singles = {}
    numbered = {}
    for key, (value, line) in entries.items():
        parts = key.split(".")
        if parts[0] != "potential":
            continue
        if len(parts) == 2:
            singles[parts[1]] = (value, line)
        else:
            numbered.setdefault(int(parts[1]), {})[parts[2]] = (value, line)
    terms = []
    if singles:
        terms.append(singles)
    for idx in sorted(numbered):
        terms.append(numbered[idx])
    out = []
    for term in terms:
        if "family" not in term:
            raise ConfigError("potential term needs a family",
                              key="potential.family")
        fam, line = term["family"]
        spec = {"family": fam}
        for name, kind in (("amplitude", float), ("radius", int),
                           ("beta", float)):
            if name in term:
                spec[name] = _coerce(term[name][0], kind, name, term[name][1])
        if "vertex" in term:
            spec["vertex"] = term["vertex"][0]
        if "values" in term:
            spec["values"] = term["values"][0]
        out.append(spec)
    return out


def validate_config(text) -> ExperimentConfig:
    """Parse and validate a config document; raises ConfigError."""
    entries = _parse_lines(text)
    for key, (value, line) in entries.items():
        if not _known_key(key):
            raise ConfigError(f"unknown key {key!r}", line=line, key=key)
    geometry = _build_geometry(entries)
    terms = _collect_potential_terms(entries)

    def scalar(key, kind, default=None, required=False):
        if key in entries:
            value, line = entries[key]
            return _coerce(value, kind, key, line)
        if required:
            raise ConfigError(f"missing required key {key}", key=key)
        return default

    if "seed" not in entries:
        raise ConfigError("seed is required", key="seed")
    pipeline = scalar("pipeline", str, required=True)
    if pipeline not in PIPELINES:
        raise ConfigError(f"unknown pipeline {pipeline!r}", key="pipeline")
    radii = None
    if "exhaustion.radii" in entries:
        value, line = entries["exhaustion.radii"]
        radii = [int(float(x)) for x in value.split(",") if x.strip()]
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ConfigError("exhaustion radii must be strictly increasing",
                              line=line, key="exhaustion.radii")
        if radii and radii[-1] > geometry.radius:
            raise ConfigError(
                f"radii exceed interior radius {geometry.radius}",
                line=line, key="exhaustion.radii")
    cfg = ExperimentConfig(
        geometry=geometry,
        potential_terms=terms,
        pipeline=pipeline,
        seed=scalar("seed", int, required=True),
        radii=radii,
        tol=scalar("tol", float, default=1e-10),
        p_grid=_float_list(entries["p_grid"][0], "p_grid",
                           entries["p_grid"][1]) if "p_grid" in entries
        else [1.5, 2.0, 3.0],
        t_grid=_float_list(entries["t_grid"][0], "t_grid",
                           entries["t_grid"][1]) if "t_grid" in entries
        else [0.5, 1.0, 2.0],
        output_path=scalar("output.path", str),
        output_format=scalar("output.format", str, default="json"),
        max_vertices=scalar("max_vertices", int, default=400_000),
        raw={k: v for k, (v, _) in entries.items()},
    )
    if cfg.output_format not in ("json", "csv-bundle"):
        raise ConfigError(f"unknown output format {cfg.output_format!r}",
                          key="output.format")
    return cfg


def build_potential(g, terms) -> Potential:
    total = Potential.zero(g)
    for spec in terms:
        fam = spec["family"]
        if fam == "bump":
            term = Potential.bump(g, spec.get("amplitude", 1.0),
                                  spec.get("radius", 1))
        elif fam == "power_decay":
            term = Potential.power_decay(g, spec.get("amplitude", 1.0),
                                         spec.get("beta", 2.0))
        elif fam == "pointmass":
            vertex = spec.get("vertex", "origin")
            idx = g.origin if vertex == "origin" else int(vertex)
            term = Potential.point_mass(g, idx, spec.get("amplitude", 1.0))
        elif fam == "table":
            values = np.zeros(g.n_vertices)
            for pair in spec.get("values", "").split(","):
                if not pair.strip():
                    continue
                idx, _, val = pair.partition(":")
                values[int(idx)] = float(val)
            term = Potential(g, values)
        elif fam == "zero":
            term = Potential.zero(g)
        else:
            raise ConfigError(f"unknown potential family {fam!r}")
        total = total + term
    return total


# -- report assembly ---------------------------------------------------------


class Assertions:
    def __init__(self):
        self.records = []

    def check(self, name, lhs, op, rhs, tolerance=0.0):
        if op == "<=":
            passed = lhs <= rhs + tolerance
        elif op == ">=":
            passed = lhs >= rhs - tolerance
        elif op == "==":
            passed = abs(lhs - rhs) <= tolerance
        else:
            raise ValueError(f"unknown comparison {op}")
        self.records.append({
            "name": name, "lhs": float(lhs), "op": op, "rhs": float(rhs),
            "tolerance": float(tolerance), "passed": bool(passed)})
        return passed

    @property
    def all_passed(self):
        return all(r["passed"] for r in self.records)


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _mini_family(cfg):
    R = cfg.geometry.radius
    radii = sorted({max(2, int(np.ceil(R / 2))),
                    max(3, int(np.ceil(R / np.sqrt(2)))), R})
    if len(radii) < 3:
        radii = sorted({max(2, R - 2), max(3, R - 1), R})
    return [generate_graph(cfg.geometry.with_radius(r),
                           max_vertices=cfg.max_vertices) for r in radii]


def _default_radii(g):
    obd = int(g.origin_boundary_distance())
    rs = sorted({min(2, obd - 1), max(1, (obd - 1) // 2), obd - 1})
    return [r for r in rs if r >= 0]


def _pipeline_green(cfg, g, v, checks):
    from .green import classify_criticality, dirichlet_green, exhaustion_green
    op = assemble_schrodinger(g, v)
    radii = cfg.radii or _default_radii(g)
    ex = build_exhaustion(g, radii)
    tables, final, mono = exhaustion_green(op, ex)
    rng = np.random.default_rng(cfg.seed)
    f = rng.standard_normal(final.n)
    pos = g.interior_pos[final.domain]
    P_dom = op.matrix[pos][:, pos]
    resid = float(np.max(np.abs(final.apply(P_dom @ f) - f)))
    checks.check("green.reproducing_identity", resid, "<=", 0.0, 1e-10)
    checks.check("green.monotone", mono.max_violation, "<=", 0.0, 1e-12)
    crit = classify_criticality(op, ex)
    out = {
        "diagonal_trace": mono.diagonal_trace,
        "tail_increment": mono.tail_increment,
        "classification": crit.classification,
        "lambda_min": crit.lambda_min,
    }
    if final.n <= 100:
        out["green_matrix"] = final.entries
        out["domain"] = [str(g.vertices[i]) for i in final.domain]
    traces = {"green_trace": {
        "headers": ["level", "radius", "diag_origin"],
        "rows": [[k, ex.radii[k], float(t)]
                 for k, t in enumerate(mono.diagonal_trace)]}}
    return out, traces


def _pipeline_kato(cfg, g, v, checks):
    from .green import dirichlet_green
    from .perturbation import (h_bounded_norm, kato_tail_profile,
                               small_perturbation_profile,
                               weighted_kato_predictor)
    op = laplacian(g)
    green = dirichlet_green(op)
    h = np.ones(g.n_vertices)
    radii = cfg.radii or _default_radii(g)
    ex = build_exhaustion(g, radii)
    norm = h_bounded_norm(green, v, h)
    prof = kato_tail_profile(green, v, h, ex)
    checks.check("kato.profile_monotone",
                 float(np.max(np.diff(prof.values))) if len(prof.values) > 1
                 else 0.0, "<=", 0.0, 1e-12)
    checks.check("kato.profile_below_norm", float(prof.values[0]), "<=",
                 norm, 1e-12)
    out = {
        "h_bounded_norm": norm,
        "tail_values": prof.values,
        "classification": prof.classification,
        "limit_estimate": prof.limit_estimate,
    }
    if g.n_interior <= 1500:
        sp_prof, gnorm = small_perturbation_profile(green, v, ex)
        out["small_perturbation_values"] = sp_prof.values
        out["g_bounded_norm"] = gnorm
    exps = fit_growth_exponents(g, 150, seed=cfg.seed)
    rep = weighted_kato_predictor(op, v, exps, eps=0.25)
    out["weighted_norms"] = {
        "lower_exponent": rep.norm_lower_exponent,
        "upper_exponent": rep.norm_upper_exponent,
        "q_lower": rep.q_lower, "q_upper": rep.q_upper,
        "inverse_sup": rep.inverse_sup_bound,
        "lp_condition": rep.lp_condition,
    }
    traces = {"kato_tail": {
        "headers": ["level", "radius", "tail_value"],
        "rows": [[k, ex.radii[k], float(val)]
                 for k, val in enumerate(prof.values)]}}
    return out, traces


def _pipeline_possol(cfg, g, v, checks):
    from .green import dirichlet_green
    from .positive_solutions import construct_positive_solution
    op = laplacian(g)
    green = dirichlet_green(op)
    radii = cfg.radii or _default_radii(g)
    ex = build_exhaustion(g, radii)
    h = np.ones(g.n_vertices)
    sol = construct_positive_solution(op, green, v, h, ex, tol=cfg.tol)
    checks.check("possol.residual", sol.residual, "<=", 10 * cfg.tol)
    checks.check("possol.integral_identity",
                 sol.details["integral_identity_residual"], "<=",
                 100 * cfg.tol)
    checks.check("possol.positive", float(sol.g.min()), ">=", 0.0, 0.0)
    checks.check("possol.exp_lower_bound", sol.equivalence[0], ">=",
                 sol.details["exp_lower_bound"], 1e-12)
    out = {
        "equivalence": list(sol.equivalence),
        "residual": sol.residual,
        "integral_identity_residual": sol.details[
            "integral_identity_residual"],
        "plus_green_norm": sol.details["plus_green_norm"],
        "iterations": sol.iterations,
    }
    if g.n_vertices <= 200:
        out["solution"] = sol.g
    return out, {}


def _pipeline_heat(cfg, g, v, checks):
    from .heat import (DENSE_KERNEL_MAX, domination_check, heat_kernel,
                       semigroup_defect)
    op0 = laplacian(g)
    opv = assemble_schrodinger(g, v)
    out = {}
    traces = {"kernels": {"headers": ["x", "y", "t", "value"], "rows": []}}
    dense = g.n_interior <= DENSE_KERNEL_MAX
    targets = None if dense else np.array([g.interior_pos[g.origin]])
    defect = semigroup_defect(opv, cfg.t_grid[0], cfg.t_grid[0],
                              targets=targets)
    checks.check("heat.semigroup", defect, "<=", 0.0, 1e-9)
    origin_pos = int(g.interior_pos[g.origin])
    for t in cfg.t_grid:
        K = heat_kernel(opv, t, targets=targets)
        col = K.entries[:, origin_pos if dense else 0]
        out.setdefault("origin_diagonal", {})[str(t)] = float(col[origin_pos])
        sample = np.argsort(col)[::-1][:10]
        for x in sample:
            traces["kernels"]["rows"].append(
                [int(x), origin_pos, float(t), float(col[x])])
    if np.any(v.values != 0) and dense:
        opneg = assemble_schrodinger(g, Potential(g, -v.minus))
        t0 = cfg.t_grid[0]
        rep = domination_check(heat_kernel(op0, t0), heat_kernel(opv, t0),
                               heat_kernel(opneg, t0))
        checks.check("heat.domination", 0.0 if rep.passed else 1.0, "<=", 0.0)
        out["domination_passed"] = rep.passed
    return out, traces


def _pipeline_parabolic(cfg, g, v, checks):
    from .green import dirichlet_green
    from .parabolicity import classify_p_parabolic, p_capacity
    out = {"volume_criteria": {}, "capacity": {}}
    horizon = int(g.origin_boundary_distance()) - 1
    fam = _mini_family(cfg)
    for p in cfg.p_grid:
        rep = volume_criteria(g, p, horizon=max(2, horizon))
        out["volume_criteria"][str(p)] = {
            "vp": rep.vp_classification,
            "tilde_vp": rep.tilde_vp_classification,
            "lower_growth_constant": rep.lower_growth_constant,
        }
        cls, trace = classify_p_parabolic(fam, p, tol=cfg.tol)
        out["capacity"][str(p)] = {
            "classification": cls,
            "capacities": trace.capacities,
            "radii": trace.radii,
        }
        agree = True
        if cls == "hyperbolic" and rep.vp_classification == "diverges":
            agree = False
        if cls == "parabolic" and rep.tilde_vp_classification == "converges":
            agree = False
        checks.check(f"parabolic.volume_agreement_p{p}",
                     0.0 if agree else 1.0, "<=", 0.0)
    cap2 = p_capacity(g, np.array([g.origin]), 2, tol=cfg.tol)
    green = dirichlet_green(laplacian(g))
    pos = int(np.flatnonzero(green.domain == g.origin)[0])
    duality = cap2.value * green.diagonal_entry(pos)
    traces = {"capacity_trace": {
        "headers": ["p", "radius", "capacity"],
        "rows": [[float(p), float(r), float(c)]
                 for p in cfg.p_grid
                 for r, c in zip(out["capacity"][str(p)]["radii"],
                                 out["capacity"][str(p)]["capacities"])]}}
    out["duality_cap2_green"] = duality
    checks.check("parabolic.duality", duality, "==", 1.0, 1e-8)
    return out, traces


def _pipeline_riesz(cfg, g, v, checks):
    from .riesz import riesz_range_experiment
    fam = _mini_family(cfg)
    rep = riesz_range_experiment(fam, lambda gg: build_potential(
        gg, cfg.potential_terms), cfg.p_grid, seed=cfg.seed,
        boyd_tol=1e-6, boyd_iters=30, tol=cfg.tol)
    out = {"radii": rep.radii, "epsilons": rep.epsilons, "trends": {},
           "norms": {}}
    for p in cfg.p_grid:
        out["trends"][str(p)] = {
            "plain": rep.plain_trends[p][0],
            "modified": rep.modified_trends[p][0],
            "ratios": rep.plain_trends[p][1],
        }
        out["norms"][str(p)] = {
            "plain_lower": [e.lower for e in rep.plain_norms[p]],
            "plain_upper": [e.upper for e in rep.plain_norms[p]],
            "modified_lower": [e.lower for e in rep.modified_norms[p]],
        }
        if p == 2 and np.all(v.values == 0):
            for est in rep.plain_norms[p]:
                checks.check("riesz.isometry_p2", est.lower, "==", 1.0, 1e-8)
    traces = {"norm_vs_radius": {
        "headers": ["p", "radius", "lower", "upper"],
        "rows": [[float(p), float(r), float(e.lower), float(e.upper)]
                 for p in cfg.p_grid
                 for r, e in zip(rep.radii, rep.plain_norms[p])]}}
    return out, traces


def run_experiment(cfg: ExperimentConfig):
    """Execute the configured pipeline and assemble the report dict."""
    start = time.time()
    checks = Assertions()
    g = generate_graph(cfg.geometry, max_vertices=cfg.max_vertices)
    v = build_potential(g, cfg.potential_terms)
    results = {}
    traces = {}
    pipelines = ([cfg.pipeline] if cfg.pipeline != "full"
                 else ["green", "kato", "possol", "heat"])
    runners = {
        "green": _pipeline_green, "kato": _pipeline_kato,
        "possol": _pipeline_possol, "heat": _pipeline_heat,
        "parabolic": _pipeline_parabolic, "riesz": _pipeline_riesz,
    }
    errors = {}
    for name in pipelines:
        try:
            out, tr = runners[name](cfg, g, v, checks)
            results[name] = out
            traces.update(tr)
        except (ResourceLimitError, MemoryError):
            raise
        except Exception as exc:  # captured into the report, not a crash
            errors[name] = f"{type(exc).__name__}: {exc}"
    report = {
        "config": dict(sorted(cfg.raw.items())),
        "results": _json_ready(results),
        "traces": _json_ready(traces),
        "errors": errors,
        "assertions": checks.records,
        "provenance": {
            "package": f"potlab {__version__}",
            "seed": cfg.seed,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "timestamp": {
                "written_at": datetime.datetime.now(
                    datetime.timezone.utc).isoformat(),
                "runtime_seconds": time.time() - start,
            },
        },
    }
    return report


def report_to_json(report) -> str:
    return json.dumps(report, sort_keys=True, indent=1)


def strip_volatile(report):
    """Copy of the report without the volatile timestamp block."""
    import copy
    out = copy.deepcopy(report)
    out.get("provenance", {}).pop("timestamp", None)
    return out


def emit_report(report, out_dir, fmt="json"):
    """Write the report as a single JSON document or a CSV bundle."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if fmt == "json":
        path = os.path.join(out_dir, "report.json")
        with open(path, "w") as fh:
            fh.write(report_to_json(report))
        written.append(path)
    elif fmt == "csv-bundle":
        path = os.path.join(out_dir, "report.json")
        with open(path, "w") as fh:
            fh.write(report_to_json(report))
        written.append(path)
        for name, table in report.get("traces", {}).items():
            cpath = os.path.join(out_dir, f"{name}.csv")
            with open(cpath, "w") as fh:
                fh.write(",".join(table["headers"]) + "\n")
                for row in table["rows"]:
                    fh.write(",".join(repr(x) if isinstance(x, float)
                                      else str(x) for x in row) + "\n")
            written.append(cpath)
    else:
        raise ConfigError(f"unknown format {fmt!r}")
    return written


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="potlab",
        description="experiment runner for potential theory on graphs")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", "run"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--format", default=None,
                       choices=["json", "csv-bundle"])
        p.add_argument("--max-vertices", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
    p = sub.add_parser("report")
    p.add_argument("--config", required=True,
                   help="an existing report.json to re-emit")
    p.add_argument("--out", default=None)
    p.add_argument("--format", default="csv-bundle",
                   choices=["json", "csv-bundle"])
    args = parser.parse_args(argv)

    if getattr(args, "threads", None):
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(args.threads))

    out_dir = args.out or os.environ.get(OUTPUT_ENV_VAR) or "."

    if args.command == "report":
        try:
            with open(args.config) as fh:
                report = json.load(fh)
            emit_report(report, out_dir, args.format)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK

    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = validate_config(text)
    except (ConfigError, GeometryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.max_vertices:
        cfg.max_vertices = args.max_vertices
    if args.command == "validate":
        print("config ok")
        return EXIT_OK
    try:
        report = run_experiment(cfg)
    except (ResourceLimitError, MemoryError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    fmt = args.format or cfg.output_format
    target = cfg.output_path or out_dir
    emit_report(report, target, fmt)
    failed = [r["name"] for r in report["assertions"] if not r["passed"]]
    if report["errors"]:
        print("pipeline errors: " + ", ".join(report["errors"]), file=sys.stderr)
    if failed:
        print("failed assertions: " + ", ".join(failed), file=sys.stderr)
        return EXIT_ASSERTION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
