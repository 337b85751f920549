#!/usr/bin/env python3
"""Record the oracle run of the Riesz boundedness-range experiment.

Writes tests/data/riesz_calibration.json with the norm estimates produced
under the pinned settings; the acceptance suite reruns the experiment and
asserts the recorded values reproduce.  Rerun this script only when the
estimation pipeline itself changes, and review the diff.
"""

import json
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import numpy as np

import potlab as pl
from potlab.operators import Potential
from potlab.riesz import riesz_range_experiment

SETTINGS = {
    "radii": [6, 9, 12, 15],
    "amplitude": -0.3,
    "bump_radius": 2,
    "p_grid": [2.0, 2.5, 4.0],
    "seed": 20260810,
    "starts": 8,
    "boyd_tol": 1e-6,
    "boyd_iters": 40,
    "tol": 1e-10,
}


def run():
    t0 = time.time()
    fam = [pl.generate_graph(pl.GeometrySpec.lattice(3, R))
           for R in SETTINGS["radii"]]
    rep = riesz_range_experiment(
        fam, lambda g: Potential.bump(g, SETTINGS["amplitude"],
                                      SETTINGS["bump_radius"]),
        SETTINGS["p_grid"], seed=SETTINGS["seed"], starts=SETTINGS["starts"],
        boyd_tol=SETTINGS["boyd_tol"], boyd_iters=SETTINGS["boyd_iters"],
        tol=SETTINGS["tol"])
    out = {
        "settings": SETTINGS,
        "radii": rep.radii,
        "epsilons": rep.epsilons,
        "plain_lower": {str(p): [e.lower for e in rep.plain_norms[p]]
                        for p in SETTINGS["p_grid"]},
        "plain_upper": {str(p): [e.upper for e in rep.plain_norms[p]]
                        for p in SETTINGS["p_grid"]},
        "modified_lower": {str(p): [e.lower for e in rep.modified_norms[p]]
                           for p in SETTINGS["p_grid"]},
        "plain_trends": {str(p): rep.plain_trends[p][0]
                         for p in SETTINGS["p_grid"]},
        "modified_trends": {str(p): rep.modified_trends[p][0]
                            for p in SETTINGS["p_grid"]},
        "local_norms": rep.local_norms,
        "reverse_constants": [r["constant"] for r in rep.reverse_constants],
        "ao_integrals": {str(p): rep.ao_integrals[p]
                         for p in SETTINGS["p_grid"]},
        "runtime_seconds": time.time() - t0,
    }
    path = os.path.join(os.path.dirname(__file__), "..", "tests", "data",
                        "riesz_calibration.json")
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=1, sort_keys=True)
    print(f"recorded to {path} in {out['runtime_seconds']:.0f}s")
    for p in SETTINGS["p_grid"]:
        print(f"p={p}: plain {out['plain_lower'][str(p)]}"
              f" -> {out['plain_trends'][str(p)]}")
        print(f"       modified {out['modified_lower'][str(p)]}"
              f" -> {out['modified_trends'][str(p)]}")


if __name__ == "__main__":
    run()
