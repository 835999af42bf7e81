"""
Sequential vs fixed-sample designs with correlated Gaussian streams
===================================================================

J = 500 streams, 100 true nulls (mean 0), 400 false (mean 1), sigma = 2 and
pairwise correlation .95. Runs both sequential procedures for gamma-FDP and
for k-FWER (k = 25) and calibrates the fixed-sample baselines to the best
sequential type II rate.

Takes about a minute at 2000 replicates; pass a smaller number to go faster:

    python demos/03_gaussian_rerun.py 500
"""

import json
import sys
from pathlib import Path

from seqmt.fixed_baseline import calibrate_fixed_N
from seqmt.simulation import ScenarioConfig, build_procedure, format_report, monte_carlo, savings

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
here = Path(__file__).parent / "configs"

for name in ("table2_fdp.json", "table3_kfwe.json"):
    cfg = json.loads((here / name).read_text())
    sc = ScenarioConfig(**{**cfg["scenario"], "reps": reps})
    reports = {}
    for mode in ("stepdown", "stepup"):
        config, stat = build_procedure(sc, mode)
        reports[mode] = monte_carlo(sc, config, stat)

    # %%
    # Fixed N matched to the smaller-E_N sequential procedure's type II rate.
    target = min(reports.values(), key=lambda r: r.E_N).typeII
    rows = []
    for mode, rep in reports.items():
        alphas = sc.error.step_values(sc.J, mode).alphas
        fix = calibrate_fixed_N(sc, mode, alphas, target, reps=2000, seed=5)
        row = rep.row()
        row["savings"] = savings(rep.E_N, fix.N)
        rows += [row, fix.row(sc.name)]
    print(format_report(rows))
