"""Reproduce the 1D benchmark study: constants at one point, rates over a sweep.

Writes sweep.csv next to this script (or under --out) and prints the
comparison against the closed-form constants. Use --plot for a log-log
rate figure (requires matplotlib).
"""

import argparse
from pathlib import Path

import numpy as np

from homflow.bench import (AnalyticOracle1D, SweepPlan, predicted_constants,
                           run_case, run_sweep, sweep_verdicts)
from homflow.corrector import ErrorReport
from homflow.reports import write_csv, write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ratios", default="16,32,64,128")
    ap.add_argument("--cells-per-period", type=int, default=16)
    ap.add_argument("--out", default="out_1d")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ratios = tuple(int(t) for t in args.ratios.split(","))

    # single-point comparison at the largest ratio
    l, D = 1.0, float(ratios[-1])
    oracle = AnalyticOracle1D(l, D)
    case = run_case(oracle.field(), oracle.source(), l, D, args.cells_per_period)
    x = case.p.grid.axis_coords()
    print(f"D/l = {ratios[-1]}, {args.cells_per_period} cells per period")
    print(f"  max |p - closed form|  = {np.abs(case.p.values - oracle.p(x)).max():.3e}")
    print(f"  K0 = {case.model.K0[0, 0]:.12f} (exact 0.5)")
    c = predicted_constants(l, D)
    eps2 = (l / D) ** 2
    print(f"  e_L2 / predicted      = {case.report.e_L2 / (c['c_L2'] * eps2):.4f}")
    print(f"  e_H1 / predicted      = {case.report.e_H1 / (c['c_H1'] * eps2):.4f}")
    print(f"  e_energy / predicted  = {case.report.e_energy / (c['c_E'] / D**2):.4f}")

    plan = SweepPlan(1, "cosine1d", ratios=ratios,
                     cells_per_period=args.cells_per_period)
    result = run_sweep(plan)
    write_csv(out / "sweep.csv", ErrorReport.CSV_COLUMNS,
              [r.csv_row() for r in result.reports])
    verdicts = sweep_verdicts(result)
    write_json(out / "verdict.json", {"verdicts": verdicts})
    print("\nfitted rates in eps = l/D:")
    for v in verdicts:
        print(f"  {v['metric']:<9} rate {v['fitted_rate']:.4f} "
              f"prefactor {v['prefactor']:.6e} "
              f"(expected {v.get('expected_prefactor', float('nan')):.6e}) "
              f"-> {'pass' if v['pass'] else 'FAIL'}")

    if args.plot:
        import matplotlib.pyplot as plt

        eps = [r.eps for r in result.reports]
        fig, ax = plt.subplots(figsize=(5, 4))
        for metric, marker in (("e_L2", "o"), ("e_H1", "s"), ("e_energy", "^")):
            ax.loglog(eps, [getattr(r, metric) for r in result.reports],
                      marker=marker, label=metric)
        ax.loglog(eps, [c["c_L2"] * e**2 for e in eps], "k--", lw=0.8,
                  label="c (l/D)^2")
        ax.set_xlabel("l / D")
        ax.legend()
        ax.grid(True, which="both", ls=":")
        fig.tight_layout()
        fig.savefig(out / "rates_1d.png", dpi=150)
        print(f"\nplot saved to {out / 'rates_1d.png'}")


if __name__ == "__main__":
    main()
