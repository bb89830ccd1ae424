"""Optimal sterile-male release over one week for three rate caps.

Prints budget use, quiescent tail, bang-bang share and the multiplier sign
diagnostics, and writes one SVG per cap.
"""

import argparse
from pathlib import Path

from mosquito_release.control import TimeGrid
from mosquito_release.model import SitParams
from mosquito_release.optimizer import ControlProblem, solve
from mosquito_release.plots import trajectory_svg


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=float, default=7.0)
    ap.add_argument("--C", type=float, default=3000.0)
    ap.add_argument("--caps", type=float, nargs="+", default=[500.0, 1000.0, 1500.0])
    ap.add_argument("--N", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/sit_structure")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = TimeGrid.default(args.T) if args.N is None else TimeGrid(args.T, args.N)
    print(f"{'Ubar':>6} {'cost':>14} {'ratio':>7} {'T0':>6} {'bang':>6} "
          f"{'centroid':>8}  sign violations (+/-)")
    for Ubar in args.caps:
        sol = solve(ControlProblem(SitParams(), grid, Ubar, args.C), seed=args.seed)
        d = sol.diagnostics
        sv = d.switching_violations
        plus = sv["plus"]["on_zero"] + sv["plus"]["on_cap"]
        minus = sv["minus"]["on_zero"] + sv["minus"]["on_cap"]
        print(f"{Ubar:6g} {sol.cost:14.6e} {d.budget_ratio:7.4f} {d.tail_zero_time:6.2f} "
              f"{d.bang_bang_fraction:6.3f} {d.release_centroid:8.2f}  {plus}/{minus}")
        trajectory_svg(sol.trajectory, out / f"sit_U{Ubar:g}.svg", per_compartment=False,
                       title=f"SIT T={args.T:g} C={args.C:g} Ubar={Ubar:g}")


if __name__ == "__main__":
    main()
