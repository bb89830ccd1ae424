"""Timing of Wolbachia releases against budget size over 90 days.

For each (C, Ubar) pair prints the release-mass centroid: large budgets
release early, small budgets late.
"""

import argparse
import time
from pathlib import Path

from mosquito_release.control import TimeGrid
from mosquito_release.model import WolParams
from mosquito_release.optimizer import ControlProblem, solve
from mosquito_release.plots import trajectory_svg


def parse_pair(text):
    C, Ubar = text.split("/")
    return float(C), float(Ubar)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=float, default=90.0)
    ap.add_argument("--pairs", type=parse_pair, nargs="+",
                    default=[(10000.0, 500.0), (1000.0, 50.0)],
                    help="budget/cap pairs such as 10000/500")
    ap.add_argument("--max-iter", type=int, default=500)
    ap.add_argument("--out", default="out/wolbachia_threshold")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = TimeGrid.default(args.T)
    for C, Ubar in args.pairs:
        t0 = time.perf_counter()
        sol = solve(ControlProblem(WolParams(), grid, Ubar, C), max_iter=args.max_iter)
        d = sol.diagnostics
        print(f"C={C:<7g} Ubar={Ubar:<5g} cost={sol.cost:.6e} centroid={d.release_centroid:6.2f} d "
              f"T0={d.tail_zero_time:6.2f} ratio={d.budget_ratio:.4f} "
              f"bang={d.bang_bang_fraction:.3f} converged={sol.converged} "
              f"({time.perf_counter() - t0:.0f}s)", flush=True)
        trajectory_svg(sol.trajectory, out / f"wol_C{C:g}_U{Ubar:g}.svg",
                       per_compartment=False, title=f"Wolbachia C={C:g} Ubar={Ubar:g}")


if __name__ == "__main__":
    main()
