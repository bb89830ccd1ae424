"""Discrete (exact, reverse-mode RK4) vs continuous (backward adjoint ODE)
sensitivities of the SIT cost under mesh refinement."""

import argparse

import numpy as np

from mosquito_release.control import TimeGrid
from mosquito_release.model import SitParams
from mosquito_release.optimizer import ControlProblem, continuous_adjoint, discrete_adjoint


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--meshes", type=int, nargs="+", default=[50, 100, 200, 400, 800])
    args = ap.parse_args()
    prev = None
    for N in args.meshes:
        problem = ControlProblem(SitParams(), TimeGrid(7.0, N), 1000.0, 3000.0)
        t = problem.grid.nodes[:-1] + 0.5 * problem.grid.dt
        v = np.where(t < 2.8, 1000.0, 0.0)
        traj = problem.simulate(v)
        g, _ = discrete_adjoint(problem, v, traj.states)
        p = continuous_adjoint(problem, traj)
        mid = 0.5 * (p[:-1, 2] + p[1:, 2])
        err = float(np.max(np.abs(g / problem.grid.dt - mid)))
        rate = "" if prev is None else f"  ratio {prev / err:.2f}"
        print(f"N={N:5d} dt={problem.grid.dt:.5f} max|g/dt - p3| = {err:.4e}{rate}")
        prev = err


if __name__ == "__main__":
    main()
