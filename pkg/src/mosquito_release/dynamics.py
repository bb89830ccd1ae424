"""Fixed-step RK4 integration of the controlled systems, a-priori bound
checks, and trajectory CSV export."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .control import ControlGrid, TimeGrid
from .model import (
    SIT_STATE_NAMES,
    WOL_STATE_NAMES,
    SitParams,
    sit_equilibria,
    sit_kernel,
    wol_kernel,
)

__all__ = [
    "TimeGrid",
    "Trajectory",
    "DivergenceError",
    "integrate",
    "rk4_states",
    "simulate",
    "BoundsReport",
    "verify_bounds",
    "write_trajectory_csv",
]


class DivergenceError(RuntimeError):
    def __init__(self, node: int, state):
        super().__init__(f"non-finite state at node {node}: {list(state)}")
        self.node = node
        self.state = state


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TimeGrid
    states: np.ndarray  # shape (N + 1, n)
    control: ControlGrid
    model: str = ""
    names: tuple[str, ...] = ()

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    def __getitem__(self, name: str) -> np.ndarray:
        return self.states[:, self.names.index(name)]


def rk4_step(f, x, u, h):
    k1 = f(x, u)
    k2 = f(tuple(a + 0.5 * h * b for a, b in zip(x, k1)), u)
    k3 = f(tuple(a + 0.5 * h * b for a, b in zip(x, k2)), u)
    k4 = f(tuple(a + h * b for a, b in zip(x, k3)), u)
    return tuple(
        a + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(x, k1, k2, k3, k4)
    )


def rk4_states(f, init, values, h) -> list[tuple]:
    """Plain RK4 sweep with ``values[k]`` held on step ``k``; returns the
    list of node states (tuples)."""
    x = tuple(float(v) for v in init)
    out = [x]
    isfinite = math.isfinite
    for k, u in enumerate(values):
        try:
            x = rk4_step(f, x, float(u), h)
        except (OverflowError, ZeroDivisionError):
            raise DivergenceError(k + 1, x) from None
        if not all(isfinite(c) for c in x):
            raise DivergenceError(k + 1, x)
        out.append(x)
    return out


def integrate(rhs, init, u: ControlGrid, grid: TimeGrid | None = None,
              model: str = "", names: tuple[str, ...] = ()) -> Trajectory:
    """Classical RK4 on ``grid`` with the control frozen on each interval.

    ``rhs(x, u)`` may return any sequence; bit-identical outputs for
    identical inputs.
    """
    grid = grid or u.grid
    if grid != u.grid:
        raise ValueError("control and integration grids differ")
    if any(x < 0 for x in init):
        raise ValueError(f"initial state must be nonnegative, got {list(init)}")
    states = rk4_states(rhs, init, u.values.tolist(), grid.dt)
    return Trajectory(grid, np.array(states), u, model, names)


def simulate(p, u: ControlGrid, init=None) -> Trajectory:
    """Integrate the model selected by the type of ``p`` from its wild
    equilibrium (or ``init``)."""
    if isinstance(p, SitParams):
        f = sit_kernel(p)[0]
        x0 = sit_equilibria(p)[1].state if init is None else init
        return integrate(f, x0, u, model="sit", names=SIT_STATE_NAMES)
    from .model import wol_free

    f = wol_kernel(p)[0]
    x0 = wol_free(p) if init is None else init
    return integrate(f, x0, u, model="wolbachia", names=WOL_STATE_NAMES)


# ---------------------------------------------------------------------------
# bounds


@dataclass
class BoundsReport:
    checked_nodes: int
    tolerance: float
    violations: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checked_nodes": self.checked_nodes,
            "tolerance": self.tolerance,
            "violations": self.violations[:50],
            "n_violations": len(self.violations),
        }


def verify_bounds(traj: Trajectory, p) -> BoundsReport:
    """Check the a-priori trajectory bounds at every node.

    SIT: exponential lower bounds on E and F, E < K and the F upper bound.
    Wolbachia: nonnegativity and Eu + Ei < K.  Slack is 1e-7 K on the SIT
    bounds and 1e-9 K on positivity.
    """
    K = p.K
    t = traj.t
    X = traj.states
    viol = []

    def record(name, idx, value, bound):
        for k in np.flatnonzero(idx):
            viol.append({"bound": name, "node": int(k), "t": float(t[k]),
                         "value": float(value[k]), "limit": float(bound[k])})

    pos_tol = 1e-9 * K
    record("nonnegative", np.any(X < -pos_tol, axis=1),
           X.min(axis=1), np.full(len(t), -pos_tol))

    if isinstance(p, SitParams):
        tol = 1e-7 * K
        E, F = X[:, 0], X[:, 1]
        E2, F2 = sit_equilibria(p)[1].state[:2]
        E_lo = E2 * np.exp(-p.decay_E * t)
        F_lo = F2 * np.exp(-p.delta_F * t)
        F_hi = K * (p.nu * p.beta_F / p.delta_F
                    - p.decay_E / p.beta_E * np.exp(-p.delta_F * t))
        record("E_lower", E < E_lo - tol, E, E_lo)
        record("E_upper", E >= K + tol, E, np.full(len(t), K))
        record("F_lower", F < F_lo - tol, F, F_lo)
        record("F_upper", F > F_hi + tol, F, F_hi)
        return BoundsReport(len(t), tol, viol)

    total = X[:, 0] + X[:, 2]
    record("eggs_below_capacity", total >= K, total, np.full(len(t), K))
    return BoundsReport(len(t), pos_tol, viol)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """``t,<states>,u``; one row per node, 17 significant digits, LF.

    The control on [t_k, t_k+1) is written on node k; the final node
    repeats the last interval's value.
    """
    u = traj.control.values
    u_nodes = np.append(u, u[-1])
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(("t",) + tuple(traj.names) + ("u",)) + "\n")
        for k, tk in enumerate(traj.t):
            row = [tk, *traj.states[k], u_nodes[k]]
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")


def read_trajectory_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data
