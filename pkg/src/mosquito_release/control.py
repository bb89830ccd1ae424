"""Piecewise-constant release schedules, projection onto the admissible set
{0 <= u <= Ubar, integral of u <= C}, and the terminal cost functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InvalidConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be > 0, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt

    @classmethod
    def default(cls, T: float) -> "TimeGrid":
        """At least 200 intervals and at least 10 per day."""
        return cls(T, max(200, math.ceil(10 * T)))


@dataclass(frozen=True, eq=False)
class ControlGrid:
    grid: TimeGrid
    values: np.ndarray
    Ubar: float
    C: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} control values, got {v.shape}")
        if self.Ubar < 0 or self.C < 0:
            raise InvalidConstraintError("Ubar and C must be nonnegative")
        if not np.all(np.isfinite(v)):
            raise ValueError("control values must be finite")
        if np.any(v < 0) or np.any(v > self.Ubar):
            raise ValueError("control violates 0 <= u <= Ubar")
        if v.sum() * self.grid.dt > self.C * (1 + 1e-9) + 1e-12:
            raise ValueError(
                f"control releases {v.sum() * self.grid.dt} > budget {self.C}"
            )

    @property
    def dt(self) -> float:
        return self.grid.dt

    def total_release(self) -> float:
        return total_release(self)

    def with_values(self, values) -> "ControlGrid":
        return ControlGrid(self.grid, values, self.Ubar, self.C)


def total_release(u: ControlGrid) -> float:
    """Exact integral of the piecewise-constant control."""
    return float(np.sum(u.values) * u.grid.dt)


def _released(v, shift, Ubar, dt):
    return float(np.sum(np.clip(v - shift, 0.0, Ubar)) * dt)


def budget_shift(v, Ubar: float, C: float, dt: float) -> float:
    """Smallest shift ``lam >= 0`` with sum(clip(v - lam, 0, Ubar)) * dt <= C.

    Found by bisection, then polished in closed form on the active set the
    bisection identified.
    """
    v = np.asarray(v, dtype=float)
    if _released(v, 0.0, Ubar, dt) <= C:
        return 0.0
    lo, hi = 0.0, float(np.max(v))
    if C == 0:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = _released(v, mid, Ubar, dt) - C
        if abs(r) < 1e-12 * C:
            lo = hi = mid
            break
        if r > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, hi):
            break
    lam = 0.5 * (lo + hi)
    # exact solve on the active set found at lam
    w = v - lam
    free = (w > 0) & (w < Ubar)
    n_free = int(np.count_nonzero(free))
    if n_free:
        n_cap = int(np.count_nonzero(w >= Ubar))
        exact = (np.sum(v[free]) + n_cap * Ubar - C / dt) / n_free
        if exact >= 0 and abs(_released(v, exact, Ubar, dt) - C) <= abs(
            _released(v, lam, Ubar, dt) - C
        ):
            lam = exact
    return float(lam)


def project_admissible(v, Ubar: float, C: float, dt: float) -> ControlGrid:
    """Euclidean projection of ``v`` onto the discretised admissible set."""
    if Ubar < 0 or C < 0:
        raise InvalidConstraintError(f"need Ubar >= 0 and C >= 0, got {Ubar}, {C}")
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project non-finite values")
    lam = budget_shift(v, Ubar, C, dt)
    u = np.clip(v - lam, 0.0, Ubar)
    return ControlGrid(TimeGrid(len(v) * dt, len(v)), u, Ubar, C)


def project_values(v, u: ControlGrid) -> np.ndarray:
    """Project raw values onto the admissible set of ``u`` (array result)."""
    lam = budget_shift(v, u.Ubar, u.C, u.grid.dt)
    return np.clip(np.asarray(v, dtype=float) - lam, 0.0, u.Ubar)


# ---------------------------------------------------------------------------
# costs


def cost_sit(traj) -> float:
    E, F = traj.states[-1, 0], traj.states[-1, 1]
    return 0.5 * (E * E + F * F)


def wol_targets(p) -> tuple[float, float]:
    """Infected egg and female levels of the invasion equilibrium."""
    from .model import wol_invasion

    inv = wol_invasion(p)
    return float(inv[2]), float(inv[3])


def cost_wol(traj, p) -> float:
    Eu, Fu, Ei, Fi = traj.states[-1]
    tE, tF = wol_targets(p)
    gE = max(tE - Ei, 0.0)
    gF = max(tF - Fi, 0.0)
    return 0.5 * (Eu * Eu + Fu * Fu + gE * gE + gF * gF)
