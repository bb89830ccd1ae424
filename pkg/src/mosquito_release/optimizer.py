"""Release-schedule optimisation: discrete-adjoint gradients, projected
gradient descent with Armijo backtracking, multi-start, and first-order
(Pontryagin) diagnostics of the result."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .control import (
    ControlGrid,
    TimeGrid,
    budget_shift,
    cost_sit,
    cost_wol,
    total_release,
    wol_targets,
)
from .dynamics import DivergenceError, Trajectory, rk4_states, rk4_step, simulate
from .model import SitParams, WolParams, sit_kernel, wol_kernel

log = logging.getLogger(__name__)


class OptimizationError(RuntimeError):
    def __init__(self, msg, logs=()):
        super().__init__(msg)
        self.logs = list(logs)


@dataclass(frozen=True, eq=False)
class ControlProblem:
    params: SitParams | WolParams
    grid: TimeGrid
    Ubar: float
    C: float

    @property
    def model(self) -> str:
        return "sit" if isinstance(self.params, SitParams) else "wolbachia"

    @property
    def control_index(self) -> int:
        """State component the release feeds into."""
        return 2 if self.model == "sit" else 3

    @property
    def kernel(self):
        return sit_kernel(self.params) if self.model == "sit" else wol_kernel(self.params)

    def control(self, values) -> ControlGrid:
        return ControlGrid(self.grid, values, self.Ubar, self.C)

    def project(self, values) -> np.ndarray:
        lam = budget_shift(values, self.Ubar, self.C, self.grid.dt)
        return np.clip(np.asarray(values, dtype=float) - lam, 0.0, self.Ubar)

    def simulate(self, u) -> Trajectory:
        if not isinstance(u, ControlGrid):
            u = self.control(u)
        return simulate(self.params, u)

    def cost(self, traj: Trajectory) -> float:
        return cost_sit(traj) if self.model == "sit" else cost_wol(traj, self.params)

    def initial_state(self) -> tuple:
        return tuple(self.simulate(np.zeros(self.grid.N)).states[0])

    def raw_cost(self, values) -> float:
        """Cost of arbitrary (possibly inadmissible) interval values."""
        f = self.kernel[0]
        states = rk4_states(f, self.initial_state(), list(map(float, values)),
                            self.grid.dt)
        return self.cost(_FakeTraj(states))

    def terminal_gradient(self, x) -> tuple:
        """Gradient of the terminal cost with respect to the final state."""
        if self.model == "sit":
            return (float(x[0]), float(x[1]), 0.0)
        tE, tF = wol_targets(self.params)
        return (float(x[0]), float(x[1]),
                -max(tE - float(x[2]), 0.0), -max(tF - float(x[3]), 0.0))


# ---------------------------------------------------------------------------
# gradients


def _jtv(J, v):
    n = len(v)
    return tuple(sum(J[i][j] * v[i] for i in range(n)) for j in range(n))


def _axpy(a, x, y):
    return tuple(yi + a * xi for xi, yi in zip(x, y))


def discrete_adjoint(problem: ControlProblem, values, states=None):
    """Reverse sweep through the RK4 steps.

    Returns ``(grad, costates)``: ``grad[k]`` is the exact derivative of the
    discretised cost with respect to ``values[k]`` and ``costates[k]`` the
    derivative with respect to the node state ``x_k``.
    """
    f, jac = problem.kernel
    h = problem.grid.dt
    values = [float(v) for v in np.asarray(values)]
    if states is None:
        states = rk4_states(f, problem.initial_state(), values, h)
    states = [tuple(s) for s in states]
    ci = problem.control_index
    N = len(values)
    lam = problem.terminal_gradient(states[-1])
    grad = np.empty(N)
    costates = [None] * (N + 1)
    costates[N] = lam
    for k in range(N - 1, -1, -1):
        x, u = states[k], values[k]
        k1 = f(x, u)
        y2 = _axpy(0.5 * h, k1, x)
        k2 = f(y2, u)
        y3 = _axpy(0.5 * h, k2, x)
        k3 = f(y3, u)
        y4 = _axpy(h, k3, x)

        kb4 = tuple(h / 6.0 * l for l in lam)
        kb3 = tuple(h / 3.0 * l for l in lam)
        kb2 = kb3
        kb1 = kb4
        xb = lam

        t = _jtv(jac(y4, u), kb4)
        xb = _axpy(1.0, t, xb)
        kb3 = _axpy(h, t, kb3)
        t = _jtv(jac(y3, u), kb3)
        xb = _axpy(1.0, t, xb)
        kb2 = _axpy(0.5 * h, t, kb2)
        t = _jtv(jac(y2, u), kb2)
        xb = _axpy(1.0, t, xb)
        kb1 = _axpy(0.5 * h, t, kb1)
        t = _jtv(jac(x, u), kb1)
        xb = _axpy(1.0, t, xb)

        grad[k] = kb1[ci] + kb2[ci] + kb3[ci] + kb4[ci]
        lam = xb
        costates[k] = lam
    return grad, np.array(costates)


def gradient(problem: ControlProblem, u) -> np.ndarray:
    """Exact gradient of the discretised cost w.r.t. each interval value."""
    values = u.values if isinstance(u, ControlGrid) else np.asarray(u, dtype=float)
    return discrete_adjoint(problem, values)[0]


def continuous_adjoint(problem: ControlProblem, traj: Trajectory) -> np.ndarray:
    """Costate at the nodes from the adjoint ODE  -p' = J(x)^T p,
    p(T) = terminal cost gradient, integrated backward with RK4.

    Mid-interval states are recomputed by an RK4 half step from the left
    node under the interval's control.
    """
    f, jac = problem.kernel
    h = traj.grid.dt
    X = [tuple(s) for s in traj.states]
    U = traj.control.values.tolist()
    N = len(U)
    p = problem.terminal_gradient(X[-1])
    out = [None] * (N + 1)
    out[N] = p

    def G(x, u, q):
        return tuple(-v for v in _jtv(jac(x, u), q))

    for k in range(N - 1, -1, -1):
        u = U[k]
        xm = rk4_step(f, X[k], u, 0.5 * h)
        k1 = G(X[k + 1], u, p)
        k2 = G(xm, u, _axpy(-0.5 * h, k1, p))
        k3 = G(xm, u, _axpy(-0.5 * h, k2, p))
        k4 = G(X[k], u, _axpy(-h, k3, p))
        p = tuple(pi - h / 6.0 * (a + 2 * b + 2 * c + d)
                  for pi, a, b, c, d in zip(p, k1, k2, k3, k4))
        out[k] = p
    return np.array(out)


# ---------------------------------------------------------------------------
# solver


@dataclass
class PmpReport:
    budget_used: float
    budget_ratio: float
    tail_zero_time: float
    bang_bang_fraction: float
    release_centroid: float
    lambda_estimate: float
    switching_violations: dict
    transversality: dict
    complementarity: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(eq=False)
class OptimalSolution:
    problem: ControlProblem
    control: ControlGrid
    trajectory: Trajectory
    cost: float
    stationarity: float
    iterations: int
    converged: bool
    seed: int
    per_start: list = field(default_factory=list)
    diagnostics: PmpReport | None = None

    @property
    def per_start_costs(self) -> list[float]:
        return [s["cost"] for s in self.per_start]


def initial_controls(problem: ControlProblem, starts: int, seed: int):
    """Zero, front-loaded, back-loaded, then seeded random admissible starts."""
    N, dt, Ubar, C = problem.grid.N, problem.grid.dt, problem.Ubar, problem.C

    def loaded(order):
        v = np.zeros(N)
        left = C
        for k in order:
            v[k] = min(Ubar, left / dt)
            left -= v[k] * dt
            if left <= 0:
                break
        return problem.project(v)

    rng = np.random.default_rng(seed)
    out = []
    for i in range(starts):
        if i == 0:
            out.append(("zero", np.zeros(N)))
        elif i == 1:
            out.append(("front", loaded(range(N))))
        elif i == 2:
            out.append(("back", loaded(range(N - 1, -1, -1))))
        else:
            out.append(("random", problem.project(rng.uniform(0.0, Ubar, N))))
    return out


def stationarity(problem: ControlProblem, values, grad) -> float:
    return float(np.max(np.abs(values - problem.project(values - grad)), initial=0.0))


def projected_gradient(problem: ControlProblem, u0, max_iter=500, tol=1e-6, c1=1e-4):
    """Projected gradient with Armijo backtracking from ``u0``.

    The first trial step is Ubar / max(1, |grad|_inf); later iterations try
    the larger of that and twice the last accepted step.  Steps are halved
    on Armijo failure.  Returns a dict with the final values, cost, gradient
    and bookkeeping; ``history`` holds the accepted costs.
    """
    f = problem.kernel[0]
    h = problem.grid.dt
    x0 = problem.initial_state()

    def evaluate(v):
        states = rk4_states(f, x0, v.tolist(), h)
        return states, problem.cost(_FakeTraj(states))

    u = problem.project(u0)
    states, J = evaluate(u)
    history = [J]
    status = "max_iter"
    it = 0
    r = math.inf
    g = None
    last = None
    for it in range(max_iter + 1):
        g, _ = discrete_adjoint(problem, u, states)
        r = stationarity(problem, u, g)
        if r < tol * max(problem.Ubar, 1e-300) or problem.Ubar == 0 or problem.C == 0:
            status = "converged"
            break
        if it == max_iter:
            break
        alpha0 = problem.Ubar / max(1.0, float(np.max(np.abs(g))))
        alpha = alpha0 if last is None else max(alpha0, 2.0 * last)
        while True:
            un = problem.project(u - alpha * g)
            d = un - u
            if not np.any(d):
                status = "stalled"
                break
            sn, Jn = evaluate(un)
            if Jn <= J + c1 * float(np.dot(g, d)):
                break
            alpha *= 0.5
            if alpha < 1e-14 * alpha0:
                status = "stalled"
                break
        if status == "stalled":
            break
        u, states, J = un, sn, Jn
        last = alpha
        history.append(J)
    return {"values": u, "cost": J, "gradient": g, "stationarity": r,
            "iterations": it, "status": status, "history": history}


class _FakeTraj:
    """Minimal trajectory stand-in for the cost functions."""

    def __init__(self, states):
        self.states = np.asarray(states[-1:])


def solve(problem: ControlProblem, max_iter: int = 500, tol: float = 1e-6,
          starts: int = 4, seed: int = 0) -> OptimalSolution:
    """Multi-start projected gradient; the lowest cost wins, ties going to
    the lowest start index."""
    logs = []
    best = None
    for idx, (kind, u0) in enumerate(initial_controls(problem, max(1, starts), seed)):
        try:
            res = projected_gradient(problem, u0, max_iter=max_iter, tol=tol)
        except DivergenceError as exc:
            logs.append({"start": idx, "kind": kind, "error": str(exc)})
            log.warning("start %d (%s) diverged: %s", idx, kind, exc)
            continue
        entry = {"start": idx, "kind": kind, "cost": res["cost"],
                 "iterations": res["iterations"], "status": res["status"],
                 "stationarity": res["stationarity"]}
        logs.append(entry)
        log.info("start %d (%s): J=%.10g after %d iterations (%s)", idx, kind,
                 res["cost"], res["iterations"], res["status"])
        if best is None or res["cost"] < best[1]["cost"]:
            best = (idx, res)
    if best is None:
        raise OptimizationError("all starts diverged", logs)
    _, res = best
    control = problem.control(res["values"])
    traj = problem.simulate(control)
    sol = OptimalSolution(
        problem=problem, control=control, trajectory=traj, cost=problem.cost(traj),
        stationarity=res["stationarity"], iterations=res["iterations"],
        converged=res["status"] == "converged", seed=seed,
        per_start=[e for e in logs if "cost" in e],
    )
    sol.diagnostics = pmp_diagnostics(sol)
    return sol


# ---------------------------------------------------------------------------
# diagnostics


def tail_zero_time(u: ControlGrid) -> float:
    """Start of the final stretch on which u < 1e-6 Ubar (T if none)."""
    active = np.flatnonzero(u.values >= 1e-6 * u.Ubar) if u.Ubar > 0 else []
    if len(active) == 0:
        return 0.0
    return float((active[-1] + 1) * u.grid.dt)


def bang_bang_fraction(u: ControlGrid) -> float:
    if u.Ubar == 0:
        return 1.0
    v = u.values
    near = np.minimum(np.abs(v), np.abs(u.Ubar - v)) <= 1e-3 * u.Ubar
    return float(np.mean(near))


def release_centroid(u: ControlGrid) -> float:
    """Release-mass weighted mean time (nan for an empty schedule)."""
    mass = u.values.sum()
    if mass == 0:
        return float("nan")
    mid = (np.arange(u.grid.N) + 0.5) * u.grid.dt
    return float(np.dot(u.values, mid) / mass)


def _violations(sigma, on_zero, on_cap, tol):
    return {"on_zero": int(np.count_nonzero(sigma[on_zero] < -tol)),
            "on_cap": int(np.count_nonzero(sigma[on_cap] > tol))}


def pmp_diagnostics(sol: OptimalSolution) -> PmpReport:
    """First-order structure of a computed solution.

    The costate comes from the continuous adjoint along the computed
    trajectory; the budget multiplier from the projection shift of
    ``u - grad`` (rescaled by dt to rate units).  The switching-function
    sign conditions are counted for both sign conventions of the
    multiplier, without asserting either.
    """
    prob, u, traj = sol.problem, sol.control, sol.trajectory
    dt, ci = u.grid.dt, prob.control_index
    used = total_release(u)
    ratio = used / prob.C if prob.C > 0 else 1.0

    p = continuous_adjoint(prob, traj)
    grad, _ = discrete_adjoint(prob, u.values, traj.states)
    lam_hat = budget_shift(u.values - grad, prob.Ubar, prob.C, dt)
    lam = lam_hat / dt

    pc = 0.5 * (p[:-1, ci] + p[1:, ci])
    scale = max(float(np.max(np.abs(pc))), abs(lam), 1e-300)
    tol = 1e-6 * scale
    on_zero = u.values <= 1e-6 * prob.Ubar
    on_cap = u.values >= (1 - 1e-6) * prob.Ubar
    switching = {
        "plus": _violations(pc + lam, on_zero, on_cap, tol),
        "minus": _violations(pc - lam, on_zero, on_cap, tol),
        "discrete": _violations(grad / dt + lam, on_zero, on_cap, tol),
        "n_zero": int(np.count_nonzero(on_zero)),
        "n_cap": int(np.count_nonzero(on_cap)),
    }

    term = prob.terminal_gradient(traj.states[-1])
    trans = {f"p{i + 1}": float(p[-1, i] - term[i]) for i in range(len(term))}
    trans["max_abs"] = max(abs(v) for v in trans.values())
    compl = abs(lam * (used - prob.C)) / max(abs(lam) * prob.C, 1e-300) if lam else 0.0

    return PmpReport(
        budget_used=used,
        budget_ratio=ratio,
        tail_zero_time=tail_zero_time(u),
        bang_bang_fraction=bang_bang_fraction(u),
        release_centroid=release_centroid(u),
        lambda_estimate=lam,
        switching_violations=switching,
        transversality=trans,
        complementarity=float(compl),
    )
