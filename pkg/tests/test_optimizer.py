import numpy as np
import pytest

from mosquito_release.control import TimeGrid, project_admissible
from mosquito_release.model import SitParams, sit_equilibria
from mosquito_release.optimizer import (
    ControlProblem,
    OptimizationError,
    continuous_adjoint,
    discrete_adjoint,
    gradient,
    initial_controls,
    projected_gradient,
    solve,
    stationarity,
)


def fd_relative_error(problem, values, coords):
    """Central differences (step 1e-4 Ubar) against the adjoint gradient on
    ``coords``; norm-wise relative error."""
    g = gradient(problem, values)
    h = 1e-4 * problem.Ubar
    fd = []
    for k in coords:
        up, dn = values.copy(), values.copy()
        up[k] += h
        dn[k] -= h
        fd.append((problem.raw_cost(up) - problem.raw_cost(dn)) / (2 * h))
    fd = np.array(fd)
    return np.linalg.norm(g[coords] - fd) / np.linalg.norm(fd)


@pytest.mark.parametrize("which", ["sit_problem", "wol_problem"])
def test_gradient_matches_finite_differences(request, which, rng):
    problem = request.getfixturevalue(which)
    g = problem.grid
    for _ in range(3):
        v = project_admissible(rng.uniform(0, problem.Ubar, g.N), problem.Ubar,
                               problem.C, g.dt).values.copy()
        coords = rng.choice(g.N, 10, replace=False)
        assert fd_relative_error(problem, v, coords) < 1e-5


def test_gradient_vanishes_without_interference():
    p = SitParams(gamma=0.0)
    problem = ControlProblem(p, TimeGrid(7.0, 70), 1000.0, 3000.0)
    v = np.full(70, 400.0)
    assert not np.any(gradient(problem, v))


def test_costate_at_final_node_is_terminal_gradient(sit_problem):
    v = np.zeros(sit_problem.grid.N)
    _, lam = discrete_adjoint(sit_problem, v)
    x = sit_equilibria(sit_problem.params)[1].state
    np.testing.assert_allclose(lam[-1], (x[0], x[1], 0.0), rtol=1e-10)


def test_discrete_and_continuous_adjoints_converge(sit):
    # the discrepancy must shrink at least linearly with dt
    errs = []
    for N in (70, 140, 280):
        problem = ControlProblem(sit, TimeGrid(7.0, N), 1000.0, 3000.0)
        t = problem.grid.nodes[:-1] + 0.5 * problem.grid.dt
        v = np.where(t < 2.8, 1000.0, 0.0)
        traj = problem.simulate(v)
        g, _ = discrete_adjoint(problem, v, traj.states)
        p = continuous_adjoint(problem, traj)
        mid = 0.5 * (p[:-1, 2] + p[1:, 2])
        errs.append(np.max(np.abs(g / problem.grid.dt - mid)))
    assert errs[0] / errs[1] > 1.9 and errs[1] / errs[2] > 1.9, errs


def test_initial_controls_are_admissible_and_seeded(sit_problem):
    a = initial_controls(sit_problem, 6, seed=3)
    b = initial_controls(sit_problem, 6, seed=3)
    assert [k for k, _ in a] == ["zero", "front", "back", "random", "random", "random"]
    dt = sit_problem.grid.dt
    for (_, u), (_, w) in zip(a, b):
        np.testing.assert_array_equal(u, w)
        assert np.all(u >= 0) and np.all(u <= sit_problem.Ubar)
        assert u.sum() * dt <= sit_problem.C * (1 + 1e-9)
    front, back = a[1][1], a[2][1]
    assert front[0] == sit_problem.Ubar and back[-1] == sit_problem.Ubar


def test_monotone_descent_and_feasibility(sit_problem):
    res = projected_gradient(sit_problem, np.zeros(sit_problem.grid.N), max_iter=60)
    h = np.array(res["history"])
    assert np.all(np.diff(h) <= 0)
    u = res["values"]
    assert np.all(u >= 0) and np.all(u <= sit_problem.Ubar)
    assert u.sum() * sit_problem.grid.dt <= sit_problem.C * (1 + 1e-9)


def test_zero_budget_gives_zero_control(sit):
    problem = ControlProblem(sit, TimeGrid(7.0, 70), 1000.0, 0.0)
    sol = solve(problem)
    assert not np.any(sol.control.values)
    wild = sit_equilibria(sit)[1].state
    assert sol.cost == pytest.approx(0.5 * (wild[0]**2 + wild[1]**2), rel=1e-8)


@pytest.fixture(scope="module")
def sit_solution(sit_problem):
    return solve(sit_problem, seed=7)


def test_sit_solution_structure(sit_solution, sit_problem):
    sol = sit_solution
    assert sol.converged
    g = gradient(sit_problem, sol.control)
    assert stationarity(sit_problem, sol.control.values, g) < 1e-6 * sit_problem.Ubar
    d = sol.diagnostics
    assert d.budget_ratio >= 0.99
    assert d.tail_zero_time < sit_problem.grid.T
    assert sol.cost == min(sol.per_start_costs)
    assert len(sol.per_start_costs) == 4
    assert d.transversality["p3"] == 0.0


def test_solve_is_deterministic(sit_problem, sit_solution):
    again = solve(sit_problem, seed=7)
    assert again.control.values.tobytes() == sit_solution.control.values.tobytes()
    assert again.per_start_costs == sit_solution.per_start_costs


def test_all_starts_diverging_raises(monkeypatch, sit_problem):
    from mosquito_release import optimizer
    from mosquito_release.dynamics import DivergenceError

    def boom(*a, **k):
        raise DivergenceError(1, (np.inf,))

    monkeypatch.setattr(optimizer, "projected_gradient", boom)
    with pytest.raises(OptimizationError) as exc:
        optimizer.solve(sit_problem, starts=2)
    assert len(exc.value.logs) == 2
