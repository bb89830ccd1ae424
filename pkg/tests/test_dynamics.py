import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mosquito_release.control import ControlGrid, TimeGrid, project_admissible, total_release
from mosquito_release.dynamics import (
    DivergenceError,
    integrate,
    read_trajectory_csv,
    simulate,
    verify_bounds,
    write_trajectory_csv,
)
from mosquito_release.model import SIT_STATE_NAMES, sit_equilibria, sit_kernel


def constant(grid, value, Ubar=None, C=math.inf):
    Ubar = value if Ubar is None else Ubar
    return ControlGrid(grid, np.full(grid.N, float(value)), Ubar, C)


def test_time_grid():
    g = TimeGrid(7.0, 140)
    assert g.dt == pytest.approx(0.05)
    assert g.nodes[-1] == pytest.approx(7.0)
    assert TimeGrid.default(7).N == 200
    assert TimeGrid.default(90).N == 900
    with pytest.raises(ValueError):
        TimeGrid(0.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)


def test_sterile_male_decay_matches_exponential(sit):
    g = TimeGrid(1.0, 100)
    traj = integrate(sit_kernel(sit)[0], (0.0, 0.0, 1.0), constant(g, 0.0))
    assert traj.states[-1, 2] == pytest.approx(math.exp(-0.12), abs=1e-8)
    assert traj.states[-1, 2] == pytest.approx(0.8869204, abs=1e-7)


def test_equilibrium_is_stationary(sit):
    g = TimeGrid(7.0, 200)
    traj = simulate(sit, constant(g, 0.0))
    x0 = sit_equilibria(sit)[1].state
    np.testing.assert_array_equal(traj.states[0], x0)
    np.testing.assert_allclose(traj.states, np.tile(x0, (g.N + 1, 1)), rtol=1e-8, atol=0)


def rk4_order(sit, Ns=(35, 70, 140), N_ref=4480):
    """Observed order from errors against a fine-grid self-reference."""
    def final(N):
        g = TimeGrid(7.0, N)
        return simulate(sit, constant(g, 1000.0)).states[-1]

    ref = final(N_ref)
    errs = [np.max(np.abs(final(N) - ref)) for N in Ns]
    return [math.log2(a / b) for a, b in zip(errs, errs[1:])], errs


def test_rk4_convergence_order(sit):
    orders, errs = rk4_order(sit)
    for q in orders:
        assert 3.7 <= q <= 4.3, (orders, errs)


def test_integrate_is_deterministic(sit, rng):
    g = TimeGrid(7.0, 140)
    u = project_admissible(rng.uniform(0, 1000, g.N), 1000, 3000, g.dt)
    a = simulate(sit, u)
    b = simulate(sit, u)
    assert a.states.tobytes() == b.states.tobytes()


def test_divergence_reports_node():
    g = TimeGrid(1.0, 10)
    blowup = lambda x, u: (x[0] ** 2 * 1e300,)  # noqa: E731
    with pytest.raises(DivergenceError) as exc:
        integrate(blowup, (1.0,), constant(g, 0.0))
    assert exc.value.node == 1


def test_negative_initial_state_rejected(sit):
    g = TimeGrid(1.0, 10)
    with pytest.raises(ValueError):
        integrate(sit_kernel(sit)[0], (-1.0, 0.0, 0.0), constant(g, 0.0))


def test_mismatched_grid_rejected(sit):
    with pytest.raises(ValueError):
        integrate(sit_kernel(sit)[0], (0, 0, 0), constant(TimeGrid(1.0, 10), 0.0),
                  TimeGrid(1.0, 20))


def test_bounds_hold_from_equilibrium_with_anchor_equality(sit):
    g = TimeGrid(7.0, 140)
    traj = simulate(sit, constant(g, 0.0))
    rep = verify_bounds(traj, sit)
    assert rep.ok and rep.checked_nodes == g.N + 1
    E2, F2 = traj.states[0, :2]
    # lower bounds are attained at t = 0; F upper bound as well
    assert E2 == pytest.approx(sit_equilibria(sit)[1].state[0])
    assert F2 == pytest.approx(sit.K * (0.125 - 0.08 / 10), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(Ubar=st.sampled_from([500.0, 1000.0, 1500.0]), seed=st.integers(0, 2**32 - 1))
def test_sit_bounds_for_random_admissible_controls(sit, Ubar, seed):
    g = TimeGrid(7.0, 140)
    v = np.random.default_rng(seed).uniform(0, Ubar, g.N)
    u = project_admissible(v, Ubar, 3000.0, g.dt)
    traj = simulate(sit, u)
    rep = verify_bounds(traj, sit)
    assert rep.ok, rep.violations[:3]
    assert traj.states.min() >= -1e-9 * sit.K
    assert total_release(traj.control) == total_release(u)


def test_sit_bound_violation_is_reported(sit):
    g = TimeGrid(7.0, 140)
    traj = simulate(sit, constant(g, 0.0), init=(sit.K * 1.1, 1000.0, 0.0))
    rep = verify_bounds(traj, sit)
    assert not rep.ok
    assert rep.violations[0]["bound"] == "E_upper"


def test_wolbachia_full_release_respects_capacity(wol):
    g = TimeGrid.default(90.0)
    traj = simulate(wol, constant(g, 500.0))
    rep = verify_bounds(traj, wol)
    assert rep.ok
    assert np.all(traj["Eu"] + traj["Ei"] < wol.K)
    assert traj.states.min() >= 0


def test_trajectory_csv_schema(sit, tmp_path, rng):
    g = TimeGrid(7.0, 20)
    u = project_admissible(rng.uniform(0, 1000, g.N), 1000, 3000, g.dt)
    traj = simulate(sit, u)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "t,E,F,Ms,u"
    assert len(lines) == g.N + 2
    header, data = read_trajectory_csv(path)
    assert tuple(header[1:-1]) == SIT_STATE_NAMES
    # 17 significant digits round-trip exactly
    np.testing.assert_array_equal(data[:, 1:4], traj.states)
    np.testing.assert_array_equal(data[:-1, 4], u.values)
    assert data[-1, 4] == u.values[-1]
