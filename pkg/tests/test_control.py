import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mosquito_release.control import (
    ControlGrid,
    InvalidConstraintError,
    TimeGrid,
    budget_shift,
    cost_sit,
    cost_wol,
    project_admissible,
    total_release,
)
from mosquito_release.model import sit_equilibria, wol_free, wol_invasion

from oracles import qp_projection


class _Final:
    def __init__(self, x):
        self.states = np.array([x], dtype=float)


def test_projection_examples():
    u = project_admissible([3.0, 1.0, 0.0], 2.0, 10.0, 1.0)
    np.testing.assert_allclose(u.values, [2.0, 1.0, 0.0], atol=1e-12)
    u = project_admissible([3.0, 3.0, 0.0], 2.0, 3.0, 1.0)
    np.testing.assert_allclose(u.values, [1.5, 1.5, 0.0], atol=1e-12)
    assert total_release(u) == pytest.approx(3.0, abs=1e-12)


def test_projection_zero_budget_and_zero_cap():
    assert not np.any(project_admissible([5.0, -1.0, 2.0], 3.0, 0.0, 0.5).values)
    assert not np.any(project_admissible([5.0, 1.0], 0.0, 10.0, 1.0).values)


def test_invalid_constraints():
    with pytest.raises(InvalidConstraintError):
        project_admissible([1.0], -1.0, 1.0, 1.0)
    with pytest.raises(InvalidConstraintError):
        project_admissible([1.0], 1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        project_admissible([math.nan], 1.0, 1.0, 1.0)


def test_total_release_is_exact_integral():
    g = TimeGrid(1.5, 3)
    assert total_release(ControlGrid(g, [1.0, 2.0, 3.0], 3.0, 10.0)) == 3.0


def test_control_grid_rejects_inadmissible_values():
    g = TimeGrid(2.0, 2)
    with pytest.raises(ValueError):
        ControlGrid(g, [1.0, 3.0], 2.0, 10.0)
    with pytest.raises(ValueError):
        ControlGrid(g, [2.0, 2.0], 2.0, 3.0)
    with pytest.raises(ValueError):
        ControlGrid(g, [1.0], 2.0, 3.0)
    u = ControlGrid(g, [1.0, 1.0], 2.0, 3.0)
    with pytest.raises(ValueError):
        u.values[0] = 0.5


def test_projection_matches_active_set_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(1, 7))
        dt = float(rng.uniform(0.1, 2.0))
        Ubar = float(rng.uniform(0.5, 10.0))
        C = float(rng.uniform(0.0, 1.2 * Ubar * n * dt))
        v = rng.normal(0.5 * Ubar, Ubar, n)
        ours = project_admissible(v, Ubar, C, dt).values
        ref = qp_projection(v, Ubar, C, dt)
        np.testing.assert_allclose(ours, ref, atol=1e-9, rtol=0)


values = arrays(np.float64, st.integers(1, 60), elements=st.floats(-1e4, 1e4))


@settings(max_examples=200, deadline=None)
@given(v=values, Ubar=st.floats(0.0, 2e3), C=st.floats(0.0, 1e4),
       dt=st.floats(1e-3, 2.0))
def test_projection_properties(v, Ubar, C, dt):
    u = project_admissible(v, Ubar, C, dt).values
    assert np.all(u >= 0) and np.all(u <= Ubar)
    assert u.sum() * dt <= C * (1 + 1e-9) + 1e-12
    # idempotent
    np.testing.assert_allclose(project_admissible(u, Ubar, C, dt).values, u,
                               atol=1e-9 * max(1.0, Ubar))
    # variational inequality <v - u, w - u> <= 0 against admissible vertices
    w = np.zeros_like(u)
    assert np.dot(v - u, w - u) <= 1e-7 * max(1.0, np.abs(v).max() * np.abs(u).sum())


@settings(max_examples=100, deadline=None)
@given(v=values, Ubar=st.floats(0.1, 2e3), C=st.floats(0.0, 1e4), dt=st.floats(1e-3, 2.0))
def test_budget_shift_is_minimal(v, Ubar, C, dt):
    lam = budget_shift(v, Ubar, C, dt)
    assert lam >= 0
    used = np.clip(v - lam, 0, Ubar).sum() * dt
    if lam > 0:
        assert used == pytest.approx(C, rel=1e-9, abs=1e-9)


def test_cost_examples(sit, wol):
    assert cost_sit(_Final((3.0, 4.0, 100.0))) == 12.5
    wild = sit_equilibria(sit)[1].state
    assert cost_sit(_Final(wild)) == pytest.approx(0.5 * (40848.0**2 + 5106.0**2), rel=1e-12)
    # at the invasion state the Wolbachia cost is zero; at the wild state
    # it combines the wild density and the missing infected density
    assert cost_wol(_Final(wol_invasion(wol)), wol) == 0.0
    free = wol_free(wol)
    inv = wol_invasion(wol)
    expected = 0.5 * (free[0]**2 + free[1]**2 + inv[2]**2 + inv[3]**2)
    assert cost_wol(_Final(free), wol) == pytest.approx(expected, rel=1e-12)
    # overshooting the infected target is not penalised
    assert cost_wol(_Final((0, 0, 2 * inv[2], 2 * inv[3])), wol) == 0.0
