"""Independent reference implementations used by the tests."""

import itertools

import numpy as np


def qp_projection(v, Ubar, C, dt):
    """Projection onto {0 <= u <= Ubar, dt * sum(u) <= C} by enumerating
    every active set: each coordinate at 0, at Ubar or free, with the
    budget row active or not.  Returns the feasible KKT candidate closest
    to ``v``."""
    v = np.asarray(v, dtype=float)
    n = len(v)
    best, best_d = None, np.inf
    for pattern in itertools.product((0, 1, 2), repeat=n):
        pattern = np.array(pattern)
        upper, free = pattern == 1, pattern == 2
        for budget_active in (False, True):
            u = np.where(upper, Ubar, 0.0)
            if budget_active:
                if not free.any():
                    continue
                # dt * (sum(v_free - lam) + n_upper * Ubar) = C
                lam = (v[free].sum() + upper.sum() * Ubar - C / dt) / free.sum()
                if lam < -1e-12:
                    continue
            else:
                lam = 0.0
            u[free] = v[free] - lam
            tol = 1e-12 * max(1.0, Ubar, abs(C))
            if np.any(u < -tol) or np.any(u > Ubar + tol):
                continue
            if u.sum() * dt > C + tol:
                continue
            d = np.sum((u - v) ** 2)
            if d < best_d:
                best, best_d = np.clip(u, 0.0, Ubar), d
    return best
