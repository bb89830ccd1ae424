"""Reduced mosquito population models: sterile-male releases (SIT) and
Wolbachia-infected releases.

State layouts
-------------
SIT        : (E, F, Ms)          eggs, wild females (= wild males), sterile males
Wolbachia  : (Eu, Fu, Ei, Fi)    uninfected / infected eggs and females

Both reductions assume a 1:1 sex ratio (nu = 1/2) and equal adult death
rates for males and females, so the male compartment is identified with
the female one.  ``nu`` is still exposed as a parameter.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

SIT_STATE_NAMES = ("E", "F", "Ms")
WOL_STATE_NAMES = ("Eu", "Fu", "Ei", "Fi")

# Default female density: 69 males/ha on a 74 ha island, F = M.
DEFAULT_F_TARGET = 69.0 * 74.0

# Reference value intervals; membership is advisory only.
SIT_INTERVALS = {
    "beta_E": (7.46, 14.85),
    "gamma": (0.0, 1.0),
    "tau_E": (0.005, 0.25),
    "delta_E": (0.023, 0.046),
    "beta_F": (0.005, 0.025),
    "delta_F": (0.033, 0.046),
}
WOL_INTERVALS = {
    **{k: v for k, v in SIT_INTERVALS.items() if k != "gamma"},
    "eta": (0.85, 1.0),
    "delta": (1.0, 1.7),
}


class InvalidStateError(ValueError):
    """Raised when a state or control value is not finite."""


class NoPositiveEquilibriumError(ValueError):
    """Raised when the population cannot persist (no positive equilibrium)."""


def _warn_intervals(obj, intervals):
    for name, (lo, hi) in intervals.items():
        value = getattr(obj, name)
        if not lo <= value <= hi:
            warnings.warn(
                f"{type(obj).__name__}.{name}={value} lies outside the "
                f"reference interval [{lo}, {hi}]",
                stacklevel=3,
            )


@dataclass(frozen=True)
class SitParams:
    beta_E: float = 10.0
    gamma: float = 1.0
    tau_E: float = 0.05
    delta_E: float = 0.03
    beta_F: float = 0.01
    delta_F: float = 0.04
    delta_s: float = 0.12
    nu: float = 0.5
    K: float = field(default=float("nan"))

    def __post_init__(self):
        for name in ("beta_E", "tau_E", "delta_E", "beta_F", "delta_F", "delta_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0 < self.nu < 1:
            raise ValueError(f"nu must lie in (0, 1), got {self.nu}")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if math.isnan(self.K):
            object.__setattr__(
                self, "K", derive_carrying_capacity(DEFAULT_F_TARGET, self)
            )
        if not self.K > 0:
            raise ValueError(f"K must be > 0, got {self.K}")
        _warn_intervals(self, SIT_INTERVALS)

    @property
    def decay_E(self) -> float:
        return self.tau_E + self.delta_E

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class WolParams:
    beta_E: float = 10.0
    tau_E: float = 0.05
    delta_E: float = 0.03
    beta_F: float = 0.01
    delta_F: float = 0.04
    nu: float = 0.5
    s_h: float = 0.9951
    eta: float = 0.95
    delta: float = 1.25
    K: float = field(default=float("nan"))

    def __post_init__(self):
        for name in ("beta_E", "tau_E", "delta_E", "beta_F", "delta_F"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0 < self.nu < 1:
            raise ValueError(f"nu must lie in (0, 1), got {self.nu}")
        if not 0 < self.s_h <= 1:
            raise ValueError(f"s_h must lie in (0, 1], got {self.s_h}")
        if not 0 < self.eta < 1:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if not self.delta > 1:
            raise ValueError(f"delta must be > 1, got {self.delta}")
        if math.isnan(self.K):
            object.__setattr__(
                self, "K", derive_carrying_capacity(DEFAULT_F_TARGET, self)
            )
        if not self.K > 0:
            raise ValueError(f"K must be > 0, got {self.K}")
        _warn_intervals(self, WOL_INTERVALS)

    @property
    def decay_E(self) -> float:
        return self.tau_E + self.delta_E

    @property
    def b(self) -> float:
        """Basic offspring number per egg of the uninfected population."""
        return self.nu * self.beta_F * self.beta_E / (self.tau_E + self.delta_E)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _check_finite(state, u):
    if not (all(math.isfinite(x) for x in state) and math.isfinite(u)):
        raise InvalidStateError(f"non-finite input: state={list(state)}, u={u}")


# ---------------------------------------------------------------------------
# right-hand sides
#
# The ``*_kernel`` factories bind parameters into plain-float closures; the
# integrator and adjoint loops call these thousands of times per gradient, so
# they avoid numpy on 3- and 4-vectors.


def sit_kernel(p: SitParams) -> tuple[Callable, Callable]:
    """Return ``(f, jac)`` for the SIT system with parameters bound.

    ``f(x, u)`` returns the derivative tuple, ``jac(x, u)`` the 3x3 state
    Jacobian as nested tuples.  The fertile-mating ratio F/(F + gamma Ms)
    is taken as 0 where its denominator vanishes.
    """
    bE, g, m = p.beta_E, p.gamma, p.decay_E
    nbF, dF, ds, K = p.nu * p.beta_F, p.delta_F, p.delta_s, p.K

    def f(x, u):
        E, F, M = x
        den = F + g * M
        fE = bE * F * F * (1.0 - E / K) / den if den != 0.0 else 0.0
        return (fE - m * E, nbF * E - dF * F, u - ds * M)

    def jac(x, u):
        E, F, M = x
        den = F + g * M
        if den != 0.0:
            s = 1.0 - E / K
            d2 = den * den
            a = -bE * F * F / (K * den)
            b = s * bE * (F * F + 2.0 * g * F * M) / d2
            c = -g * bE * F * F * s / d2
        else:
            a = b = c = 0.0
        return (
            (a - m, b, c),
            (nbF, -dF, 0.0),
            (0.0, 0.0, -ds),
        )

    return f, jac


def wol_kernel(p: WolParams) -> tuple[Callable, Callable]:
    """Return ``(f, jac)`` for the Wolbachia system with parameters bound.

    The release enters the infected-female equation.  The incompatible
    mating share Fi/(Fu + Fi) is taken as 0 where Fu + Fi = 0.
    """
    bE, m, nbF, dF = p.beta_E, p.decay_E, p.nu * p.beta_F, p.delta_F
    sh, eta, ddF, K = p.s_h, p.eta, p.delta * p.delta_F, p.K

    def f(x, u):
        Eu, Fu, Ei, Fi = x
        D = Fu + Fi
        q = Fi / D if D != 0.0 else 0.0
        S = 1.0 - (Eu + Ei) / K
        return (
            bE * Fu * (1.0 - sh * q) * S - m * Eu,
            nbF * Eu - dF * Fu,
            eta * bE * Fi * S - m * Ei,
            nbF * Ei - ddF * Fi + u,
        )

    def jac(x, u):
        Eu, Fu, Ei, Fi = x
        D = Fu + Fi
        S = 1.0 - (Eu + Ei) / K
        if D != 0.0:
            q = Fi / D
            D2 = D * D
            dFu = bE * S * (1.0 - sh * q + sh * Fu * Fi / D2)
            dFi = -sh * bE * S * Fu * Fu / D2
        else:
            q = 0.0
            dFu = bE * S
            dFi = 0.0
        dE = -bE * Fu * (1.0 - sh * q) / K
        dEi = -eta * bE * Fi / K
        return (
            (dE - m, dFu, dE, dFi),
            (nbF, -dF, 0.0, 0.0),
            (dEi, 0.0, dEi - m, eta * bE * S),
            (0.0, 0.0, nbF, -ddF),
        )

    return f, jac


def sit_rhs(state: Sequence[float], u: float, p: SitParams) -> np.ndarray:
    """Time derivative of (E, F, Ms) under release rate ``u``."""
    _check_finite(state, u)
    return np.array(sit_kernel(p)[0](tuple(map(float, state)), float(u)))


def wol_rhs(state: Sequence[float], u: float, p: WolParams) -> np.ndarray:
    """Time derivative of (Eu, Fu, Ei, Fi) under release rate ``u``."""
    _check_finite(state, u)
    return np.array(wol_kernel(p)[0](tuple(map(float, state)), float(u)))


def sit_jacobian(state, p: SitParams, u: float = 0.0) -> np.ndarray:
    return np.array(sit_kernel(p)[1](tuple(map(float, state)), float(u)))


def wol_jacobian(state, p: WolParams, u: float = 0.0) -> np.ndarray:
    return np.array(wol_kernel(p)[1](tuple(map(float, state)), float(u)))


def rhs_for(p) -> Callable:
    return sit_rhs if isinstance(p, SitParams) else wol_rhs


# ---------------------------------------------------------------------------
# assumptions


@dataclass(frozen=True)
class Inequality:
    name: str
    lhs: float
    rhs: float
    holds: bool
    relation: str = ">"

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "relation": self.relation,
            "rhs": self.rhs,
            "holds": self.holds,
        }


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple[Inequality, ...]

    @property
    def ok(self) -> bool:
        return all(c.holds for c in self.checks)

    @property
    def failures(self) -> list[Inequality]:
        return [c for c in self.checks if not c.holds]

    def __getitem__(self, name: str) -> Inequality:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {"ok": self.ok, "checks": [c.as_dict() for c in self.checks]}


def _gt(name, lhs, rhs):
    return Inequality(name, float(lhs), float(rhs), bool(lhs > rhs), ">")


def _lt(name, lhs, rhs):
    return Inequality(name, float(lhs), float(rhs), bool(lhs < rhs), "<")


def check_assumptions(p, scenario: dict | None = None) -> AssumptionReport:
    """Evaluate the standing inequalities for ``p`` (and optionally a release
    scenario with keys ``T``, ``C``, ``Ubar``).  Never raises on failure."""
    checks = []
    growth = p.nu * p.beta_E * p.beta_F
    loss = p.delta_F * p.decay_E
    if isinstance(p, SitParams):
        # male death rate is identified with the female one
        checks.append(_gt("sterile_mortality", p.delta_s, p.delta_F))
        checks.append(_gt("persistence", growth, loss))
    else:
        ddF = p.delta * p.delta_F
        checks.append(_gt("persistence", growth, loss))
        checks.append(_gt("infected_growth", p.eta * p.b, ddF))
        level = p.K * (1.0 - ddF / (p.eta * p.b))
        checks.append(_lt("capacity_lower", p.eta / p.delta**2, level))
        checks.append(_lt("capacity_upper", level, p.eta / (p.delta * (1.0 - p.s_h))
                          if p.s_h < 1 else math.inf))
    if scenario is not None:
        T, C, Ubar = scenario["T"], scenario["C"], scenario["Ubar"]
        checks.append(_gt("budget_binding", Ubar * T, C))
    return AssumptionReport(tuple(checks))


def derive_carrying_capacity(F_target: float, p) -> float:
    """Egg capacity K such that the uncontrolled wild equilibrium has
    ``F_target`` adult females.  Identical for both models."""
    if F_target < 0:
        raise ValueError(f"F_target must be >= 0, got {F_target}")
    ratio = p.delta_F * (p.tau_E + p.delta_E) / (p.nu * p.beta_E * p.beta_F)
    if not ratio < 1:
        raise NoPositiveEquilibriumError(
            "nu*beta_E*beta_F <= delta_F*(tau_E+delta_E): no positive equilibrium"
        )
    E_star = p.delta_F * F_target / (p.nu * p.beta_F)
    return E_star / (1.0 - ratio)


# ---------------------------------------------------------------------------
# equilibria


@dataclass(frozen=True)
class Equilibrium:
    state: np.ndarray
    label: str
    stability: str = "undetermined"
    eigenvalues: tuple[complex, ...] = ()
    residual: float = 0.0
    flags: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "state": [float(x) for x in self.state],
            "residual": self.residual,
            "stability": self.stability,
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "flags": list(self.flags),
            "diagnostics": self.diagnostics,
        }


def residual(state, p) -> float:
    """Max-norm of the uncontrolled right-hand side at ``state``."""
    return float(np.max(np.abs(rhs_for(p)(state, 0.0, p))))


def residual_ok(state, p, rtol: float = 1e-9) -> bool:
    scale = max(1.0, float(np.max(np.abs(state))))
    return residual(state, p) < rtol * scale


def _make(state, label, p, flags=()):
    state = np.asarray(state, dtype=float)
    return Equilibrium(state=state, label=label, residual=residual(state, p),
                       flags=tuple(flags))


def sit_equilibria(p: SitParams) -> list[Equilibrium]:
    """Extinction and non-extinction equilibria of the SIT system."""
    flags = () if check_assumptions(p).ok else ("assumption-failure",)
    E2 = p.K * (1.0 - p.decay_E * p.delta_F / (p.nu * p.beta_E * p.beta_F))
    return [
        _make((0.0, 0.0, 0.0), "extinction", p, flags),
        _make((E2, p.nu * p.beta_F / p.delta_F * E2, 0.0), "non-extinction", p, flags),
    ]


def wol_invasion(p: WolParams) -> np.ndarray:
    K, b, nbF, ddF = p.K, p.b, p.nu * p.beta_F, p.delta * p.delta_F
    return np.array([0.0, 0.0, K * (1 - ddF / (b * p.eta)),
                     K * (nbF / ddF - nbF / (b * p.eta))])


def wol_free(p: WolParams) -> np.ndarray:
    K, b, nbF = p.K, p.b, p.nu * p.beta_F
    return np.array([K * (1 - p.delta_F / b), K * (nbF / p.delta_F - nbF / b), 0.0, 0.0])


def wol_coexistence_closed_form(p: WolParams) -> np.ndarray:
    """Coexistence state from the standard closed form, taken as is.

    The formula mixes eta/delta with capacity-scaled terms, so it is not
    trusted without a residual check.
    """
    K, b, eta, d, sh = p.K, p.b, p.eta, p.delta, p.s_h
    level = K * (1 - d * p.delta_F / (b * eta))
    Eu = (eta / d - (1 - sh) * level) / (sh + d - 1)
    Ei = (d * level - eta / d) / (sh + d - 1)
    nbF = p.nu * p.beta_F
    return np.array([Eu, nbF / p.delta_F * Eu, Ei, nbF / (d * p.delta_F) * Ei])


def damped_newton(f, jac, x0, tol=1e-10, max_iter=100):
    """Damped Newton for f(x) = 0 with backtracking on ||f||_2.

    Returns ``(x, converged, iterations)``; ``tol`` is relative to
    ``max(1, ||x||_inf)``.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = np.asarray(f(x))
    for it in range(1, max_iter + 1):
        if np.max(np.abs(fx)) < tol * max(1.0, np.max(np.abs(x))):
            return x, True, it - 1
        try:
            step = np.linalg.solve(np.asarray(jac(x)), -fx)
        except np.linalg.LinAlgError:
            return x, False, it
        norm0 = np.linalg.norm(fx)
        t = 1.0
        while t > 1e-12:
            xn = x + t * step
            fn = np.asarray(f(xn))
            if np.all(np.isfinite(fn)) and np.linalg.norm(fn) < (1 - 1e-4 * t) * norm0:
                break
            t *= 0.5
        else:
            return x, False, it
        x, fx = xn, fn
    ok = np.max(np.abs(fx)) < tol * max(1.0, np.max(np.abs(x)))
    return x, bool(ok), max_iter


def wol_equilibria(p: WolParams) -> list[Equilibrium]:
    """Invasion, Wolbachia-free, coexistence and total-extinction states.

    The coexistence closed form is kept if it passes the residual check.
    Otherwise damped Newton is run from it; if that lands on one of the
    other equilibria or leaves the nonnegative orthant, further seeds are
    taken along the segment joining the Wolbachia-free and invasion states
    (the saddle sits between their basins).
    """
    report = check_assumptions(p)
    base_flags = () if report.ok else ("assumption-failure",)
    invasion = _make(wol_invasion(p), "wolbachia-invasion", p, base_flags)
    free = _make(wol_free(p), "wolbachia-extinction", p, base_flags)
    zero = _make((0.0, 0.0, 0.0, 0.0), "extinction", p, base_flags)

    closed = wol_coexistence_closed_form(p)
    if residual_ok(closed, p) and np.all(closed >= 0):
        coexistence = _make(closed, "coexistence", p, base_flags)
    else:
        f = lambda x: wol_rhs(x, 0.0, p)  # noqa: E731
        J = lambda x: wol_jacobian(x, p)  # noqa: E731
        others = [invasion.state, free.state, zero.state]
        tried = []
        found = None
        seeds = [("closed-form", closed)] + [
            (f"segment-{k}/20", k / 20 * invasion.state + (1 - k / 20) * free.state)
            for k in range(1, 20)
        ]
        for name, seed in seeds:
            x, conv, its = damped_newton(f, J, seed)
            distinct = all(np.max(np.abs(x - o)) > 1e-6 * p.K for o in others)
            tried.append({"seed": name, "converged": conv, "iterations": its,
                          "state": [float(v) for v in x], "distinct": distinct})
            if conv and distinct and np.all(x >= -1e-9 * p.K):
                found = np.maximum(x, 0.0)
                break
        diag = {"closed_form": [float(v) for v in closed],
                "closed_form_residual": residual(closed, p), "newton": tried}
        if found is None:
            coexistence = Equilibrium(
                state=closed, label="coexistence", residual=residual(closed, p),
                flags=base_flags + ("closed-form-mismatch", "newton-failed"),
                diagnostics=diag,
            )
        else:
            coexistence = Equilibrium(
                state=found, label="coexistence", residual=residual(found, p),
                flags=base_flags + ("closed-form-mismatch",), diagnostics=diag,
            )
    return [invasion, free, coexistence, zero]


def equilibria(p) -> list[Equilibrium]:
    return sit_equilibria(p) if isinstance(p, SitParams) else wol_equilibria(p)
