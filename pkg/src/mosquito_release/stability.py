"""Jacobians, a small dense eigensolver, and equilibrium classification."""

from __future__ import annotations

import dataclasses

import numpy as np

from .model import (
    Equilibrium,
    SitParams,
    WolParams,
    equilibria,
    sit_jacobian,
    wol_jacobian,
)


class SingularPointError(ValueError):
    """The mating-ratio denominator vanishes; the RHS is not differentiable."""


class EigenvalueError(ArithmeticError):
    pass


def _denominator(state, p) -> float:
    if isinstance(p, SitParams):
        return state[1] + p.gamma * state[2]
    if isinstance(p, WolParams):
        return state[1] + state[3]
    return np.inf


def jacobian(rhs, state, p=None, u: float = 0.0) -> np.ndarray:
    """Central-difference Jacobian of ``rhs(state, u, p)`` (or ``rhs(state, u)``
    when ``p`` is None) with step 1e-6 * max(1, |x_i|)."""
    x = np.asarray(state, dtype=float)
    if p is not None and abs(_denominator(x, p)) < 1e-12 * p.K:
        raise SingularPointError(f"mating ratio undefined at {x.tolist()}")
    f = (lambda y: np.asarray(rhs(y, u, p))) if p is not None else (
        lambda y: np.asarray(rhs(y, u)))
    n = len(x)
    J = np.empty((n, n))
    for i in range(n):
        h = 1e-6 * max(1.0, abs(x[i]))
        e = np.zeros(n)
        e[i] = h
        J[:, i] = (f(x + e) - f(x - e)) / (2 * h)
    return J


def analytic_jacobian(state, p, u: float = 0.0) -> np.ndarray:
    if isinstance(p, SitParams):
        return sit_jacobian(state, p, u)
    return wol_jacobian(state, p, u)


def comparison_jacobian(p: SitParams, epsilon: float = 0.0) -> np.ndarray:
    """Linearisation at 0 of the four-compartment comparison system in which
    sterile-male interference is bounded by a factor 1/(1 + epsilon).

    Male mortality is taken equal to female mortality.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return np.array([
        [-p.decay_E, p.beta_E / (1 + epsilon), 0.0],
        [p.nu * p.beta_F, -p.delta_F, 0.0],
        [(1 - p.nu) * p.beta_F, 0.0, -p.delta_F],
    ])


def wol_extinction_jacobian(p: WolParams) -> np.ndarray:
    """Linearisation at the origin along the Wolbachia-free face (Fi = 0).

    The incompatible-mating share is not differentiable at 0; on the
    invariant face it vanishes identically, which leaves two decoupled
    egg/female blocks.
    """
    return np.array([
        [-p.decay_E, p.beta_E, 0.0, 0.0],
        [p.nu * p.beta_F, -p.delta_F, 0.0, 0.0],
        [0.0, 0.0, -p.decay_E, p.eta * p.beta_E],
        [0.0, 0.0, p.nu * p.beta_F, -p.delta * p.delta_F],
    ])


# ---------------------------------------------------------------------------
# eigenvalues


def charpoly(m) -> np.ndarray:
    """Coefficients of det(x I - m), highest degree first (Faddeev-LeVerrier)."""
    A = np.asarray(m, dtype=float)
    n = A.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    M = np.zeros_like(A)
    I = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + coeffs[k - 1] * I
        coeffs[k] = -np.trace(A @ M) / k
    return coeffs


def balance(m) -> np.ndarray:
    """Diagonal similarity (powers of 2) equalising row and column norms."""
    a = np.array(m, dtype=float)
    n = a.shape[0]
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.sum(np.abs(a[:, i])) - abs(a[i, i])
            r = np.sum(np.abs(a[i, :])) - abs(a[i, i])
            if c == 0 or r == 0:
                continue
            s = c + r
            f = 1.0
            g = r / 2.0
            while c < g:
                f *= 2.0
                c *= 4.0
            g = r * 2.0
            while c > g:
                f /= 2.0
                c /= 4.0
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f
    return a


def hessenberg(m) -> np.ndarray:
    """Upper Hessenberg form by Householder reflections."""
    H = np.array(m, dtype=float)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0:
            continue
        v = x
        v[0] += np.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        H[k + 1:, :] -= 2.0 * np.outer(v, v @ H[k + 1:, :])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v)
        H[k + 2:, k] = 0.0
    return H


def _sign(a, b):
    return abs(a) if b >= 0 else -abs(a)


def hessenberg_qr(H, max_sweeps: int = 30) -> list[complex]:
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR
    with exceptional shifts; 1-based indexing internally."""
    n = H.shape[0]
    a = [[0.0] * (n + 1)] + [[0.0] + [float(v) for v in row] for row in H]
    wr = [0.0] * (n + 1)
    wi = [0.0] * (n + 1)
    anorm = sum(abs(a[i][j]) for i in range(1, n + 1) for j in range(max(i - 1, 1), n + 1))
    nn = n
    t = 0.0
    while nn >= 1:
        its = 0
        while True:
            l = 1
            for ll in range(nn, 1, -1):
                s = abs(a[ll - 1][ll - 1]) + abs(a[ll][ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll][ll - 1]) + s == s:
                    a[ll][ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn][nn]
            if l == nn:
                wr[nn], wi[nn] = x + t, 0.0
                nn -= 1
            else:
                y = a[nn - 1][nn - 1]
                w = a[nn][nn - 1] * a[nn - 1][nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = abs(q) ** 0.5
                    x += t
                    if q >= 0.0:
                        z = p + _sign(z, p)
                        wr[nn - 1] = wr[nn] = x + z
                        if z:
                            wr[nn] = x - w / z
                        wi[nn - 1] = wi[nn] = 0.0
                    else:
                        wr[nn - 1] = wr[nn] = x + p
                        wi[nn - 1], wi[nn] = -z, z
                    nn -= 2
                else:
                    if its == max_sweeps:
                        raise EigenvalueError("QR iteration did not converge")
                    if its in (10, 20):
                        t += x
                        for i in range(1, nn + 1):
                            a[i][i] -= x
                        s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2])
                        y = x = 0.75 * s
                        w = -0.4375 * s * s
                    its += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m][m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1]
                        q = a[m + 1][m + 1] - z - r - s
                        r = a[m + 2][m + 1]
                        s = abs(p) + abs(q) + abs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = abs(a[m][m - 1]) * (abs(q) + abs(r))
                        v = abs(p) * (abs(a[m - 1][m - 1]) + abs(z) + abs(a[m + 1][m + 1]))
                        if u + v == v:
                            break
                        m -= 1
                    for i in range(m + 2, nn + 1):
                        a[i][i - 2] = 0.0
                        if i != m + 2:
                            a[i][i - 3] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k][k - 1]
                            q = a[k + 1][k - 1]
                            r = a[k + 2][k - 1] if k != nn - 1 else 0.0
                            x = abs(p) + abs(q) + abs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = _sign((p * p + q * q + r * r) ** 0.5, p)
                        if s != 0.0:
                            if k == m:
                                if l != m:
                                    a[k][k - 1] = -a[k][k - 1]
                            else:
                                a[k][k - 1] = -s * x
                            p += s
                            x = p / s
                            y = q / s
                            z = r / s
                            q /= p
                            r /= p
                            for j in range(k, nn + 1):
                                p = a[k][j] + q * a[k + 1][j]
                                if k != nn - 1:
                                    p += r * a[k + 2][j]
                                    a[k + 2][j] -= p * z
                                a[k + 1][j] -= p * y
                                a[k][j] -= p * x
                            for i in range(l, min(nn, k + 3) + 1):
                                p = x * a[i][k] + y * a[i][k + 1]
                                if k != nn - 1:
                                    p += z * a[i][k + 2]
                                    a[i][k + 2] -= p * r
                                a[i][k + 1] -= p * q
                                a[i][k] -= p
            if nn < 1 or l >= nn - 1:
                break
    return [complex(wr[i], wi[i]) for i in range(1, n + 1)]


def eigenvalues(m) -> list[complex]:
    """Eigenvalues of a small real matrix (n <= 6), descending real part.

    Balancing, Householder reduction to Hessenberg form, then Francis
    double-shift QR.
    """
    A = np.asarray(m, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    n = A.shape[0]
    if n > 6:
        raise ValueError("dimension must be <= 6")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    if n == 0:
        return []
    scale = float(np.max(np.sum(np.abs(A), axis=1)))
    if scale == 0.0:
        return [0j] * n
    # normalise to avoid under/overflow in the shifts
    z = [w * scale for w in hessenberg_qr(hessenberg(balance(A / scale)))]
    return sorted(z, key=lambda w: (-w.real, -w.imag))


# ---------------------------------------------------------------------------
# classification


def stability_label(eigs, scale: float) -> str:
    top = max(w.real for w in eigs)
    if top < -1e-9 * scale:
        return "stable"
    if top > 1e-9 * scale:
        return "unstable"
    return "undetermined"


def classify(eq: Equilibrium, p) -> Equilibrium:
    """Fill in eigenvalues and stability of ``eq``.

    Extinction states are handled through surrogate linearisations since
    the mating ratios are singular there.
    """
    if "newton-failed" in eq.flags:
        return dataclasses.replace(eq, stability="undetermined", eigenvalues=())
    if eq.label == "extinction":
        m = comparison_jacobian(p) if isinstance(p, SitParams) \
            else wol_extinction_jacobian(p)
    else:
        m = analytic_jacobian(eq.state, p)
    eigs = eigenvalues(m)
    scale = float(np.max(np.sum(np.abs(m), axis=1)))
    return dataclasses.replace(eq, stability=stability_label(eigs, scale),
                               eigenvalues=tuple(eigs))


def classified_equilibria(p) -> list[Equilibrium]:
    return [classify(e, p) for e in equilibria(p)]
