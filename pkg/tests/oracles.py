"""Reference computations that share no code with the package."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm


def flight_time_quadratic(x1: float, x2: float, lam2: float) -> float:
    """Exit time for rates ``(2 lam2, lam2)``.

    With ``z = exp(2 lam2 T)`` the exit condition is
    ``x1^2 z^2 + x2^2 z - 1 = 0``; the positive root is written in the
    cancellation-free form ``2 / (b + sqrt(b^2 + 4a))``.
    """
    a, b = x1 * x1, x2 * x2
    z = 2.0 / (b + math.sqrt(b * b + 4.0 * a))
    return math.log(z) / (2.0 * lam2)


def linear_flow_exit(x, y, lam_e, lam_c):
    """Integrate ``x' = diag(lam_e) x, y' = -diag(lam_c) y`` until ``||x|| = 1``.

    Returns ``(T, x(T), y(T))`` where ``y(T)`` comes from the matrix
    exponential at the event time found by the ODE solver.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    lam_e = np.asarray(lam_e, float)
    lam_c = np.asarray(lam_c, float)

    # integrate log|x_j| (linear in t) for conditioning; exit when sum exp(2 s_j) = 1
    s0 = np.log(np.abs(x))

    def rhs(t, s):
        return lam_e

    def hit(t, s):
        return np.log(np.sum(np.exp(2.0 * s)))

    hit.terminal = True
    hit.direction = 1
    t_hi = -math.log(np.linalg.norm(x)) / lam_e[-1] * 1.01 + 1.0
    sol = solve_ivp(rhs, (0.0, t_hi), s0, events=hit, rtol=1e-13, atol=1e-13, method="DOP853")
    T = float(sol.t_events[0][0])
    x_exit = expm(np.diag(lam_e) * T) @ x
    y_exit = expm(-np.diag(lam_c) * T) @ y
    return T, x_exit, y_exit


def wedge_complement_grid(alpha: float, eps: float, delta: float, rows: int = 1000) -> float:
    """Relative area of the wedge complement in the ``delta``-disc for ``u = 2``.

    Along the linear flow ``x1 / |x2|**alpha`` is constant, and on the exit
    circle the complement is ``|tau_1| <= sqrt(1 - eps^2)``, i.e.
    ``|x1| <= K |x2|**alpha`` with ``K = sqrt(1 - eps^2) / eps**alpha``.
    Rows in ``x2`` use the midpoint rule; each row's ``x1`` extent is exact.
    """
    K = math.sqrt(1.0 - eps * eps) / eps**alpha
    h = 2.0 * delta / rows
    x2 = -delta + h * (np.arange(rows) + 0.5)
    chord = np.sqrt(np.maximum(delta * delta - x2 * x2, 0.0))
    width = 2.0 * np.minimum(K * np.abs(x2) ** alpha, chord)
    return float(np.sum(width) * h / (math.pi * delta * delta))


def wedge_complement_counting_grid(alpha: float, eps: float, delta: float, n: int = 1000) -> float:
    """Plain ``n x n`` cell-centre counting on the disc, for comparison only."""
    K = math.sqrt(1.0 - eps * eps) / eps**alpha
    c = -delta + (2.0 * delta / n) * (np.arange(n) + 0.5)
    X1, X2 = np.meshgrid(c, c, indexing="ij")
    inside = X1**2 + X2**2 < delta * delta
    comp = inside & (np.abs(X1) <= K * np.abs(X2) ** alpha)
    return comp.sum() / inside.sum()


def fd_jacobian(f, x, h: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, float)
    J = np.empty((x.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        J[:, j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return J
