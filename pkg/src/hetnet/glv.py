"""Generalized Lotka-Volterra realisations of heteroclinic networks.

``x_k' = x_k (r_k + sum_j A_kj x_j)``. Every coordinate hyperplane is
invariant, so each axis equilibrium ``r_k / -A_kk`` sits on a web of
two-dimensional invariant planes that carry the heteroclinic connections.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from . import _rng
from .exceptions import ConnectionInferenceError, EpsTooLargeError, HypothesisError, StiffAbort
from .network import (
    ConnectionSpec,
    EquilibriumSpec,
    NetworkSpec,
    principal_sequence,
    validate_hypotheses,
)

HYPERBOLIC_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GLVSystem:
    growth: np.ndarray
    interaction: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.growth, dtype=float).copy()
        A = np.asarray(self.interaction, dtype=float).copy()
        if r.ndim != 1 or A.shape != (r.size, r.size):
            raise ValueError(f"growth has shape {r.shape}, interaction {A.shape}")
        if r.size < 3:
            raise ValueError(f"need dim >= 3, got {r.size}")
        if np.any(np.diag(A) >= 0):
            raise ValueError("diagonal of the interaction matrix must be strictly negative")
        r.setflags(write=False)
        A.setflags(write=False)
        object.__setattr__(self, "growth", r)
        object.__setattr__(self, "interaction", A)

    @property
    def dim(self) -> int:
        return self.growth.size

    def rhs(self, x: np.ndarray) -> np.ndarray:
        return x * (self.growth + self.interaction @ x)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.diag(self.growth + self.interaction @ x) + x[:, None] * self.interaction

    @classmethod
    def may_leonard(cls, a: float, b: float, n: int = 3) -> "GLVSystem":
        """Cyclic competition: species ``k+1`` invades ``k`` at rate ``1 - a``,
        species ``k-1`` is suppressed at rate ``1 - b``."""
        A = -np.eye(n)
        for k in range(n):
            A[(k + 1) % n, k] = -a
            A[(k - 1) % n, k] = -b
        return cls(np.ones(n), A)


# --------------------------------------------------------------------------- equilibria


@dataclass(frozen=True, eq=False)
class AxisEquilibrium:
    """Equilibrium on coordinate axis ``index``.

    ``eigenvalues[j]`` is the Jacobian eigenvalue belonging to direction
    ``j``: the radial value ``A_kk x_k`` at ``j = index`` and the transverse
    values ``r_j + A_jk x_k`` elsewhere.
    """

    index: int
    label: str
    state: np.ndarray
    eigenvalues: np.ndarray
    hyperbolic: bool


def default_labels(n: int) -> list[str]:
    return [f"p{k + 1}" for k in range(n)]


def axis_equilibria(sys: GLVSystem, labels: Sequence[str] | None = None) -> list[AxisEquilibrium]:
    """All equilibria with a single positive coordinate, with their spectra."""
    labels = list(labels) if labels is not None else default_labels(sys.dim)
    if len(labels) != sys.dim:
        raise ValueError(f"need {sys.dim} labels, got {len(labels)}")
    r, A = sys.growth, sys.interaction
    out = []
    for k in range(sys.dim):
        level = r[k] / -A[k, k]
        if not level > 0:
            continue
        state = np.zeros(sys.dim)
        state[k] = level
        eig = r + A[:, k] * level
        eig[k] = A[k, k] * level
        out.append(AxisEquilibrium(k, labels[k], state, eig, bool(np.all(np.abs(eig) >= HYPERBOLIC_TOL))))
    return out


def equilibrium_spectrum(sys: GLVSystem, state: Sequence[float]) -> np.ndarray:
    """Jacobian eigenvalues at ``state``, sorted by decreasing real part."""
    ev = np.linalg.eigvals(sys.jacobian(np.asarray(state, dtype=float)))
    return ev[np.argsort(-ev.real, kind="stable")]


def network_from_glv(
    sys: GLVSystem,
    labels: Sequence[str] | None = None,
    connections: Sequence[ConnectionSpec] | None = None,
) -> NetworkSpec:
    """Abstract network of the axis saddles of ``sys``.

    A positive transverse eigenvalue at axis ``k`` in direction ``j`` yields
    the connection ``k -> j`` when the axis-``j`` equilibrium attracts within
    the invariant ``(k, j)`` plane (its eigenvalue toward ``k`` is negative).
    Otherwise the orbit may end at a planar coexistence state and the
    inference is ambiguous. The equilibria are ordered so the strong chain
    from the first axis comes first; ``principal_length`` is that chain's
    length.

    Raises
    ------
    HypothesisError
        If an axis equilibrium is not hyperbolic (tag ``H1``).
    ConnectionInferenceError
        If no connection can be inferred or some are ambiguous and no
        explicit ``connections`` list was given.
    """
    axes = axis_equilibria(sys, labels)
    for ax in axes:
        if not ax.hyperbolic:
            raise HypothesisError("H1", f"{ax.label}: eigenvalue within {HYPERBOLIC_TOL} of zero")
    by_index = {ax.index: ax for ax in axes}

    specs = {}
    for ax in axes:
        pos = sorted((v for v in ax.eigenvalues if v > 0), reverse=True)
        neg = sorted(-v for v in ax.eigenvalues if v < 0)
        specs[ax.label] = EquilibriumSpec(ax.label, tuple(pos), tuple(neg))

    if connections is None:
        inferred, ambiguous = [], []
        for ax in axes:
            ranked = sorted((v for v in ax.eigenvalues if v > 0), reverse=True)
            for j, v in enumerate(ax.eigenvalues):
                if j == ax.index or v <= 0:
                    continue
                target = by_index.get(j)
                if target is None or target.eigenvalues[ax.index] >= 0:
                    ambiguous.append(f"{ax.label}->axis {j}")
                    continue
                inferred.append(ConnectionSpec(ax.label, target.label, ranked.index(v) + 1))
        if not inferred:
            raise ConnectionInferenceError("no connections inferable from the sign structure; pass an explicit list")
        if ambiguous:
            raise ConnectionInferenceError(f"ambiguous unstable directions {ambiguous}; pass an explicit list")
        connections = inferred

    strong = {}
    for c in connections:
        if c.source_eigen_index == 1:
            strong.setdefault(c.source, []).append(c.target)
    chain = [axes[0].label] if axes else []
    while chain:
        nxt = strong.get(chain[-1], [])
        if len(nxt) != 1 or nxt[0] in chain:
            break
        chain.append(nxt[0])
    order = chain + [ax.label for ax in axes if ax.label not in chain]
    return NetworkSpec(tuple(specs[lab] for lab in order), tuple(connections), max(len(chain), 1))


def equilibrium_states(sys: GLVSystem, labels: Sequence[str] | None = None) -> dict[str, np.ndarray]:
    return {ax.label: ax.state for ax in axis_equilibria(sys, labels)}


# --------------------------------------------------------------------------- integration

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    n_accepted: int
    n_rejected: int
    min_step: float
    max_step: float
    status: str = "completed"

    def to_rows(self) -> list[list[float]]:
        return [[float(t), *map(float, x)] for t, x in zip(self.times, self.states)]


def integrate(
    sys: GLVSystem,
    x0: Sequence[float],
    t_max: float,
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-12,
    *,
    max_step: float = math.inf,
    stop: Callable[[float, np.ndarray], bool] | None = None,
) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration with PI step control.

    Components that dip below zero by less than ``abs_tol`` are clamped to
    zero; a deeper dip rejects the step. Coordinates that start at zero stay
    exactly zero because every stage derivative of such a coordinate is
    ``0 * (...) = 0``.

    ``stop(t, x)`` is evaluated after each accepted step; returning true ends
    the run with status ``"stopped"``.

    Raises
    ------
    StiffAbort
        If the step size falls below ``1e-14 * max(1, |t|)``.
    """
    if not (1e-14 <= rel_tol < 1e-2 and 1e-14 <= abs_tol < 1e-2):
        raise ValueError("tolerances must lie in [1e-14, 1e-2)")
    y = np.array(x0, dtype=float)
    if y.shape != (sys.dim,):
        raise ValueError(f"x0 must have {sys.dim} components")
    if np.any(y < 0):
        raise ValueError("x0 must lie in the closed positive orthant")

    r, A = sys.growth, sys.interaction

    def f(v):
        return v * (r + A @ v)

    t = 0.0
    times, states = [t], [y.copy()]
    k = np.empty((7, sys.dim))
    k[0] = f(y)

    sc = abs_tol + rel_tol * np.abs(y)
    d0 = np.sqrt(np.mean((y / sc) ** 2))
    d1 = np.sqrt(np.mean((k[0] / sc) ** 2))
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, max_step, t_max) if t_max > 0 else 0.0

    n_acc = n_rej = 0
    hmin_used, hmax_used = math.inf, 0.0
    err_prev = 1e-4
    rejected_last = False
    status = "completed"

    while t < t_max:
        h = min(h, t_max - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise StiffAbort(t, h)
        for s in range(1, 7):
            k[s] = f(y + h * (_A[s] @ k[:s]))
        y_new = y + h * (_B5[:6] @ k[:6])
        err_vec = h * (_E @ k)

        deep = y_new < -abs_tol
        if np.any(deep):
            n_rej += 1
            rejected_last = True
            h *= 0.25
            continue

        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            np.maximum(y_new, 0.0, out=y_new)
            t += h
            y = y_new
            k[0] = k[6] if not np.any(y_new == 0.0) else f(y)
            n_acc += 1
            hmin_used = min(hmin_used, h)
            hmax_used = max(hmax_used, h)
            times.append(t)
            states.append(y.copy())
            if err == 0.0:
                fac = _FAC_MAX
            else:
                fac = _SAFETY * err ** (-_PI_ALPHA) * err_prev ** _PI_BETA
                fac = min(_FAC_MAX, max(_FAC_MIN, fac))
            if rejected_last:
                fac = min(fac, 1.0)
            err_prev = max(err, 1e-4)
            rejected_last = False
            h = min(h * fac, max_step)
            if stop is not None and stop(t, y):
                status = "stopped"
                break
        else:
            n_rej += 1
            rejected_last = True
            h *= max(_FAC_MIN, _SAFETY * err ** (-0.2))

    return Trajectory(
        np.asarray(times),
        np.asarray(states),
        n_acc,
        n_rej,
        hmin_used if n_acc else 0.0,
        hmax_used,
        status,
    )


# --------------------------------------------------------------------------- itineraries


@dataclass(frozen=True)
class Visit:
    label: str
    entry: float
    exit: float
    min_distance: float
    completed: bool = True


@dataclass
class Itinerary:
    visits: list[Visit]
    epsilon: float

    @property
    def labels(self) -> list[str]:
        return [v.label for v in self.visits]


def _check_eps(points: Mapping[str, np.ndarray], eps: float) -> None:
    pts = list(points.values())
    dmin = min(
        (float(np.linalg.norm(a - b)) for i, a in enumerate(pts) for b in pts[i + 1:]),
        default=math.inf,
    )
    if not eps < dmin / 2.0:
        raise EpsTooLargeError(f"eps={eps} must be smaller than half the minimum equilibrium distance {dmin:.6g}")


def detect_itinerary(
    traj: Trajectory,
    equilibria: Mapping[str, np.ndarray],
    eps: float,
    *,
    sys: GLVSystem | None = None,
) -> Itinerary:
    """Time-ordered visits to the ``eps``-balls around ``equilibria``.

    Entry and exit times are found where ``distance - eps`` changes sign
    between accepted steps, by linear interpolation. Passing the ``sys``
    that produced ``traj`` refines each crossing to integrator accuracy
    instead: a root solve over a single Runge-Kutta sub-step taken from the
    preceding accepted state. A trajectory that starts inside a ball enters
    at ``t = 0``; one that ends inside exits at its final time with
    ``completed=False``.
    """
    _check_eps(equilibria, eps)
    t = traj.times
    visits = []
    for label, p in equilibria.items():
        p = np.asarray(p, dtype=float)
        d = np.linalg.norm(traj.states - p[None, :], axis=1)

        inside = d < eps
        if not inside.any():
            continue
        edges = np.flatnonzero(np.diff(inside.astype(np.int8)))
        starts = [0] if inside[0] else []
        ends = []
        for e in edges:
            (starts if inside[e + 1] else ends).append(e + 1)
        for s_idx in starts:
            if s_idx == 0 and inside[0]:
                t_in = float(t[0])
            else:
                t_in = _crossing(traj, sys, p, d, s_idx - 1, eps)
            later = [e for e in ends if e > s_idx]
            if later:
                e_idx = later[0]
                t_out = _crossing(traj, sys, p, d, e_idx - 1, eps)
                seg = d[s_idx:e_idx]
                done = True
            else:
                e_idx = len(t)
                t_out = float(t[-1])
                seg = d[s_idx:]
                done = False
            visits.append(Visit(label, t_in, t_out, float(seg.min()) if seg.size else float(d[s_idx]), done))
    visits.sort(key=lambda v: v.entry)
    return Itinerary(visits, eps)


def _rk_state(sys: GLVSystem, y: np.ndarray, h: float) -> np.ndarray:
    """Fifth-order Dormand-Prince state after one step of size ``h``."""
    k = np.empty((7, sys.dim))
    k[0] = sys.rhs(y)
    for s in range(1, 6):
        k[s] = sys.rhs(y + h * (_A[s] @ k[:s]))
    return y + h * (_B5[:6] @ k[:6])


def _crossing(traj: Trajectory, sys: GLVSystem | None, p: np.ndarray, d: np.ndarray, i: int, eps: float) -> float:
    t = traj.times
    d0, d1 = d[i], d[i + 1]
    if d1 == d0:
        return float(t[i])
    linear = float(t[i] + (eps - d0) / (d1 - d0) * (t[i + 1] - t[i]))
    if sys is None:
        return linear
    y0, h = traj.states[i], float(t[i + 1] - t[i])

    def g(s):
        return float(np.linalg.norm(_rk_state(sys, y0, s) - p)) - eps

    lo, hi = g(0.0), g(h)
    if lo == 0.0:
        return float(t[i])
    if lo * hi > 0.0:
        # clamping at an invariant plane can move the step end; keep the chord estimate
        return linear
    return float(t[i] + brentq(g, 0.0, h, xtol=1e-14 * max(1.0, abs(t[i])), rtol=4 * np.finfo(float).eps))


# --------------------------------------------------------------------------- channel experiments


@dataclass(frozen=True)
class SamplingBox:
    """Initial-condition box near ``p1`` on the side of the strong unstable
    direction.

    The centre sits ``center_offset * eps`` from ``p1`` along the contracting
    eigendirection that points toward the incoming connection. Coordinates
    other than the strong-unstable one are jittered by ``halfwidth``; the
    strong-unstable coordinate is drawn from ``unstable_range`` (strictly
    positive, so no sample lies in an invariant coordinate plane).
    """

    center_offset: float = 0.5
    halfwidth: float = 0.01
    unstable_range: tuple[float, float] = (1e-4, 1e-2)
    floor: float = 1e-6

    def to_dict(self) -> dict[str, Any]:
        return {
            "center_offset": self.center_offset,
            "halfwidth": self.halfwidth,
            "unstable_range": list(self.unstable_range),
            "floor": self.floor,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None) -> "SamplingBox":
        if not data:
            return cls()
        return cls(
            float(data.get("center_offset", 0.5)),
            float(data.get("halfwidth", 0.01)),
            tuple(float(v) for v in data.get("unstable_range", (1e-4, 1e-2))),
            float(data.get("floor", 1e-6)),
        )


@dataclass
class ChannelReport:
    n_initial: int
    n_following: int
    epsilon: float
    delta: float
    t_max: float
    seed: int
    timeout_count: int = 0
    left_tube_count: int = 0
    wrong_order_count: int = 0
    hypothesis_violations: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    sampling_box: dict[str, Any] = field(default_factory=dict)

    @property
    def fraction(self) -> float:
        return self.n_following / self.n_initial if self.n_initial else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_initial": self.n_initial,
            "n_following": self.n_following,
            "fraction": self.fraction,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "t_max": self.t_max,
            "seed": self.seed,
            "timeout_count": self.timeout_count,
            "left_tube_count": self.left_tube_count,
            "wrong_order_count": self.wrong_order_count,
            "hypothesis_violations": list(self.hypothesis_violations),
            "flags": list(self.flags),
            "sampling_box": dict(self.sampling_box),
        }


def connection_orbit(sys: GLVSystem, k: int, j: int, *, seed_distance: float = 1e-8, t_max: float = 500.0) -> np.ndarray:
    """States along the connection from axis ``k`` to axis ``j``.

    Starts ``seed_distance`` from the axis-``k`` saddle along its unstable
    eigenvector in the invariant ``(k, j)`` plane and integrates until the
    orbit settles within ``1e-6`` of the axis-``j`` equilibrium.
    """
    src = axis_equilibria(sys)
    src = next(a for a in src if a.index == k)
    dst = next(a for a in axis_equilibria(sys) if a.index == j)
    J = sys.jacobian(src.state)
    sub = J[np.ix_([k, j], [k, j])]
    w, V = np.linalg.eig(sub)
    v = V[:, int(np.argmax(w.real))].real
    if v[1] < 0:
        v = -v
    x0 = src.state.copy()
    x0[k] += seed_distance * v[0]
    x0[j] += seed_distance * v[1]
    target = dst.state
    traj = integrate(sys, x0, t_max, 1e-10, 1e-14, max_step=0.05,
                     stop=lambda t, x: float(np.linalg.norm(x - target)) < 1e-6)
    return np.vstack([src.state, traj.states, target])


@dataclass(eq=False)
class ChannelGeometry:
    """Balls around the principal saddles and the tube around their connections."""

    labels: list[str]
    centers: np.ndarray
    eps: float
    delta: float
    tube: cKDTree
    tube_spacing: float

    def ball_of(self, x: np.ndarray) -> int | None:
        d = np.linalg.norm(self.centers - x[None, :], axis=1)
        i = int(np.argmin(d))
        return i if d[i] < self.eps else None

    def in_neighbourhood(self, x: np.ndarray) -> bool:
        if self.ball_of(x) is not None:
            return True
        dist, _ = self.tube.query(x)
        return dist < self.delta


def _resample(poly: np.ndarray, spacing: float) -> np.ndarray:
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    n = max(2, int(math.ceil(s[-1] / spacing)) + 1)
    grid = np.linspace(0.0, s[-1], n)
    return np.column_stack([np.interp(grid, s, poly[:, c]) for c in range(poly.shape[1])])


def channel_geometry(
    sys: GLVSystem, net: NetworkSpec, eps: float, delta: float, labels: Sequence[str] | None = None,
    *, spacing: float = 1e-3,
) -> ChannelGeometry:
    """Neighbourhood of the principal cycle: ``eps``-balls at its saddles and
    the ``delta``-tube around each of its connections (cycle closed)."""
    seq = principal_sequence(net)
    axes = {a.label: a for a in axis_equilibria(sys, labels)}
    centers = np.array([axes[lab].state for lab in seq])
    _check_eps(dict(zip(seq, centers)), eps)
    pts = []
    for i, lab in enumerate(seq):
        nxt = seq[(i + 1) % len(seq)]
        pts.append(_resample(connection_orbit(sys, axes[lab].index, axes[nxt].index), spacing))
    return ChannelGeometry(list(seq), centers, eps, delta, cKDTree(np.vstack(pts)), spacing)


def sample_initial_conditions(
    sys: GLVSystem,
    geometry: ChannelGeometry,
    n: int,
    seed: int,
    box: SamplingBox,
    labels: Sequence[str] | None = None,
) -> np.ndarray:
    """Draw ``n`` starting points in the box; sample ``i`` uses stream ``(seed, i)``."""
    axes = {a.label: a for a in axis_equilibria(sys, labels)}
    seq = geometry.labels
    p1 = axes[seq[0]]
    k1 = p1.index
    k_out = axes[seq[1 % len(seq)]].index
    k_in = axes[seq[-1]].index
    # contracting eigendirection of p1 toward the incoming saddle's axis
    sub = sys.jacobian(p1.state)[np.ix_([k1, k_in], [k1, k_in])]
    w, V = np.linalg.eig(sub)
    v_in = V[:, int(np.argmin(np.abs(w.real - p1.eigenvalues[k_in])))].real
    if v_in[1] < 0:
        v_in = -v_in
    center = p1.state.copy()
    offset = box.center_offset * geometry.eps
    center[k1] += offset * v_in[0]
    center[k_in] += offset * v_in[1]

    X = np.empty((n, sys.dim))
    for i in range(n):
        rng = _rng.stream(seed, _rng.CHANNEL, i)
        jitter = rng.uniform(-box.halfwidth, box.halfwidth, sys.dim)
        x = np.maximum(center + jitter, box.floor)
        x[k_out] = rng.uniform(*box.unstable_range)
        X[i] = x
    return X


def _classify(sys: GLVSystem, geometry: ChannelGeometry, x0: np.ndarray, t_max: float,
              rel_tol: float, abs_tol: float, max_step: float) -> tuple[str, float]:
    n_star = len(geometry.labels)
    expected = list(range(n_star)) + [0]
    state = {"visited": [], "current": geometry.ball_of(x0), "outcome": "timeout"}
    if state["current"] is not None:
        state["visited"].append(state["current"])

    def stop(t, x):
        b = geometry.ball_of(x)
        if b is None:
            state["current"] = None
            dist, _ = geometry.tube.query(x)
            if not dist < geometry.delta:
                state["outcome"] = "left_tube"
                return True
            return False
        if b != state["current"]:
            state["current"] = b
            if not state["visited"] or state["visited"][-1] != b:
                state["visited"].append(b)
                if state["visited"] != expected[: len(state["visited"])]:
                    state["outcome"] = "wrong_order"
                    return True
                if len(state["visited"]) == len(expected):
                    state["outcome"] = "following"
                    return True
        return False

    traj = integrate(sys, x0, t_max, rel_tol, abs_tol, max_step=max_step, stop=stop)
    if state["outcome"] != "following":
        return state["outcome"], traj.times[-1]

    itin = detect_itinerary(traj, dict(zip(geometry.labels, geometry.centers)), geometry.eps)
    labels = [geometry.labels[i] for i in expected]
    got = _dedupe(itin.labels)
    if got[: len(labels)] != labels:
        return "wrong_order", traj.times[-1]
    return "following", traj.times[-1]


def _dedupe(labels: list[str]) -> list[str]:
    out = []
    for lab in labels:
        if not out or out[-1] != lab:
            out.append(lab)
    return out


def _classify_many(sys, geometry, X, t_max, rel_tol, abs_tol, max_step):
    return [_classify(sys, geometry, x, t_max, rel_tol, abs_tol, max_step)[0] for x in X]


def channel_experiment(
    sys: GLVSystem,
    net: NetworkSpec,
    eps: float,
    delta: float,
    n_samples: int,
    t_max: float,
    seed: int,
    *,
    labels: Sequence[str] | None = None,
    box: SamplingBox | None = None,
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-12,
    max_step: float = 1.0,
    n_jobs: int | None = 1,
    chunk: int = 25,
) -> ChannelReport:
    """Fraction of sampled starts near ``p1`` that follow one full circuit of
    the principal cycle without leaving its ``(eps, delta)`` neighbourhood.

    A sample *follows* when its ball visits read ``p1, p2, ..., pN*, p1``
    and every accepted state until the return to ``p1`` lies in a ball or
    within ``delta`` of a principal connection. Samples still travelling at
    ``t_max`` count as timeouts.
    """
    box = box or SamplingBox()
    report = validate_hypotheses(net)
    geometry = channel_geometry(sys, net, eps, delta, labels)
    X = sample_initial_conditions(sys, geometry, n_samples, seed, box, labels)
    chunks = [X[i:i + chunk] for i in range(0, n_samples, chunk)]
    if n_jobs in (None, 1):
        outcomes = [o for c in chunks for o in _classify_many(sys, geometry, c, t_max, rel_tol, abs_tol, max_step)]
    else:
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_classify_many)(sys, geometry, c, t_max, rel_tol, abs_tol, max_step) for c in chunks
        )
        outcomes = [o for p in parts for o in p]

    out = ChannelReport(
        n_initial=n_samples,
        n_following=outcomes.count("following"),
        epsilon=eps,
        delta=delta,
        t_max=t_max,
        seed=seed,
        timeout_count=outcomes.count("timeout"),
        left_tube_count=outcomes.count("left_tube"),
        wrong_order_count=outcomes.count("wrong_order"),
        hypothesis_violations=[f"{tag}: {detail}" for tag, detail in report.violations],
        sampling_box=box.to_dict(),
    )
    for tag in sorted(report.tags()):
        out.flags.append(f"{tag}_VIOLATED")
    if out.timeout_count == n_samples:
        out.flags.append("TIMEOUT")
    return out


# --------------------------------------------------------------------------- robustness


def min_eigenvalue_gap(sys: GLVSystem) -> float:
    """Smallest of ``|lambda|`` and pairwise eigenvalue gaps over all axis saddles."""
    gap = math.inf
    for ax in axis_equilibria(sys):
        ev = np.sort(ax.eigenvalues)
        gap = min(gap, float(np.min(np.abs(ev))))
        if ev.size > 1:
            gap = min(gap, float(np.min(np.diff(ev))))
    return gap


def perturb_system(sys: GLVSystem, magnitude: float, seed: int, index: int) -> GLVSystem:
    """Add independent uniform noise in ``[-magnitude, magnitude]`` to every
    entry of ``r`` and ``A``; draw ``index`` comes from stream ``(seed, index)``."""
    rng = _rng.stream(seed, _rng.PERTURB, index)
    n = sys.dim
    dr = rng.uniform(-1.0, 1.0, n) * magnitude
    dA = rng.uniform(-1.0, 1.0, (n, n)) * magnitude
    return GLVSystem(sys.growth + dr, sys.interaction + dA)


def perturb_and_redetect(
    sys: GLVSystem,
    magnitude: float,
    n_perturbations: int,
    params: Mapping[str, Any],
    seed: int,
    *,
    labels: Sequence[str] | None = None,
    n_jobs: int | None = 1,
) -> list[ChannelReport]:
    """Re-run the channel experiment on randomly perturbed copies of ``sys``.

    ``params`` holds the channel experiment settings (``eps``, ``delta``,
    ``n``, ``t_max``, ``seed`` and optionally ``box``). A perturbation that
    breaks a hypothesis is flagged in its report rather than raising.
    """
    gap = min_eigenvalue_gap(sys)
    reports = []
    for i in range(n_perturbations):
        flags = []
        if magnitude > 1e-2 * gap:
            flags.append("LARGE_PERTURBATION")
        try:
            # a large enough kick can make a diagonal entry non-negative
            psys = perturb_system(sys, magnitude, seed, i) if magnitude > 0 else sys
        except ValueError as err:
            reports.append(ChannelReport(0, 0, params["eps"], params["delta"], params["t_max"], params["seed"],
                                         hypothesis_violations=[str(err)], flags=flags + ["INVALID_SYSTEM"]))
            continue
        try:
            net = network_from_glv(psys, labels)
            principal_sequence(net)
        except (HypothesisError, ConnectionInferenceError) as err:
            rep = ChannelReport(0, 0, params["eps"], params["delta"], params["t_max"], params["seed"],
                                hypothesis_violations=[str(err)], flags=flags + ["NO_PRINCIPAL_CYCLE"])
            reports.append(rep)
            continue
        rep = channel_experiment(
            psys, net, params["eps"], params["delta"], params["n"], params["t_max"], params["seed"],
            labels=labels, box=SamplingBox.from_dict(params.get("box")), n_jobs=n_jobs,
        )
        rep.flags[:0] = flags
        reports.append(rep)
    return reports


# --------------------------------------------------------------------------- configs


@dataclass
class GLVConfig:
    system: GLVSystem
    labels: list[str]
    experiment: dict[str, Any]
    raw: dict[str, Any]
    name: str = ""


def glv_config_from_dict(data: Mapping[str, Any]) -> GLVConfig:
    """Parse a GLV config mapping; see the README for the schema.

    With ``"require_valid": true`` the derived network must pass hypothesis
    validation at load time.
    """
    version = data.get("schema_version", 1)
    if version != 1:
        raise ValueError(f"unsupported schema_version {version!r}")
    sys = GLVSystem(data["growth"], data["interaction"])
    if int(data.get("dim", sys.dim)) != sys.dim:
        raise ValueError(f"dim={data['dim']} disagrees with growth of length {sys.dim}")
    labels = list(data.get("labels") or default_labels(sys.dim))
    cfg = GLVConfig(sys, labels, dict(data.get("experiment", {})), dict(data), str(data.get("name", "")))
    if data.get("require_valid"):
        rep = validate_hypotheses(network_from_glv(sys, labels))
        if not rep.passed:
            raise HypothesisError(sorted(rep.tags())[0], f"config {cfg.name!r} fails validation: {rep.violations}")
    return cfg


def load_glv_config(path: str | Path) -> GLVConfig:
    with open(path, encoding="utf-8") as fh:
        return glv_config_from_dict(json.load(fh))
