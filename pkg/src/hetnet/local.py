"""Linear flow near a saddle and the maps it induces between cross sections.

In chart coordinates around ``p_i`` the flow is ``x' = diag(lam_e) x`` and
``y' = -diag(lam_c) y``. A trajectory enters through the in-section
``||y|| = 1`` and leaves through the out-section ``||x|| = 1`` after the
flight time ``T(x)``. The functions here evaluate that passage and compose it
with user-supplied global maps into transition and return maps.

Batch variants (``*_batch``) take one point per row and are what the Monte
Carlo code calls; the scalar functions wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Mapping, Sequence

import numpy as np

from . import _rng
from .exceptions import DegenerateGlobalMapError, OnStableManifoldError, OutsideChartError, SectionError
from .network import EquilibriumSpec, NetworkSpec, principal_sequence

UNIT_TOL_IN = 1e-12
UNIT_TOL_OUT = 1e-12
RESIDUAL_TOL = 1e-12
_MAX_NEWTON = 200


# --------------------------------------------------------------------------- points


@dataclass(frozen=True, eq=False)
class InSectionPoint:
    """Point on the in-section of ``node``: expanding coordinates ``x`` and a
    unit direction ``y`` on the stable sphere."""

    node: str
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if abs(np.linalg.norm(y) - 1.0) > UNIT_TOL_IN:
            raise ValueError(f"in-section y must be a unit vector, got norm {np.linalg.norm(y)!r}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True, eq=False)
class OutSectionPoint:
    node: str
    phi: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if abs(np.linalg.norm(phi) - 1.0) > UNIT_TOL_OUT:
            raise ValueError(f"out-section phi must be a unit vector, got norm {np.linalg.norm(phi)!r}")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "y", y)


# --------------------------------------------------------------------------- flight time


def _check_expanding(lambdas: np.ndarray) -> None:
    if lambdas.ndim == 1:
        rows = lambdas[None, :]
    else:
        rows = lambdas
    if np.any(rows <= 0) or np.any(np.diff(rows, axis=-1) >= 0):
        raise ValueError("expanding eigenvalues must be positive and strictly descending")


def flight_time_batch(X: np.ndarray, lambdas: np.ndarray, *, check: bool = True) -> np.ndarray:
    """Exit times from the unit ball for a batch of expanding coordinates.

    Solves ``sum_j x_j**2 * exp(2 lam_j T) = 1`` row by row. The root is
    bracketed by ``[-ln||x|| / lam_1, -ln||x|| / lam_u]``; a safeguarded
    Newton iteration on the log of the sum (convex and increasing in ``T``)
    starts at the left end of the bracket and falls back to bisection
    whenever a step leaves it.

    Parameters
    ----------
    X : ndarray of shape (m, u)
    lambdas : ndarray of shape (u,) or (m, u)
        Strictly descending positive rates. Per-row rates let callers mix
        different saddles in one batch; pad unused trailing columns of ``X``
        with zeros and of ``lambdas`` with any descending positive values.

    Returns
    -------
    T : ndarray of shape (m,)
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-D (one point per row)")
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape[-1] != X.shape[1]:
        raise ValueError(f"lambdas has {lam.shape[-1]} entries for u={X.shape[1]}")
    lam = np.broadcast_to(lam, X.shape)
    if check:
        _check_expanding(lam)
    # scaled norm: squaring subnormal coordinates would underflow to 0
    amax = np.max(np.abs(X), axis=1)
    if np.any(amax == 0.0):
        raise OnStableManifoldError(f"x = 0 at rows {np.flatnonzero(amax == 0.0)[:5].tolist()}: flight time is infinite")
    log_norm = np.log(amax) + 0.5 * np.log(np.sum((X / amax[:, None]) ** 2, axis=1))
    if np.any(log_norm >= 0.0):
        raise OutsideChartError(f"||x|| >= 1 at rows {np.flatnonzero(log_norm >= 0.0)[:5].tolist()}")

    with np.errstate(divide="ignore"):
        logx = np.log(np.abs(X))
    lo = -log_norm / lam[:, 0]
    hi = -log_norm / lam[:, -1]
    T = lo.copy()
    active = np.flatnonzero(hi > lo)

    for _ in range(_MAX_NEWTON):
        if active.size == 0:
            break
        t = T[active]
        z = 2.0 * logx[active] + 2.0 * lam[active] * t[:, None]
        zmax = z.max(axis=1)
        w = np.exp(z - zmax[:, None])
        wsum = w.sum(axis=1)
        h = zmax + np.log(wsum)
        dh = (w * 2.0 * lam[active]).sum(axis=1) / wsum

        below = h < 0.0
        lo_a = np.where(below, t, lo[active])
        hi_a = np.where(below, hi[active], t)
        lo[active] = lo_a
        hi[active] = hi_a

        t_new = t - h / dh
        outside = (t_new < lo_a) | (t_new > hi_a)
        t_new = np.where(outside, 0.5 * (lo_a + hi_a), t_new)
        step = np.abs(t_new - t)
        T[active] = t_new
        done = (h == 0.0) | (step <= 4.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(t_new)))
        active = active[~done]

    resid = np.abs(np.expm1(_log_exit_sum(logx, lam, T)))
    if np.any(resid > RESIDUAL_TOL):
        bad = int(np.argmax(resid))
        raise RuntimeError(f"flight time did not converge: residual {resid[bad]:.3e} at row {bad}")
    return T


def _log_exit_sum(logx: np.ndarray, lam: np.ndarray, T: np.ndarray) -> np.ndarray:
    z = 2.0 * logx + 2.0 * lam * T[:, None]
    zmax = z.max(axis=1)
    return zmax + np.log(np.exp(z - zmax[:, None]).sum(axis=1))


def time_of_flight(x: Sequence[float], lambdas: Sequence[float]) -> float:
    """Time for the linear flow to carry ``x`` to the exit sphere ``||x|| = 1``.

    >>> round(time_of_flight([0.1], [2.0]), 6)
    1.151293
    """
    X = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    return float(flight_time_batch(X, np.asarray(lambdas, dtype=float))[0])


def tau_batch(X: np.ndarray, lambdas: np.ndarray, T: np.ndarray | None = None) -> np.ndarray:
    """Exit directions ``tau_j = exp(lam_j T) x_j`` for each row of ``X``."""
    X = np.asarray(X, dtype=float)
    lam = np.broadcast_to(np.asarray(lambdas, dtype=float), X.shape)
    if T is None:
        T = flight_time_batch(X, lam)
    with np.errstate(divide="ignore"):
        mag = np.exp(np.log(np.abs(X)) + lam * T[:, None])
    return np.sign(X) * mag


def tau(x: Sequence[float], lambdas: Sequence[float]) -> np.ndarray:
    """Point on the unit expanding sphere where the orbit of ``x`` exits."""
    X = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    return tau_batch(X, np.asarray(lambdas, dtype=float))[0]


def wedge_defect_batch(X: np.ndarray, lambdas: np.ndarray, T: np.ndarray | None = None) -> np.ndarray:
    """``1 - tau_1**2`` per row, evaluated as ``sum_{j>=2} tau_j**2``.

    The two are equal on the unit sphere; the tail sum avoids cancellation
    when ``tau_1`` is close to +-1.
    """
    tt = tau_batch(X, lambdas, T)
    return np.sum(tt[:, 1:] ** 2, axis=1)


# --------------------------------------------------------------------------- local map


def local_map(p: InSectionPoint, eq: EquilibriumSpec) -> OutSectionPoint:
    """Carry an in-section point through the linear chart of ``eq``.

    The exit direction is ``tau(x)`` and each contracting coordinate is
    multiplied by ``exp(-lam_c T)``.
    """
    _check_dims(p, eq)
    lam_e = np.asarray(eq.expanding)
    T = flight_time_batch(p.x[None, :], lam_e)
    phi = tau_batch(p.x[None, :], lam_e, T)[0]
    y_out = np.exp(-np.asarray(eq.contracting) * T[0]) * p.y
    return OutSectionPoint(eq.label, phi, y_out)


def _check_dims(p: InSectionPoint, eq: EquilibriumSpec) -> None:
    if p.x.shape != (eq.u,) or p.y.shape != (eq.s,):
        raise ValueError(
            f"point at {p.node} has dims (u={p.x.size}, s={p.y.size}); {eq.label} needs (u={eq.u}, s={eq.s})"
        )


# --------------------------------------------------------------------------- global maps


def _normalize_rows(V: np.ndarray) -> np.ndarray:
    return V / np.linalg.norm(V, axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class TransitionMapSpec:
    """Global map from the out-section of ``source`` to the in-section of ``target``.

    ``M(phi)`` is a ``u_target x s_source`` matrix applied to the contracted
    stable coordinates; ``gamma(phi)`` is the entry direction on the target's
    stable sphere. ``zeta`` bounds ``||M||`` and ``chi`` bounds ``||dgamma||``
    over the expanding sphere of the source.
    """

    source: str
    target: str
    M: Callable[[np.ndarray], np.ndarray]
    gamma: Callable[[np.ndarray], np.ndarray]
    zeta: float
    chi: float
    M_matrix: np.ndarray | None = None
    G_matrix: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (np.isfinite(self.zeta) and self.zeta > 0):
            raise ValueError(f"zeta must be finite and positive, got {self.zeta!r}")
        if not (np.isfinite(self.chi) and self.chi > 0):
            raise ValueError(f"chi must be finite and positive, got {self.chi!r}")

    @classmethod
    def from_matrices(
        cls,
        source: str,
        target: str,
        M,
        G,
        *,
        n_samples: int = 10_000,
        seed: int = 0,
    ) -> "TransitionMapSpec":
        """Constant ``M`` and ``gamma(phi) = G phi / ||G phi||``.

        ``zeta`` is the exact spectral norm of ``M``. ``chi`` is estimated by
        central differences of ``gamma`` along tangent directions at
        ``n_samples`` sphere points and inflated by 10%.
        """
        M = np.atleast_2d(np.asarray(M, dtype=float))
        G = np.atleast_2d(np.asarray(G, dtype=float))
        if np.linalg.matrix_rank(M) < min(M.shape):
            raise DegenerateGlobalMapError(f"M for {source}->{target} is not full rank")
        if np.linalg.matrix_rank(G) < min(G.shape):
            raise DegenerateGlobalMapError(f"G for {source}->{target} is not full rank")

        def gamma(phi, _G=G):
            v = _G @ np.asarray(phi, dtype=float)
            nv = np.linalg.norm(v)
            if nv < 1e-14:
                raise DegenerateGlobalMapError(f"gamma undefined at phi={phi!r}: G phi = 0")
            return v / nv

        zeta = float(np.linalg.norm(M, 2))
        chi = estimate_chi_linear(G, n_samples=n_samples, seed=seed)
        return cls(source, target, lambda phi, _M=M: _M, gamma, zeta, chi, M_matrix=M, G_matrix=G)

    def matrix_at(self, phi: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.M(phi), dtype=float))

    def to_dict(self) -> dict:
        if self.M_matrix is None or self.G_matrix is None:
            raise ValueError("only matrix-backed transition maps are serialisable")
        return {
            "source": self.source,
            "target": self.target,
            "M": self.M_matrix.tolist(),
            "G": self.G_matrix.tolist(),
        }


def estimate_chi_linear(G: np.ndarray, *, n_samples: int = 10_000, seed: int = 0, h: float = 1e-6) -> float:
    """Sup of ``||dgamma/dphi||`` for ``gamma = normalize(G phi)`` on the sphere."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    u = G.shape[1]
    if u == 1:
        # S^0 = {+1, -1}: the best Lipschitz constant between the two points
        g_plus = G[:, 0] / np.linalg.norm(G[:, 0])
        return max(1.1 * float(np.linalg.norm(g_plus - (-g_plus))) / 2.0, np.finfo(float).eps)
    rng = _rng.stream(seed, _rng.MAPS, 0)
    phi = _rng.uniform_sphere(rng, n_samples, u)
    # orthonormal tangent basis at each phi: drop the first column of a QR of [phi | I]
    stacked = np.concatenate([phi[:, :, None], np.broadcast_to(np.eye(u), (n_samples, u, u))], axis=2)
    Q, _ = np.linalg.qr(stacked)
    tangents = Q[:, :, 1:u]  # (n, u, u-1)
    cols = []
    for k in range(u - 1):
        t = tangents[:, :, k]
        plus = _normalize_rows((G @ (phi + h * t).T).T)
        minus = _normalize_rows((G @ (phi - h * t).T).T)
        cols.append((plus - minus) / (2.0 * h))
    J = np.stack(cols, axis=2)  # (n, s, u-1)
    norms = np.linalg.norm(J, ord=2, axis=(1, 2))
    return max(1.1 * float(norms.max()), np.finfo(float).eps)


@dataclass(frozen=True)
class SectionLandmarks:
    """Poles of the spheres a transition map connects.

    ``e_*`` live on the source's expanding sphere, ``b_*`` on the source's
    stable sphere, and ``y_* = gamma(e_*)`` on the target's stable sphere.
    """

    e_plus: np.ndarray
    e_minus: np.ndarray
    b_plus: np.ndarray
    b_minus: np.ndarray
    y_plus: np.ndarray
    y_minus: np.ndarray


def section_landmarks(maps: TransitionMapSpec, source: EquilibriumSpec) -> SectionLandmarks:
    e = np.zeros(source.u)
    e[0] = 1.0
    b = np.zeros(source.s)
    b[-1] = 1.0
    return SectionLandmarks(
        e_plus=e,
        e_minus=-e,
        b_plus=b,
        b_minus=-b,
        y_plus=np.asarray(maps.gamma(e), dtype=float),
        y_minus=np.asarray(maps.gamma(-e), dtype=float),
    )


def generic_condition_values(maps: TransitionMapSpec, source: EquilibriumSpec) -> tuple[float, float]:
    """First components of ``M(e_+) b_+`` and ``M(e_-) b_-``."""
    lm = section_landmarks(maps, source)
    plus = maps.matrix_at(lm.e_plus) @ lm.b_plus
    minus = maps.matrix_at(lm.e_minus) @ lm.b_minus
    return float(plus[0]), float(minus[0])


def check_generic(maps: TransitionMapSpec, source: EquilibriumSpec, *, rtol: float = 1e-12) -> None:
    vals = generic_condition_values(maps, source)
    if min(abs(v) for v in vals) <= rtol * maps.zeta:
        raise DegenerateGlobalMapError(
            f"global map {maps.source}->{maps.target} is degenerate: first components of M(e±)b± = {vals}"
        )


# --------------------------------------------------------------------------- transition / return maps


def transition_map(p: InSectionPoint, eq: EquilibriumSpec, maps: TransitionMapSpec) -> InSectionPoint:
    """Local passage near ``eq`` followed by the global map to the next node."""
    if maps.source != eq.label or p.node != eq.label:
        raise ValueError(f"point at {p.node} / map from {maps.source} / equilibrium {eq.label} disagree")
    _check_dims(p, eq)
    check_generic(maps, eq)
    out = local_map(p, eq)
    Mphi = maps.matrix_at(out.phi)
    if Mphi.shape[1] != eq.s:
        raise ValueError(f"M({maps.source}->{maps.target}) has {Mphi.shape[1]} columns, expected s={eq.s}")
    x_next = Mphi @ out.y
    y_next = np.asarray(maps.gamma(out.phi), dtype=float)
    return InSectionPoint(maps.target, x_next, y_next / np.linalg.norm(y_next))


def return_map(
    p: InSectionPoint,
    net: NetworkSpec,
    maps: Mapping[str, TransitionMapSpec],
    *,
    sequence: Sequence[str] | None = None,
) -> InSectionPoint:
    """One loop of transition maps around the principal cycle.

    ``maps`` is keyed by source label. Failures are re-raised with ``leg``
    set to the 1-based position of the failing transition.
    """
    seq = list(sequence) if sequence is not None else principal_sequence(net)
    if p.node != seq[0]:
        raise ValueError(f"return map starts at {seq[0]}, point is at {p.node}")
    for leg, label in enumerate(seq, start=1):
        try:
            p = transition_map(p, net.equilibrium(label), maps[label])
        except SectionError as err:
            err.leg = leg
            raise
    return p


# --------------------------------------------------------------------------- geometry


def wedge_membership(p: InSectionPoint, eps: float, eq: EquilibriumSpec) -> bool:
    """Whether ``p`` exits within ``eps`` of the strong unstable direction,
    i.e. ``1 - tau_1(x)**2 < eps**2``. Points with ``x = 0`` are not members."""
    if not np.any(p.x):
        return False
    if eq.u == 1:
        return True
    defect = wedge_defect_batch(p.x[None, :], np.asarray(eq.expanding))[0]
    return bool(defect < eps * eps)


Region = Literal["E", "F", "B"]


def region_membership(
    p: InSectionPoint,
    delta: float,
    region: Region,
    landmarks: SectionLandmarks,
) -> bool:
    """Open neighbourhoods of the incoming connection in the in-section.

    ``E``: ``||x|| < delta``; ``F``: ``y`` within ``delta`` of ``y_+`` or
    ``y_-`` (taken from ``landmarks``); ``B``: both.
    """
    in_e = bool(np.linalg.norm(p.x) < delta)
    dist = min(np.linalg.norm(p.y - landmarks.y_plus), np.linalg.norm(p.y - landmarks.y_minus))
    in_f = bool(dist < delta)
    if region == "E":
        return in_e
    if region == "F":
        return in_f
    if region == "B":
        return in_e and in_f
    raise ValueError(f"unknown region {region!r}")


def landmarks_into(node: str, net: NetworkSpec, maps: Mapping[str, TransitionMapSpec]) -> SectionLandmarks:
    """Landmarks whose ``y_*`` lie on the in-section of ``node``."""
    for src, m in maps.items():
        if m.target == node:
            return section_landmarks(m, net.equilibrium(src))
    raise KeyError(f"no transition map enters {node}")


def load_transition_maps(data: dict, net: NetworkSpec) -> dict[str, TransitionMapSpec]:
    """Read the optional ``transition_maps`` list of a network file."""
    maps = {}
    for entry in data.get("transition_maps", []):
        src, dst = str(entry["source"]), str(entry["target"])
        spec = TransitionMapSpec.from_matrices(src, dst, entry["M"], entry["G"])
        eq_src, eq_dst = net.equilibrium(src), net.equilibrium(dst)
        if spec.M_matrix.shape != (eq_dst.u, eq_src.s):
            raise ValueError(f"M for {src}->{dst} must be {eq_dst.u}x{eq_src.s}, got {spec.M_matrix.shape}")
        if spec.G_matrix.shape != (eq_dst.s, eq_src.u):
            raise ValueError(f"G for {src}->{dst} must be {eq_dst.s}x{eq_src.u}, got {spec.G_matrix.shape}")
        maps[src] = spec
    return maps


def default_transition_maps(net: NetworkSpec, sequence: Sequence[str] | None = None) -> dict[str, TransitionMapSpec]:
    """Generic constant global maps for every leg of the principal cycle.

    ``M`` has a first row of ones (so the non-degeneracy condition holds)
    plus a padded identity; ``G`` is a padded identity, which needs
    ``s_target >= u_source``.
    """
    seq = list(sequence) if sequence is not None else principal_sequence(net)
    maps = {}
    for k, src in enumerate(seq):
        dst = seq[(k + 1) % len(seq)]
        a, b = net.equilibrium(src), net.equilibrium(dst)
        if b.s < a.u:
            raise ValueError(f"cannot build an injective default gamma {src}->{dst}: s_target={b.s} < u_source={a.u}")
        M = np.eye(b.u, a.s)
        M[0, :] = 1.0
        G = np.eye(b.s, a.u)
        maps[src] = TransitionMapSpec.from_matrices(src, dst, M, G)
    return maps
