"""Monte Carlo cusp measures, inequality sweeps and the contraction ladder.

These routines produce *evidence* that the strong-unstable cycle attracts
almost every nearby orbit: they estimate how much of a small section disc
escapes the wedge, check the flight-time inequalities on random instances,
and iterate the return map to watch the contraction happen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Any, Mapping, Sequence

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed

from . import _rng
from .exceptions import OnStableManifoldError, OutsideChartError
from .local import (
    InSectionPoint,
    TransitionMapSpec,
    flight_time_batch,
    landmarks_into,
    return_map,
    tau_batch,
    wedge_defect_batch,
    wedge_membership,
)
from .network import EquilibriumSpec, NetworkSpec, derive_constants, principal_sequence

Z95 = NormalDist().inv_cdf(0.975)
BLOCK_SIZE = 1 << 16
DEFAULT_SAMPLES = 1_000_000


# --------------------------------------------------------------------------- measure estimates


@dataclass(frozen=True)
class MeasureEstimate:
    """Fraction of the ``delta``-disc in the in-section lying outside the
    ``eps``-wedge, with a 95% Wald half-width (continuity corrected).

    ``analytic_bound`` is ``eps**(-2 alpha) * delta**(alpha - 1)``;
    ``corrected_bound`` is the slab estimate ``c_u * eps**(-alpha) *
    delta**(alpha - 1)`` with ``c_u = 2 V_{u-1} / V_u`` the unit-ball volume
    ratio. Both are ``None`` when the saddle has one expanding direction.
    """

    node: str
    eps: float
    delta: float
    ratio: float
    half_width: float
    hits: int
    n_samples: int
    seed: int
    analytic_bound: float | None
    corrected_bound: float | None = None
    notes: tuple[str, ...] = ()

    @property
    def wide_ci(self) -> bool:
        if self.analytic_bound is None:
            return False
        return self.hits == 0 or self.half_width > self.ratio / 2.0

    def within_bound(self, n_half_widths: float = 3.0) -> bool:
        if self.analytic_bound is None:
            return True
        return self.ratio <= self.analytic_bound + n_half_widths * self.half_width

    def to_row(self) -> dict[str, Any]:
        return {
            "node": self.node,
            "eps": self.eps,
            "delta": self.delta,
            "ratio": self.ratio,
            "half_width": self.half_width,
            "bound": self.analytic_bound,
            "n": self.n_samples,
            "seed": self.seed,
        }


def wald_half_width(hits: int, n: int) -> float:
    p = hits / n
    return Z95 * math.sqrt(p * (1.0 - p) / n) + 0.5 / n


def _unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def slab_constant(u: int) -> float:
    """``2 V_{u-1} / V_u``: relative volume of a thin slab through the unit ball per unit half-width."""
    return 2.0 * _unit_ball_volume(u - 1) / _unit_ball_volume(u)


def _count_block(lam: np.ndarray, eps: float, delta: float, seed: int, block: int, size: int) -> int:
    rng = _rng.stream(seed, _rng.MEASURE, block)
    X = _rng.uniform_ball(rng, size, lam.size, delta)
    defect = wedge_defect_batch(X, lam)
    return int(np.count_nonzero(defect >= eps * eps))


def _as_equilibrium(node) -> EquilibriumSpec:
    if isinstance(node, EquilibriumSpec):
        return node
    lam = tuple(float(v) for v in node)
    # only the expanding rates matter for the cusp measure
    return EquilibriumSpec("node", lam, (1.0,))


def estimate_wedge_complement_ratio(
    node: EquilibriumSpec | Sequence[float],
    eps: float,
    delta: float,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    *,
    n_jobs: int | None = 1,
    block_size: int = BLOCK_SIZE,
) -> MeasureEstimate:
    """Estimate the relative measure of the wedge complement in ``E(delta)``.

    Samples are drawn uniformly from the ``u``-ball of radius ``delta`` in
    fixed-size blocks, each block from its own counter-addressed stream, so
    the hit count does not depend on ``n_jobs``.

    Parameters
    ----------
    node : EquilibriumSpec or sequence of float
        The saddle, or just its expanding rates (strictly descending).
    eps, delta : float
        Wedge aperture and disc radius, both in (0, 1).
    """
    eq = _as_equilibrium(node)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps!r}")
    if delta >= 1.0:
        raise OutsideChartError(f"delta={delta!r} reaches the exit sphere")
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")

    if eq.u == 1:
        return MeasureEstimate(
            eq.label, eps, delta, 0.0, 0.0, 0, n_samples, seed, None, None,
            notes=("single expanding direction: every exit is +-1, wedge complement is empty",),
        )

    consts = derive_constants(eq)
    alpha = consts.alpha
    lam = np.asarray(eq.expanding)
    sizes = [block_size] * (n_samples // block_size)
    if n_samples % block_size:
        sizes.append(n_samples % block_size)
    jobs = (delayed(_count_block)(lam, eps, delta, seed, b, size) for b, size in enumerate(sizes))
    if n_jobs in (None, 1):
        hits = sum(_count_block(lam, eps, delta, seed, b, size) for b, size in enumerate(sizes))
    else:
        hits = sum(Parallel(n_jobs=n_jobs)(jobs))

    ratio = hits / n_samples
    bound = eps ** (-2.0 * alpha) * delta ** (alpha - 1.0)
    corrected = slab_constant(eq.u) * eps ** (-alpha) * delta ** (alpha - 1.0)
    notes = []
    if hits == 0:
        notes.append("no complement hits")
    return MeasureEstimate(
        eq.label, eps, delta, ratio, wald_half_width(hits, n_samples), hits, n_samples, seed,
        bound, corrected, tuple(notes),
    )


@dataclass
class ScalingStudy:
    estimates: list[MeasureEstimate]
    slope: float | None
    expected_slope: float | None
    monotone: bool
    vacuous: bool = False
    warnings: list[str] = field(default_factory=list)

    def passed(self, slack: float = 0.3) -> bool:
        if self.vacuous:
            return True
        if self.slope is None or self.expected_slope is None:
            return False
        return self.monotone and self.slope >= self.expected_slope - slack


def delta_scaling_study(
    node: EquilibriumSpec | Sequence[float],
    eps: float,
    deltas: Sequence[float],
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    *,
    n_jobs: int | None = 1,
    min_hits: int = 100,
) -> ScalingStudy:
    """Wedge-complement ratios along a decreasing ``delta`` ladder, with the
    least-squares slope of ``ln ratio`` against ``ln delta``.

    Cells whose confidence interval is wide (half-width above half the
    ratio) are left out of the fit. Fewer than ``min_hits`` complement hits
    at the smallest ``delta`` raises a ``WIDE_CI`` warning, not an error.
    """
    deltas = [float(d) for d in deltas]
    if len(deltas) < 4:
        raise ValueError("need at least 4 delta values")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    eq = _as_equilibrium(node)
    estimates = [
        estimate_wedge_complement_ratio(eq, eps, d, n_samples, seed, n_jobs=n_jobs) for d in deltas
    ]
    if eq.u == 1:
        return ScalingStudy(estimates, None, None, True, vacuous=True,
                            warnings=["single expanding direction: all ratios are 0"])

    warnings = []
    if estimates[-1].hits < min_hits:
        warnings.append(f"WIDE_CI: only {estimates[-1].hits} complement hits at delta={deltas[-1]:g}")
    monotone = all(
        b.ratio <= a.ratio + a.half_width + b.half_width for a, b in zip(estimates, estimates[1:])
    )
    usable = [e for e in estimates if e.hits > 0 and not e.wide_ci]
    slope = None
    if len(usable) >= 2:
        slope = float(np.polyfit(np.log([e.delta for e in usable]), np.log([e.ratio for e in usable]), 1)[0])
    else:
        warnings.append("WIDE_CI: fewer than two usable cells for the slope fit")
    return ScalingStudy(estimates, slope, derive_constants(eq).alpha - 1.0, monotone, warnings=warnings)


# --------------------------------------------------------------------------- return map orbits


@dataclass
class OmegaOrbit:
    """Iterates of the return map from one starting point.

    ``dist_to_landmark`` is the distance of each ``y`` to the nearer of
    ``y_+`` and ``y_-`` at the first node. ``bound_holds[k]`` records
    whether loop ``k+1`` obeyed ``||x'|| <= zeta_loop * ||x||**rho_loop``.
    """

    points: list[InSectionPoint]
    x_norms: list[float]
    wedge_defects: list[float]
    dist_to_landmark: list[float]
    status: str = "OK"
    escape_loop: int | None = None
    bound_holds: list[bool] = field(default_factory=list)
    zeta_loop: float | None = None
    rho_loop: float | None = None

    def rows(self) -> list[dict[str, Any]]:
        return [
            {"loop": k, "x_norm": n, "wedge_defect": w, "dist_to_y_plus": d}
            for k, (n, w, d) in enumerate(zip(self.x_norms, self.wedge_defects, self.dist_to_landmark))
        ]


def loop_contraction_constants(
    net: NetworkSpec, maps: Mapping[str, TransitionMapSpec], sequence: Sequence[str] | None = None
) -> tuple[float, float]:
    """Constants of the composed per-loop bound ``||x'|| <= zeta * ||x||**rho``.

    Each leg satisfies ``||x_{i+1}|| <= zeta_i ||x_i||**rho_i`` while in the
    chart, so a loop gives ``rho = prod rho_i`` and
    ``zeta = prod_i zeta_i ** (prod_{j>i} rho_j)``.
    """
    seq = list(sequence) if sequence is not None else principal_sequence(net)
    rhos = [derive_constants(net.equilibrium(lab)).rho for lab in seq]
    zetas = [maps[lab].zeta for lab in seq]
    zeta = 1.0
    for i, z in enumerate(zetas):
        zeta *= z ** math.prod(rhos[i + 1:])
    return zeta, math.prod(rhos)


def _defect(p: InSectionPoint, eq: EquilibriumSpec) -> float:
    # x = 0 is the connection itself; it exits exactly along e_+-
    if eq.u == 1 or not np.any(p.x):
        return 0.0
    return float(wedge_defect_batch(p.x[None, :], np.asarray(eq.expanding))[0])


def iterate_return_map(
    start: InSectionPoint,
    n_loops: int,
    net: NetworkSpec,
    maps: Mapping[str, TransitionMapSpec],
    *,
    eps_star: float | None = None,
) -> OmegaOrbit:
    """Iterate the return map ``n_loops`` times from ``start``.

    ``x = 0`` is the strong connection itself; the orbit is reported as
    ``ALREADY_CONVERGED`` without iterating. An iterate leaving the chart
    stops the orbit with status ``ESCAPED`` and the loop index.
    """
    seq = principal_sequence(net)
    first = net.equilibrium(seq[0])
    lm = landmarks_into(seq[0], net, maps)
    zeta, rho = loop_contraction_constants(net, maps, seq)

    def dist(p):
        return float(min(np.linalg.norm(p.y - lm.y_plus), np.linalg.norm(p.y - lm.y_minus)))

    if eps_star is not None:
        if not (np.linalg.norm(start.x) < eps_star and dist(start) < eps_star and wedge_membership(start, eps_star, first)):
            raise ValueError(f"start is not in B(eps*) and W(eps*) for eps*={eps_star}")

    orbit = OmegaOrbit([start], [float(scipy.linalg.norm(start.x))], [_defect(start, first)], [dist(start)],
                       zeta_loop=zeta, rho_loop=rho)
    if not np.any(start.x):
        orbit.status = "ALREADY_CONVERGED"
        return orbit

    p = start
    for k in range(1, n_loops + 1):
        try:
            q = return_map(p, net, maps, sequence=seq)
        except OutsideChartError:
            orbit.status = "ESCAPED"
            orbit.escape_loop = k
            orbit.bound_holds.append(False)
            break
        except OnStableManifoldError:
            orbit.status = "ALREADY_CONVERGED"
            break
        nx = float(scipy.linalg.norm(q.x))
        orbit.bound_holds.append(nx <= zeta * orbit.x_norms[-1] ** rho)
        orbit.points.append(q)
        orbit.x_norms.append(nx)
        orbit.wedge_defects.append(_defect(q, first))
        orbit.dist_to_landmark.append(dist(q))
        if nx >= 1.0:
            orbit.status = "ESCAPED"
            orbit.escape_loop = k
            break
        if nx == 0.0:
            orbit.status = "ALREADY_CONVERGED"
            break
        p = q
    return orbit


def sample_wedge_starts(
    net: NetworkSpec,
    maps: Mapping[str, TransitionMapSpec],
    eps_star: float,
    n: int,
    seed: int = 0,
) -> list[InSectionPoint]:
    """Draw ``n`` in-section points at ``p1`` inside ``B(eps*)`` and ``W(eps*)``.

    ``x`` is drawn uniformly from the ``eps*``-disc (rejecting points outside
    the wedge) and ``y`` is a random unit vector within ``eps*`` of ``y_+``.
    """
    seq = principal_sequence(net)
    eq = net.equilibrium(seq[0])
    lm = landmarks_into(seq[0], net, maps)
    rng = _rng.stream(seed, _rng.ORBITS, 0)
    lam = np.asarray(eq.expanding)
    out: list[InSectionPoint] = []
    while len(out) < n:
        X = _rng.uniform_ball(rng, 4 * n, eq.u, eps_star)
        ok = np.ones(len(X), dtype=bool) if eq.u == 1 else wedge_defect_batch(X, lam) < eps_star**2
        for x in X[ok]:
            while True:
                y = lm.y_plus + rng.uniform(-1.0, 1.0, eq.s) * (eps_star / (2.0 * math.sqrt(eq.s)))
                y = y / np.linalg.norm(y)
                if np.linalg.norm(y - lm.y_plus) < eps_star:
                    break
            out.append(InSectionPoint(eq.label, x, y))
            if len(out) == n:
                break
    return out


# --------------------------------------------------------------------------- inequality sweep


@dataclass
class InequalityCheck:
    name: str
    checked: int = 0
    violations: int = 0
    witnesses: list[dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.violations == 0


@dataclass
class InequalityReport:
    checks: dict[str, InequalityCheck]
    n_samples: int
    seed: int
    skipped_x1_zero: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def lines(self) -> list[str]:
        return [
            f"{name}: {'PASS' if c.passed else 'FAIL'} ({c.checked} checked, {c.violations} violations)"
            for name, c in self.checks.items()
        ]


CHECK_NAMES = ("flight_time_bracket", "wedge_defect_bound", "cone_defect_bound", "strong_exit_time_bound")


def _sample_rates(rng: np.random.Generator, m: int, u: int, lo: float, hi: float, min_gap: float) -> np.ndarray:
    """Strictly descending rates in ``[lo, hi]`` with relative gaps of at least ``min_gap``."""
    out = np.empty((m, u))
    filled = 0
    while filled < m:
        cand = -np.sort(-rng.uniform(lo, hi, (2 * (m - filled) + 8, u)), axis=1)
        gaps = cand[:, :-1] / cand[:, 1:] - 1.0
        good = cand[np.all(gaps >= min_gap, axis=1)]
        take = min(len(good), m - filled)
        out[filled:filled + take] = good[:take]
        filled += take
    return out


def check_flight_inequalities(
    n_samples: int = 100_000,
    seed: int = 7,
    rate_range: tuple[float, float] = (0.1, 5.0),
    *,
    max_unstable: int = 4,
    radius_range: tuple[float, float] = (1e-3, 0.999),
    adversarial_fraction: float = 0.1,
    zero_first_fraction: float = 0.02,
    min_gap: float = 0.01,
    max_witnesses: int = 5,
) -> InequalityReport:
    """Check the flight-time inequalities on random instances.

    For every sample ``(lam, x)``:

    * ``flight_time_bracket``: ``-ln||x||/lam_1 < T(x) < -ln||x||/lam_u``;
    * ``wedge_defect_bound``: ``1 - tau_1**2 < |x_1|**(-2 beta) * sum_{j>=2} x_j**2``;
    * ``cone_defect_bound``: for a ``k`` with ``x_1**2 > k sum_{j>=2} x_j**2``,
      ``1 - tau_1**2 < k**(-beta) * ||x||**(2 - 2 beta)``;
    * ``strong_exit_time_bound``: ``|x_1|**(-1/lam_1) >= exp(T(x))``.

    Dimensions ``u`` are drawn from ``2..max_unstable``. A fraction of the
    samples is pushed against the wedge edge (``|x_1| = 0.999 ||x||``) and a
    small fraction has ``x_1 = 0`` (drawn only with ``u >= 3``, so the
    bracket stays strict); the latter are skipped by the three bounds that
    need ``x_1 != 0`` and counted in ``skipped_x1_zero``.
    """
    rng = _rng.stream(seed, _rng.INEQUALITIES, 0)
    checks = {name: InequalityCheck(name) for name in CHECK_NAMES}
    us = rng.integers(2, max_unstable + 1, n_samples)
    kind = rng.random(n_samples)
    skipped = 0

    for u in range(2, max_unstable + 1):
        idx = np.flatnonzero(us == u)
        m = idx.size
        if m == 0:
            continue
        lam = _sample_rates(rng, m, u, rate_range[0], rate_range[1], min_gap)
        direction = _rng.uniform_sphere(rng, m, u)
        log_r = rng.uniform(np.log(radius_range[0]), np.log(radius_range[1]), m)
        radius = np.exp(log_r)

        k_kind = kind[idx]
        adversarial = k_kind < adversarial_fraction
        zero_first = (k_kind >= adversarial_fraction) & (k_kind < adversarial_fraction + zero_first_fraction) & (u >= 3)
        if np.any(adversarial):
            tail = direction[adversarial, 1:]
            tail /= np.linalg.norm(tail, axis=1)[:, None]
            lead = np.sign(direction[adversarial, 0])
            lead[lead == 0] = 1.0
            direction[adversarial, 0] = 0.999 * lead
            direction[adversarial, 1:] = tail * math.sqrt(1.0 - 0.999**2)
        if np.any(zero_first):
            direction[zero_first, 0] = 0.0
            direction[zero_first] /= np.linalg.norm(direction[zero_first], axis=1)[:, None]
        X = direction * radius[:, None]

        T = flight_time_batch(X, lam)
        tt = tau_batch(X, lam, T)
        defect = np.sum(tt[:, 1:] ** 2, axis=1)
        norm = np.linalg.norm(X, axis=1)
        x1 = np.abs(X[:, 0])
        rest = np.sum(X[:, 1:] ** 2, axis=1)
        beta = lam[:, 1] / lam[:, 0]

        def record(name, ok, mask=None):
            chk = checks[name]
            sel = np.ones(m, dtype=bool) if mask is None else mask
            chk.checked += int(sel.sum())
            bad = sel & ~ok
            chk.violations += int(bad.sum())
            for r in np.flatnonzero(bad)[: max(0, max_witnesses - len(chk.witnesses))]:
                chk.witnesses.append({"x": X[r].tolist(), "lambdas": lam[r].tolist(), "T": float(T[r])})

        lo = -np.log(norm) / lam[:, 0]
        hi = -np.log(norm) / lam[:, -1]
        record("flight_time_bracket", (lo < T) & (T < hi))

        nz = x1 > 0.0
        skipped += int((~nz).sum())
        with np.errstate(divide="ignore", invalid="ignore"):
            rhs2 = x1 ** (-2.0 * beta) * rest
            record("wedge_defect_bound", defect < rhs2, nz)

            ratio = x1**2 / rest
            k = ratio * rng.uniform(0.05, 0.95, m)
            rhs3 = k ** (-beta) * norm ** (2.0 - 2.0 * beta)
            record("cone_defect_bound", (x1**2 > k * rest) & (defect < rhs3), nz)

            # compared in log form: -ln|x1| / lam_1 >= T
            record("strong_exit_time_bound", -np.log(x1) / lam[:, 0] >= T, nz)

    return InequalityReport(checks, n_samples, seed, skipped)


# --------------------------------------------------------------------------- verdict

PASS, FAIL, WIDE_CI, MISSING = "PASS", "FAIL", "WIDE_CI", "MISSING"

REQUIRED_CHECKS = (
    "hypotheses",
    "flight_time_inequalities",
    "cusp_measure_bound",
    "cusp_measure_scaling",
    "return_map_contraction",
    "channel",
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str = ""

    def to_dict(self) -> dict[str, str]:
        return {"name": self.name, "status": self.status, "detail": self.detail}


@dataclass
class StabilityVerdict:
    verdict: str
    supporting: list[CheckResult]
    text: str

    def to_dict(self) -> dict[str, Any]:
        return {"verdict": self.verdict, "text": self.text, "supporting": [c.to_dict() for c in self.supporting]}


def stability_verdict(results: Mapping[str, CheckResult], required: Sequence[str] = REQUIRED_CHECKS) -> StabilityVerdict:
    """Aggregate named check results into an evidence verdict.

    Rules, applied in order: a failed ``hypotheses`` check or any failed
    check gives ``COUNTEREVIDENCE``; a missing required check or any
    ``WIDE_CI`` gives ``INCONCLUSIVE``; otherwise
    ``PREDOMINANTLY_STABLE_EVIDENCE``. The verdict is empirical support for
    predominant asymptotic stability, never a proof of it.
    """
    supporting = [results[name] for name in sorted(results)]
    missing = [name for name in required if name not in results]
    failed = [c.name for c in supporting if c.status == FAIL]
    wide = [c.name for c in supporting if c.status == WIDE_CI]

    if failed:
        verdict = "COUNTEREVIDENCE"
        text = f"evidence against predominant stability: failed {', '.join(failed)}"
    elif missing or wide:
        verdict = "INCONCLUSIVE"
        parts = []
        if missing:
            parts.append(f"missing {', '.join(missing)}")
        if wide:
            parts.append(f"wide confidence intervals in {', '.join(wide)}")
        text = "inconclusive evidence: " + "; ".join(parts)
    else:
        verdict = "PREDOMINANTLY_STABLE_EVIDENCE"
        text = "evidence (not proof) of predominant stability, backed by " + ", ".join(c.name for c in supporting)
    return StabilityVerdict(verdict, supporting, text)
