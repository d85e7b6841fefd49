"""Abstract heteroclinic networks: equilibria, connections, derived constants.

Eigenvalues are stored as positive magnitudes. Membership in
``expanding`` or ``contracting`` carries the sign, so an equilibrium with
spectrum ``{2, 1, -3, -4}`` is ``EquilibriumSpec("p", (2, 1), (3, 4))``.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .exceptions import HypothesisError

SCHEMA_VERSION = 1
RESONANCE_RTOL = 1e-9
SENTINEL_INFINITE = math.inf

HYPOTHESIS_TAGS = ("H1", "H2", "H3", "H4")


@dataclass(frozen=True)
class EquilibriumSpec:
    """One saddle of the network.

    ``expanding`` is strictly descending, ``contracting`` strictly ascending.
    Construction does not validate, so malformed specs can still be
    reported on by :func:`validate_hypotheses`.
    """

    label: str
    expanding: tuple[float, ...]
    contracting: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "expanding", tuple(float(v) for v in self.expanding))
        object.__setattr__(self, "contracting", tuple(float(v) for v in self.contracting))

    @property
    def u(self) -> int:
        return len(self.expanding)

    @property
    def s(self) -> int:
        return len(self.contracting)

    @property
    def n(self) -> int:
        return self.u + self.s

    def signed_spectrum(self) -> tuple[float, ...]:
        return self.expanding + tuple(-v for v in self.contracting)


@dataclass(frozen=True)
class DerivedConstants:
    alpha: float
    beta: float
    mu: float
    rho: float


@dataclass(frozen=True)
class ConnectionSpec:
    source: str
    target: str
    source_eigen_index: int = 1

    @property
    def is_strong(self) -> bool:
        return self.source_eigen_index == 1


@dataclass(frozen=True)
class NetworkSpec:
    """Equilibria ``p1 .. pN`` (in order), connections, and the length of the
    principal cycle ``N* <= N``."""

    equilibria: tuple[EquilibriumSpec, ...]
    connections: tuple[ConnectionSpec, ...]
    principal_length: int

    def __post_init__(self):
        object.__setattr__(self, "equilibria", tuple(self.equilibria))
        object.__setattr__(self, "connections", tuple(self.connections))

    @property
    def labels(self) -> list[str]:
        return [eq.label for eq in self.equilibria]

    def equilibrium(self, label: str) -> EquilibriumSpec:
        for eq in self.equilibria:
            if eq.label == label:
                return eq
        raise KeyError(label)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "equilibria": [
                {"label": eq.label, "expanding": list(eq.expanding), "contracting": list(eq.contracting)}
                for eq in self.equilibria
            ],
            "connections": [
                {"source": c.source, "target": c.target, "index": c.source_eigen_index}
                for c in self.connections
            ],
            "principal_length": self.principal_length,
        }

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON form; identifies a network across reports."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class ValidationReport:
    violations: list[tuple[str, str]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    saddle_values: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def tags(self) -> set[str]:
        return {tag for tag, _ in self.violations}

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "violations": [{"tag": t, "detail": d} for t, d in self.violations],
            "notes": list(self.notes),
            "saddle_values": dict(self.saddle_values),
        }


def _ordering_problems(eq: EquilibriumSpec) -> list[tuple[str, str]]:
    out = []
    for name, values in (("expanding", eq.expanding), ("contracting", eq.contracting)):
        for v in values:
            if not math.isfinite(v):
                out.append(("H2", f"{eq.label}: non-finite {name} eigenvalue {v!r}"))
            elif v == 0.0:
                out.append(("H1", f"{eq.label}: zero eigenvalue in {name} list (not hyperbolic)"))
            elif v < 0.0:
                out.append(("H2", f"{eq.label}: {name} magnitude {v!r} has the wrong sign"))
    if eq.u < 1:
        out.append(("H2", f"{eq.label}: no expanding eigenvalue (u=0)"))
    if eq.s < 1:
        out.append(("H2", f"{eq.label}: no contracting eigenvalue (s=0)"))
    if any(a <= b for a, b in zip(eq.expanding, eq.expanding[1:])):
        out.append(("H2", f"{eq.label}: expanding eigenvalues {eq.expanding} not strictly descending"))
    if any(a >= b for a, b in zip(eq.contracting, eq.contracting[1:])):
        out.append(("H2", f"{eq.label}: contracting eigenvalues {eq.contracting} not strictly ascending"))
    return out


def resonances(eq: EquilibriumSpec, rtol: float = RESONANCE_RTOL) -> list[str]:
    """Low-order resonance screen on the signed spectrum.

    Flags pairwise equalities and any eigenvalue equal to the sum of two
    other (distinct-index) eigenvalues, within ``rtol`` relative to the
    spectral radius.
    """
    spec = eq.signed_spectrum()
    if not spec:
        return []
    tol = rtol * max(abs(v) for v in spec)
    found = []
    for i, j in itertools.combinations(range(len(spec)), 2):
        if abs(spec[i] - spec[j]) <= tol:
            found.append(f"{spec[i]:g} == {spec[j]:g}")
    for k, target in enumerate(spec):
        others = [i for i in range(len(spec)) if i != k]
        for i, j in itertools.combinations(others, 2):
            if abs(spec[i] + spec[j] - target) <= tol:
                found.append(f"{target:g} == {spec[i]:g} + {spec[j]:g}")
    return found


def derive_constants(eq: EquilibriumSpec) -> DerivedConstants:
    """Ratios of leading eigenvalues at one saddle.

    ``alpha`` is the gap between the two strongest expansions, ``beta`` its
    reciprocal, ``mu`` the saddle value (weakest contraction over strongest
    expansion) and ``rho`` the midpoint of ``[1, mu]``. With a single
    expanding direction ``alpha`` is infinite and ``beta`` is 0.

    Raises
    ------
    ValueError
        If the eigenvalue lists are empty, non-positive or mis-ordered.
    """
    problems = _ordering_problems(eq)
    if problems:
        raise ValueError("; ".join(d for _, d in problems))
    lam1 = eq.expanding[0]
    if eq.u >= 2:
        alpha = lam1 / eq.expanding[1]
        beta = eq.expanding[1] / lam1
    else:
        alpha, beta = SENTINEL_INFINITE, 0.0
    mu = eq.contracting[0] / lam1
    rho = (1.0 + mu) / 2.0
    return DerivedConstants(alpha=alpha, beta=beta, mu=mu, rho=rho)


def validate_hypotheses(net: NetworkSpec) -> ValidationReport:
    """Check every structural hypothesis and collect all violations.

    Never raises; the returned report is empty exactly when the network is
    usable by the rest of the package.
    """
    report = ValidationReport()
    labels = net.labels
    if len(set(labels)) != len(labels):
        dupes = sorted({lab for lab in labels if labels.count(lab) > 1})
        report.violations.append(("H1", f"duplicate equilibrium labels {dupes}"))
    if not net.equilibria:
        report.violations.append(("H1", "network has no equilibria"))
        return report

    dims = {eq.n for eq in net.equilibria}
    if len(dims) > 1:
        report.violations.append(("H2", f"u + s differs across equilibria: {sorted(dims)}"))

    for eq in net.equilibria:
        problems = _ordering_problems(eq)
        report.violations.extend(problems)
        if problems:
            continue
        for res in resonances(eq):
            report.violations.append(("H2", f"{eq.label}: resonant eigenvalues {res}"))
        mu = derive_constants(eq).mu
        report.saddle_values[eq.label] = mu
        if not mu > 1.0:
            report.violations.append(("H4", f"{eq.label}: saddle value mu={mu:.6g} <= 1"))

    known = set(labels)
    by_label = {eq.label: eq for eq in net.equilibria}
    for c in net.connections:
        if c.source not in known or c.target not in known:
            report.violations.append(("H3", f"connection {c.source}->{c.target} references unknown equilibrium"))
            continue
        u_src = by_label[c.source].u
        if not 1 <= c.source_eigen_index <= max(u_src, 1):
            report.violations.append(
                ("H3", f"connection {c.source}->{c.target} index {c.source_eigen_index} outside [1, {u_src}]")
            )

    n_star = net.principal_length
    if not 1 <= n_star <= len(net.equilibria):
        report.violations.append(("H3", f"principal_length {n_star} outside [1, {len(net.equilibria)}]"))
    else:
        for i in range(n_star):
            src, dst = labels[i], labels[(i + 1) % n_star]
            strong = [c for c in net.connections if c.source == src and c.is_strong]
            if not any(c.target == dst for c in strong):
                report.violations.append(("H3", f"missing strong-unstable connection {src}->{dst}"))
            elif len({c.target for c in strong}) > 1:
                report.violations.append(("H3", f"{src} has several strong-unstable targets"))
        if n_star < len(net.equilibria):
            report.notes.append(
                f"principal cycle closes after N*={n_star} of N={len(net.equilibria)} equilibria; review the closing convention"
            )
    return report


def principal_sequence(net: NetworkSpec) -> list[str]:
    """Follow strong-unstable connections from ``p1`` for ``N*`` steps.

    Raises
    ------
    HypothesisError
        Tagged ``H3`` when the strong chain is missing, ambiguous or does not
        close after ``N*`` steps.
    """
    if not net.equilibria:
        raise HypothesisError("H3", "empty network")
    strong: dict[str, set[str]] = {}
    for c in net.connections:
        if c.is_strong:
            strong.setdefault(c.source, set()).add(c.target)
    seq = [net.equilibria[0].label]
    for _ in range(net.principal_length):
        targets = strong.get(seq[-1], set())
        if not targets:
            raise HypothesisError("H3", f"no strong-unstable connection leaves {seq[-1]}")
        if len(targets) > 1:
            raise HypothesisError("H3", f"{seq[-1]} has several strong-unstable targets {sorted(targets)}")
        seq.append(next(iter(targets)))
    if seq[-1] != seq[0] or len(set(seq[:-1])) != net.principal_length:
        raise HypothesisError("H3", f"strong chain {seq} does not close after {net.principal_length} steps")
    return seq[:-1]


def network_from_dict(data: dict[str, Any]) -> NetworkSpec:
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version!r}")
    equilibria = [
        EquilibriumSpec(str(e["label"]), tuple(e["expanding"]), tuple(e["contracting"]))
        for e in data["equilibria"]
    ]
    connections = [
        ConnectionSpec(str(c["source"]), str(c["target"]), int(c.get("index", 1)))
        for c in data.get("connections", [])
    ]
    n_star = int(data.get("principal_length", len(equilibria)))
    return NetworkSpec(tuple(equilibria), tuple(connections), n_star)


def load_network(path: str | Path) -> NetworkSpec:
    with open(path, encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))


def make_network(
    equilibria: Iterable[EquilibriumSpec],
    edges: Sequence[tuple[str, str] | tuple[str, str, int]],
    principal_length: int | None = None,
) -> NetworkSpec:
    """Convenience constructor; edges default to index 1 (strong)."""
    eqs = tuple(equilibria)
    conns = tuple(ConnectionSpec(*e) for e in edges)
    return NetworkSpec(eqs, conns, len(eqs) if principal_length is None else principal_length)
