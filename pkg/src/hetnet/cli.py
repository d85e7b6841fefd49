"""Command-line entry point: ``hetnet <command> ...``.

Exit codes: 0 success, 1 hypothesis-validation failure, 2 numerical abort,
3 configuration or usage error. Reports are JSON envelopes (see
:mod:`hetnet.reporting`); plot-ready data goes to CSV via ``--csv``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import glv, local, stability
from .exceptions import (
    ConnectionInferenceError,
    EpsTooLargeError,
    HetnetError,
    HypothesisError,
    SectionError,
    StiffAbort,
)
from .network import (
    EquilibriumSpec,
    NetworkSpec,
    derive_constants,
    network_from_dict,
    principal_sequence,
    validate_hypotheses,
)
from .reporting import (
    MEASURE_COLUMNS,
    OMEGA_COLUMNS,
    UsageError,
    canonical_json,
    csv_text,
    envelope,
    report_bundle,
    section_point_csv,
    trajectory_csv,
    write_text,
)
from .stability import FAIL, PASS, WIDE_CI, CheckResult

EXIT_OK, EXIT_HYPOTHESIS, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 3

COMMANDS = (
    "validate", "flight", "transit", "wedge", "measure", "scaling", "omega",
    "glv-sim", "channel", "perturb", "verdict", "report",
)


# --------------------------------------------------------------------------- inputs


@dataclass
class LoadedInput:
    name: str
    kind: str  # "network" or "glv"
    raw: dict
    _net: NetworkSpec | None = None
    glv: glv.GLVConfig | None = None

    @property
    def net(self) -> NetworkSpec:
        # GLV networks are inferred on first use so plain simulation works without one
        if self._net is None:
            self._net = glv.network_from_glv(self.glv.system, self.glv.labels)
        return self._net

    def fingerprint(self) -> str | None:
        try:
            return self.net.fingerprint()
        except (HypothesisError, ConnectionInferenceError):
            return None

    def maps(self) -> dict[str, local.TransitionMapSpec]:
        if self.kind == "network" and self.raw.get("transition_maps"):
            return local.load_transition_maps(self.raw, self.net)
        return local.default_transition_maps(self.net)


def shipped_configs() -> list[str]:
    return sorted(p.name for p in resources.files("hetnet").joinpath("configs").iterdir() if p.name.endswith(".json"))


def resolve_path(path: str) -> Path:
    """A filesystem path, or the name of a shipped config (with or without ``.json``)."""
    p = Path(path)
    if p.exists():
        return p
    name = path if path.endswith(".json") else path + ".json"
    if name in shipped_configs():
        return Path(str(resources.files("hetnet").joinpath("configs", name)))
    raise UsageError(f"input file {path!r} not found (shipped configs: {', '.join(shipped_configs())})")


def load_input(path: str) -> LoadedInput:
    p = resolve_path(path)
    try:
        with open(p, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as err:
        raise UsageError(f"{p}: invalid JSON at line {err.lineno} column {err.colno}: {err.msg}") from err
    if not isinstance(raw, dict):
        raise UsageError(f"{p}: top level must be a JSON object")
    try:
        if "growth" in raw:
            return LoadedInput(p.name, "glv", raw, None, glv.glv_config_from_dict(raw))
        return LoadedInput(p.name, "network", raw, network_from_dict(raw))
    except (KeyError, TypeError) as err:
        raise UsageError(f"{p}: missing or malformed field {err}") from err


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as err:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from err


def _in_unit(name: str, values: Sequence[float]) -> None:
    for v in values:
        if not 0.0 < v < 1.0:
            raise UsageError(f"{name} must lie in (0, 1), got {v}")


def _positive_int(name: str, v: int, hi: int = 10**9) -> int:
    if not 1 <= v <= hi:
        raise UsageError(f"{name} must lie in [1, {hi}], got {v}")
    return v


def _base_config(args, **extra) -> dict[str, Any]:
    cfg = {"command": args.command}
    if getattr(args, "input", None):
        cfg["input"] = Path(args.input).name
    cfg.update(extra)
    return cfg


def _emit(args, env: dict, csv_data: str | None = None) -> None:
    if csv_data is not None:
        if not getattr(args, "csv", None):
            raise UsageError("this command writes CSV data; pass --csv PATH")
        write_text(args.csv, csv_data)
    write_text(args.out, canonical_json(env))


def _network_nodes(loaded: LoadedInput | None, lambdas: list[list[float]] | None, node: str | None) -> list[EquilibriumSpec]:
    if lambdas:
        return [EquilibriumSpec("lam=" + ",".join(f"{v:g}" for v in lam), tuple(lam), (1.0,)) for lam in lambdas]
    if loaded is None:
        raise UsageError("pass an input file or --lambdas")
    if node:
        return [loaded.net.equilibrium(node)]
    return [eq for eq in loaded.net.equilibria if eq.u >= 2]


# --------------------------------------------------------------------------- checks


def hypotheses_check(net: NetworkSpec) -> CheckResult:
    rep = validate_hypotheses(net)
    if rep.passed:
        return CheckResult("hypotheses", PASS, "all structural hypotheses hold")
    return CheckResult("hypotheses", FAIL, "; ".join(f"{t}: {d}" for t, d in rep.violations))


def inequality_check(report: stability.InequalityReport) -> CheckResult:
    return CheckResult("flight_time_inequalities", PASS if report.passed else FAIL, "; ".join(report.lines()))


def measure_check(estimates: Sequence[stability.MeasureEstimate]) -> CheckResult:
    relevant = [e for e in estimates if e.analytic_bound is not None]
    if not relevant:
        return CheckResult("cusp_measure_bound", PASS, "vacuous: no node with two or more expanding directions")
    bad = [e for e in relevant if not e.within_bound(3.0)]
    wide = [e for e in relevant if e.wide_ci]
    if bad:
        status = FAIL
    elif wide:
        status = WIDE_CI
    else:
        status = PASS
    worst = max(relevant, key=lambda e: e.ratio / e.analytic_bound)
    return CheckResult(
        "cusp_measure_bound", status,
        f"{len(relevant)} cells, {len(bad)} above bound + 3 half-widths, {len(wide)} wide; "
        f"largest ratio/bound {worst.ratio / worst.analytic_bound:.4g} at {worst.node} eps={worst.eps:g} delta={worst.delta:g}",
    )


def scaling_check(studies: Sequence[stability.ScalingStudy]) -> CheckResult:
    real = [s for s in studies if not s.vacuous]
    if not real:
        return CheckResult("cusp_measure_scaling", PASS, "vacuous: no node with two or more expanding directions")
    parts, status = [], PASS
    for s in real:
        node = s.estimates[0].node
        if s.slope is None:
            status = WIDE_CI if status == PASS else status
            parts.append(f"{node}: no usable slope")
            continue
        ok = s.passed()
        if not ok:
            status = FAIL
        elif s.warnings and status == PASS:
            status = WIDE_CI
        parts.append(f"{node}: slope {s.slope:.4f} vs expected {s.expected_slope:.4f}, monotone={s.monotone}")
    return CheckResult("cusp_measure_scaling", status, "; ".join(parts))


def contraction_check(orbits: Sequence[stability.OmegaOrbit]) -> CheckResult:
    if not orbits:
        return CheckResult("return_map_contraction", FAIL, "no orbits")
    held = sum(all(o.bound_holds) for o in orbits)
    escaped = sum(o.status == "ESCAPED" for o in orbits)
    status = PASS if held == len(orbits) and escaped == 0 else FAIL
    o = orbits[0]
    return CheckResult(
        "return_map_contraction", status,
        f"per-loop bound held on {held}/{len(orbits)} orbits, {escaped} escaped; "
        f"zeta_loop={o.zeta_loop:.6g} rho_loop={o.rho_loop:.6g}",
    )


def channel_check(rep: glv.ChannelReport, threshold: float, name: str = "channel") -> CheckResult:
    status = PASS if rep.n_initial and rep.fraction >= threshold else FAIL
    return CheckResult(
        name, status,
        f"fraction {rep.fraction:.4f} ({rep.n_following}/{rep.n_initial}) vs threshold {threshold:g}; "
        f"timeouts {rep.timeout_count}; flags {rep.flags}",
    )


# --------------------------------------------------------------------------- commands


def cmd_validate(args) -> int:
    loaded = load_input(args.input)
    net = loaded.net
    rep = validate_hypotheses(net)
    nodes = []
    for eq in net.equilibria:
        entry = {"label": eq.label, "u": eq.u, "s": eq.s, "expanding": list(eq.expanding),
                 "contracting": list(eq.contracting)}
        try:
            c = derive_constants(eq)
            entry.update(alpha=c.alpha, beta=c.beta, mu=c.mu, rho=c.rho)
        except ValueError as err:
            entry["error"] = str(err)
        nodes.append(entry)
    try:
        seq = principal_sequence(net)
    except HypothesisError:
        seq = None
    result = {"kind": loaded.kind, "network": net.to_dict(), "nodes": nodes, "principal_sequence": seq,
              "validation": rep.to_dict()}
    env = envelope("validate", _base_config(args), None, net.fingerprint(), result, checks=[hypotheses_check(net)])
    _emit(args, env)
    return EXIT_OK if rep.passed else EXIT_HYPOTHESIS


def cmd_flight(args) -> int:
    x = np.asarray(_floats(args.x))
    if args.lambdas:
        lam = np.asarray(_floats(args.lambdas))
        fp = None
    else:
        if not args.input:
            raise UsageError("flight needs --lambdas or an input network with --node")
        loaded = load_input(args.input)
        eq = loaded.net.equilibrium(args.node or loaded.net.labels[0])
        lam = np.asarray(eq.expanding)
        fp = loaded.net.fingerprint()
    T = local.time_of_flight(x, lam)
    t = local.tau(x, lam)
    norm = float(np.linalg.norm(x))
    result = {
        "x": x, "lambdas": lam, "T": T, "tau": t,
        "wedge_defect": float(local.wedge_defect_batch(x[None, :], lam)[0]),
        "bracket": [-np.log(norm) / lam[0], -np.log(norm) / lam[-1]],
    }
    cfg = _base_config(args, x=x.tolist(), lambdas=lam.tolist(), node=args.node)
    _emit(args, envelope("flight", cfg, None, fp, result))
    return EXIT_OK


def _start_point(loaded: LoadedInput, node: str | None, x: str, y: str) -> local.InSectionPoint:
    label = node or principal_sequence(loaded.net)[0]
    yv = np.asarray(_floats(y))
    return local.InSectionPoint(label, np.asarray(_floats(x)), yv / np.linalg.norm(yv))


def cmd_transit(args) -> int:
    loaded = load_input(args.input)
    net, maps = loaded.net, loaded.maps()
    seq = principal_sequence(net)
    p = _start_point(loaded, args.node, args.x, args.y)
    if p.node not in seq:
        raise UsageError(f"{p.node} is not on the principal cycle {seq}")
    points = [p]
    for leg in range(1, _positive_int("--legs", args.legs, 10_000) + 1):
        try:
            p = local.transition_map(p, net.equilibrium(p.node), maps[p.node])
        except SectionError as err:
            err.leg = leg
            raise
        points.append(p)
    result = {"points": [{"node": q.node, "x": q.x, "y": q.y} for q in points]}
    cfg = _base_config(args, node=points[0].node, x=points[0].x.tolist(), y=points[0].y.tolist(), legs=args.legs)
    env = envelope("transit", cfg, None, net.fingerprint(), result, artifacts=[Path(args.csv).name] if args.csv else [])
    _emit(args, env, section_point_csv(points) if args.csv else None)
    return EXIT_OK


def cmd_wedge(args) -> int:
    loaded = load_input(args.input)
    net, maps = loaded.net, loaded.maps()
    p = _start_point(loaded, args.node, args.x, args.y)
    _in_unit("--eps", [args.eps])
    eq = net.equilibrium(p.node)
    result = {"node": p.node, "eps": args.eps, "in_wedge": local.wedge_membership(p, args.eps, eq)}
    if eq.u >= 2 and np.any(p.x):
        result["wedge_defect"] = float(local.wedge_defect_batch(p.x[None, :], np.asarray(eq.expanding))[0])
    if args.delta is not None:
        _in_unit("--delta", [args.delta])
        lm = local.landmarks_into(p.node, net, maps)
        result["delta"] = args.delta
        result["regions"] = {r: local.region_membership(p, args.delta, r, lm) for r in ("E", "F", "B")}
    cfg = _base_config(args, node=p.node, x=p.x.tolist(), y=p.y.tolist(), eps=args.eps, delta=args.delta)
    _emit(args, envelope("wedge", cfg, None, net.fingerprint(), result))
    return EXIT_OK


def _lambdas_arg(args) -> list[list[float]] | None:
    return [_floats(v) for v in args.lambdas] if args.lambdas else None


def cmd_measure(args) -> int:
    loaded = load_input(args.input) if args.input else None
    lambdas = _lambdas_arg(args)
    nodes = _network_nodes(loaded, lambdas, args.node)
    eps_list, delta_list = _floats(args.eps), _floats(args.delta)
    _in_unit("--eps", eps_list)
    _in_unit("--delta", delta_list)
    n = _positive_int("--samples", args.samples, 10**9)
    estimates = [
        stability.estimate_wedge_complement_ratio(eq, e, d, n, args.seed, n_jobs=args.jobs)
        for eq in nodes for e in eps_list for d in delta_list
    ]
    rows = [e.to_row() for e in estimates]
    result = {
        "estimates": [
            dict(e.to_row(), hits=e.hits, corrected_bound=e.corrected_bound, wide_ci=e.wide_ci,
                 within_bound=e.within_bound(3.0), notes=list(e.notes))
            for e in estimates
        ]
    }
    cfg = _base_config(args, nodes=[eq.label for eq in nodes], lambdas=lambdas, eps=eps_list, delta=delta_list,
                       samples=n)
    env = envelope("measure", cfg, args.seed, loaded.net.fingerprint() if loaded else None, result,
                   checks=[measure_check(estimates)], artifacts=[Path(args.csv).name] if args.csv else [])
    if args.csv:
        write_text(args.csv, csv_text(MEASURE_COLUMNS, rows))
    write_text(args.out, canonical_json(env))
    return EXIT_OK


def cmd_scaling(args) -> int:
    loaded = load_input(args.input) if args.input else None
    lambdas = _lambdas_arg(args)
    nodes = _network_nodes(loaded, lambdas, args.node)
    deltas = _floats(args.deltas)
    _in_unit("--eps", [args.eps])
    _in_unit("--deltas", deltas)
    n = _positive_int("--samples", args.samples, 10**9)
    studies = [stability.delta_scaling_study(eq, args.eps, deltas, n, args.seed, n_jobs=args.jobs) for eq in nodes]
    rows = [e.to_row() for s in studies for e in s.estimates]
    result = {
        "studies": [
            {"node": s.estimates[0].node, "slope": s.slope, "expected_slope": s.expected_slope,
             "monotone": s.monotone, "vacuous": s.vacuous, "warnings": s.warnings, "passed": s.passed(),
             "estimates": [e.to_row() for e in s.estimates]}
            for s in studies
        ]
    }
    cfg = _base_config(args, nodes=[eq.label for eq in nodes], lambdas=lambdas, eps=args.eps, deltas=deltas, samples=n)
    env = envelope("scaling", cfg, args.seed, loaded.net.fingerprint() if loaded else None, result,
                   checks=[scaling_check(studies)], artifacts=[Path(args.csv).name] if args.csv else [])
    if args.csv:
        write_text(args.csv, csv_text(MEASURE_COLUMNS, rows))
    write_text(args.out, canonical_json(env))
    return EXIT_OK


def run_orbits(loaded: LoadedInput, loops: int, eps_star: float, starts: int, seed: int,
               x: str | None = None, y: str | None = None) -> list[stability.OmegaOrbit]:
    net, maps = loaded.net, loaded.maps()
    if x is not None:
        pts = [_start_point(loaded, None, x, y or "1")]
    else:
        pts = stability.sample_wedge_starts(net, maps, eps_star, starts, seed)
    return [stability.iterate_return_map(p, loops, net, maps) for p in pts]


def cmd_omega(args) -> int:
    loaded = load_input(args.input)
    _in_unit("--eps-star", [args.eps_star])
    if (args.x is None) != (args.y is None):
        raise UsageError("--x and --y go together")
    orbits = run_orbits(loaded, _positive_int("--loops", args.loops, 1000), args.eps_star,
                        _positive_int("--starts", args.starts, 10**6), args.seed, args.x, args.y)
    first = orbits[0]
    result = {
        "n_orbits": len(orbits),
        "zeta_loop": first.zeta_loop,
        "rho_loop": first.rho_loop,
        "statuses": {s: sum(o.status == s for o in orbits) for s in sorted({o.status for o in orbits})},
        "bound_held": sum(all(o.bound_holds) for o in orbits),
        "first_orbit": first.rows(),
    }
    cfg = _base_config(args, loops=args.loops, eps_star=args.eps_star, starts=len(orbits), x=args.x, y=args.y)
    env = envelope("omega", cfg, args.seed, loaded.net.fingerprint(), result,
                   checks=[contraction_check(orbits)], artifacts=[Path(args.csv).name] if args.csv else [])
    if args.csv:
        write_text(args.csv, csv_text(OMEGA_COLUMNS, first.rows()))
    write_text(args.out, canonical_json(env))
    return EXIT_OK


def _glv_input(args) -> LoadedInput:
    loaded = load_input(args.input)
    if loaded.kind != "glv":
        raise UsageError(f"{args.input} is not a GLV config")
    return loaded


def _experiment(loaded: LoadedInput, args) -> dict[str, Any]:
    exp = dict(loaded.glv.experiment)
    for key, attr in (("eps", "eps"), ("delta", "delta"), ("n", "samples"), ("t_max", "t_max"), ("seed", "seed")):
        v = getattr(args, attr, None)
        if v is not None:
            exp[key] = v
    missing = [k for k in ("eps", "delta", "n", "t_max", "seed") if k not in exp]
    if missing:
        raise UsageError(f"experiment settings missing: {missing}")
    box = dict(exp.get("box") or {})
    if getattr(args, "box_halfwidth", None) is not None:
        box["halfwidth"] = args.box_halfwidth
    exp["box"] = glv.SamplingBox.from_dict(box).to_dict()
    _in_unit("eps", [exp["eps"]])
    _in_unit("delta", [exp["delta"]])
    _positive_int("samples", int(exp["n"]))
    exp["n"] = int(exp["n"])
    exp["seed"] = int(exp["seed"])
    exp["t_max"] = float(exp["t_max"])
    return exp


def cmd_glv_sim(args) -> int:
    loaded = _glv_input(args)
    sys_ = loaded.glv.system
    x0 = _floats(args.x0) if args.x0 else [max(0.5 - 0.1 * k, 0.05) for k in range(sys_.dim)]
    traj = glv.integrate(sys_, x0, args.t_max, args.rtol, args.atol, max_step=args.max_step)
    eq = glv.equilibrium_states(sys_, loaded.glv.labels)
    itin = glv.detect_itinerary(traj, eq, args.eps, sys=sys_)
    result = {
        "n_accepted": traj.n_accepted, "n_rejected": traj.n_rejected,
        "min_step": traj.min_step, "max_step": traj.max_step, "status": traj.status,
        "final_state": traj.states[-1],
        "itinerary": [vars(v) for v in itin.visits],
    }
    cfg = _base_config(args, x0=x0, t_max=args.t_max, rtol=args.rtol, atol=args.atol, max_step=args.max_step,
                       eps=args.eps)
    env = envelope("glv-sim", cfg, None, loaded.fingerprint(), result,
                   artifacts=[Path(args.csv).name] if args.csv else [])
    if args.csv:
        write_text(args.csv, trajectory_csv(traj))
    write_text(args.out, canonical_json(env))
    return EXIT_OK


def run_channel(loaded: LoadedInput, exp: dict, n_jobs: int | None) -> glv.ChannelReport:
    return glv.channel_experiment(
        loaded.glv.system, loaded.net, exp["eps"], exp["delta"], exp["n"], exp["t_max"], exp["seed"],
        labels=loaded.glv.labels, box=glv.SamplingBox.from_dict(exp["box"]), n_jobs=n_jobs,
    )


def cmd_channel(args) -> int:
    loaded = _glv_input(args)
    exp = _experiment(loaded, args)
    rep = run_channel(loaded, exp, args.jobs)
    cfg = _base_config(args, experiment=exp, threshold=args.threshold)
    env = envelope("channel", cfg, exp["seed"], loaded.net.fingerprint(), rep.to_dict(),
                   checks=[hypotheses_check(loaded.net), channel_check(rep, args.threshold)])
    _emit(args, env)
    return EXIT_OK if validate_hypotheses(loaded.net).passed else EXIT_HYPOTHESIS


def cmd_perturb(args) -> int:
    loaded = _glv_input(args)
    exp = _experiment(loaded, args)
    pcfg = dict(loaded.raw.get("perturb", {}))
    magnitude = args.magnitude if args.magnitude is not None else float(pcfg.get("magnitude", 1e-3))
    count = args.count if args.count is not None else int(pcfg.get("count", 10))
    pseed = args.perturb_seed if args.perturb_seed is not None else int(pcfg.get("seed", 0))
    if args.samples is None and "n" in pcfg:
        exp["n"] = int(pcfg["n"])
    if magnitude < 0:
        raise UsageError("--magnitude must be non-negative")
    reports = glv.perturb_and_redetect(loaded.glv.system, magnitude, _positive_int("--count", count, 10_000),
                                       exp, pseed, labels=loaded.glv.labels, n_jobs=args.jobs)
    revalidated = sum(not r.hypothesis_violations and "NO_PRINCIPAL_CYCLE" not in r.flags for r in reports)
    ok = [r for r in reports if r.n_initial and r.fraction >= args.threshold]
    status = PASS if revalidated == len(reports) and len(ok) == len(reports) else FAIL
    check = CheckResult("channel_robustness", status,
                        f"{revalidated}/{len(reports)} perturbed systems revalidated; "
                        f"{len(ok)}/{len(reports)} reached fraction >= {args.threshold:g}")
    result = {"magnitude": magnitude, "count": count, "perturb_seed": pseed, "revalidated": revalidated,
              "reports": [r.to_dict() for r in reports]}
    cfg = _base_config(args, experiment=exp, magnitude=magnitude, count=count, perturb_seed=pseed,
                       threshold=args.threshold)
    _emit(args, envelope("perturb", cfg, exp["seed"], loaded.net.fingerprint(), result, checks=[check]))
    return EXIT_OK


def cmd_verdict(args) -> int:
    loaded = load_input(args.input)
    net = loaded.net
    _in_unit("--measure-eps", [args.measure_eps])
    _in_unit("--measure-delta", [args.measure_delta])
    m = _positive_int("--measure-samples", args.measure_samples)
    seed = args.seed if args.seed is not None else 0
    checks = [hypotheses_check(net)]
    hyp_ok = checks[0].status == PASS
    checks.append(inequality_check(stability.check_flight_inequalities(_positive_int("--inequality-samples", args.inequality_samples), seed)))
    if hyp_ok:
        nodes = [eq for eq in net.equilibria if eq.u >= 2]
        eps, delta = args.measure_eps, args.measure_delta
        deltas = [delta / 2**k for k in range(4)]
        estimates = [stability.estimate_wedge_complement_ratio(eq, eps, delta, m, seed, n_jobs=args.jobs)
                     for eq in nodes]
        checks.append(measure_check(estimates))
        studies = [stability.delta_scaling_study(eq, eps, deltas, m, seed, n_jobs=args.jobs) for eq in nodes]
        checks.append(scaling_check(studies))
        checks.append(contraction_check(run_orbits(loaded, args.loops, args.eps_star, args.starts, seed)))
        if loaded.kind == "glv":
            exp = _experiment(loaded, args)
            checks.append(channel_check(run_channel(loaded, exp, args.jobs), args.threshold))
    verdict = stability.stability_verdict({c.name: c for c in checks})
    cfg = _base_config(args, measure_samples=m, inequality_samples=args.inequality_samples, measure_eps=args.measure_eps,
                       measure_delta=args.measure_delta, loops=args.loops, eps_star=args.eps_star,
                       starts=args.starts, threshold=args.threshold,
                       experiment=_experiment(loaded, args) if loaded.kind == "glv" else None)
    env = envelope("verdict", cfg, seed, net.fingerprint(), {"verdict": verdict.to_dict()}, checks=checks)
    _emit(args, env)
    return EXIT_OK if hyp_ok else EXIT_HYPOTHESIS


def cmd_report(args) -> int:
    write_text(args.out, canonical_json(report_bundle(args.artifacts)))
    return EXIT_OK


# --------------------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hetnet", description="Numerical laboratory for attracting heteroclinic networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, func: Callable, help_: str, *, input_: str | None = "required", csv_: bool = False):
        p = sub.add_parser(name, help=help_, description=help_)
        if input_ == "required":
            p.add_argument("input", help="network or GLV config (path or shipped config name)")
        elif input_ == "optional":
            p.add_argument("input", nargs="?", help="network or GLV config (path or shipped config name)")
        p.add_argument("--out", default=None, help="JSON report path (default: stdout)")
        if csv_:
            p.add_argument("--csv", default=None, help="plot-ready CSV output path")
        p.set_defaults(func=func)
        return p

    add("validate", cmd_validate, "check the structural hypotheses and list derived constants per node")

    p = add("flight", cmd_flight, "time of flight and exit direction for one point", input_="optional")
    p.add_argument("--x", required=True, help="expanding coordinates, comma separated")
    p.add_argument("--lambdas", help="expanding rates, comma separated (instead of an input network)")
    p.add_argument("--node", help="node label in the input network")

    p = add("transit", cmd_transit, "carry an in-section point along the principal cycle", csv_=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--node", help="starting node (default: first node of the principal cycle)")
    p.add_argument("--legs", type=int, default=1, help="number of transitions")

    p = add("wedge", cmd_wedge, "wedge and region membership of an in-section point")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--node")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float)

    for name, func, help_ in (
        ("measure", cmd_measure, "Monte Carlo measure of the wedge complement in small section discs"),
        ("scaling", cmd_scaling, "wedge-complement ratio along a decreasing delta ladder with log-log slope"),
    ):
        p = add(name, func, help_, input_="optional", csv_=True)
        p.add_argument("--lambdas", action="append", help="expanding rates of a bare node (repeatable)")
        p.add_argument("--node")
        p.add_argument("--samples", type=int, default=stability.DEFAULT_SAMPLES,
                       help=f"samples per cell (default {stability.DEFAULT_SAMPLES})")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1, help="worker processes (does not change results)")
        if name == "measure":
            p.add_argument("--eps", default="0.5", help="comma-separated wedge apertures")
            p.add_argument("--delta", default="0.01", help="comma-separated disc radii")
        else:
            p.add_argument("--eps", type=float, default=0.5)
            p.add_argument("--deltas", default="0.02,0.01,0.005,0.0025")

    p = add("omega", cmd_omega, "iterate the return map and record contraction", csv_=True)
    p.add_argument("--loops", type=int, default=6)
    p.add_argument("--eps-star", type=float, default=0.1)
    p.add_argument("--starts", type=int, default=1, help="number of sampled starts (CSV holds the first)")
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--seed", type=int, default=0)

    p = add("glv-sim", cmd_glv_sim, "integrate a GLV system and detect its itinerary", csv_=True)
    p.add_argument("--x0")
    p.add_argument("--t-max", type=float, default=500.0)
    p.add_argument("--rtol", type=float, default=1e-9)
    p.add_argument("--atol", type=float, default=1e-12)
    p.add_argument("--max-step", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.2, help="ball radius for itinerary detection")

    def experiment_flags(p, threshold):
        p.add_argument("--eps", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--samples", type=int)
        p.add_argument("--t-max", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--box-halfwidth", type=float)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--threshold", type=float, default=threshold, help="fraction needed for PASS")

    experiment_flags(add("channel", cmd_channel, "fraction of sampled starts following the principal cycle"), 0.95)

    p = add("perturb", cmd_perturb, "re-run the channel experiment on randomly perturbed systems")
    experiment_flags(p, 0.9)
    p.add_argument("--magnitude", type=float)
    p.add_argument("--count", type=int)
    p.add_argument("--perturb-seed", type=int)

    p = add("verdict", cmd_verdict, "run every check and aggregate an evidence verdict")
    experiment_flags(p, 0.95)
    p.add_argument("--measure-eps", type=float, default=0.5, help="wedge aperture for the cusp checks")
    p.add_argument("--measure-delta", type=float, default=0.01, help="largest disc radius for the cusp checks")
    p.add_argument("--measure-samples", type=int, default=stability.DEFAULT_SAMPLES, help="samples per cusp cell")
    p.add_argument("--inequality-samples", type=int, default=100_000)
    p.add_argument("--loops", type=int, default=4)
    p.add_argument("--eps-star", type=float, default=0.1)
    p.add_argument("--starts", type=int, default=100)

    p = sub.add_parser("report", help="merge run artifacts into one summary with a verdict")
    p.add_argument("artifacts", nargs="*", help="JSON reports written by other commands")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except HypothesisError as err:
        print(f"hypothesis failure: {err}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (StiffAbort, SectionError) as err:
        print(f"numerical abort [{err.code}]: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ConnectionInferenceError, EpsTooLargeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, KeyError, ValueError, HetnetError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
