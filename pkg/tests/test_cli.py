import json
import subprocess
import sys

import pytest

from hetnet.cli import EXIT_HYPOTHESIS, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main

SUBCOMMANDS = ["validate", "flight", "transit", "wedge", "measure", "scaling", "omega", "glv-sim", "channel",
               "perturb", "verdict", "report"]


def run(*argv):
    return main([str(a) for a in argv])


def read(path):
    return json.loads(path.read_text())


def test_help_lists_every_subcommand():
    out = subprocess.run([sys.executable, "-m", "hetnet.cli", "--help"], capture_output=True, text=True, check=True)
    for name in SUBCOMMANDS:
        assert name in out.stdout


def test_validate_stable_config_lists_saddle_values(tmp_path):
    out = tmp_path / "v.json"
    assert run("validate", "may_leonard", "--out", out) == EXIT_OK
    env = read(out)
    assert env["command"] == "validate" and env["schema_version"] == 1
    mus = [n["mu"] for n in env["result"]["nodes"]]
    assert mus == pytest.approx([3.0, 3.0, 3.0])
    assert env["checks"]["hypotheses"]["status"] == "PASS"


def test_validate_unstable_config_names_h4(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert run("validate", "may_leonard_unstable", "--out", out) == EXIT_HYPOTHESIS
    assert "H4" in json.dumps(read(out)["result"]["validation"])


def test_unreadable_config_is_a_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("validate", bad) == EXIT_USAGE
    assert run("validate", tmp_path / "missing.json") == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_bad_flags_are_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["measure", "--bogus"])
    assert info.value.code == EXIT_USAGE
    assert run("measure", "--lambdas", "1,2", "--samples", 10) == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        run("measure", "--lambdas", "2,1", "--samples", 10, "--jobs", 0)
    assert info.value.code == EXIT_USAGE


def test_numerical_abort_exit_code(capsys):
    assert run("flight", "--lambdas", "2,1", "--x", "0.9,0.9") == EXIT_NUMERIC
    assert run("flight", "--lambdas", "2,1", "--x", "0,0") == EXIT_NUMERIC
    err = capsys.readouterr().err
    assert "OUTSIDE_CHART" in err and "ON_STABLE_MANIFOLD" in err


def test_flight_reports_exit_time(tmp_path):
    out = tmp_path / "f.json"
    assert run("flight", "--lambdas", "2", "--x", "0.1", "--out", out) == EXIT_OK
    res = read(out)["result"]
    assert res["T"] == pytest.approx(1.1512925464970228)


def test_transit_writes_section_point_csv(tmp_path):
    out, csv = tmp_path / "t.json", tmp_path / "t.csv"
    assert run("transit", "scalar_two_node", "--x", "0.1", "--y", "1", "--legs", 2, "--out", out, "--csv", csv) == 0
    lines = csv.read_text().splitlines()
    assert lines[0] == "node,x1,y1"
    assert float(lines[-1].split(",")[1]) == pytest.approx(0.1**2.25)


def test_wedge_command(tmp_path):
    out = tmp_path / "w.json"
    assert run("wedge", "mixed_u2_network", "--x", "0.1,0.001", "--y", "1", "--eps", 0.5, "--out", out) == 0
    assert read(out)["result"]["in_wedge"] is True


def test_measure_defaults_to_a_million_samples(tmp_path):
    out, csv = tmp_path / "m.json", tmp_path / "m.csv"
    assert run("measure", "--lambdas", "2,1", "--out", out, "--csv", csv) == EXIT_OK
    env = read(out)
    assert env["config"]["samples"] == 10**6
    assert env["result"]["estimates"][0]["n"] == 10**6
    assert csv.read_text().splitlines()[0] == "node,eps,delta,ratio,half_width,bound,n,seed"
    assert env["artifacts"] == ["m.csv"]


def test_reports_are_byte_identical_across_workers_and_directories(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["measure", "--lambdas", "3,1", "--eps", "0.3,0.5", "--delta", "0.02", "--samples", 150_000]
    assert run(*args, "--jobs", 1, "--out", a / "m.json", "--csv", a / "m.csv") == 0
    assert run(*args, "--jobs", 2, "--out", b / "m.json", "--csv", b / "m.csv") == 0
    assert (a / "m.json").read_bytes() == (b / "m.json").read_bytes()
    assert (a / "m.csv").read_bytes() == (b / "m.csv").read_bytes()


def test_channel_report_is_deterministic(tmp_path):
    args = ["channel", "may_leonard", "--samples", 4]
    assert run(*args, "--jobs", 1, "--out", tmp_path / "c1.json") == 0
    assert run(*args, "--jobs", 2, "--out", tmp_path / "c2.json") == 0
    assert (tmp_path / "c1.json").read_bytes() == (tmp_path / "c2.json").read_bytes()
    env = read(tmp_path / "c1.json")
    assert env["seed"] == env["config"]["experiment"]["seed"]
    assert env["config_hash"]


def test_glv_sim_writes_trajectory_csv(tmp_path):
    csv = tmp_path / "traj.csv"
    assert run("glv-sim", "may_leonard", "--x0", "0.5,0.4,0.3", "--t-max", 50, "--csv", csv,
               "--out", tmp_path / "g.json") == 0
    assert csv.read_text().splitlines()[0] == "t,x1,x2,x3"


def test_omega_csv_columns(tmp_path):
    csv = tmp_path / "o.csv"
    assert run("omega", "scalar_two_node", "--x", "0.1", "--y", "1", "--loops", 3, "--csv", csv,
               "--out", tmp_path / "o.json") == 0
    lines = csv.read_text().splitlines()
    assert lines[0] == "loop,x_norm,wedge_defect,dist_to_y_plus"
    assert float(lines[2].split(",")[1]) == pytest.approx(0.1**2.25)


def _bundle_inputs(tmp_path):
    paths = []
    p = tmp_path / "measure.json"
    assert run("measure", "mixed_u2_network", "--samples", 20_000, "--out", p) == 0
    paths.append(p)
    p = tmp_path / "omega.json"
    assert run("omega", "mixed_u2_network", "--starts", 5, "--out", p) == 0
    paths.append(p)
    return paths


def test_report_merges_runs_for_one_network(tmp_path):
    paths = _bundle_inputs(tmp_path)
    out = tmp_path / "summary.json"
    assert run("report", *paths, "--out", out) == 0
    summary = read(out)
    assert len(summary["runs"]) == 2
    assert summary["verdict"]["verdict"] in ("INCONCLUSIVE", "COUNTEREVIDENCE", "PREDOMINANTLY_STABLE_EVIDENCE")
    assert summary["network_fingerprint"]


def test_report_refuses_mixed_networks(tmp_path, capsys):
    paths = _bundle_inputs(tmp_path)
    other = tmp_path / "other.json"
    assert run("validate", "may_leonard", "--out", other) == 0
    assert run("report", *paths, other) == EXIT_USAGE
    assert "different networks" in capsys.readouterr().err


def test_report_needs_artifacts(capsys):
    assert run("report") == EXIT_USAGE


def test_blow_up_simulation_is_a_numerical_abort(tmp_path, capsys):
    cfg = tmp_path / "mutualist.json"
    cfg.write_text(json.dumps({"schema_version": 1, "dim": 3, "growth": [1, 1, 1],
                               "interaction": [[-1, 2, 0], [2, -1, 0], [0, 0, -1]]}))
    assert run("glv-sim", cfg, "--x0", "1,1,1", "--t-max", 10) == EXIT_NUMERIC
    assert "STIFF_ABORT" in capsys.readouterr().err
