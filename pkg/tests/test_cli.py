import json
import math
import subprocess
import sys

import pytest

from tracesmc.cli import main
from tracesmc.report import stable_part


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def pmf_of(report):
    return {row["value"]: row["weight"] for row in report["posterior"]}


def test_run_geometric_json(capsys):
    code, out, _ = run_cli(capsys, "run", "examples/geometric.ppl", "--particles", "100000",
                           "--seed", "1", "--format", "json")
    assert code == 0
    rep = json.loads(out)
    assert set(rep) >= {"model", "config", "posterior", "log_norm_const", "rounds", "ess_history",
                        "dead_count", "termination", "wall_ms"}
    assert rep["model"] == "geometric" and rep["config"]["particles"] == 100000
    pmf = pmf_of(rep)
    assert sum(pmf.values()) == pytest.approx(1.0, abs=1e-9)
    for k, p in ((1.0, 0.4), (2.0, 0.24), (3.0, 0.144)):
        assert abs(pmf[k] - p) < 0.01
    assert rep["log_norm_const"] == pytest.approx(0.0, abs=1e-12)


def test_run_beta_obs_evidence(capsys):
    code, out, _ = run_cli(capsys, "run", "examples/beta_obs.ppl", "-J", "100000", "--seed", "1")
    assert code == 0
    rep = json.loads(out)
    assert rep["log_norm_const"] == pytest.approx(math.log(0.1), abs=0.05)
    assert rep["termination"] == "all-values"


def test_run_loop_hits_round_cap(capsys):
    code, out, _ = run_cli(capsys, "run", "loop", "--max-rounds", "10", "-J", "200")
    assert code == 0
    rep = json.loads(out)
    assert rep["termination"] == "round-cap" and rep["rounds"] == 10


def test_run_csv(capsys):
    code, out, _ = run_cli(capsys, "run", "geometric", "-J", "500", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "# model=geometric"
    header = lines.index("value,weight")
    rows = [l.split(",") for l in lines[header + 1:]]
    assert sum(float(w) for _, w in rows) == pytest.approx(1.0)


def test_output_file(tmp_path, capsys):
    dest = tmp_path / "r.json"
    code, out, _ = run_cli(capsys, "run", "beta", "-J", "100", "--output", str(dest))
    assert code == 0 and out == ""
    assert json.loads(dest.read_text())["model"] == "beta"


def test_same_seed_same_report(capsys):
    reps = []
    for threads in ("1", "3"):
        _, out, _ = run_cli(capsys, "run", "seq", "-J", "2000", "--seed", "9", "--threads", threads)
        reps.append(stable_part(json.loads(out)))
    reps[0]["config"].pop("threads")
    reps[1]["config"].pop("threads")
    assert json.dumps(reps[0]) == json.dumps(reps[1])


def test_all_dead_is_flagged_not_an_error(tmp_path, capsys):
    src = tmp_path / "dead.ppl"
    src.write_text("weight(0); 1")
    code, out, err = run_cli(capsys, "run", str(src), "-J", "50")
    assert code == 0
    rep = json.loads(out)
    assert rep["all_dead"] and rep["posterior"] == [] and rep["log_norm_const"] is None
    assert "died" in err


def test_parse_error_exits_2(tmp_path, capsys):
    src = tmp_path / "bad.ppl"
    src.write_text("let x = in 3")
    code, _, err = run_cli(capsys, "run", str(src))
    assert code == 2 and "bad.ppl" in err


def test_unbound_variable_exits_2(tmp_path, capsys):
    src = tmp_path / "free.ppl"
    src.write_text("y + 1")
    assert run_cli(capsys, "run", str(src))[0] == 2


def test_missing_model_exits_2(capsys):
    assert run_cli(capsys, "run", "no_such_model")[0] == 2


def test_bad_config_exits_2(capsys):
    assert run_cli(capsys, "run", "geometric", "-J", "0")[0] == 2


def test_placements_table(capsys):
    code, out, _ = run_cli(capsys, "placements", "crbd", "-J", "300", "--replicates", "3")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("placement,resamples,replicates,log_z_mean")
    names = [l.split(",")[0] for l in lines[1:4]]
    assert names == ["all", "edge-only", "extinction-and-edge"]
    assert [int(l.split(",")[1]) for l in lines[1:4]] == [3, 1, 2]
    assert lines[-1].startswith("# largest pairwise log_z difference")


def test_single_placement_is_baseline(tmp_path, capsys):
    spec = tmp_path / "p.json"
    spec.write_text(json.dumps({"base": {}}))
    code, out, _ = run_cli(capsys, "placements", "seq_bare", str(spec), "-J", "200",
                           "--replicates", "2", "--seed", "4")
    assert code == 0
    row = out.splitlines()[1].split(",")
    _, rep, _ = run_cli(capsys, "run", "seq_bare", "-J", "200", "--seed", "4")
    _, rep2, _ = run_cli(capsys, "run", "seq_bare", "-J", "200", "--seed", "5")
    zs = [json.loads(rep)["log_norm_const"], json.loads(rep2)["log_norm_const"]]
    assert row[0] == "base" and row[1] == "0"
    assert float(row[3]) == pytest.approx(sum(zs) / 2, abs=1e-6)


def test_invalid_placements_are_listed(tmp_path, capsys):
    spec = tmp_path / "p.json"
    spec.write_text(json.dumps({"ok": {"after_weight": [1]}, "bad1": {"after_weight": [9]},
                                "bad2": {"nonsense": []}}))
    code, _, err = run_cli(capsys, "placements", "seq_bare", str(spec), "--replicates", "2")
    assert code == 2
    assert "bad1" in err and "bad2" in err and "  ok:" not in err


def test_unknown_suite_exits_2(capsys):
    code, _, err = run_cli(capsys, "accept", "everything")
    assert code == 2 and "quick" in err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "tracesmc", "run", "beta", "-J", "50"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["model"] == "beta"
