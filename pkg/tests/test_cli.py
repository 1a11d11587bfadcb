import json
import subprocess
import sys


from ltcd.cli import main


def run_cli(tmp_path, *argv, name="report.json"):
    out = tmp_path / name
    status = main(["--out", str(out), *argv])
    return status, json.loads(out.read_text()), out.read_bytes()


def test_design_example(tmp_path):
    status, report, _ = run_cli(tmp_path, "design", "--m", "8", "--ell", "5", "--alpha", "1/5")
    assert status == 0 and report["verified"]
    assert len(report["result"]["design"]["sets"]) == 8


def test_design_infeasible_exit_code(tmp_path):
    status, report, _ = run_cli(tmp_path, "design", "--m", "8", "--ell", "4", "--alpha", "1/5")
    assert status == 3
    assert report["error"]["type"] == "ParameterInfeasible"


def test_encode_zero_message(tmp_path):
    status, report, _ = run_cli(tmp_path, "encode", "tensor", "--r", "3", "--d", "2")
    assert status == 0
    assert set(report["result"]["codeword"]) == {"0"}


def test_gen_embeds_ground_truth(tmp_path):
    status, report, _ = run_cli(tmp_path, "gen", "near-constant", "--n", "6", "--exceptions", "1")
    assert status == 0
    meta = report["result"]["circuit"]["meta"]
    assert meta["acceptance_count"] == 63
    status, report, _ = run_cli(tmp_path, "gen", "constant", "--n", "4")
    assert report["result"]["circuit"]["meta"]["acceptance_count"] in (0, 16)


def test_reduce_constant_circuit(tmp_path):
    status, report, _ = run_cli(tmp_path, "gen", "constant", "--n", "2", name="c.json")
    status, report, _ = run_cli(tmp_path, "reduce", str(tmp_path / "c.json"))
    assert status == 0 and report["verified"]


def test_derand_end_to_end(tmp_path):
    run_cli(tmp_path, "gen", "near-constant", "--n", "6", "--exceptions", "1", name="c.json")
    status, report, _ = run_cli(tmp_path, "derand", str(tmp_path / "c.json"), "--desk")
    assert status == 0
    assert report["result"]["verdict"]["decision"] == "accept"
    run_cli(tmp_path, "gen", "near-constant", "--n", "6", "--exceptions", "1", "--negate", name="n.json")
    status, report, _ = run_cli(tmp_path, "derand", str(tmp_path / "n.json"), "--desk")
    assert status == 0 and report["result"]["verdict"]["decision"] == "reject"


def test_reports_are_reproducible_byte_for_byte(tmp_path):
    argv = ["--seed", "7", "harness", "ltf-lemma", "--n", "16", "--p", "1/4", "--trials", "200"]
    _, report, first = run_cli(tmp_path, *argv, name="a.json")
    # re-run from the embedded config
    cfg = report["config"]
    again = ["--seed", str(cfg["seed"]), "harness", cfg["kind"], "--n", str(cfg["n"]), "--p", cfg["p"], "--trials", str(cfg["trials"])]
    _, _, second = run_cli(tmp_path, *again, name="b.json")
    assert first == second
    assert "code_version" in report


def test_global_flags_after_subcommand(tmp_path):
    status, report, _ = run_cli(tmp_path, "design", "--m", "2", "--ell", "5", "--alpha", "1/5", "--seed", "3")
    assert status == 0 and report["config"]["seed"] == 3


def test_budget_exceeded_exit_code(tmp_path):
    status, report, _ = run_cli(tmp_path, "--budget", "2^10", "encode", "balanced", "--r", "2", "--d", "1", "--n", "2")
    assert status == 4


def test_malformed_circuit_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    status, report, _ = run_cli(tmp_path, "derand", str(bad))
    assert status == 1 and report["error"]["type"] == "MalformedCircuit"


def test_unknown_command_exit_code():
    proc = subprocess.run([sys.executable, "-m", "ltcd.cli", "nope"], capture_output=True, text=True)
    assert proc.returncode == 1


def test_override_params_inline(tmp_path):
    run_cli(tmp_path, "gen", "near-constant", "--n", "6", "--exceptions", "1", name="c.json")
    overrides = json.dumps({"p": "1/2", "t_squared": "9", "fanout_cap": 4, "small_fanin_cap": 1, "kprime": 4, "balanced_wire_cap": 6})
    status, report, _ = run_cli(tmp_path, "--override-params", overrides, "derand", str(tmp_path / "c.json"))
    assert status in (0, 2)
    assert report["config"]["override_params"] == overrides
