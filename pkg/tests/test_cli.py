import json
import os
import subprocess
import sys

import pytest

from optliq.cli import main
from optliq.model import ModelParams


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture()
def config(tmp_path):
    f = tmp_path / "params.json"
    f.write_text(json.dumps(ModelParams.reference().to_dict()))
    return str(f)


def test_boundaries(capsys, config):
    code, out, _ = run(capsys, "boundaries", "--config", config)
    d = json.loads(out)
    assert code == 0 and abs(d["F0"] - 1.0914) <= 5e-4
    assert len(d["G_lambda"]) == len(d["B"])


def test_boundaries_zero_rate(capsys, tmp_path):
    f = tmp_path / "z.json"
    f.write_text(json.dumps(ModelParams.reference(default_rate=0.0).to_dict()))
    code, out, _ = run(capsys, "boundaries", "--config", str(f))
    d = json.loads(out)
    assert d["n1"] == d["n0"]


@pytest.mark.parametrize("text", ["{oops", "[]", json.dumps({"mu": 0.5})])
def test_bad_config_exit_2(capsys, tmp_path, text):
    f = tmp_path / "bad.json"
    f.write_text(text)
    code, out, err = run(capsys, "boundaries", "--config", str(f))
    assert code == 2 and out == "" and "error" in err


def test_invalid_params_exit_2(capsys, tmp_path):
    f = tmp_path / "bad.json"
    f.write_text(json.dumps(ModelParams.reference(delta=0.1).to_dict()))
    assert run(capsys, "value", "--config", str(f), "--x", "1", "--y", "1", "--w", "0")[0] == 2


def test_missing_config_file_exit_2(capsys, tmp_path):
    assert run(capsys, "boundaries", "--config", str(tmp_path / "none.json"))[0] == 2


def test_value_examples(capsys, config):
    code, out, _ = run(capsys, "value", "--config", config, "--x", "1.5", "--y", "0", "--w", "0")
    d = json.loads(out)
    assert code == 0 and d["value"] == 0 and d["region"] == "Liquidated"
    d = json.loads(run(capsys, "value", "--config", config, "--x", "10", "--y", "1", "--w", "1")[1])
    assert abs(d["value"] - 7.5694) < 1e-4 and d["region"] == "Sell1Above"
    d = json.loads(run(capsys, "value", "--config", config, "--x", "1.5", "--y", "1", "--w", "-1")[1])
    assert d["region"] == "Sell1Below"
    d = json.loads(run(capsys, "value", "--config", config, "--x", "0.5", "--y", "1", "--w", "-1")[1])
    assert d["region"] == "Sell2Below"
    assert set(d["derivatives"]) == {"v_x", "v_xx", "v_y"}


def test_value_on_edge_reports_both_sides(capsys):
    from optliq.boundaries import compute_boundaries

    F0 = compute_boundaries(ModelParams.reference()).F0
    d = json.loads(run(capsys, "value", "--x", repr(F0), "--y", "1", "--w", "1")[1])
    assert set(d["derivatives"]) == {"left", "right"}


def test_value_domain_errors(capsys):
    assert run(capsys, "value", "--x", "-1", "--y", "1", "--w", "0")[0] == 2
    assert run(capsys, "value", "--x", "1", "--y", "1")[0] == 2
    assert run(capsys, "region", "--x", "1", "--y", "-1", "--w", "0")[0] == 2


def test_region(capsys):
    d = json.loads(run(capsys, "region", "--x", "1.5", "--y", "1", "--w", "1")[1])
    assert d["region"] == "Sell2Above"


def test_usage_errors(capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "nope")[0] == 2
    assert run(capsys, "simulate", "--x", "1", "--y", "1", "--w", "0", "--policy", "twap")[0] == 2
    assert run(capsys, "simulate", "--x", "1", "--y", "1", "--w", "0", "--paths", "0")[0] == 2
    assert run(capsys, "figures", "--figure", "f1")[0] == 2


def test_verify_small_grid(capsys, config):
    code, out, _ = run(capsys, "verify", "--config", config, "--nx", "60", "--ny", "8")
    d = json.loads(out)
    assert code == 0 and d["passed"]
    assert {"grid", "per_region"} <= set(d["hjb"])


def test_verify_corrupted_exit_1(capsys, config):
    code, out, _ = run(capsys, "verify-hjb", "--config", config, "--nx", "60", "--ny", "8", "--corrupt-b", "1.01")
    assert code == 1
    d = json.loads(out)
    assert not d["passed"]
    assert any(r["name"] == "Sell2Below" and not r["passed"] for r in d["per_region"])


def test_verify_identities(capsys):
    code, out, _ = run(capsys, "verify-identities")
    assert code == 0 and json.loads(out)["passed"]


def test_verify_report_is_stable(capsys):
    a = run(capsys, "verify-hjb", "--nx", "30", "--ny", "5")[1]
    b = run(capsys, "verify-hjb", "--nx", "30", "--ny", "5")[1]
    assert a == b


def test_simulate(capsys, tmp_path):
    args = ["simulate", "--x", "0.5", "--y", "2", "--w", "0.5", "--paths", "500", "--dt", "0.002", "--seed", "4"]
    code, out, _ = run(capsys, *args)
    d = json.loads(out)
    assert code == 0
    assert {"mean", "std_error", "value", "z_score", "n_paths", "estimator", "truncation_bound"} <= set(d)
    assert run(capsys, *args)[1] == out
    csv_path = tmp_path / "paths.csv"
    run(capsys, *args, "--estimator", "sampled", "--dump-paths", str(csv_path))
    assert csv_path.read_text().splitlines()[0] == "path_id,defaulted,default_time,discounted_gain,final_inventory"


def test_simulate_immediate(capsys):
    d = json.loads(run(capsys, "simulate", "--x", "1.5", "--y", "1", "--w", "1", "--policy", "immediate", "--paths", "20")[1])
    assert d["std_error"] == 0.0 and d["z_score"] is None
    assert abs(d["mean"] - (3 * (1 - 2.718281828459045**-0.5) - 0.3)) < 1e-12


def test_simulate_sell_at(capsys):
    d = json.loads(
        run(capsys, "simulate", "--x", "1.5", "--y", "1", "--w", "1", "--policy", "sell-at", "--sell-time", "0.5",
            "--paths", "50", "--dt", "0.01")[1]
    )
    assert d["policy"] == "sell-at(0.5)"


def test_simulate_to_file(capsys, tmp_path):
    f = tmp_path / "est.json"
    code, out, _ = run(capsys, "simulate", "--x", "1", "--y", "1", "--w", "1", "--paths", "10", "--out", str(f))
    assert code == 0 and out == ""
    assert json.loads(f.read_text())["n_paths"] == 10


def test_figures(capsys, tmp_path):
    out_dir = tmp_path / "figs"
    code, out, _ = run(capsys, "figures", "--figure", "f1", "--out", str(out_dir))
    assert code == 0
    assert sorted(os.listdir(out_dir)) == ["f1_curves.csv", "f1_markers.csv"]
    first = (out_dir / "f1_curves.csv").read_bytes()
    run(capsys, "figures", "--figure", "f1", "--out", str(out_dir))
    assert (out_dir / "f1_curves.csv").read_bytes() == first


def test_figures_f3_row_count(capsys, tmp_path):
    run(capsys, "figures", "--figure", "f3", "--out", str(tmp_path))
    lines = (tmp_path / "f3_boundaries.csv").read_text().splitlines()
    assert len(lines) - 1 == 57 * 50 + 2 * 50


def test_figures_unwritable(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run(capsys, "figures", "--figure", "f3", "--out", str(blocker / "sub"))[0] == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "optliq", "region", "--x", "0.2", "--y", "1", "--w", "-1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["region"] == "WaitBelow"
