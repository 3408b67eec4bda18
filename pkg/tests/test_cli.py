import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

import oracles
from transientshift.cli import EXIT_DIVERGING, EXIT_INCONCLUSIVE, EXIT_INVALID, EXIT_OK, main

MODELS = Path(__file__).resolve().parent.parent / "models"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def model(name):
    return MODELS / f"{name}.ini"


def test_green_self_loop(capsys):
    code, out, _ = run(capsys, "green", "--model", model("self_loop"))
    assert code == EXIT_OK
    res = json.loads(out)
    assert res["lo"] <= oracles.self_loop_green(-1.0) <= res["hi"]


def test_green_diverging_exit_code(tmp_path, capsys):
    path = tmp_path / "loop.ini"
    path.write_text("[graph]\nbuilder = self_loop\nalpha = 0\n")
    code, out, _ = run(capsys, "green", "--model", path)
    assert code == EXIT_DIVERGING
    assert json.loads(out)["error"] == "diverging"


def test_green_inconclusive_exit_code(capsys):
    # just above the critical value the ratios approach 1 too slowly for a tiny cap
    code, out, _ = run(capsys, "green", "--model", model("example1"), "--lambda", "0.56", "--n-cap", "30")
    assert code == EXIT_INCONCLUSIVE
    assert json.loads(out)["error"] == "inconclusive"


def test_kernel_along_orbits(capsys):
    code, out, _ = run(capsys, "kernel", "--model", model("example1"), "--f", "-1")
    assert code == EXIT_OK
    k = json.loads(out)["kernels"]
    plus, minus = oracles.ex1_kernels(-1.0)
    assert k["plus"][-1]["value"] == pytest.approx(plus, rel=1e-6)
    assert k["minus"][-1]["value"] == pytest.approx(minus, rel=1e-6)


def test_atlas_cluster_counts(capsys):
    code, out, _ = run(capsys, "atlas", "--model", model("example1"))
    assert code == EXIT_OK and json.loads(out)["n_clusters"] == 2
    code, out, _ = run(capsys, "atlas", "--model", model("example1"), "--reversed")
    res = json.loads(out)
    assert code == EXIT_OK and res["n_clusters"] == 1 and res["shift"] == "reversed"


def test_thermo_transient_and_scheme_choice(capsys):
    code, out, _ = run(capsys, "thermo", "--model", model("example1"), "--scheme", "transient",
                       "--orbit", "minus", "--f", "-1", "--N", "15")
    assert code == EXIT_OK
    res = json.loads(out)
    assert res["values"][-1] == pytest.approx(oracles.ex1_kernels(-1.0)[1], rel=1e-6)
    code, _, err = run(capsys, "thermo", "--model", model("example1"), "--scheme", "transient", "--orbit", "up")
    assert code == EXIT_INVALID and "orbit" in err


def test_thermo_positive_recurrent(capsys):
    code, out, _ = run(capsys, "thermo", "--model", model("inward_walk"), "--scheme", "pos_recurrent",
                       "--f", "2", "--N", "300")
    assert code == EXIT_OK
    assert json.loads(out)["values"][-1] == pytest.approx(oracles.stationary_inward(0.7, 2), abs=1e-6)


def test_dlr_report_for_delta_measure(capsys):
    code, out, _ = run(capsys, "dlr", "--model", model("example2"), "--lambda-grid", "0.5", "1", "2")
    assert code == EXIT_OK
    rep = json.loads(out)["measures"]["ray"]
    assert rep["dlr"] == "PASS" and rep["conformal"] == "FAIL"


def test_dlr_report_for_path_measure(capsys):
    code, out, _ = run(capsys, "dlr", "--model", model("biased_walk"))
    rep = json.loads(out)["measures"]["stationary_path"]
    assert code == EXIT_OK and rep["dlr"] == "PASS" and rep["conformal"] == "PASS"


def test_walk_needs_seed_and_walk_model(capsys):
    with pytest.raises(SystemExit):
        main(["walk", "--model", str(model("tree"))])
    capsys.readouterr()
    code, _, err = run(capsys, "walk", "--model", model("example1"), "--seed", "1")
    assert code == EXIT_INVALID and "walk" in err


def test_walk_tree(capsys):
    code, out, _ = run(capsys, "walk", "--model", model("tree"), "--seed", "2", "--samples", "2000")
    assert code == EXIT_OK
    res = json.loads(out)
    assert res["n_clusters"] == 3
    freqs = [c["frequency"] for c in res["clusters"].values()]
    assert sum(freqs) == pytest.approx(1.0)
    assert all(abs(f - 1 / 3) < 0.06 for f in freqs)


def test_duality_writes_json_and_csv(tmp_path, capsys):
    args = ["duality", "--model", model("biased_walk"), "--seed", "3", "--ratio-samples", "20",
            "--ratio-steps", "50", "--lambda-grid", "0.9", "1.0", "--out", tmp_path]
    code, out, _ = run(capsys, *args)
    assert code == EXIT_OK and out == ""
    res = json.loads((tmp_path / "duality.json").read_text())
    assert res["agree"] and len(res["transience"]) == 2
    rows = (tmp_path / "ratio_trajectories.csv").read_text().splitlines()
    assert rows[0].split(",")[:2] == ["step", "traj0"]
    assert len(rows) == 52 and len(rows[1].split(",")) == 21
    assert all(math.isclose(float(v), 0.5) for v in rows[1].split(",")[1:])


def test_output_is_byte_stable(tmp_path, capsys):
    texts = []
    for k in range(2):
        out_dir = tmp_path / str(k)
        run(capsys, "duality", "--model", model("biased_walk"), "--seed", "8", "--ratio-samples", "10",
            "--ratio-steps", "30", "--out", out_dir)
        texts.append(((out_dir / "duality.json").read_bytes(), (out_dir / "ratio_trajectories.csv").read_bytes()))
    assert texts[0] == texts[1]


def test_table_format(capsys):
    code, out, _ = run(capsys, "green", "--model", model("self_loop"), "--format", "table")
    assert code == EXIT_OK
    keys = [line.split()[0] for line in out.strip().splitlines()]
    assert "lo" in keys and "hi" in keys and keys == sorted(keys)


@pytest.mark.parametrize("text,needle", [
    ("[graph]\nbuilder = nowhere\n", "line 2"),
    ("[graph]\nbuilder = example1\nalpha = x\n", "field alpha"),
])
def test_invalid_model_files(tmp_path, capsys, text, needle):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    code, out, err = run(capsys, "green", "--model", path)
    assert code == EXIT_INVALID and out == "" and needle in err


def test_missing_model_file(tmp_path, capsys):
    code, _, err = run(capsys, "green", "--model", tmp_path / "none.ini")
    assert code == EXIT_INVALID and err


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "transientshift.cli", "green", "--model", str(model("self_loop"))],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["N"] > 0
