import json
import subprocess
import sys

import numpy as np
import pytest

from infokmeans.cli import main, parse_sweep
from infokmeans.core import InvalidInput


@pytest.fixture
def four_points(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("0\n0.1\n10\n10.1\n")
    return path


def read_report(d):
    return json.loads((d / "report.json").read_text())


def test_cluster_quadratic_fixture(four_points, tmp_path):
    out = tmp_path / "out"
    code = main(["cluster", "quadratic", "--k", "2", "--in", str(four_points), "--seed", "7",
                 "--out-dir", str(out)])
    assert code == 0
    centers = np.sort(np.loadtxt(out / "centers.csv", delimiter=",", ndmin=2)[:, 0])
    np.testing.assert_allclose(centers, [0.05, 10.05], atol=1e-12)
    rep = read_report(out)
    assert rep["final_criterion"] == pytest.approx(0.0025, abs=1e-15)
    assert rep["converged"] is True
    labels = np.loadtxt(out / "labels.csv", delimiter=",", dtype=int)
    assert list(labels[:, 0]) == [0, 1, 2, 3]
    assert labels[0, 1] == labels[1, 1] != labels[2, 1] == labels[3, 1]


def test_cluster_info_two_histograms(tmp_path):
    src = tmp_path / "h.csv"
    src.write_text("0.5,0.5\n0.9,0.1\n")
    out = tmp_path / "out"
    assert main(["cluster", "info", "--k", "1", "--in", str(src), "--out-dir", str(out)]) == 0
    c = np.loadtxt(out / "centers.csv", delimiter=",")
    np.testing.assert_allclose(c, [0.75, 0.25], rtol=1e-14)
    rep = read_report(out)
    assert np.exp(rep["log_normalizers"][0]) == pytest.approx(0.894427191, abs=1e-9)


def test_cluster_info_sparse_matches_dense(tmp_path):
    dense, sparse = tmp_path / "d.csv", tmp_path / "s.csv"
    dense.write_text("3,0,1\n0,2,2\n1,1,1\n")
    sparse.write_text("0,0,3\n0,2,1\n1,1,2\n1,2,2\n2,0,1\n2,1,1\n2,2,1\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["cluster", "info", "--k", "2", "--in", str(dense), "--out-dir", str(a)]) == 0
    assert main(["cluster", "info", "--k", "2", "--in", str(sparse), "--format", "sparse",
                 "--out-dir", str(b)]) == 0
    assert (a / "centers.csv").read_text() == (b / "centers.csv").read_text()
    assert (a / "labels.csv").read_text() == (b / "labels.csv").read_text()


def test_cluster_info_custom_nu(tmp_path):
    src, nu = tmp_path / "h.csv", tmp_path / "nu.csv"
    src.write_text("1,1,2\n2,1,1\n")
    nu.write_text("1,2,1\n")
    out = tmp_path / "o"
    assert main(["cluster", "info", "--k", "1", "--in", str(src), "--nu", str(nu),
                 "--out-dir", str(out)]) == 0
    assert np.loadtxt(out / "centers.csv", delimiter=",").sum() == pytest.approx(1.0, abs=1e-14)


def test_cluster_robust_and_gaussian_info(four_points, tmp_path):
    assert main(["cluster", "robust", "--k", "2", "--sigma", "1", "--in", str(four_points),
                 "--out-dir", str(tmp_path / "r")]) == 0
    rep = read_report(tmp_path / "r")
    assert rep["r2"] <= rep["c2"]
    assert main(["cluster", "info", "--family", "gaussian_location", "--k", "2",
                 "--in", str(four_points), "--out-dir", str(tmp_path / "g")]) == 0
    assert read_report(tmp_path / "g")["final_criterion"] == pytest.approx(0.00125, abs=1e-15)


def test_cluster_not_converged_exit_3(tmp_path):
    src = tmp_path / "p.csv"
    np.savetxt(src, np.random.default_rng(0).normal(size=(300, 2)), delimiter=",")
    out = tmp_path / "o"
    code = main(["cluster", "quadratic", "--k", "8", "--max-iters", "1", "--init",
                 "random_points", "--in", str(src), "--out-dir", str(out)])
    assert code == 3
    assert read_report(out)["converged"] is False
    assert (out / "labels.csv").exists()


def test_cluster_missing_file(tmp_path):
    assert main(["cluster", "quadratic", "--k", "2", "--in", str(tmp_path / "none.csv"),
                 "--out-dir", str(tmp_path)]) == 2


def test_cluster_claimed_bound_violation(four_points, tmp_path):
    assert main(["cluster", "quadratic", "--k", "2", "--B", "1", "--in", str(four_points),
                 "--out-dir", str(tmp_path)]) == 2


def test_cluster_k_too_large(four_points, tmp_path):
    assert main(["cluster", "quadratic", "--k", "5", "--in", str(four_points),
                 "--out-dir", str(tmp_path)]) == 2


def test_bound_quadratic_json(capsys):
    assert main(["bound", "quadratic", "--n", "1000", "--k", "2", "--B", "1",
                 "--delta", "0.1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["terms"]["main"] == pytest.approx(3.7022134789763, abs=1e-12)
    assert rep["total"] == pytest.approx(sum(rep["terms"].values()), abs=1e-12)


@pytest.mark.parametrize("argv", [
    ["bound", "robust", "--sigma", "0"],
    ["bound", "info", "--B", "0.5", "--C", "1"],
    ["bound", "quadratic", "--n", "3", "--k", "2"],
    ["bound", "linear", "--delta", "1.5"],
    ["bound", "quadratic", "--sweep", "n=10:5:1"],
    ["bound", "quadratic", "--sweep", "m=1,2"],
])
def test_bound_invalid_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_bound_sweep_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["bound", "robust", "--sweep", "n=1000:4000:1000", "--sweep-out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n,total,chaining,variance,deviation"
    assert [l.split(",")[0] for l in lines[1:]] == ["1000", "2000", "3000", "4000"]
    totals = [float(l.split(",")[1]) for l in lines[1:]]
    assert totals == sorted(totals, reverse=True)


def test_parse_sweep():
    assert parse_sweep("k=2,4,8") == ("k", [2, 4, 8])
    assert parse_sweep("n=10:30:10") == ("n", [10, 20, 30])
    with pytest.raises(InvalidInput):
        parse_sweep("n=a:b:c")


def test_validate_simple_endpoints(capsys):
    assert main(["validate", "simple_endpoints"]) == 0
    (line,) = capsys.readouterr().out.splitlines()
    case = json.loads(line)
    assert case["pass"] is True
    assert case["measured"]["slack_left"] == pytest.approx(0.979903, abs=1e-6)
    assert case["measured"]["slack_right"] == pytest.approx(0.635881, abs=1e-6)


def test_validate_unknown_suite():
    assert main(["validate", "nosuch"]) == 2


def test_validate_to_file(tmp_path):
    out = tmp_path / "v.jsonl"
    assert main(["validate", "psi", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 2


@pytest.mark.parametrize("gen,extra", [("uniform_ball", []),
                                        ("truncated_gaussian_mixture", ["--d", "3"]),
                                        ("dirichlet_histograms", ["--m", "6"]),
                                        ("bag_of_words", ["--m", "12"])])
def test_synth_round_trip(gen, extra, tmp_path):
    data = tmp_path / "data.csv"
    assert main(["synth", gen, "--n", "60", "--seed", "3", "--out", str(data), *extra]) == 0
    crit = "info" if gen in ("dirichlet_histograms", "bag_of_words") else "quadratic"
    assert main(["cluster", crit, "--k", "3", "--in", str(data), "--out-dir",
                 str(tmp_path / "o")]) == 0
    assert len((tmp_path / "o" / "labels.csv").read_text().splitlines()) == 60


def test_synth_rejects_bad_params(tmp_path):
    assert main(["synth", "uniform_ball", "--n", "0", "--out", str(tmp_path / "x.csv")]) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "infokmeans", "validate", "simple_endpoints"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and '"pass": true' in res.stdout


def test_argparse_error_is_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["cluster", "nosuch"])
    assert exc.value.code == 2
