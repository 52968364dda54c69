import csv

import numpy as np
import pytest

from bicgql.cli import main
from bicgql.linalg import direct_solve, read_matrix, read_vector, write_matrix, write_vector
from bicgql.matgen import GenSpec, gen_matrix


def test_no_args_prints_usage(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_bad_choice_exits_1(capsys):
    assert main(["solve", "--method", "gmres"]) == 1
    assert "invalid choice" in capsys.readouterr().err


def test_identity_system(tmp_path, capsys):
    write_matrix(tmp_path / "I.mtx", np.eye(4))
    write_vector(tmp_path / "b.mtx", [1.0, 2.0, 3.0, 4.0])
    code = main(["solve", "--matrix", str(tmp_path / "I.mtx"), "--rhs", str(tmp_path / "b.mtx"),
                 "--out", str(tmp_path / "o")])
    assert code == 0
    assert "after 1 iterations" in capsys.readouterr().out
    np.testing.assert_array_equal(read_vector(tmp_path / "o" / "solution.mtx"), [1.0, 2.0, 3.0, 4.0])
    rows = list(csv.DictReader(open(tmp_path / "o" / "trace.csv")))
    assert len(rows) == 1


def test_singular_system_breakdown(tmp_path):
    write_matrix(tmp_path / "Z.mtx", np.zeros((3, 3)))
    assert main(["solve", "--matrix", str(tmp_path / "Z.mtx"), "--out", str(tmp_path)]) == 3


def test_max_iter_exit(tmp_path):
    assert main(["solve", "--gen-kappa", "1e5", "--max-iter", "3", "--out", str(tmp_path)]) == 2


def test_rhs_dimension_mismatch(tmp_path, capsys):
    write_vector(tmp_path / "b.mtx", [1.0, 2.0])
    assert main(["solve", "--dim", "5", "--rhs", str(tmp_path / "b.mtx"), "--out", str(tmp_path)]) == 1
    assert "length" in capsys.readouterr().err


def test_anorm_criterion_meets_threshold(tmp_path):
    tol = 1e-6
    code = main(["solve", "--gen-kappa", "1e4", "--method", "cg", "--criterion", "anorm", "--tol", str(tol),
                 "--d1", "4", "--seed", "3", "--out", str(tmp_path)])
    assert code == 0
    A = gen_matrix(GenSpec(100, 1e4, seed=3))
    from bicgql.matgen import gen_rhs_suite

    b = gen_rhs_suite(100, 1, seed=3)[0]
    e = direct_solve(A, b) - read_vector(tmp_path / "solution.mtx")
    assert np.sqrt(e @ A.apply(e)) <= 10 * tol


def test_gen_roundtrip(tmp_path):
    assert main(["gen", "--dim", "12", "--gen-kappa", "50", "--gen-class", "nonsym", "--seed", "2",
                 "--out", str(tmp_path)]) == 0
    a = read_matrix(tmp_path / "matrix.mtx").entries
    np.testing.assert_array_equal(a, gen_matrix(GenSpec(12, 50.0, "NonsymmetricIndefinite", seed=2)).entries)


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# solver setup\nmethod = cg\ngen-kappa=10\ndim=20\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert capsys.readouterr().out.startswith("CG:")
    assert main(["solve", "--config", str(cfg), "--method", "bicg", "--out", str(tmp_path / "b")]) == 0
    assert capsys.readouterr().out.startswith("BiCG:")


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["solve", "--config", str(cfg)]) == 1
    assert "unknown key" in capsys.readouterr().err


def test_estimate_writes_plot_data(tmp_path):
    assert main(["estimate", "--dim", "30", "--gen-kappa", "100", "--method", "cg", "--out", str(tmp_path)]) == 0
    header = open(tmp_path / "trace_plot.dat").readline().split()
    assert header[1:] == ["k", "true_anorm_sq", "true_l2_sq", "residual_norm", "bicgql_g", "bicgql_f",
                          "cgql_gauss", "cgql_lobatto"]
    assert (tmp_path / "trace_plot.csv").exists()


def _bench(out, *extra):
    return main(["bench", "--bins", "2", "--matrices", "2", "--cases", "2", "--dim", "30", "--out", str(out),
                 *extra])


def test_bench_byte_identical(tmp_path):
    assert _bench(tmp_path / "a") == 0
    assert _bench(tmp_path / "b", "--jobs", "2") == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "bins_hpd.csv" in names and "bins_nonsym.csv" in names
    assert "bars_hpd_anorm_vs_residual.dat" in names
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_bench_identity_bin_zero(tmp_path):
    assert main(["bench", "--bins", "1:1", "--gen-class", "HPD", "--matrices", "1", "--cases", "3", "--dim", "10",
                 "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "bins_hpd.csv")))
    assert all(float(r["mean"]) == 0.0 for r in rows)


def test_bench_rejects_bicgstab(tmp_path):
    assert main(["bench", "--method", "bicgstab", "--out", str(tmp_path)]) == 1
