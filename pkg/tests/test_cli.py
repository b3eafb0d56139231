import csv
import json
import os

import pytest

from smoothsplit.cli import ALGOS, main


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("algo", ["sama", "sadmm", "admm", "dr", "admm-feas", "dykstra", "haugazeau"])
def test_trivial_instance_converges_at_k1(algo, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["solve", "--algo", algo, "--problem", "trivial", "--output", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 1 and rows[0]["k"] == "1"


@pytest.mark.parametrize("algo", ["ama", "sama-sc1", "sama-sc2"])
def test_trivial_instance_rejects_strongly_convex_methods(algo, capsys):
    # g = 0 is not strongly convex, so these methods are not applicable
    assert main(["solve", "--algo", algo, "--problem", "trivial"]) == 1
    assert "strongly convex" in capsys.readouterr().err


def test_invalid_algo_lists_names(capsys):
    assert main(["solve", "--algo", "bogus"]) == 1
    err = capsys.readouterr().err
    assert all(name in err for name in ALGOS)


def test_feasibility_solve_writes_full_trace(tmp_path):
    out = tmp_path / "f.csv"
    main(["solve", "--algo", "sama", "--problem", "feasibility", "--n", "100", "--angle", "1e-2",
          "--max-iter", "5000", "--output", str(out)])
    rows = _rows(out)
    assert len(rows) == 5000
    dual = [float(r["dual_obj_residual"]) for r in rows]
    assert dual[-1] < dual[99]


def test_max_iters_exit_code(tmp_path):
    assert main(["solve", "--algo", "sama", "--problem", "box-lp", "--seed", "1", "--max-iter", "20"]) == 2


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    out = tmp_path / "run.csv"
    cfg.write_text(json.dumps({"algo": "sadmm", "problem.kind": "box-lp", "seed": 2, "max_iters": 50,
                               "output": str(out)}))
    assert main(["solve", "--config", str(cfg), "--max-iter", "30"]) == 2
    assert len(_rows(out)) == 30


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"algo": "sama", "problem.size": 3}))
    assert main(["solve", "--config", str(cfg)]) == 1
    assert "problem.size" in capsys.readouterr().err


def test_config_validation_names_fields(capsys):
    assert main(["solve", "--eps", "-1"]) == 1
    assert "eps" in capsys.readouterr().err
    assert main(["solve", "--max-iter", "0"]) == 1
    assert "max_iters" in capsys.readouterr().err


def test_csv_bit_identical_across_runs(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.csv"
        main(["solve", "--algo", "sadmm", "--problem", "box-lp", "--seed", "3", "--max-iter", "200",
              "--record-gap", "--no-timing", "--output", str(out)])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    header = outs[0].decode().splitlines()[0]
    assert header == ("k,primal_obj_residual,feasibility_gap,dual_obj_residual,smoothed_gap,"
                      "bound_primal,bound_feas,bound_dual,gap_red_lhs,gap_red_rhs,wall_time_ns")


def test_thinning_flag(tmp_path):
    out = tmp_path / "thin.csv"
    main(["solve", "--algo", "sama", "--problem", "box-lp", "--max-iter", "100", "--thin", "10", "--output", str(out)])
    ks = [int(r["k"]) for r in _rows(out)]
    assert ks[:2] == [1, 11] and ks[-1] == 100


def test_check_schedule_sama(capsys):
    assert main(["check", "schedule", "--algo", "sama", "--k-max", "1000000"]) == 0


def test_check_schedule_sc_and_corrected_sadmm():
    assert main(["check", "schedule", "--algo", "sama-sc1", "--k-max", "1000000"]) == 0
    assert main(["check", "schedule", "--algo", "sama-sc2", "--k-max", "1000000"]) == 0
    assert main(["check", "schedule", "--algo", "sadmm", "--k-max", "1000000"]) == 0


def test_check_schedule_printed_beta(capsys):
    assert main(["check", "schedule", "--algo", "sadmm", "--paper-beta"]) == 2
    out = capsys.readouterr().out
    assert "k=1" in out and "(1 - tau)(1 + 2 tau) eta beta >= 2 tau^2" in out


def test_check_bounds_box_lp(capsys):
    assert main(["check", "bounds", "--algo", "sama", "--problem", "box-lp", "--seed", "7", "--max-iter", "3000"]) == 0
    assert "min slack" in capsys.readouterr().out


def test_check_gap_reduction():
    assert main(["check", "gap-reduction", "--algo", "sadmm", "--problem", "box-lp", "--seed", "7", "--max-iter", "1000"]) == 0


def test_check_capability_errors(capsys):
    assert main(["check", "bounds", "--algo", "dykstra", "--problem", "feasibility"]) == 1
    assert main(["check", "schedule", "--algo", "admm"]) == 1


def test_compare_lists_each_algo(capsys):
    assert main(["compare", "--problem", "feasibility", "--n", "50", "--max-iter", "100",
                 "--algos", "sama,admm-feas,dykstra"]) == 0
    out = capsys.readouterr().out
    assert all(a in out for a in ("sama", "admm-feas", "dykstra"))


def test_bench_single_run_writes_one_csv(tmp_path):
    assert main(["bench", "--angles", "1e-1", "--algos", "dykstra", "--n", "50", "--max-iter", "200",
                 "--out-dir", str(tmp_path)]) == 0
    assert [f for f in os.listdir(tmp_path) if f.endswith(".csv")] == ["dykstra_angle0.1.csv"]


def _summary(path):
    rows = {}
    for line in open(path).read().splitlines()[1:]:
        algo, angle, final, slope, _ = line.split(",")
        rows[(algo, float(angle))] = (float(final), float(slope))
    return rows


def test_bench_default_sweep(tmp_path):
    assert main(["bench", "--out-dir", str(tmp_path), "--jobs", "4"]) == 0
    rows = _summary(tmp_path / "summary.txt")
    assert len(rows) == 20
    for angle in (1e-1, 1e-2, 1e-3, 1e-4):
        for algo in ("sama", "sadmm"):
            assert rows[(algo, angle)][1] <= -0.8


def test_bench_saturation_ordering(tmp_path):
    main(["bench", "--angles", "1e-4", "--algos", "sama,admm-feas", "--max-iter", "2000",
          "--out-dir", str(tmp_path)])
    feas = _rows(tmp_path / "admm-feas_angle0.0001.csv")[-1]
    sama = _rows(tmp_path / "sama_angle0.0001.csv")[-1]
    assert feas["k"] == sama["k"] == "2000"
    assert float(feas["dual_obj_residual"]) >= 10 * float(sama["dual_obj_residual"])
