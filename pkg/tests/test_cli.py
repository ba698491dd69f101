import csv
import io
import subprocess
import sys
from importlib.resources import files

import pytest

from llmroute import core
from llmroute.cli import main

CASE_PROFILE = str(files("llmroute") / "data" / "case_study.profile")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.fixture
def w500_path(tmp_path, capsys):
    p = tmp_path / "w500.csv"
    assert main(["gen", "--count", "500", "--seed", "42", "--dist", "lognormal:4,1,2048",
                 "--out", str(p)]) == 0
    return p


@pytest.fixture
def noiseless_csv(tmp_path, case_fleet):
    p = tmp_path / "synthetic.csv"
    p.write_text(core.serialize_measurements(core.synthesize_measurements(case_fleet)))
    return p


def test_gen_byte_identical(tmp_path, w500_path, w500):
    again = tmp_path / "again.csv"
    assert main(["gen", "--count", "500", "--seed", "42", "--dist", "lognormal:4,1,2048",
                 "--out", str(again)]) == 0
    assert again.read_bytes() == w500_path.read_bytes()
    assert core.parse_workload(w500_path.read_bytes()) == w500


def test_gen_bad_dist(capsys, tmp_path):
    code, _, err = run(capsys, "gen", "--count", "5", "--seed", "1", "--dist", "poisson:3",
                       "--out", str(tmp_path / "x.csv"))
    assert code == 65 and "error" in err


def test_fit_noiseless(capsys, noiseless_csv):
    code, out, _ = run(capsys, "fit", "--measurements", str(noiseless_csv))
    assert code == 0
    table = rows_of(out)
    assert table[0] == ["metric", "model", "a0", "a1", "a2", "r2", "f", "p"]
    assert len(table) == 7
    assert all(r[5] == "1.000000" for r in table[1:])
    energy_7b = next(r for r in table if r[0] == "energy" and r[1] == "Llama-2 (7B)")
    assert [float(x) for x in energy_7b[2:5]] == pytest.approx([0.02, 1.0, 2e-4], rel=1e-6)


def test_fit_single_metric_to_file_and_markdown(capsys, noiseless_csv, tmp_path):
    out_path = tmp_path / "fit.csv"
    code, out, _ = run(capsys, "fit", "--measurements", str(noiseless_csv), "--metric", "runtime",
                       "--out", str(out_path))
    assert code == 0 and out == ""
    assert rows_of(out_path.read_text())[0] == ["model", "a0", "a1", "a2", "r2", "f", "p"]
    code, out, _ = run(capsys, "fit", "--measurements", str(noiseless_csv), "--markdown")
    assert out.startswith("| metric | model |")


def test_anova(capsys, tmp_path, case_fleet):
    p = tmp_path / "m.csv"
    recs = core.synthesize_measurements(case_fleet[:1], levels=(8, 16, 32, 64), trials=3,
                                        noise=0.05, seed=3)
    p.write_text(core.serialize_measurements(recs))
    code, out, _ = run(capsys, "anova", "--measurements", str(p), "--metric", "energy")
    assert code == 0
    table = rows_of(out)
    assert table[0] == ["metric", "variable", "sum_squares", "dof", "f_statistic", "p_value"]
    assert [r[1] for r in table[1:]] == ["input_tokens", "output_tokens", "interaction", "error", "total"]
    assert [int(r[3]) for r in table[1:]] == [3, 3, 9, 32, 47]


def test_anova_unbalanced_is_data_error(capsys, tmp_path, case_fleet):
    p = tmp_path / "m.csv"
    recs = core.synthesize_measurements(case_fleet[:1], levels=(8, 16), trials=2)
    p.write_text(core.serialize_measurements(recs[:-1]))
    code, _, err = run(capsys, "anova", "--measurements", str(p), "--metric", "energy")
    assert code == 65 and "unbalanced" in err


def test_route_gamma(capsys, w500_path):
    code, out, _ = run(capsys, "route", "--profiles", CASE_PROFILE, "--workload", str(w500_path),
                       "--zeta", "0.5", "--use-gamma")
    assert code == 0
    assignment, summary = out.split("\n\n")
    rows = rows_of(assignment)
    assert rows[0] == ["query_index", "model"] and len(rows) == 501
    summ = dict(rows_of(summary)[1:])
    counts = [int(summ[f"count:Llama-2 ({s})"]) for s in ("7B", "13B", "70B")]
    assert sum(counts) == 500 and counts[0] <= 25 and counts[1] <= 100 and counts[2] <= 375
    assert summ["zeta"] == "0.500000"


def test_route_baselines(capsys, w500_path):
    base = ["route", "--profiles", CASE_PROFILE, "--workload", str(w500_path), "--zeta", "0.5"]
    code, out, _ = run(capsys, *base, "--baseline", "single:Llama-2 (13B)")
    assert code == 0 and "count:Llama-2 (13B),500" in out
    code, out1, _ = run(capsys, *base, "--baseline", "random", "--seed", "4")
    code, out2, _ = run(capsys, *base, "--baseline", "random", "--seed", "4")
    assert code == 0 and out1 == out2
    code, _, err = run(capsys, *base, "--baseline", "random")
    assert code == 65 and "--seed" in err
    code, _, _ = run(capsys, *base, "--baseline", "single:9")
    assert code == 65


def test_route_infeasible(capsys, tmp_path):
    w = tmp_path / "w.csv"
    w.write_text("tau_in,tau_out\n3,4\n")
    code, _, err = run(capsys, "route", "--profiles", CASE_PROFILE, "--workload", str(w), "--zeta", "0.5")
    assert code == 65 and "minimums" in err


def test_sweep_case_study(capsys, w500_path, tmp_path):
    out_path = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "sweep", "--profiles", CASE_PROFILE, "--workload", str(w500_path),
                     "--grid", "0:1:0.1", "--use-gamma", "--jobs", "2", "--out", str(out_path))
    assert code == 0
    table = rows_of(out_path.read_text())
    assert table[0][:4] == ["zeta", "total_energy_j", "mean_runtime_s", "total_accuracy"]
    body = table[1:]
    assert len(body) == 11
    energy = [float(r[1]) for r in body]
    assert all(a >= b for a, b in zip(energy, energy[1:]))


def test_sweep_bad_grid(capsys, w500_path):
    code, _, _ = run(capsys, "sweep", "--profiles", CASE_PROFILE, "--workload", str(w500_path),
                     "--grid", "0:1")
    assert code == 65


def test_power(capsys, tmp_path):
    tc = tmp_path / "tc.csv"
    rs = tmp_path / "rs.csv"
    tc.write_text("time_s,core_id,power_w\n" + "".join(f"{t},0,100\n" for t in range(11)))
    rs.write_text("core_id,start_s,end_s\n0,0,10\n")
    code, out, _ = run(capsys, "power", "--timechart", str(tc), "--residency", str(rs))
    assert code == 0 and out == "1000.000000\n"
    code, out, _ = run(capsys, "power", "--timechart", str(tc), "--residency", str(rs),
                       "--gpu-joules", "250.5")
    assert out == "1250.500000\n"


def test_missing_file_exit_66(capsys, tmp_path):
    code, _, err = run(capsys, "fit", "--measurements", str(tmp_path / "nope.csv"))
    assert code == 66 and "not found" in err


def test_parse_error_exit_65(capsys, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("tau_in,tau_out\n1,x\n")
    code, _, err = run(capsys, "route", "--profiles", CASE_PROFILE, "--workload", str(p), "--zeta", "0")
    assert code == 65 and "line" in err


def test_unknown_flag_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--measurements", "x", "--bogus"])
    assert exc.value.code == 2


@pytest.mark.parametrize("cmd,flags", [
    ("fit", ["--measurements", "--metric", "--out"]),
    ("anova", ["--measurements", "--metric"]),
    ("route", ["--profiles", "--workload", "--zeta", "--min-per-model", "--use-gamma", "--baseline", "--seed"]),
    ("sweep", ["--profiles", "--workload", "--grid", "--use-gamma", "--jobs"]),
    ("gen", ["--count", "--seed", "--dist", "--out"]),
    ("power", ["--timechart", "--residency", "--gpu-joules"]),
])
def test_help_documents_flags_and_schemas(capsys, cmd, flags):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for f in flags:
        assert f in out
    assert "tau_in,tau_out" in out and "time_s,core_id,power_w" in out


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "llmroute", "gen", "--count", "3", "--seed", "1",
                          "--dist", "uniform:1,10", "--out", "-"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "tau_in,tau_out" and len(res.stdout.splitlines()) == 4
