import csv
import io

import pytest

from treeloc import __version__
from treeloc.cli import ConfigError, main, parse_config, read_config_file, run


def body(path):
    """Non-comment lines of an output file."""
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


def rows(path):
    return list(csv.DictReader(io.StringIO("\n".join(body(path)))))


# -- configuration ----------------------------------------------------------------

def test_parse_threshold_example():
    cfg = parse_config(["threshold", "--method", "B", "--disorder", "uniform", "--K", "2",
                        "--E", "0", "--seed", "7"])
    assert (cfg.command, cfg.method, cfg.disorder, cfg.K, cfg.E, cfg.seed) == \
        ("threshold", "B", "uniform", (2,), 0.0, 7)


def test_default_seed_and_threads():
    cfg = parse_config(["table"])
    assert cfg.seed == 2024 and cfg.threads == 1


def test_K_range_and_list():
    assert parse_config(["table", "--K", "2..6"]).K == (2, 3, 4, 5, 6)
    assert parse_config(["table", "--K", "2,4,8"]).K == (2, 4, 8)


def test_K_below_two_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config(["threshold", "--K", "1"])
    assert "K must be >= 2" in err.value.problems


def test_every_problem_listed():
    with pytest.raises(ConfigError) as err:
        parse_config(["threshold", "--K", "1", "--s", "3", "--seeds", "0", "--method", "Z"])
    text = " ".join(err.value.problems)
    for part in ("K must be", "s must lie", "seeds must be", "method must be"):
        assert part in text


def test_unparseable_value_named():
    with pytest.raises(ConfigError, match="grid_n"):
        parse_config(["eigen", "--grid-n", "many"])


def test_flags_override_config_file(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("# grid\ngrid_n = 2000\ndisorder = cauchy\n")
    cfg = parse_config(["eigen", "--grid-n", "4000", "--config", str(cfgfile)])
    assert cfg.grid_n == 4000 and cfg.disorder == "cauchy"
    assert parse_config(["eigen"], config_file=cfgfile).grid_n == 2000


def test_config_file_accepts_dashes_and_rejects_unknown_keys(tmp_path):
    good = tmp_path / "good.cfg"
    good.write_text("g-bracket = 0.1,0.3\n")
    assert read_config_file(good) == {"g_bracket": "0.1,0.3"}
    bad = tmp_path / "bad.cfg"
    bad.write_text("grdi_n = 10\nnonsense\n")
    with pytest.raises(ConfigError) as err:
        read_config_file(bad)
    assert len(err.value.problems) == 2
    assert "unknown key 'grdi_n'" in err.value.problems[0]


def test_main_reports_errors_with_exit_2(capsys):
    assert main(["threshold", "--K", "1", "--tol", "-1"]) == 2
    errors = capsys.readouterr().err.splitlines()
    assert len(errors) == 2 and all(e.startswith("treeloc: error:") for e in errors)


def test_missing_coupling_named():
    with pytest.raises(ConfigError, match="profile needs g or t"):
        parse_config(["profile", "--K", "2"])


# -- commands -----------------------------------------------------------------------

def test_header_records_config(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["threshold", "--method", "D", "--disorder", "cauchy", "--K", "3",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == f"# treeloc {__version__}"
    assert "# command = threshold" in lines
    assert "# master_seed = 2024" in lines
    assert "# disorder = cauchy" in lines
    assert not any("wall_clock" in ln for ln in lines)
    (row,) = rows(out)
    assert row["method"] == "D" and row["g_c"] == "0.417724"


def test_timing_flag_adds_wall_clock(tmp_path):
    out = tmp_path / "d.csv"
    main(["threshold", "--method", "E", "--K", "2", "--timing", "--out", str(out)])
    assert any(ln.startswith("# wall_clock_s = ") for ln in out.read_text().splitlines())


def test_table_statuses(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["table", "--disorder", "cauchy", "--K", "2..3", "--methods", "D,E",
                 "--out", str(out)]) == 0
    table = {(r["method"], r["K"]): r for r in rows(out)}
    assert table[("D", "2")]["g_c"] == "" and table[("D", "2")]["status"] == "pass"
    assert table[("E", "2")]["g_c"] == "0.366773"
    assert all(r["status"] == "pass" for r in table.values())


def test_table_unknown_K_is_informational(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["table", "--K", "7", "--methods", "E", "--out", str(out)]) == 0
    assert rows(out)[0]["status"] == "informational"


def test_failure_leaves_incomplete_trailer(tmp_path):
    out = tmp_path / "f.csv"
    code = main(["threshold", "--method", "A", "--K", "2", "--g-bracket", "0.001,0.002",
                 "--grid-n", "100", "--out", str(out)])
    assert code == 1
    lines = out.read_text().splitlines()
    assert lines[-1] == "# INCOMPLETE"
    assert lines[-2].startswith("method,disorder,K")


def test_eigen_profile_cavity_rde_outputs(tmp_path):
    eig = tmp_path / "e.csv"
    assert main(["eigen", "--K", "2", "--g-range", "0.14:0.16:3", "--grid-n", "100",
                 "--out", str(eig)]) == 0
    lam = [float(r["K_lambda"]) for r in rows(eig)]
    assert len(lam) == 3 and lam[0] < 1 < lam[2]

    prof = tmp_path / "p.txt"
    assert main(["profile", "--disorder", "cauchy", "--K", "2", "--t", "0.23",
                 "--per-decade", "40", "--out", str(prof)]) == 0
    data = [ln.split() for ln in body(prof)]
    assert all(len(r) == 2 for r in data) and len(data) > 100

    cav = tmp_path / "c.csv"
    assert main(["cavity", "--K", "2", "--g", "0.15", "--pool-size", "10000,20000",
                 "--sweeps", "20,40", "--seeds", "2", "--out", str(cav)]) == 0
    stages = [r["stage"] for r in rows(cav)]
    assert stages.count("raw") == 8 and stages.count("extrapolated") == 2
    traces = rows(tmp_path / "c_traces.csv")
    assert len(traces) == 2 * 2 * 40

    # small pools leave the |Gamma| ~ 0.05 bins empty, so positivity fails and the exit code says so
    rd = tmp_path / "r.csv"
    assert main(["rde-diag", "--K", "2", "--g", "0.15", "--pool-size", "20000",
                 "--n-samples", "200000", "--out", str(rd)]) == 1
    checks = {r["check"]: r["passed"] for r in rows(tmp_path / "r_checks.csv")}
    assert checks.pop("lipschitz") == "n/a" and checks.pop("positivity") == "fail"
    assert set(checks.values()) == {"pass"}
    assert len(rows(rd)) == 200


@pytest.mark.parametrize("argv", [
    ["table", "--disorder", "cauchy", "--K", "2..3", "--methods", "A,B,D,E", "--grid-n", "200"],
    ["cavity", "--K", "2", "--g", "0.15", "--pool-size", "10000", "--sweeps", "30",
     "--seeds", "2"],
    ["threshold", "--method", "B", "--K", "2", "--pool-size", "5000", "--n-samples", "1000000",
     "--g-bracket", "0.14,0.17", "--grid-n", "100", "--tol", "0.01"],
])
def test_byte_identical_reruns(tmp_path, argv):
    outs, codes = [], []
    for i in range(2):
        path = tmp_path / f"o{i}.csv"
        codes.append(run(parse_config(argv + ["--out", str(path)])))
        outs.append(path.read_bytes())
    assert codes[0] == codes[1]
    assert b"INCOMPLETE" not in outs[0]
    assert outs[0] == outs[1]
