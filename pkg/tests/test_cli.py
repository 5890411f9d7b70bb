import csv
import io
import json

import numpy as np
import pytest

from relaylab import cli, harness
from relaylab.reports import SchemeError

SMALL = ["--m1", "2", "--n1", "2", "--m2", "2", "--n2", "2"]
SCALAR = ["--m1", "1", "--n1", "1", "--m2", "1", "--n2", "1"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_parse_figure_configs():
    cfg = cli.parse_args(["cdf", "--schemes", "cs,df,direct", "--trials", "50"])
    s = cfg.spec
    assert (s.cfg.m1, s.cfg.n1, s.cfg.m2, s.cfg.n2) == (4, 4, 4, 4)
    assert s.pc.p1 == 1.0 and s.pc.p2 == 1.0
    assert s.topo.dx == pytest.approx(1 / 3) and s.topo.dy == 0.5 and s.topo.eta == 4
    assert s.trials == 50 and s.seed == 1 and s.tol == 1e-6 and s.schemes == ("cs", "df", "direct")
    cfg = cli.parse_args(["sweep", "--dy", "0.1", "--dx-grid", "-0.5:1.5:0.1",
                          "--schemes", "cs,df,hcs,hdf,twohop,direct", "--out", "x.csv"])
    assert len(cfg.spec.dx_list) == 21 and cfg.spec.topo.dy == 0.1


@pytest.mark.parametrize("argv", [
    ["sweep"],
    ["cdf", "--schemes", "cs,bogus"],
    ["cdf", "--trials", "0"],
    ["cdf", "--dx-grid", "0:1:0.5"],
    ["sweep", "--out", "x.csv", "--dx-grid", "1:0:0.1"],
    ["cdf", "--dx", "0", "--dy", "0"],
    ["oracle"],
    ["cdf", "--format", "xml"],
    ["cdf", "--p1-db", "nan"],
])
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2


def test_cdf_csv_ordering(tmp_path):
    out = tmp_path / "cdf.csv"
    assert cli.main(["cdf", *SMALL, "--trials", "2", "--schemes", "direct,cs", "--out", str(out)]) == 0
    r = rows(out)
    assert r[0] == ["trial", "scheme", "rate_bits"]
    assert [x[:2] for x in r[1:]] == [["0", "cs"], ["0", "direct"], ["1", "cs"], ["1", "direct"]]
    for x in r[1:]:
        assert len(x[2].replace(".", "").lstrip("0")) <= 12


def test_single_csv(tmp_path):
    out = tmp_path / "single.csv"
    assert cli.main(["single", *SMALL, "--schemes", "hdf,direct", "--out", str(out)]) == 0
    r = rows(out)
    assert r[0] == ["scheme", "rate_bits"] and [x[0] for x in r[1:]] == ["direct", "hdf"]


def test_sweep_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    argv = ["sweep", *SMALL, "--trials", "2", "--dy", "0.1", "--dx-grid", "0:0.5:0.5",
            "--schemes", "cs,hdf", "--out", str(out)]
    assert cli.main(argv) == 0
    r = rows(out)
    assert r[0] == ["dx", "scheme", "mean_rate_bits", "stderr_bits", "mean_w1"]
    assert [x[:2] for x in r[1:]] == [["0", "cs"], ["0", "hdf"], ["0.5", "cs"], ["0.5", "hdf"]]
    for x in r[1:]:
        assert (x[4] == "") == (x[1] == "cs")


def test_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert cli.main(["cdf", *SMALL, "--trials", "3", "--seed", "7", "--schemes", "df,cf-wz",
                         "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_json_output(tmp_path):
    out = tmp_path / "cdf.json"
    assert cli.main(["cdf", *SMALL, "--trials", "2", "--schemes", "direct,hdf", "--format", "json",
                     "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert [(r["trial"], r["scheme"]) for r in doc["rows"]] == [(0, "direct"), (0, "hdf"), (1, "direct"), (1, "hdf")]
    assert doc["cdf"]["direct"][-1][1] == 1.0
    assert doc["summary"]["hdf"]["mean_w1"] is not None
    assert doc["diagnostics"]["failed_solves"] == 0
    assert len(doc["diagnostics"]["channel_checksums"]) == 2


def test_stdout_when_no_out(capsys):
    assert cli.main(["single", *SMALL, "--schemes", "direct"]) == 0
    assert capsys.readouterr().out.startswith("scheme,rate_bits\n")


def test_unwritable_path(tmp_path):
    out = tmp_path / "missing-dir" / "x.csv"
    assert cli.main(["single", *SMALL, "--schemes", "direct", "--out", str(out)]) == cli.EXIT_IO


def test_failure_threshold(tmp_path, monkeypatch):
    def always_fail(name, ch, pc, per_antenna, tol):
        raise SchemeError(name, RuntimeError("forced"))

    monkeypatch.setattr(harness, "evaluate_scheme", always_fail)
    out = tmp_path / "x.csv"
    assert cli.main(["cdf", *SMALL, "--trials", "2", "--schemes", "cs", "--out", str(out),
                     "--workers", "1"]) == cli.EXIT_FAILURES
    assert rows(out)[1] == ["0", "cs", ""]


def test_dump_channels(tmp_path):
    out, dump = tmp_path / "x.csv", tmp_path / "ch.jsonl"
    assert cli.main(["cdf", *SMALL, "--trials", "2", "--schemes", "direct", "--out", str(out),
                     "--dump-channels", str(dump)]) == 0
    assert len(dump.read_text().splitlines()) == 3


def test_oracle_subcommand(tmp_path):
    out = tmp_path / "oracle.csv"
    assert cli.main(["oracle", *SCALAR, "--trials", "1", "--out", str(out)]) == 0
    r = rows(out)
    assert r[0] == ["instance", "scheme", "solver_bits", "oracle_bits", "delta_bits", "ok"]
    table = {(x[0], x[1]): x for x in r[1:]}
    assert abs(float(table["example-relay", "cs"][4])) <= 1e-3
    two = table["example-twohop", "twohop"]
    assert abs(float(two[3]) - 0.5 * np.log2(3)) < 1e-9 and abs(float(two[4])) <= 1e-3
    assert abs(float(table["example-cf", "cf-wz"][4])) <= 1e-9
    assert all(x[5] == "1" for x in r[1:])
