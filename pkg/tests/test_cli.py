import subprocess
import sys
from fractions import Fraction

import pytest

from qdebate import cli
from qdebate.analysis import read_csv


def _reports(capsys, argv):
    assert cli.main(argv) == 0
    return read_csv(capsys.readouterr().out)


def test_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert "theorem1" in out and "bundled/parity.tm" in out and "certificate" in out


@pytest.mark.parametrize("name", ["coin.verifier", "parity.tm", "v0_atm.spec"])
def test_validate_bundled(capsys, name):
    assert cli.main(["validate", f"bundled/{name}"]) == 0
    assert capsys.readouterr().out.strip().endswith("ok")


def test_validate_broken_file(tmp_path, capsys):
    bad = tmp_path / "bad.tm"
    bad.write_text("kind: tm\nname: x\n")
    assert cli.main(["validate", str(bad)]) == 1
    assert "missing key" in capsys.readouterr().out


def test_exact_uprime(capsys):
    (r,) = _reports(capsys, ["exact", "--verifier", "uprime", "--n", "6", "--p0", "honest"])
    assert r.p_accept == 0 and r.p_reject == Fraction(1, 49) and r.overall == 0


def test_exact_history_verifier(capsys):
    argv = ["exact", "--verifier", "theorem1", "--tm", "parity.tm", "--m", "10", "--input", "11", "--p0", "spurious:block=2"]
    (r,) = _reports(capsys, argv)
    # "11" has even parity, so the corrupted P0 history loses
    assert r.p_accept > 100 * r.p_reject > 0


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "scenario.conf"
    cfg.write_text("# uprime with a composite length\nverifier = uprime\nn = 4\np0 = certificate:i=2,j=2\n")
    (r,) = _reports(capsys, ["exact", "--config", str(cfg)])
    assert r.n == 4 and r.p_accept == 0 and r.p_reject > 0
    (r,) = _reports(capsys, ["exact", "--config", str(cfg), "--n", "5", "--p0", "silent"])
    assert r.n == 5 and r.p_accept > 0


def test_run_is_seeded(tmp_path, capsys):
    argv = ["run", "--verifier", "upower", "--n", "4", "--p1", "honest", "--seed", "3", "--trials", "200"]
    a = _reports(capsys, argv)
    b = _reports(capsys, argv)
    assert a[0].row() == b[0].row() and a[0].overall == 1.0
    out = tmp_path / "r.csv"
    assert cli.main(argv + ["--out", str(out)]) == 0
    assert "monte carlo" in capsys.readouterr().err
    assert read_csv(out.read_text())[0].row() == a[0].row()


def test_sweep_family(capsys):
    reports = _reports(capsys, ["sweep", "--verifier", "ufib", "--n", "3,4", "--p1", "family:rotation"])
    assert {r.n for r in reports} == {3, 4}
    assert len(reports) > 2


@pytest.mark.parametrize(
    "argv",
    [
        ["exact", "--verifier", "uprime", "--n", "6", "--p0", "bogus"],
        ["exact", "--n", "6"],
        ["exact", "--verifier", "theorem1", "--input", "11"],
        ["run", "--verifier", "uprime", "--n", "4", "--trials", "0", "--seed", "1"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    assert cli.main(argv) == 2
    assert capsys.readouterr().err.startswith("qdebate: error:")


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "qdebate", "list"], capture_output=True, text=True)
    assert out.returncode == 0 and "verifiers:" in out.stdout
