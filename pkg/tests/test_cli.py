import hashlib
import json
import shutil
import subprocess

import pytest

from towerdomains.cli import main

from conftest import FIXTURE_PRIMES


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_unramified_example(capsys):
    code, out, _ = run(capsys, "unramified", "check", "--field", '{"level1":[-5]}', "--w", "-1",
                       "--beta", "sqrt(-5)")
    assert code == 0
    cert = json.loads(out)
    assert cert["valid"] and cert["relative_discriminant_norm"] == "1"


def test_certificate_round_trip(capsys, tmp_path):
    _, out, _ = run(capsys, "unramified", "check", "--field", '{"level1":[-15]}', "--w", "5", "--beta", "1")
    path = tmp_path / "cert.json"
    path.write_text(out)
    code, again, _ = run(capsys, "unramified", "check", "--input", str(path))
    assert code == 0 and again == out


def test_cyclo_scan_csv(capsys):
    code, out, _ = run(capsys, "cyclo", "scan", "--max-m", "100", "--epsilon", "0.1", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("m,phi_m,log_delta,threshold,verdict")
    assert len(lines) == 101
    assert lines[4].startswith("4,2,") and lines[4].split(",")[4] == "holds"


def test_tower_pipeline(capsys, tmp_path):
    primes = [str(p) for p in FIXTURE_PRIMES]
    code, units, _ = run(capsys, "tower", "search-units", "--primes", *primes)
    assert code == 0 and len(json.loads(units)["units"]) == 1
    (tmp_path / "units.json").write_text(units)
    code, tower, _ = run(capsys, "tower", "build", "--input", str(tmp_path / "units.json"))
    assert code == 0 and json.loads(tower)["root_discriminant"]["Delta_N"] == 205 ** 4
    (tmp_path / "tower.json").write_text(tower)
    code, dom, _ = run(capsys, "domain", "build", "--tower", str(tmp_path / "tower.json"))
    assert code == 0
    (tmp_path / "dom.json").write_text(dom)
    code, rep, _ = run(capsys, "domain", "report", "--domain", str(tmp_path / "dom.json"))
    assert code == 0 and json.loads(rep)["index"] == "41"
    code, red, _ = run(capsys, "domain", "reduce", "--domain", str(tmp_path / "dom.json"), "--point", "1/3")
    red = json.loads(red)
    assert code == 0 and red["residue"] == red["input"]
    assert all(k == 0 for _, _, k in red["shift_coords"])


def test_byte_stable(capsys):
    outs = {run(capsys, "voronoi", "field", "--field", '{"cyclotomic":5}')[1] for _ in range(2)}
    assert len(outs) == 1


def test_lattice_commands(capsys, tmp_path):
    code, out, _ = run(capsys, "lattice", "lll", "--lattice", '{"basis":[[1,0],[100,1]]}')
    assert code == 0
    (tmp_path / "lat.json").write_text(out)
    code, out, _ = run(capsys, "lattice", "svp", "--lattice", str(tmp_path / "lat.json"))
    assert json.loads(out)["squared_norm"] == "1"
    code, out, _ = run(capsys, "lattice", "cvp", "--lattice", '{"gram":[[1,0],[0,1]]}', "--target", "0.6,0.6")
    assert json.loads(out)["coefficients"] == [1, 1] and json.loads(out)["squared_distance"] == "8/25"
    code, out, _ = run(capsys, "lattice", "cover", "--lattice", '{"gram":[[2,1],[1,2]]}')
    assert json.loads(out)["squared_upper"] == "2/3"


@pytest.mark.parametrize("argv,code,err_code", [
    (["frobnicate"], 64, "unknown_subcommand"),
    (["lattice", "shrink"], 64, "unknown_subcommand"),
    (["lattice", "svp", "--lattice", "{not json"], 65, "malformed_json"),
    (["tower", "build", "--primes", "5", "7"], 2, "not_prime_family"),
    (["lattice", "cover", "--lattice", '{"gram":[[1,2],[2,1]]}'], 2, "validation"),
    (["domain", "report", "--domain", "-", "--vertex-cap", "0"], 2, "usage"),
    (["tower", "search-units", "--primes", "5", "41", "--max-candidates", "5"], 3, "budget"),
])
def test_exit_codes(capsys, argv, code, err_code):
    got, out, err = run(capsys, *argv)
    assert got == code and out == ""
    payload = json.loads(err)["error"]
    assert payload["code"] == err_code and payload["exit"] == code


@pytest.mark.skipif(shutil.which("towerdomains") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["towerdomains", "cyclo", "scan", "--max-m", "30", "--format", "csv"],
                          capture_output=True, text=True, check=True)
    again = subprocess.run(["towerdomains", "cyclo", "scan", "--max-m", "30", "--format", "csv"],
                           capture_output=True, text=True, check=True)
    assert hashlib.sha256(proc.stdout.encode()).digest() == hashlib.sha256(again.stdout.encode()).digest()
