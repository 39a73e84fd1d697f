import json
import subprocess
import sys
from pathlib import Path

import pytest

from hypnielsen import cli

from conftest import SL2Z, h2_spec, tree_spec

SPECS = Path(__file__).resolve().parent.parent / "specs"


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


@pytest.mark.parametrize("name, code", [("tree_redundant.json", 2), ("sl2z.json", 2), ("schottky.json", 0),
                                        ("tree_a2a3.json", 2)])
def test_reduce_exit_codes(tmp_path, name, code):
    out = tmp_path / "r.json"
    assert cli.main(["reduce", str(SPECS / name), "--out", str(out)]) == code
    data = json.loads(out.read_text())
    assert data["outcome"] == {0: "Free", 2: "ShortElement"}[code]


def test_reduce_stdout_and_svg(tmp_path, capsys):
    svg = tmp_path / "o.svg"
    spec = write(tmp_path, "s.json", h2_spec(SL2Z))
    assert cli.main(["reduce", spec, "--svg", str(svg)]) == 2
    assert json.loads(capsys.readouterr().out)["outcome"] == "ShortElement"
    assert svg.read_text().startswith("<svg")


def test_reduce_byte_identical(tmp_path):
    spec = write(tmp_path, "s.json", tree_spec(["a", "ab", "b"]))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli.main(["reduce", spec, "--out", str(a)])
    cli.main(["reduce", spec, "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_timings_flag(tmp_path):
    spec = write(tmp_path, "s.json", tree_spec(["a", "b"]))
    out = tmp_path / "r.json"
    assert cli.main(["reduce", spec, "--timings", "--out", str(out)]) == 0
    assert set(json.loads(out.read_text())["timings"]) == {"basepoint", "minimize", "certify"}


def test_certify(tmp_path):
    assert cli.main(["certify", write(tmp_path, "a.json", tree_spec(["a", "b"])), "--out", str(tmp_path / "o")]) == 0
    assert cli.main(["certify", write(tmp_path, "b.json", h2_spec(SL2Z)), "--out", str(tmp_path / "o")]) == 3


def test_shorten(tmp_path):
    spec = str(SPECS / "tree_a2a3.json")
    assert cli.main(["shorten", spec, "--eps", "1", "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["shorten", spec, "--eps", "0"]) == 1


def test_constants(tmp_path, capsys):
    base = write(tmp_path, "base.json", {"K": 1, "L": 10, "N0": 1})
    assert cli.main(["constants", "--n", "2", "--base", base, "--c", "1"]) == 0
    table = json.loads(capsys.readouterr().out)
    assert table["base"]["N1"] == 10000


def test_render_from_report(tmp_path):
    report = tmp_path / "r.json"
    cli.main(["reduce", str(SPECS / "schottky.json"), "--out", str(report)])
    svg = tmp_path / "r.svg"
    assert cli.main(["render", str(report), "--out", str(svg), "--depth", "2"]) == 0
    assert "<polyline" in svg.read_text()


@pytest.mark.parametrize("args", [["reduce", "/nonexistent.json"], ["render", "/nonexistent.json"]])
def test_errors_exit_1(args, capsys):
    assert cli.main(args) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_bad_spec_exit_1(tmp_path):
    assert cli.main(["reduce", write(tmp_path, "bad.json", {"model": {"kind": "H2"}, "generators": []})]) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hypnielsen.cli", "reduce", str(SPECS / "tree_redundant.json")],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 2
    assert json.loads(proc.stdout)["witness"]["index"] == 1
