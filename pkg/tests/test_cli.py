import json
from pathlib import Path

import pytest

from cidmsim.cli import main
from cidmsim.io import read_tct_csv, read_wst_csv

DEMO = Path(__file__).resolve().parents[1] / "demos" / "inverter_chain.yaml"
STIM = "port,t,x,o\nin,2.0,1,0\nin,2.3,0,0\nin,10.0,1,0\nin,30.0,0,0\n"


def err_line(capsys):
    lines = capsys.readouterr().err.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


@pytest.fixture
def files(tmp_path):
    (tmp_path / "stim.csv").write_text(STIM)
    (tmp_path / "bad.yaml").write_text("version: 1\nchannels: [\n")
    bad = DEMO.read_text().replace("shift: {plus: 0.2, minus: -0.2}", "shift: {plus: -10.0, minus: -10.0}")
    (tmp_path / "incompatible.yaml").write_text(bad)
    return tmp_path


def test_validate(files, capsys):
    assert main(["validate", "--netlist", str(DEMO)]) == 0
    out = capsys.readouterr().out
    assert "g1->g2[1],1," in out and out.rstrip().endswith("ok")
    assert main(["validate", "--netlist", str(files / "incompatible.yaml")]) == 2
    e = err_line(capsys)
    assert e["exit"] == 2 and "g1->g2[1]" in e["message"]
    assert main(["validate", "--netlist", str(files / "bad.yaml")]) == 1
    e = err_line(capsys)
    assert e["error"] == "parse" and "line" in e["message"]
    assert main(["validate", "--netlist", str(files / "missing.yaml")]) == 1
    assert err_line(capsys)["error"] == "io"


def test_usage_error_is_exit_1(capsys):
    assert main(["simulate"]) == 1
    assert err_line(capsys)["error"] == "usage"


def test_simulate_writes_per_stage_files(files, capsys):
    out = files / "res"
    assert main(["simulate", "--netlist", str(DEMO), "--stimulus", str(files / "stim.csv"),
                 "--until", "60", "--out", str(out), "--format", "csv,vcd", "--trace-events"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["events"] > 0
    tct = read_tct_csv((out / "tct.csv").read_text())
    assert set(tct) == {"in", "g1", "g2", "g3"}
    wst = read_wst_csv((out / "wst.csv").read_text())
    assert wst["out"] == wst["g3"]
    for name in ("wst.vcd", "events.csv", "cancellations.json", "vcd_quantization.json"):
        assert (out / name).exists()
    # the 0.3 wide input pulse is canceled at the first stage
    assert "g1" in json.loads((out / "cancellations.json").read_text())
    assert main(["report-cancellations", "--result", str(out)]) == 0
    assert "g1" in json.loads(capsys.readouterr().out)


def test_simulate_without_stimulus_and_tau_zero(files, capsys):
    out = files / "quiet"
    assert main(["simulate", "--netlist", str(DEMO), "--until", "50", "--out", str(out)]) == 0
    wst = read_wst_csv((out / "wst.csv").read_text())
    assert all(len(s) == 1 for s in wst.values())
    # an inconsistent init makes the reset phase schedule a transition at t = 0
    reset = DEMO.read_text().replace("    init: 1\n", "    init: 0\n", 1)
    (files / "reset.yaml").write_text(reset)
    out = files / "tau0"
    assert main(["simulate", "--netlist", str(files / "reset.yaml"), "--stimulus", str(files / "stim.csv"),
                 "--until", "0", "--out", str(out)]) == 0
    tct = read_tct_csv((out / "tct.csv").read_text())
    assert [tr.t for tr in tct["g1"].transitions[1:]] == [0.0]
    assert [tr.t for tr in tct["g2"].transitions[1:]] == [0.0]  # sees g1 = 0 before g1 switches
    assert len(tct["in"]) == 1 and len(tct["g3"]) == 1


def test_simulate_errors(files, capsys):
    assert main(["simulate", "--netlist", str(files / "incompatible.yaml"), "--until", "5",
                 "--out", str(files / "x")]) == 2
    assert err_line(capsys)["exit"] == 2
    (files / "bad_stim.csv").write_text("port,t,x,o\nin,2.0,1,0\nin,1.0,0,0\n")
    assert main(["simulate", "--netlist", str(DEMO), "--stimulus", str(files / "bad_stim.csv"),
                 "--until", "5", "--out", str(files / "x")]) == 1
    assert "line 3" in err_line(capsys)["message"]
    assert main(["simulate", "--netlist", str(DEMO), "--stimulus", str(files / "stim.csv"), "--until", "60",
                 "--out", str(files / "x"), "--format", "vcd", "--timescale", "1fs"]) == 0
    capsys.readouterr()
    far = "port,t,x,o\nin,10000.0,1,0\n"
    (files / "far.csv").write_text(far)
    assert main(["simulate", "--netlist", str(DEMO), "--stimulus", str(files / "far.csv"), "--until", "2e4",
                 "--out", str(files / "y"), "--format", "vcd"]) == 3
    assert "coarser" in err_line(capsys)["message"]


def test_gen_stimulus_is_deterministic(files, capsys):
    args = ["gen-stimulus", "--count", "20", "--mu", "1.5", "--sigma", "0.3", "--seed", "4"]
    assert main(args + ["--out", str(files / "a.csv")]) == 0
    assert main(args + ["--out", str(files / "b.csv")]) == 0
    assert (files / "a.csv").read_bytes() == (files / "b.csv").read_bytes()
    assert main(args) == 0
    assert capsys.readouterr().out == (files / "a.csv").read_text()
    assert main(["gen-stimulus", "--count", "0", "--mu", "1", "--sigma", "0"]) == 1
    assert err_line(capsys)["exit"] == 1


def test_compare_and_reconstruct(files, capsys):
    res = files / "res"
    assert main(["simulate", "--netlist", str(DEMO), "--stimulus", str(files / "stim.csv"),
                 "--until", "60", "--out", str(res)]) == 0
    ref = files / "ref.csv"
    assert main(["reconstruct", "--trace", str(res / "tct.csv"), "--vertex", "g3", "--waveforms", "0.5,0.5",
                 "--vth", "0.5", "--step", "0.001", "--t0", "0", "--t1", "60", "--out", str(ref)]) == 0
    capsys.readouterr()
    report = files / "cmp.csv"
    assert main(["compare", "--netlist-base", str(DEMO), "--stimulus", str(files / "stim.csv"),
                 "--reference", str(ref), "--until", "60", "--out", str(report)]) == 0
    table = capsys.readouterr().out.splitlines()
    assert [r.split()[0] for r in table] == ["model", "cidm", "idm", "inertial"]
    cidm_area = float(table[1].split()[1])
    assert cidm_area < 1e-5  # reference is cidm's own trace, off only by digitization
    assert "inertial,*," in report.read_text()
    assert main(["compare", "--netlist-base", str(DEMO), "--reference", str(files / "nope.csv"),
                 "--until", "60"]) == 1
    assert err_line(capsys)["exit"] == 1
    assert main(["compare", "--netlist-base", str(DEMO), "--reference", str(ref), "--models", "cidm,spice",
                 "--until", "60"]) == 1
    err_line(capsys)
