import pytest

from laca import allocator, cli
from laca.allocator import schedule_from_csv, verify_schedule
from laca.document import DocumentError, parse_instance, serialize_instance
from laca.linkquality import DEFAULT_CURVE, RssiTrace, trace_quality
from laca.scenarios import URGENT_FIRST_COUNTEREXAMPLE, scenario_text

MINIMAL = """\
duty_cycle 4
channels 2
sink s
node a
node s
link a-s a s
path p source a links a-s gen 0 deadline 2
"""


def test_minimal_document():
    doc = parse_instance(MINIMAL)
    assert doc.instance.duty_cycle == 4 and doc.instance.channels == 2
    assert doc.params.alpha == 0.5 and doc.params.t_q == "auto"
    assert doc.quality.mean() == 1.0


def test_quality_default_fills_every_cell():
    doc = parse_instance(MINIMAL + "quality_default 0.9\nquality a-s 1 3 0.25\n")
    vals = sorted(q for *_, q in doc.quality.cells())
    assert vals == [0.25] + [0.9] * 7


@pytest.mark.parametrize("extra, lineno", [
    ("alpha 1.5\n", 8),
    ("quality a-s 5 0 0.5\n", 8),
    ("bogus 1\n", 8),
    ("\n# note\nmax_backups -1\n", 10),
])
def test_errors_name_the_line(extra, lineno):
    with pytest.raises(DocumentError, match=f"line {lineno}:") as e:
        parse_instance(MINIMAL + extra)
    assert e.value.lineno == lineno


def test_missing_required_key():
    with pytest.raises(DocumentError, match="missing required 'sink'"):
        parse_instance(MINIMAL.replace("sink s\n", ""))


def test_round_trip():
    text = scenario_text(URGENT_FIRST_COUNTEREXAMPLE) + "quality A-D 1 3 0.125\nalpha 0.3\n"
    doc = parse_instance(text)
    again = parse_instance(serialize_instance(doc))
    assert again == doc
    assert serialize_instance(again) == serialize_instance(doc)


@pytest.fixture
def ce_file(tmp_path):
    p = tmp_path / "ce.txt"
    p.write_text(scenario_text(URGENT_FIRST_COUNTEREXAMPLE))
    return p


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_allocate_then_simulate_and_oracle(ce_file, tmp_path, capsys):
    out = tmp_path / "sched.csv"
    assert run("allocate", "--instance", ce_file, "--out", out) == 0
    doc = parse_instance(ce_file.read_text())
    sched = schedule_from_csv(out.read_text())
    assert verify_schedule(sched, doc.instance, doc.params, doc.quality) == []

    rep = tmp_path / "sim.csv"
    assert run("simulate", "--instance", ce_file, "--schedule", out, "--trials", 2000, "--out", rep) == 0
    rows = rep.read_text().splitlines()
    assert rows[0] == "path,pdr,mean_tx,mean_retx,miss_frac" and len(rows) == 8

    assert run("oracle", "pdr", "--instance", ce_file, "--schedule", out, "--path", "p6") == 0
    path, prob = capsys.readouterr().out.strip().split(",")
    assert path == "p6" and 0.0 < float(prob) <= 1.0
    assert run("oracle", "feasible", "--instance", ce_file) == 0
    assert capsys.readouterr().out.strip() == "feasible"


def test_urgent_first_reports_the_stuck_link(ce_file, tmp_path, capsys):
    out = tmp_path / "report.csv"
    assert run("allocate", "--instance", ce_file, "--algo", "urgent", "--out", out) == 1
    assert out.read_text().splitlines() == ["path,hop,link,reason", "p6,0,A-D,no-free-cell"]
    assert "no available slot/channel for link A-D" in capsys.readouterr().err


def test_infeasible_oracle_exit(tmp_path, capsys):
    crowded = ("duty_cycle 2\nchannels 1\nsink s\n" + "".join(f"node {x}\n" for x in "abcs")
               + "".join(f"link {x}-s {x} s\npath p{x} source {x} links {x}-s gen 0 deadline 1\n" for x in "abc"))
    p = tmp_path / "crowded.txt"
    p.write_text(crowded)
    assert run("oracle", "feasible", "--instance", p) == 1
    assert capsys.readouterr().out.strip() == "infeasible"
    assert run("allocate", "--instance", p, "--out", tmp_path / "r.csv") == 1


@pytest.mark.parametrize("argv", [
    ["allocate", "--instance", "/nonexistent", "--out", "x"],
    ["allocate"],
    ["sweep", "--generator", "g", "--channels", "3..1", "--out", "x"],
    ["frobnicate"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(argv) == 2


def test_bad_document_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text(MINIMAL + "alpha 1.5\n")
    assert run("allocate", "--instance", p, "--out", tmp_path / "s.csv") == 2
    assert "line 8" in capsys.readouterr().err


def test_invariant_violation_exit_code(ce_file, tmp_path, monkeypatch):
    monkeypatch.setattr(allocator, "verify_schedule", lambda *a, **k: ["forced"])
    assert run("allocate", "--instance", ce_file, "--out", tmp_path / "s.csv") == 3


GENERATOR = "grid 2 3\nsink 0 0\nslack 0 1\nduty_cycle 4\nseed 3\n"


def test_sweep_rows(tmp_path):
    g = tmp_path / "gen.txt"
    g.write_text(GENERATOR)
    out = tmp_path / "sweep.csv"
    assert run("sweep", "--generator", g, "--channels", "1..4", "--runs", 20, "--out", out) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "channels,insufficient_rate"
    chans, rates = zip(*((int(a), float(b)) for a, b in (r.split(",") for r in rows[1:])))
    assert chans == (1, 2, 3, 4)
    assert all(b <= a for a, b in zip(rates, rates[1:]))


def test_estimate_output_merges_into_instance(tmp_path):
    inst = tmp_path / "inst.txt"
    inst.write_text(MINIMAL)
    traces = tmp_path / "traces.txt"
    traces.write_text("a-s,1,2,-80;-79;-80\na-s,1,2,-80;-80\na-s,0,0,-70\n")
    curve = tmp_path / "curve.txt"
    curve.write_text("".join(f"{d} {r}\n" for d, r in DEFAULT_CURVE.points))
    out = tmp_path / "q.txt"
    assert run("estimate", "--traces", traces, "--curve", curve, "--instance", inst, "--out", out) == 0
    lines = out.read_text().splitlines()
    assert [l.split()[:4] for l in lines] == [["quality", "a-s", "0", "0"], ["quality", "a-s", "1", "2"]]
    merged = parse_instance(MINIMAL + out.read_text())
    expect = (trace_quality(RssiTrace(0, "a-s", 1, 2, (-80, -79, -80)), DEFAULT_CURVE) + 1.0) / 2
    assert merged.quality.q("a-s", 1, 2) == pytest.approx(expect, abs=1e-12)
    assert merged.quality.q("a-s", 0, 0) == 1.0


def _outputs(ce_file, tmp_path, tag, workers):
    sched, sim = tmp_path / f"s{tag}.csv", tmp_path / f"m{tag}.csv"
    run("allocate", "--instance", ce_file, "--out", sched)
    run("simulate", "--instance", ce_file, "--schedule", sched, "--trials", 9000,
        "--seed", 17, "--workers", workers, "--out", sim)
    return sched.read_bytes(), sim.read_bytes()


def test_byte_identical_reruns(ce_file, tmp_path):
    a = _outputs(ce_file, tmp_path, "a", 1)
    assert a == _outputs(ce_file, tmp_path, "b", 1)
    assert a == _outputs(ce_file, tmp_path, "c", 2)
