import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

from gsubstrate.cli import main
from gsubstrate.graph import Entity, GraphState, Relation
from gsubstrate.schema_io import parse, serialize

SAMPLE = Path(str(resources.files("gsubstrate") / "data" / "sample"))
CORPUS = SAMPLE / "corpus.jsonl"
CATALOG = SAMPLE / "catalog.json"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_sample(capsys):
    code, out, _ = run(capsys, "validate", "--in", CORPUS)
    assert code == 0 and "13 records" in out


def test_usage_errors_exit_2(capsys, tmp_path):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "stats")[0] == 2
    code, _, err = run(capsys, "schedule", "--paradigm", "umt", "--ratio", "0.5",
                       "--catalog", CATALOG, "--out", tmp_path / "s")
    assert code == 2 and "ratio" in err
    assert not (tmp_path / "s").exists()


def test_bad_input_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "x", "domain": "scene", "graph": {"entities": [], "relations": [["a", "r", "b"]]}}\n')
    code, _, err = run(capsys, "validate", "--in", bad)
    assert code == 1 and "line 1" in err
    code, _, err = run(capsys, "validate", "--in", tmp_path / "nope.jsonl")
    assert code == 1 and "io-error" in err


def test_stats_empty_corpus(capsys, tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    out = tmp_path / "stats.json"
    code, _, err = run(capsys, "stats", "--in", empty, "--out", out)
    assert code == 1 and "empty-corpus" in err
    assert not out.exists()


def test_stats_by_domain(capsys):
    code, out, _ = run(capsys, "stats", "--in", CORPUS, "--by-domain")
    data = json.loads(out)
    assert code == 0
    assert set(data["by_domain"]) == {"algorithm", "event", "molecule", "scene"}


def test_convert_single_graph(capsys, tmp_path):
    g = GraphState((Entity("A", "dog"), Entity("B", "ball")), (Relation("A", "chases", "B"),))
    src = tmp_path / "g.xml"
    src.write_text(serialize(g, "xml-style"))
    dst = tmp_path / "g.txt"
    code, _, _ = run(capsys, "convert", "--single", "--in", src, "--from", "xml-style",
                     "--to", "natural-language", "--out", dst)
    assert code == 0
    assert parse(dst.read_text(), "natural-language") == g
    assert (tmp_path / ("g.txt" + ".manifest.json")).exists()


def test_convert_corpus_round_trip(capsys, tmp_path):
    ut = tmp_path / "ut.jsonl"
    back = tmp_path / "back.jsonl"
    assert run(capsys, "convert", "--in", CORPUS, "--from", "corpus", "--to", "unified-text", "--out", ut)[0] == 0
    assert run(capsys, "convert", "--in", ut, "--from", "unified-text", "--to", "corpus", "--out", back)[0] == 0
    orig = [json.loads(x) for x in CORPUS.read_text().splitlines()]
    again = [json.loads(x) for x in back.read_text().splitlines()]
    assert [r["id"] for r in orig] == [r["id"] for r in again]


def test_schedule_replay_is_byte_identical(capsys, tmp_path):
    out = tmp_path / "sched"
    code, stdout, _ = run(capsys, "schedule", "--paradigm", "g-sub", "--ratio", "0.5", "--seed", "42",
                          "--catalog", CATALOG, "--out", out)
    assert code == 0
    assert json.loads(stdout)["interleaved"] > 0
    before = {p.name: p.read_bytes() for p in out.iterdir()}
    for name in ("schedule.jsonl", "links.jsonl"):
        (out / name).unlink()
    code, stdout, _ = run(capsys, "replay", out / "manifest.json")
    assert code == 0 and "replay ok" in stdout
    assert {p.name: p.read_bytes() for p in out.iterdir()} == before


def test_replay_detects_tampering(capsys, tmp_path):
    out = tmp_path / "p.jsonl"
    assert run(capsys, "perturb", "--in", CORPUS, "--seed", "3", "--out", out)[0] == 0
    manifest = tmp_path / "p.jsonl.manifest.json"
    changed = tmp_path / "corpus.jsonl"
    changed.write_text(CORPUS.read_text())
    m = json.loads(manifest.read_text())
    m["inputs"] = {str(changed): "0" * 64}
    manifest.write_text(json.dumps(m))
    code, _, err = run(capsys, "replay", manifest)
    assert code == 1 and "differ" in err


def test_seed_env_override(capsys, tmp_path, monkeypatch):
    a, b, c = tmp_path / "a.jsonl", tmp_path / "b.jsonl", tmp_path / "c.jsonl"
    monkeypatch.setenv("GSUB_SEED", "11")
    assert run(capsys, "forge", "--in", CORPUS, "--task", "sr", "--seed", "0", "--out", a)[0] == 0
    monkeypatch.delenv("GSUB_SEED")
    assert run(capsys, "forge", "--in", CORPUS, "--task", "sr", "--seed", "11", "--out", b)[0] == 0
    assert run(capsys, "forge", "--in", CORPUS, "--task", "sr", "--seed", "12", "--out", c)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()
    assert json.loads((tmp_path / "a.jsonl.manifest.json").read_text())["seed"] == 11
    monkeypatch.setenv("GSUB_SEED", "eleven")
    assert run(capsys, "forge", "--in", CORPUS, "--task", "sr", "--out", c)[0] == 2


def test_forge_without_skip_leaves_no_output(capsys, tmp_path):
    out = tmp_path / "cc.jsonl"
    code, _, err = run(capsys, "forge", "--in", CORPUS, "--task", "cc", "--out", out)
    assert code == 1 and ("molecule" in err or "source" in err)
    assert not out.exists()
    code, _, _ = run(capsys, "forge", "--in", CORPUS, "--task", "cc", "--skip-errors", "--out", out)
    assert code == 0 and len(out.read_text().splitlines()) == 6


def test_eval_round_trip(capsys, tmp_path):
    gold = tmp_path / "gold.jsonl"
    assert run(capsys, "forge", "--in", CORPUS, "--task", "auto", "--out", gold)[0] == 0
    pred = tmp_path / "pred.jsonl"
    rows = [json.loads(x) for x in gold.read_text().splitlines()]
    pred.write_text("".join(json.dumps({"instance_id": r["instance_id"], "text": "yes"}) + "\n" for r in rows[:2]))
    report = tmp_path / "report.json"
    assert run(capsys, "eval", "--pred", pred, "--gold", gold, "--out", report)[0] == 0
    data = json.loads(report.read_text())
    assert data["counts"]["matched"] == 2
    pred.write_text("{broken\n")
    code, _, err = run(capsys, "eval", "--pred", pred, "--gold", gold)
    assert code == 1 and "line 1" in err


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "gsubstrate", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip().endswith("0.1.0")
