import dataclasses
import random

import pytest

from gsubstrate.corpus import DOMAIN_TASK
from gsubstrate.errors import EmptyCorpusError, InvalidScheduleError, NoGenerationSourceError
from gsubstrate.forge import TASK_ROLE
from gsubstrate.schedule import (
    PARADIGMS,
    ParadigmConfig,
    TaskCatalogEntry,
    TrainingSchedule,
    build_schedule,
    interleave_stats,
    read_schedule,
    split_by_weights,
    validate_schedule,
    write_schedule,
)
from gsubstrate.synth import random_corpus

BASE_TASKS = ("sgg", "ere", "mgd", "gar")


def catalog(tasks=BASE_TASKS, **kw):
    return [TaskCatalogEntry(t, TASK_ROLE[t], **kw) for t in tasks]


def records(per_domain=5, seed=0):
    out = {}
    for rec in random_corpus(random.Random(seed), per_domain):
        out.setdefault(DOMAIN_TASK[rec.domain], []).append(rec)
    return out


RECORDS = records()


def rows(s):
    return [i.to_json() for i in s.instances]


def test_gsub_ratio_zero_equals_umt():
    a = build_schedule(catalog(), RECORDS, ParadigmConfig("G-Sub", 0.0, seed=9))
    b = build_schedule(catalog(), RECORDS, ParadigmConfig("UMT", seed=9))
    assert rows(a) == rows(b)


def test_ratio_half_over_hundred_base():
    recs = records(per_domain=25, seed=1)
    s = build_schedule(catalog(), recs, ParadigmConfig("G-Sub", 0.5, seed=3))
    interleaved = [i for i in s.instances if (i.trajectory_step or 0) >= 1]
    assert len(s.instances) - len(interleaved) == 100
    assert len(interleaved) == 50
    counts = {k: sum(1 for i in interleaved if i.task == k) for k in ("gar", "cc", "sr")}
    assert counts == split_by_weights(50, {"gar": 1 / 3, "cc": 1 / 3, "sr": 1 / 3}) == {"gar": 17, "cc": 17, "sr": 16}
    assert validate_schedule(s) == []


def test_largest_remainder_split():
    assert split_by_weights(10, {"gar": 0.5, "cc": 0.25, "sr": 0.25}) == {"gar": 5, "cc": 3, "sr": 2}
    assert split_by_weights(7, {"gar": 0.6, "cc": 0.4, "sr": 0.0}) == {"gar": 4, "cc": 3, "sr": 0}


def test_nst_over_three_tasks():
    s = build_schedule(catalog(("sgg", "ere", "gar")), RECORDS, ParadigmConfig("NST", seed=0))
    assert len(s.streams) == 3
    assert all(len({i.task for i in stream}) == 1 for stream in s.streams)
    assert validate_schedule(s) == []


@pytest.mark.parametrize("paradigm", PARADIGMS)
def test_realization_separation(paradigm):
    ratio = 0.5 if paradigm in ("NMT-I", "G-Sub") else 0.0
    s = build_schedule(catalog(), RECORDS, ParadigmConfig(paradigm, ratio, seed=2))
    real = {i.realization for i in s.instances}
    if paradigm in ("UST", "UMT", "G-Sub"):
        assert real == {"unified-text"}
    else:
        native = {"ere": "natural-language", "sgg": "xml-style", "gar": "unified-text", "mgd": "unified-text"}
        for inst in s.instances:
            if (inst.trajectory_step or 0) == 0 or inst.role == "generate":
                assert inst.realization == native[inst.task]
    assert validate_schedule(s) == []


def _gsub(**kw):
    return build_schedule(catalog(), RECORDS, ParadigmConfig("G-Sub", kw.pop("ratio", 0.5), seed=4, **kw))


def test_link_order_violation():
    s = _gsub()
    producer, consumer = s.links[0]
    stream = [i for i in s.streams[0] if i.instance_id != consumer]
    moved = next(i for i in s.streams[0] if i.instance_id == consumer)
    pos = next(k for k, i in enumerate(stream) if i.instance_id == producer)
    stream.insert(pos, moved)
    bad = TrainingSchedule(s.config, [stream], s.links, s.catalog)
    assert "link order" in {v.rule for v in validate_schedule(bad)}


def test_provenance_mismatch_violation():
    s = _gsub()
    _, consumer = s.links[0]
    stream = [
        dataclasses.replace(i, provenance={**i.provenance, "source_graph_id": "elsewhere"})
        if i.instance_id == consumer else i
        for i in s.streams[0]
    ]
    bad = TrainingSchedule(s.config, [stream], s.links, s.catalog)
    assert "provenance mismatch" in {v.rule for v in validate_schedule(bad)}
    with pytest.raises(InvalidScheduleError):
        interleave_stats(bad)


def test_consumers_sit_right_after_producers():
    s = _gsub()
    ids = [i.instance_id for i in s.instances]
    for producer, consumer in s.links:
        between = ids[ids.index(producer) + 1:ids.index(consumer)]
        assert all(">" in x for x in between)


def test_stats_examples():
    umt = build_schedule(catalog(), RECORDS, ParadigmConfig("UMT", seed=1))
    assert interleave_stats(umt)["interleaved_fraction"] == 0
    full = _gsub(ratio=1.0)
    assert interleave_stats(full)["interleaved_fraction"] == 0.5
    single = build_schedule(catalog(("gar",)), RECORDS, ParadigmConfig("NST", seed=1))
    per_task = interleave_stats(single)["per_task"]
    assert [k for k, v in per_task.items() if v] == ["gar"]


def test_random_offset_and_chains_validate():
    for placement in ("adjacent", "random-offset"):
        for depth in (1, 2, 3):
            s = _gsub(ratio=1.0, placement=placement, chain_depth=depth)
            assert validate_schedule(s) == []
            steps = {i.trajectory_step for i in s.instances if ">" in i.instance_id}
            assert max(steps) <= depth


def test_config_errors():
    with pytest.raises(ValueError):
        ParadigmConfig("UMT", 0.5)
    with pytest.raises(ValueError):
        ParadigmConfig("G-Sub", 0.5, interleave_mix={"gar": 0.5, "cc": 0.1})
    with pytest.raises(ValueError):
        ParadigmConfig("G-Sub", 1.5)
    with pytest.raises(ValueError):
        ParadigmConfig("XYZ")
    assert ParadigmConfig("g-sub").paradigm == "G-Sub"
    with pytest.raises(ValueError):
        TaskCatalogEntry("gar", "generate")


def test_data_errors():
    with pytest.raises(NoGenerationSourceError):
        build_schedule(catalog(("gar", "mgd")), RECORDS, ParadigmConfig("G-Sub", 0.5))
    with pytest.raises(EmptyCorpusError):
        build_schedule(catalog(), {**RECORDS, "sgg": []}, ParadigmConfig("UMT"))
    with pytest.raises(EmptyCorpusError):
        build_schedule([], RECORDS, ParadigmConfig("UMT"))


def test_files_round_trip_and_bytes(tmp_path):
    s = _gsub()
    write_schedule(s, tmp_path / "a")
    write_schedule(_gsub(), tmp_path / "b")
    for name in ("schedule.jsonl", "links.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    back = read_schedule(tmp_path / "a")
    assert rows(back) == rows(s) and back.links == s.links
    assert validate_schedule(back) == []
