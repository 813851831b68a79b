import json
import os
from pathlib import Path

import pytest

import uiscout

FIXTURES = Path(os.environ.get("UISCOUT_FIXTURES", Path(__file__).resolve().parents[2] / "fixtures"))


def env(name):
    return FIXTURES / "envs" / name / f"{name}.json"


def test_iou_and_threshold():
    assert uiscout.iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert uiscout.iou((0, 0, 10, 10), (5, 0, 10, 10)) == pytest.approx(50 / 150)
    assert uiscout.grounding_correct((0, 0, 100, 31), (0, 0, 100, 100))
    assert not uiscout.grounding_correct((0, 0, 100, 30), (0, 0, 100, 100))


def test_fingerprint_golden():
    els = [
        {"name": "Save", "kind": "icon", "bbox": (10, 20, 12, 12)},
        {"name": "Open file", "kind": "text", "bbox": (40, 22, 55, 9)},
        {"name": "Bold", "kind": "icon", "bbox": (4, 4, 12, 12)},
    ]
    assert uiscout.state_fingerprint(els) == "da56039bdce7d9978bf08e04fc240e5384a451d3eb0bb82ee72d4d70cab64e79"
    assert uiscout.state_fingerprint(els[::-1]) == uiscout.state_fingerprint(els)


def test_explore_chain_and_dataset(tmp_path):
    run = uiscout.explore(env("chain3"), budget=10, seed=0, out=tmp_path / "ds")
    assert run["metrics"]["unique_actions"] == 2
    assert run["metrics"]["state_coverage"] == 1.0
    assert run["completed"]
    assert run["samples"] == 3
    assert (tmp_path / "ds" / "manifest.json").exists()

    again = uiscout.explore(env("chain3"), budget=10, seed=0)
    assert again["run_log"] == run["run_log"]


def test_parse_rendered_screen(tmp_path):
    run = uiscout.explore(env("office_mini"), budget=0, out=tmp_path / "ds")
    assert run["samples"] == 1
    annotation = json.loads((tmp_path / "ds" / "annotations" / "s00000.json").read_text())
    texts = [{"name": e["name"], "bbox": e["bbox"]} for e in annotation["elements"] if e["kind"] == "text"]
    parsed = uiscout.parse(tmp_path / "ds" / "screens" / "s00000.png", FIXTURES / "envs" / "office_mini" / "templates", texts)
    assert parsed["fingerprint"] == annotation["fingerprint"]
    with pytest.raises(Exception):
        uiscout.parse(tmp_path / "missing.png", FIXTURES / "envs" / "office_mini" / "templates")


def test_instructions_and_grounding(tmp_path):
    ds = tmp_path / "ds"
    uiscout.explore(env("office_mini"), budget=40, seed=1, out=ds)
    result = uiscout.gen_instructions(ds, eval_fraction=0.0)
    samples = result["samples"]
    assert {s["query_type"] for s in samples} == set(uiscout.QUERY_TYPES)
    instr = tmp_path / "instructions.jsonl"
    instr.write_text("".join(json.dumps(s) + "\n" for s in samples))
    preds = tmp_path / "preds.jsonl"
    preds.write_text(
        "".join(json.dumps({"sample_id": s["sample_id"], "query_id": s["query_id"], "bbox": s["gt_bbox"]}) + "\n" for s in samples)
    )
    r = uiscout.evaluate_grounding(preds, instr)
    assert r["overall"]["accuracy"] == 1.0
    preds.write_text("garbage\n")
    with pytest.raises(uiscout.PredictionParseError):
        uiscout.evaluate_grounding(preds, instr)


def test_bench_small():
    report = uiscout.bench([env("unique_tree")], seeds=[0, 1], budget=60, jobs=2)
    assert len(report["cells"]) == 8
    assert report["failed_cells"] == 0
    by = {a["strategy"]: a for a in report["aggregates"]}
    assert by["frontier_auto"]["mean_element_coverage"] >= by["random_walk_ocr"]["mean_element_coverage"]


def test_oracle_and_errors(tmp_path):
    o = uiscout.oracle(env("unique_tree"))
    assert len(o["reachable_states"]) == 25
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    with pytest.raises(uiscout.EnvLoadError):
        uiscout.oracle(bad)
