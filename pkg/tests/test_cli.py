import json

import pytest

from bevdet import io
from bevdet.checks import REGISTRY
from bevdet.cli import main
from conftest import DATA


@pytest.fixture(scope="module")
def gen3(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen3")
    assert main(["gen", "-n", "3", "--out", str(out)]) == 0
    return out


def test_gen_zero_writes_manifest_only(tmp_path):
    assert main(["gen", "-n", "0", "--out", str(tmp_path)]) == 0
    man = io.load_manifest(tmp_path / "manifest.json")
    assert man["n_samples"] == 0
    assert [f["path"] for f in man["files"]] == ["ground_truth.json"]
    assert not list(tmp_path.glob("scene-*.json"))


def test_gen_lists_every_scene(tmp_path):
    assert main(["gen", "-n", "10", "--out", str(tmp_path)]) == 0
    man = io.load_manifest(tmp_path / "manifest.json")
    scenes = [f["path"] for f in man["files"] if f["path"].startswith("scene-")]
    assert scenes == [f"scene-{i:06d}.json" for i in range(10)]
    for f in man["files"]:
        assert io.file_sha256(tmp_path / f["path"]) == f["sha256"]


def test_gen_reproducible(gen3, tmp_path):
    assert main(["gen", "-n", "3", "--out", str(tmp_path)]) == 0
    a = io.load_manifest(gen3 / "manifest.json")
    b = io.load_manifest(tmp_path / "manifest.json")
    assert io.manifest_hash(a) == io.manifest_hash(b)


def test_gen_seed_changes_content(gen3, tmp_path):
    assert main(["gen", "-n", "3", "--seed", "1", "--out", str(tmp_path)]) == 0
    a = io.load_manifest(gen3 / "manifest.json")
    b = io.load_manifest(tmp_path / "manifest.json")
    assert a["files"] != b["files"]


def test_infer_eval_end_to_end(gen3, tmp_path, capsys):
    dets = tmp_path / "dets.json"
    assert main(["infer", str(gen3), "--out", str(dets)]) == 0
    assert sorted(io.load_boxes(dets, kind="detections")) == ["000000", "000001", "000002"]
    res = tmp_path / "eval.json"
    assert main(["eval", str(dets), str(gen3 / "ground_truth.json"), "--out", str(res)]) == 0
    doc = json.loads(res.read_text())
    assert 0 <= doc["NDS"] <= 1 and doc["kind"] == "eval_result"
    assert "AP@4" in capsys.readouterr().out


def test_eval_lists_missing_ids(gen3, tmp_path, capsys):
    dets = tmp_path / "dets.json"
    io.save_boxes(dets, {"000000": [], "999999": []}, kind="detections")
    assert main(["eval", str(dets), str(gen3 / "ground_truth.json")]) == 3
    err = capsys.readouterr().err
    assert "000001" in err and "000002" in err and "999999" in err


def test_eval_kind_mismatch_exit_code(gen3):
    gt = str(gen3 / "ground_truth.json")
    assert main(["eval", gt, gt]) == 2


def test_eval_nds_only(tmp_path):
    out = tmp_path / "nds.json"
    assert main(["eval", "--nds-only", str(DATA / "published_indicators.json"), "--out", str(out)]) == 0
    for r in json.loads(out.read_text())["rows"]:
        assert abs(r["NDS"] - r["reported_NDS"]) <= 0.0015


def test_bench_schema(tmp_path):
    out = tmp_path / "b.json"
    assert main(["bench", "--counts", "100", "5000", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())["rows"]
    assert {(r["kernel"], r["count"]) for r in rows} == {(k, n) for k in ("naive", "sorted") for n in (100, 5000)}
    for r in rows:
        assert set(r) == {"kernel", "count", "ns", "max_error", "speedup"}
        assert r["max_error"] < 1e-6 and r["ns"] > 0


def test_bench_prints_json_without_out(capsys):
    assert main(["bench", "--counts", "50"]) == 0
    last = capsys.readouterr().out.strip().splitlines()[-1]
    assert json.loads(last)["kind"] == "bench"


def test_bench_rejects_bad_count():
    assert main(["bench", "--counts", "0"]) == 2


def test_check_list(capsys):
    assert main(["check", "--list"]) == 0
    lines = capsys.readouterr().out.split()
    assert len(lines) == len(REGISTRY) and "geometry.augmented_unprojection" in lines


def test_check_single_trial(tmp_path):
    out = tmp_path / "c.json"
    assert main(["check", "--trials", "1", "--seed", "7", "--only", "augmented_unprojection", "codec_roundtrip", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["seed"] == 7 and {r["name"] for r in doc["results"]} == {"augmented_unprojection", "codec_roundtrip"}
    assert all(r["trials"] == 1 and r["failures"] == [] for r in doc["results"])


def test_check_corrupted_inverse_fails(tmp_path, capsys):
    out = tmp_path / "c.json"
    assert main(["check", "--trials", "3", "--only", "augmented_unprojection", "--corrupt-inverse", "--out", str(out)]) == 1
    res = json.loads(out.read_text())["results"][0]
    assert len(res["failures"]) == 3 and res["failures"][0][0] == 0
    assert "FAIL" in capsys.readouterr().out


def test_check_unknown_name():
    assert main(["check", "--only", "nope"]) == 2


def test_bad_config_exit_code(tmp_path):
    (tmp_path / "c.yaml").write_text("bogus: 1\n")
    assert main(["check", "--list", "--config", str(tmp_path / "c.yaml")]) == 2


def test_unwritable_output_exit_code(tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert main(["gen", "-n", "0", "--out", str(blocker / "x")]) == 1


def test_jobs_validated(tmp_path):
    assert main(["gen", "-n", "0", "--jobs", "0", "--out", str(tmp_path)]) == 2


def test_color_env(monkeypatch, capsys):
    monkeypatch.setenv("BEVDET_COLOR", "1")
    main(["check", "--trials", "1", "--only", "nds_in_range"])
    assert "\033[32mPASS" in capsys.readouterr().out
    monkeypatch.setenv("BEVDET_COLOR", "0")
    main(["check", "--trials", "1", "--only", "nds_in_range"])
    assert "\033[" not in capsys.readouterr().out
