import json

import pytest

from pobkit.manifest import (
    ManifestError,
    PairRecord,
    read_manifest,
    read_phrase_rows,
    sidecar_path,
    write_manifest,
)


def make_record(i=0, label=False):
    anchor = f"turn the light {i}"
    query = anchor if label else f"burn the light {i}"
    return PairRecord(
        id=f"rec-{i}",
        anchor_text=anchor,
        query_text=query,
        anchor_phonemes=("T", "ER", "N"),
        query_phonemes=("B", "ER", "N") if not label else ("T", "ER", "N"),
        first_diff_index=0 if not label else 3,
        label=label,
        source="pob-spark",
    )


def test_round_trip_identity(tmp_path):
    records = [make_record(0), make_record(1, label=True), make_record(2)]
    meta = {"seed": 7, "l_max": 25}
    path = tmp_path / "pairs.jsonl"
    write_manifest(records, meta, path)
    got, got_meta = read_manifest(path)
    assert got == records
    assert got_meta["seed"] == 7
    assert got_meta["format_version"] == 1


def test_write_is_deterministic(tmp_path):
    records = [make_record(i) for i in range(4)]
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_manifest(records, {"seed": 1}, p1)
    write_manifest(records, {"seed": 1}, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert sidecar_path(p1).read_bytes() == sidecar_path(p2).read_bytes()


def test_empty_manifest_round_trips(tmp_path):
    path = tmp_path / "empty.jsonl"
    write_manifest([], {"seed": 0}, path)
    records, meta = read_manifest(path)
    assert records == []
    assert meta["format_version"] == 1


def test_missing_sidecar_gives_none_meta(tmp_path):
    path = tmp_path / "pairs.jsonl"
    write_manifest([make_record()], {"seed": 0}, path)
    sidecar_path(path).unlink()
    records, meta = read_manifest(path)
    assert len(records) == 1
    assert meta is None


def test_missing_field_names_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = json.loads(json.dumps(make_record().__dict__, default=list))
    bad = dict(good)
    del bad["label"]
    path.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n")
    with pytest.raises(ManifestError, match="label"):
        read_manifest(path)
    try:
        read_manifest(path)
    except ManifestError as err:
        assert err.line_number == 2


def test_label_must_be_boolean(tmp_path):
    path = tmp_path / "bad.jsonl"
    obj = json.loads(json.dumps(make_record().__dict__, default=list))
    obj["label"] = 0
    path.write_text(json.dumps(obj) + "\n")
    with pytest.raises(ManifestError, match="label"):
        read_manifest(path)


def test_unknown_format_version_rejected(tmp_path):
    path = tmp_path / "pairs.jsonl"
    write_manifest([make_record()], {"seed": 0}, path)
    meta = json.loads(sidecar_path(path).read_text())
    meta["format_version"] = 99
    sidecar_path(path).write_text(json.dumps(meta))
    with pytest.raises(ManifestError, match="format_version"):
        read_manifest(path)


def test_label_text_invariant_enforced_on_write(tmp_path):
    rec = PairRecord(
        id="x",
        anchor_text="turn the light on",
        query_text="turn the light off",
        anchor_phonemes=("T",),
        query_phonemes=("T",),
        first_diff_index=0,
        label=True,
        source="pob-spark",
    )
    with pytest.raises(ManifestError, match="label"):
        write_manifest([rec], {}, tmp_path / "x.jsonl")


def test_failed_write_leaves_no_file(tmp_path):
    rec = make_record()
    bad = PairRecord(
        id="", anchor_text="a", query_text="b",
        anchor_phonemes=("T",), query_phonemes=("B",),
        first_diff_index=0, label=False, source="s",
    )
    path = tmp_path / "pairs.jsonl"
    with pytest.raises(ManifestError):
        write_manifest([rec, bad], {}, path)
    assert not path.exists()


def test_read_phrase_rows_csv(tmp_path):
    path = tmp_path / "rows.csv"
    path.write_text(
        "anchor,query,label\n"
        "turn the light on,turn the light on,1\n"
        "turn the light on,burn the light on,0\n"
    )
    rows = read_phrase_rows(path)
    assert rows == [
        (("turn", "the", "light", "on"), ("turn", "the", "light", "on"), True),
        (("turn", "the", "light", "on"), ("burn", "the", "light", "on"), False),
    ]


def test_read_phrase_rows_jsonl(tmp_path):
    path = tmp_path / "rows.jsonl"
    path.write_text(
        json.dumps({"anchor_text": "red hat", "query_text": "red hat", "label": True})
        + "\n"
    )
    rows = read_phrase_rows(path)
    assert rows == [(("red", "hat"), ("red", "hat"), True)]
