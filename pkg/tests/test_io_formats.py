import json
import struct

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from caprank.io_formats import (
    CaptionRecord,
    EMBEDDING_MAGIC,
    FormatError,
    ScoreTableRecord,
    format_float,
    json_line,
    read_captions,
    read_embeddings,
    read_references,
    read_results_minimal,
    read_score_table,
    validate_scores_against_captions,
    write_captions,
    write_embeddings,
    write_results,
    write_score_table,
)
from caprank.pipeline import rank_image

import synthdata


def test_captions_round_trip(tmp_path):
    path = tmp_path / "captions.jsonl"
    records = [
        CaptionRecord("img1", ["a dog runs", "the dog sits"]),
        CaptionRecord("img2", ["caption with ünïcode"]),
    ]
    write_captions(path, records)
    back = read_captions(path)
    assert [(r.image_id, r.captions) for r in back] == [
        (r.image_id, r.captions) for r in records
    ]


def test_captions_malformed_line_reports_lineno(tmp_path):
    path = tmp_path / "captions.jsonl"
    path.write_text('{"image_id": "a", "captions": ["x"]}\nnot json\n', encoding="utf-8")
    with pytest.raises(FormatError, match=":2:"):
        read_captions(path)


def test_captions_empty_array_rejected(tmp_path):
    path = tmp_path / "captions.jsonl"
    path.write_text('{"image_id": "a", "captions": []}\n', encoding="utf-8")
    with pytest.raises(FormatError):
        read_captions(path)


def test_captions_duplicate_id_cites_both_lines(tmp_path):
    path = tmp_path / "captions.jsonl"
    lines = ['{"image_id": "img%d", "captions": ["a caption here now"]}' % i for i in range(1, 8)]
    lines[2] = '{"image_id": "dup", "captions": ["first one here now"]}'
    lines[6] = '{"image_id": "dup", "captions": ["second one here now"]}'
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(FormatError, match=r"(?s)line 3.*|:7:.*line 3"):
        read_captions(path)


def test_embeddings_round_trip(tmp_path):
    rows = np.array([[1.5, -2.25, 0.0, 3.75], [0.125, 9.0, -1.0, 2.5]], dtype=np.float32)
    write_embeddings(tmp_path / "e.emb", tmp_path / "e.idx", rows, ["img1", "img2"])
    mat = read_embeddings(tmp_path / "e.emb", tmp_path / "e.idx", kind="image")
    assert mat.dim == 4
    assert mat.ids == ["img1", "img2"]
    np.testing.assert_array_equal(mat.rows, rows)


def test_embeddings_caption_index_round_trip(tmp_path):
    rows = np.zeros((3, 2), dtype=np.float32)
    ids = [("img1", 0), ("img1", 1), ("img2", 0)]
    write_embeddings(tmp_path / "c.emb", tmp_path / "c.idx", rows, ids)
    mat = read_embeddings(tmp_path / "c.emb", tmp_path / "c.idx", kind="caption")
    assert mat.ids == ids


def test_embeddings_layout_example(tmp_path):
    # header dim=4, rows=2 -> 16 + 32 = 48 bytes
    rows = np.ones((2, 4), dtype=np.float32)
    write_embeddings(tmp_path / "e.emb", tmp_path / "e.idx", rows, ["a", "b"])
    assert (tmp_path / "e.emb").stat().st_size == 48


def test_embeddings_truncated_file_rejected(tmp_path):
    rows = np.ones((2, 4), dtype=np.float32)
    write_embeddings(tmp_path / "e.emb", tmp_path / "e.idx", rows, ["a", "b"])
    data = (tmp_path / "e.emb").read_bytes()
    (tmp_path / "e.emb").write_bytes(data[:-1])
    with pytest.raises(FormatError, match="size mismatch"):
        read_embeddings(tmp_path / "e.emb", tmp_path / "e.idx")


def test_embeddings_bad_magic_rejected(tmp_path):
    rows = np.ones((1, 2), dtype=np.float32)
    write_embeddings(tmp_path / "e.emb", tmp_path / "e.idx", rows, ["a"])
    data = bytearray((tmp_path / "e.emb").read_bytes())
    data[0] ^= 0xFF
    (tmp_path / "e.emb").write_bytes(bytes(data))
    with pytest.raises(FormatError, match="magic"):
        read_embeddings(tmp_path / "e.emb", tmp_path / "e.idx")


def test_embeddings_nan_rejected_with_position(tmp_path):
    rows = np.ones((2, 3), dtype=np.float32)
    rows[1, 2] = np.nan
    write_embeddings(tmp_path / "e.emb", tmp_path / "e.idx", rows, ["a", "b"])
    with pytest.raises(FormatError, match="row 1, column 2"):
        read_embeddings(tmp_path / "e.emb", tmp_path / "e.idx")


def test_embeddings_index_count_mismatch(tmp_path):
    rows = np.ones((2, 3), dtype=np.float32)
    write_embeddings(tmp_path / "e.emb", tmp_path / "e.idx", rows, ["a", "b"])
    (tmp_path / "e.idx").write_text("a\n", encoding="utf-8")
    with pytest.raises(FormatError, match="index lines"):
        read_embeddings(tmp_path / "e.emb", tmp_path / "e.idx")


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=120), st.integers(min_value=0, max_value=255))
def test_embeddings_fuzzed_sizes_rejected(extra_len, fill):
    import io
    import os
    import tempfile

    header = struct.pack("<8sII", EMBEDDING_MAGIC, 3, 2)
    payload = bytes([fill]) * extra_len  # wrong length unless exactly 24 bytes
    blob = header + payload
    with tempfile.TemporaryDirectory() as tmp:
        emb = os.path.join(tmp, "f.emb")
        idx = os.path.join(tmp, "f.idx")
        with open(emb, "wb") as fh:
            fh.write(blob)
        with open(idx, "w") as fh:
            fh.write("a\nb\n")
        if extra_len == 24:
            try:
                read_embeddings(emb, idx)  # may still fail on non-finite floats
            except FormatError as exc:
                assert "non-finite" in str(exc)
        else:
            with pytest.raises(FormatError):
                read_embeddings(emb, idx)


def test_score_table_round_trip_and_grouping(tmp_path):
    path = tmp_path / "scores.jsonl"
    write_score_table(
        path,
        [
            ScoreTableRecord("img1", "m1", [0.5, -0.25]),
            ScoreTableRecord("img1", "m2", [1.0, 2.0]),
            ScoreTableRecord("img2", "m1", [0.0]),
        ],
    )
    store = read_score_table(path)
    assert set(store) == {"img1", "img2"}
    np.testing.assert_array_equal(store["img1"]["m1"], [0.5, -0.25])
    np.testing.assert_array_equal(store["img2"]["m1"], [0.0])


def test_score_table_duplicate_channel_rejected(tmp_path):
    path = tmp_path / "scores.jsonl"
    line = json.dumps({"image_id": "img1", "channel": "m1", "scores": [1.0]})
    path.write_text(line + "\n" + line + "\n", encoding="utf-8")
    with pytest.raises(FormatError, match="duplicate"):
        read_score_table(path)


def test_score_table_nonfinite_rejected(tmp_path):
    path = tmp_path / "scores.jsonl"
    path.write_text('{"image_id": "a", "channel": "m", "scores": [1e999]}\n', encoding="utf-8")
    with pytest.raises(FormatError):
        read_score_table(path)


def test_score_length_validation():
    captions = [CaptionRecord("img1", ["one caption here now ok", "two caption here now ok"])]
    good = {"img1": {"m1": np.array([0.1, 0.2])}}
    validate_scores_against_captions(captions, good)
    bad = {"img1": {"m1": np.array([0.1])}}
    with pytest.raises(FormatError, match="m1"):
        validate_scores_against_captions(captions, bad)


def test_format_float_nine_significant_digits():
    assert format_float(0.123456789123) == "0.123456789"
    assert format_float(1.0) == "1.0"
    assert format_float(-2.5e-11) == "-2.5e-11"
    assert format_float(123456789012.0) == "1.23456789e+11"
    with pytest.raises(ValueError):
        format_float(float("nan"))


def test_json_line_stable_and_parseable():
    obj = {"image_id": "a", "scores": [0.1, 1.0, -3.25], "n": 4, "flag": True, "none": None}
    line = json_line(obj)
    assert json.loads(line) == {
        "image_id": "a",
        "scores": [0.1, 1.0, -3.25],
        "n": 4,
        "flag": True,
        "none": None,
    }
    assert json_line(obj) == line


def _fixture_result():
    return rank_image(
        "imgX",
        ["a red dog runs in the park", "a red dog runs in the green park", "short one"],
        {"m1": np.array([0.3, 0.2, 0.1])},
        np.array([0.9, 0.8, 0.1]),
    )


def test_write_results_minimal_three_fields(tmp_path):
    path = tmp_path / "out.jsonl"
    write_results([_fixture_result()], path, "minimal")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1
    obj = json.loads(lines[0])
    assert list(obj) == ["image_id", "selected_caption", "selected_index"]


def test_write_results_empty(tmp_path):
    path = tmp_path / "out.jsonl"
    write_results([], path, "minimal")
    assert path.read_text(encoding="utf-8") == ""


def test_write_results_byte_identical(tmp_path):
    res = _fixture_result()
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_results([res], a, "full")
    write_results([_fixture_result()], b, "full")
    assert a.read_bytes() == b.read_bytes()


def test_write_results_full_contains_channels_and_verdicts(tmp_path):
    path = tmp_path / "out.jsonl"
    write_results([_fixture_result()], path, "full")
    obj = json.loads(path.read_text(encoding="utf-8"))
    assert "combined" in obj["channels"]
    assert obj["verdicts"][2]["passed_format"] is False
    assert obj["selection_reason"] in ("clear_margin", "short_caption_swap", "degenerate_single")
    assert obj["fallback_level"] in ("none", "format_only", "full_pool")


def test_read_results_minimal_round_trip(tmp_path):
    path = tmp_path / "out.jsonl"
    write_results([_fixture_result()], path, "full")
    pairs = read_results_minimal(path)
    assert pairs[0][0] == "imgX"


def test_read_references(tmp_path):
    path = tmp_path / "refs.jsonl"
    path.write_text(
        '{"image_id": "a", "references": ["one two", "three"]}\n', encoding="utf-8"
    )
    assert read_references(path) == {"a": ["one two", "three"]}
    path.write_text('{"image_id": "a", "references": []}\n', encoding="utf-8")
    with pytest.raises(FormatError):
        read_references(path)
