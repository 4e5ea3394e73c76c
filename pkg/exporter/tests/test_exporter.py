"""Unit tests for the exporter package itself (no consumer involved)."""

import io
import json
import struct

import numpy as np
import pytest

from embridge import (
    AnnotationError,
    AugmentationJob,
    DecodeError,
    EncoderError,
    ExportJob,
    FormatError,
    GenerationError,
    HttpCompletionClient,
    IoError,
    MockClient,
    MockEncoder,
    ReplayClient,
    ReplayError,
    VideoAnnotation,
    build_user_prompt,
    fallback_caption,
    frame_indices,
    load_annotations,
    load_transcript,
    read_matrix,
    register_encoder,
    resolve_encoder,
    run_augment,
    run_extract,
    write_matrix,
)
from embridge.augment import MAX_ATTEMPTS, SYSTEM_PROMPT
from embridge.cli import main
from embridge.encoders import _unit_vector


def _video(vid="v1", captions=("a", "b", "c"), n_frames=64, **kw):
    return VideoAnnotation(id=vid, captions=tuple(captions), source_frames=n_frames, **kw)


# ---------------------------------------------------------------- sampling

def test_frame_indices_64_to_32_takes_every_second_frame():
    assert frame_indices(64, 32) == list(range(0, 64, 2))


def test_frame_indices_hand_cases():
    assert frame_indices(10, 3) == [0, 3, 6]
    assert frame_indices(5, 5) == [0, 1, 2, 3, 4]
    # shorter sources repeat frames instead of failing
    assert frame_indices(3, 6) == [0, 0, 1, 1, 2, 2]
    assert frame_indices(1, 4) == [0, 0, 0, 0]


def test_frame_indices_matches_floor_rule():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n_src = int(rng.integers(1, 500))
        n_tgt = int(rng.integers(1, 200))
        got = frame_indices(n_src, n_tgt)
        assert got == [i * n_src // n_tgt for i in range(n_tgt)]
        assert all(0 <= i < n_src for i in got)
        assert got == sorted(got)


def test_frame_indices_rejects_empty():
    with pytest.raises(DecodeError):
        frame_indices(0, 4)
    with pytest.raises(AnnotationError):
        frame_indices(4, 0)


# ---------------------------------------------------------------- embfile

def test_single_value_file_is_24_bytes(tmp_path):
    path = tmp_path / "one.emb"
    write_matrix(np.array([[1.0]]), path)
    blob = path.read_bytes()
    assert len(blob) == 24
    assert blob[:8] == b"SAILEMB1"
    assert blob[8:20] == struct.pack("<III", 1, 1, 1)
    assert blob[20:] == struct.pack("<f", 1.0)


def test_round_trip_is_bitwise(tmp_path):
    rng = np.random.default_rng(11)
    for i in range(20):
        m = rng.standard_normal((int(rng.integers(0, 9)), int(rng.integers(1, 7))))
        m = m.astype(np.float32).astype(np.float64)
        path = tmp_path / f"m{i}.emb"
        write_matrix(m, path)
        assert np.array_equal(read_matrix(path), m)


def test_write_rejections(tmp_path):
    with pytest.raises(FormatError):
        write_matrix(np.zeros(3), tmp_path / "x.emb")
    with pytest.raises(FormatError):
        write_matrix(np.zeros((2, 0)), tmp_path / "x.emb")
    with pytest.raises(FormatError):
        write_matrix(np.array([[np.nan]]), tmp_path / "x.emb")
    with pytest.raises(FormatError):
        write_matrix(np.array([[1e39]]), tmp_path / "x.emb")  # overflows float32


def test_read_rejections(tmp_path):
    good = b"SAILEMB1" + struct.pack("<III", 1, 2, 1) + struct.pack("<ff", 1.0, 2.0)
    cases = [
        b"XXILEMB1" + good[8:],
        b"SAILEMB1" + struct.pack("<III", 2, 2, 1) + good[20:],
        good[:12],
        good[:-4],
        good + b"\x00",
    ]
    for i, blob in enumerate(cases):
        path = tmp_path / f"bad{i}.emb"
        path.write_bytes(blob)
        with pytest.raises(FormatError):
            read_matrix(path)
    with pytest.raises(IoError):
        read_matrix(tmp_path / "missing.emb")


# ------------------------------------------------------------- annotations

def test_load_annotations_round_trip(tmp_path):
    doc = {
        "videos": [
            {
                "id": "v1",
                "captions": ["a", "b"],
                "n_frames": 8,
                "duration": 10.0,
                "timestamps": [[0.0, 4.0], [5.0, 9.0]],
            },
            {"id": "v2", "captions": []},
        ]
    }
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(doc))
    videos = load_annotations(path)
    assert [v.id for v in videos] == ["v1", "v2"]
    assert videos[0].timestamps == ((0.0, 4.0), (5.0, 9.0))
    assert videos[0].duration == 10.0
    assert videos[1].captions == ()
    assert videos[1].source_frames is None


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d["videos"].append(d["videos"][0]),  # duplicate id
        lambda d: d["videos"][0].update(timestamps=[[0.0, 4.0]]),  # count mismatch
        lambda d: d["videos"][0].update(timestamps=[[4.0, 4.0], [5.0, 9.0]]),
        lambda d: d["videos"][0].update(timestamps=[[5.0, 9.0], [0.0, 4.0]]),  # unsorted
        lambda d: d["videos"][0].update(duration=-1.0),
        lambda d: d["videos"][0].update(n_frames=-3),
        lambda d: d["videos"][0].update(id=""),
        lambda d: d.pop("videos"),
    ],
)
def test_load_annotations_rejects_invalid(tmp_path, mutate):
    doc = {
        "videos": [
            {
                "id": "v1",
                "captions": ["a", "b"],
                "n_frames": 8,
                "duration": 10.0,
                "timestamps": [[0.0, 4.0], [5.0, 9.0]],
            }
        ]
    }
    mutate(doc)
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(AnnotationError):
        load_annotations(path)


def test_load_annotations_io_and_json_errors(tmp_path):
    with pytest.raises(IoError):
        load_annotations(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{nope")
    with pytest.raises(AnnotationError):
        load_annotations(broken)


# ---------------------------------------------------------------- encoders

def test_mock_encoder_is_deterministic_and_unit_norm():
    enc = MockEncoder(dim=12)
    a = enc.encode_texts(["hello", "world"])
    b = enc.encode_texts(["hello", "world"])
    assert np.array_equal(a, b)
    assert a.shape == (2, 12)
    assert np.linalg.norm(a, axis=1) == pytest.approx(1.0, abs=1e-12)
    # distinct keys give distinct vectors
    assert not np.array_equal(a[0], a[1])


def test_mock_encoder_frames_keyed_by_source_index():
    enc = MockEncoder(dim=6)
    v = _video(n_frames=64)
    frames = enc.encode_frames(v, [0, 2, 4])
    assert np.array_equal(frames[1], _unit_vector("v1/frame/2", 6))


def test_mock_encoder_undecodable():
    enc = MockEncoder()
    with pytest.raises(DecodeError):
        enc.video_frame_count(_video(n_frames=None))
    with pytest.raises(DecodeError):
        enc.video_frame_count(_video(n_frames=0))


def test_resolve_encoder():
    assert isinstance(resolve_encoder("mock", 4), MockEncoder)
    with pytest.raises(EncoderError):
        resolve_encoder("clip-vit-l/14")
    register_encoder("unit-test-enc", lambda dim: MockEncoder(dim))
    assert resolve_encoder("unit-test-enc", 5).dim == 5
    with pytest.raises(EncoderError):
        MockEncoder(dim=0)


# ----------------------------------------------------------------- extract

def test_extract_writes_manifest_and_skips(tmp_path):
    videos = [
        _video("ok", ("a", "b"), 64),
        _video("nocaps", (), 64),
        _video("broken", ("x", "y"), None),
    ]
    job = ExportJob(videos=videos, frames_per_video=32, embed_dim=8, out_dir=tmp_path)
    report = run_extract(job)
    assert report.written == ["ok"]
    assert ("nocaps", "no captions") in report.skipped
    assert any(vid == "broken" for vid, _ in report.skipped)

    doc = json.loads(report.manifest_path.read_text())
    assert doc["schema_version"] == 1
    assert doc["n_frames"] == 32
    assert doc["embed_dim"] == 8
    assert [v["id"] for v in doc["videos"]] == ["ok"]
    frames = read_matrix(tmp_path / doc["videos"][0]["frames"])
    assert frames.shape == (32, 8)
    # row i of a 64-frame source is the embedding of source frame 2i
    expected = _unit_vector("ok/frame/6", 8).astype(np.float32).astype(np.float64)
    assert np.array_equal(frames[3], expected)


def test_extract_normalizes_timestamps(tmp_path):
    v = _video(
        "t", ("a", "b"), 16,
        duration=120.0, timestamps=((0.0, 30.0), (40.0, 80.0)),
    )
    report = run_extract(ExportJob(videos=[v], frames_per_video=4, out_dir=tmp_path))
    doc = json.loads(report.manifest_path.read_text())
    assert doc["videos"][0]["gt_segments"] == [[0.0, 0.25], [1 / 3, 2 / 3]]


def test_extract_rejects_timestamp_past_duration(tmp_path):
    v = _video("t", ("a",), 16, duration=10.0, timestamps=((0.0, 11.0),))
    with pytest.raises(AnnotationError):
        run_extract(ExportJob(videos=[v], frames_per_video=4, out_dir=tmp_path))


def test_extract_with_nothing_exportable(tmp_path):
    with pytest.raises(AnnotationError):
        run_extract(ExportJob(videos=[_video("x", ())], frames_per_video=4, out_dir=tmp_path))
    with pytest.raises(AnnotationError):
        run_extract(ExportJob(videos=[], frames_per_video=4, out_dir=tmp_path))
    with pytest.raises(AnnotationError):
        run_extract(ExportJob(videos=[_video()], frames_per_video=0, out_dir=tmp_path))


# --------------------------------------------------------------------- llm

def test_mock_client_modes():
    echo = MockClient(response="fixed")
    assert echo.complete("s", "u", 50, 0.7) == "fixed"
    derived = MockClient()
    one = derived.complete("s", "u", 50, 0.7)
    assert one == MockClient().complete("s", "u", 50, 0.7)
    assert one != MockClient().complete("s", "other", 50, 0.7)
    flaky = MockClient(failures=2)
    with pytest.raises(GenerationError):
        flaky.complete("s", "u", 50, 0.7)
    with pytest.raises(GenerationError):
        flaky.complete("s", "u", 50, 0.7)
    assert isinstance(flaky.complete("s", "u", 50, 0.7), str)


def test_http_client_payload_and_errors():
    seen = {}

    def fake_opener(request, timeout):
        seen["url"] = request.full_url
        seen["body"] = json.loads(request.data.decode("utf-8"))
        return io.BytesIO(json.dumps({"text": "reply"}).encode())

    client = HttpCompletionClient("http://llm.local/v1", model="m-1", opener=fake_opener)
    assert client.complete("sys", "usr", 50, 0.7) == "reply"
    assert seen["url"] == "http://llm.local/v1"
    assert seen["body"] == {
        "model": "m-1",
        "system": "sys",
        "user": "usr",
        "max_new_tokens": 50,
        "temperature": 0.7,
    }

    def no_text(request, timeout):
        return io.BytesIO(b"{}")

    with pytest.raises(GenerationError):
        HttpCompletionClient("http://x", opener=no_text).complete("s", "u", 50, 0.7)

    def boom(request, timeout):
        raise OSError("connection refused")

    with pytest.raises(GenerationError):
        HttpCompletionClient("http://x", opener=boom).complete("s", "u", 50, 0.7)


# ----------------------------------------------------------------- augment

def _exported(tmp_path, videos=None):
    videos = videos or [_video("v1", ("a", "b", "c"), 64), _video("v2", ("d", "e"), 48)]
    job = ExportJob(videos=videos, frames_per_video=8, embed_dim=8, out_dir=tmp_path)
    report = run_extract(job)
    captions = {v.id: list(v.captions) for v in videos}
    return report.manifest_path, captions


def _augjob(manifest, captions, **kw):
    return AugmentationJob(manifest_path=manifest, captions_by_video=captions, embed_dim=8, **kw)


def test_augment_counts_and_manifest(tmp_path):
    manifest, captions = _exported(tmp_path)
    report = run_augment(_augjob(manifest, captions), MockClient())
    assert report.pairs == 3
    assert report.fallbacks == []
    doc = json.loads(manifest.read_text())
    by_id = {v["id"]: v for v in doc["videos"]}
    syn1 = read_matrix(tmp_path / by_id["v1"]["synthetic"])
    syn2 = read_matrix(tmp_path / by_id["v2"]["synthetic"])
    assert syn1.shape == (2, 8)
    assert syn2.shape == (1, 8)


def test_augment_transcript_records(tmp_path):
    manifest, captions = _exported(tmp_path)
    report = run_augment(_augjob(manifest, captions), MockClient(response="gen"))
    records = load_transcript(report.transcript_path)
    assert len(records) == 3
    first = records[0]
    assert first["video"] == "v1"
    assert first["pair"] == [0, 1]
    assert first["system"] == SYSTEM_PROMPT
    assert first["user"] == build_user_prompt("a", "b")
    assert first["response"] == "gen"
    assert first["attempts"] == 1
    assert first["fallback"] is False
    assert first["model"] == "qwen3-8b"
    assert first["max_new_tokens"] == 50
    assert first["temperature"] == 0.7


def test_augment_retries_then_succeeds(tmp_path):
    manifest, captions = _exported(tmp_path, [_video("v", ("a", "b"), 8)])
    client = MockClient(response="late", failures=MAX_ATTEMPTS - 1)
    report = run_augment(_augjob(manifest, captions), client)
    rec = load_transcript(report.transcript_path)[0]
    assert rec["attempts"] == MAX_ATTEMPTS
    assert rec["fallback"] is False
    assert rec["response"] == "late"
    assert report.fallbacks == []


def test_augment_falls_back_after_exhausting_retries(tmp_path):
    manifest, captions = _exported(tmp_path, [_video("v", ("a", "b"), 8)])
    report = run_augment(_augjob(manifest, captions), MockClient(failures=99))
    rec = load_transcript(report.transcript_path)[0]
    assert rec["fallback"] is True
    assert rec["attempts"] == MAX_ATTEMPTS
    assert rec["response"] == fallback_caption("a", "b") == "transition between: a; b"
    assert report.fallbacks == [("v", 0)]
    # the fallback text is embedded like any other caption
    doc = json.loads(manifest.read_text())
    syn = read_matrix(tmp_path / doc["videos"][0]["synthetic"])
    assert syn.shape == (1, 8)


def test_augment_skips_single_caption_video(tmp_path):
    manifest, captions = _exported(
        tmp_path, [_video("v1", ("a", "b"), 8), _video("solo", ("only",), 8)]
    )
    report = run_augment(_augjob(manifest, captions), MockClient())
    assert report.pairs == 1
    assert ("solo", "fewer than two captions") in report.skipped
    doc = json.loads(manifest.read_text())
    by_id = {v["id"]: v for v in doc["videos"]}
    assert "synthetic" not in by_id["solo"]
    assert "synthetic" in by_id["v1"]


def test_augment_validates_inputs(tmp_path):
    manifest, captions = _exported(tmp_path)
    with pytest.raises(AnnotationError, match="no caption texts"):
        run_augment(_augjob(manifest, {"v1": ["a", "b", "c"]}), MockClient())
    short = dict(captions)
    short["v1"] = ["a", "b"]  # file holds 3 rows
    with pytest.raises(AnnotationError, match="caption embeddings"):
        run_augment(_augjob(manifest, short), MockClient())
    with pytest.raises(IoError):
        run_augment(_augjob(tmp_path / "missing.json", captions), MockClient())


def test_user_prompt_substitution_keeps_braces_literal():
    prompt = build_user_prompt("has {caption2} inside", "plain")
    assert "has {caption2} inside" in prompt
    assert prompt.count("plain") == 1


# ------------------------------------------------------------------ replay

def test_replay_reproduces_success_retry_and_fallback(tmp_path):
    manifest, captions = _exported(tmp_path, [_video("v", ("a", "b", "c"), 8)])
    # pair 0 succeeds on attempt 2, pair 1 falls back
    client = MockClient(response="ok", failures=1)
    flaky = _augjob(manifest, captions)
    first = run_augment(flaky, client)
    rec0 = load_transcript(first.transcript_path)[0]
    assert rec0["attempts"] == 2

    manifest2, _ = _exported(tmp_path / "again", [_video("v", ("a", "b", "c"), 8)])
    replay = run_augment(
        _augjob(manifest2, captions, transcript_path=tmp_path / "replayed.jsonl"),
        ReplayClient(first.transcript_path),
    )
    a = first.transcript_path.read_bytes()
    b = replay.transcript_path.read_bytes()
    assert a == b


def test_replay_divergence_and_exhaustion(tmp_path):
    manifest, captions = _exported(tmp_path, [_video("v", ("a", "b"), 8)])
    report = run_augment(_augjob(manifest, captions), MockClient())
    client = ReplayClient(report.transcript_path)
    with pytest.raises(ReplayError):
        client.complete(SYSTEM_PROMPT, "different prompt", 50, 0.7)
    good = ReplayClient(report.transcript_path)
    good.complete(SYSTEM_PROMPT, build_user_prompt("a", "b"), 50, 0.7)
    with pytest.raises(ReplayError):
        good.complete(SYSTEM_PROMPT, build_user_prompt("a", "b"), 50, 0.7)
    with pytest.raises(IoError):
        ReplayClient(tmp_path / "missing.jsonl")


def test_replayed_fallback_keeps_failing(tmp_path):
    manifest, captions = _exported(tmp_path, [_video("v", ("a", "b"), 8)])
    run_augment(_augjob(manifest, captions), MockClient(failures=99))
    manifest2, _ = _exported(tmp_path / "again", [_video("v", ("a", "b"), 8)])
    replay = run_augment(
        _augjob(manifest2, captions, transcript_path=tmp_path / "replayed.jsonl"),
        ReplayClient(tmp_path / "transcript.jsonl"),
    )
    assert replay.fallbacks == [("v", 0)]
    assert (tmp_path / "transcript.jsonl").read_bytes() == replay.transcript_path.read_bytes()


# --------------------------------------------------------------------- cli

def _write_annotations(tmp_path):
    doc = {
        "videos": [
            {"id": "v1", "captions": ["a", "b"], "n_frames": 64},
            {"id": "v2", "captions": ["c", "d", "e"], "n_frames": 48},
        ]
    }
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(doc))
    return path


def test_cli_extract_and_augment(tmp_path):
    ann = _write_annotations(tmp_path)
    out = tmp_path / "out"
    assert main([
        "extract", "--annotations", str(ann), "--out-dir", str(out),
        "--frames-per-video", "8", "--embed-dim", "8",
    ]) == 0
    assert main([
        "augment", "--annotations", str(ann),
        "--manifest", str(out / "manifest.json"), "--mock", "--embed-dim", "8",
    ]) == 0
    doc = json.loads((out / "manifest.json").read_text())
    assert all("synthetic" in v for v in doc["videos"])
    assert (out / "transcript.jsonl").exists()


def test_cli_dataset_presets(tmp_path):
    ann = _write_annotations(tmp_path)
    out = tmp_path / "an"
    assert main([
        "extract", "--annotations", str(ann), "--out-dir", str(out),
        "--dataset", "activitynet",
    ]) == 0
    assert json.loads((out / "manifest.json").read_text())["n_frames"] == 32


def test_cli_replay_round_trip(tmp_path):
    ann = _write_annotations(tmp_path)
    out = tmp_path / "out"
    main(["extract", "--annotations", str(ann), "--out-dir", str(out),
          "--frames-per-video", "8"])
    main(["augment", "--annotations", str(ann),
          "--manifest", str(out / "manifest.json"), "--mock"])
    out2 = tmp_path / "out2"
    main(["extract", "--annotations", str(ann), "--out-dir", str(out2),
          "--frames-per-video", "8"])
    assert main([
        "augment", "--annotations", str(ann),
        "--manifest", str(out2 / "manifest.json"),
        "--replay-from", str(out / "transcript.jsonl"),
    ]) == 0
    assert (out / "transcript.jsonl").read_bytes() == (out2 / "transcript.jsonl").read_bytes()


def test_cli_error_codes(tmp_path):
    ann = _write_annotations(tmp_path)
    out = tmp_path / "out"
    # no frame budget
    assert main(["extract", "--annotations", str(ann), "--out-dir", str(out)]) == 2
    # unknown encoder
    assert main([
        "extract", "--annotations", str(ann), "--out-dir", str(out),
        "--frames-per-video", "8", "--encoder", "nope",
    ]) == 2
    # no client selected
    assert main([
        "augment", "--annotations", str(ann), "--manifest", str(out / "m.json"),
    ]) == 2
    # missing files are data errors
    assert main([
        "extract", "--annotations", str(tmp_path / "missing.json"),
        "--out-dir", str(out), "--frames-per-video", "8",
    ]) == 3
    main(["extract", "--annotations", str(ann), "--out-dir", str(out),
          "--frames-per-video", "8"])
    assert main([
        "augment", "--annotations", str(ann),
        "--manifest", str(tmp_path / "missing.json"), "--mock",
    ]) == 3
    with pytest.raises(SystemExit) as err:
        main(["extract", "--bogus"])
    assert err.value.code == 2
