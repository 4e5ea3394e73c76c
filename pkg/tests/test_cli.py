"""End-to-end CLI tests, in process via main(argv).

Output capture is disabled project-wide, so assertions target exit
codes and the files each command writes, never stdout.
"""

import json
import struct

import numpy as np
import pytest

from maskalign.cli import main
from maskalign.dataio import (
    MAGIC,
    RunConfig,
    load_dataset,
    load_runconfig,
    read_params_json,
    save_runconfig,
)


def _simulate(out_dir, extra=()):
    rc = main(
        [
            "simulate",
            "--out-dir", str(out_dir),
            "--n-videos", "3",
            "--n-frames", "16",
            "--embed-dim", "8",
            "--events-min", "2",
            "--events-max", "2",
            "--seed", "0",
            *extra,
        ]
    )
    assert rc == 0
    return out_dir / "manifest.json"


def _train(manifest, out_dir, extra=()):
    return main(
        [
            "train",
            "--manifest", str(manifest),
            "--out-dir", str(out_dir),
            "--steps", "3",
            "--batch-size", "2",
            "--lr", "0.01",
            *extra,
        ]
    )


def test_simulate_writes_a_loadable_dataset(tmp_path):
    manifest = _simulate(tmp_path / "data")
    ds = load_dataset(manifest)
    assert len(ds.videos) == 3
    assert ds.n_frames == 16 and ds.embed_dim == 8
    for v in ds.videos:
        assert v.n_events == 2
        assert v.synthetic is not None and v.synthetic.shape == (1, 8)
        assert v.gt_segments is not None and v.gt_segments_all is not None


def test_simulate_is_deterministic_across_directories(tmp_path):
    a = _simulate(tmp_path / "a")
    b = _simulate(tmp_path / "b")
    assert a.read_text() == b.read_text()
    for emb in sorted((tmp_path / "a").glob("*.emb")):
        assert emb.read_bytes() == (tmp_path / "b" / emb.name).read_bytes()


def test_simulate_keep_ratio_sparsifies_annotations(tmp_path):
    manifest = _simulate(
        tmp_path / "half",
        extra=("--events-min", "4", "--events-max", "4", "--keep-ratio", "0.5"),
    )
    ds = load_dataset(manifest)
    for v in ds.videos:
        assert v.n_events == 2  # ceil(0.5 * 4)
        assert len(v.gt_segments_all) == 4


def test_simulate_no_synthetic_flag(tmp_path):
    manifest = _simulate(tmp_path / "plain", extra=("--no-synthetic",))
    assert all(v.synthetic is None for v in load_dataset(manifest).videos)


def test_train_writes_config_records_and_params(tmp_path):
    manifest = _simulate(tmp_path / "data")
    out = tmp_path / "run"
    assert _train(manifest, out) == 0
    cfg = load_runconfig(out / "runconfig.txt")
    assert cfg.steps == 3 and cfg.lr == 0.01 and cfg.batch_size == 2
    records = (out / "records.jsonl").read_text().splitlines()
    assert len(records) == 3
    assert json.loads(records[0])["step"] == 0
    params = read_params_json(out / "params.json")
    ds = load_dataset(manifest)
    assert [p[0] for p in params] == [v.video_id for v in ds.videos]
    for _, centers, widths in params:
        assert len(centers) == len(widths) == 2
        assert all(0.0 < c < 1.0 for c in centers)
        assert all(0.0 < w <= 1.0 for w in widths)


def test_train_precedence_defaults_config_flags(tmp_path):
    manifest = _simulate(tmp_path / "data")
    cfg_path = tmp_path / "base.txt"
    save_runconfig(RunConfig(lr=0.002, steps=4, batch_size=2), cfg_path)

    out1 = tmp_path / "from-config"
    assert main(
        ["train", "--manifest", str(manifest), "--out-dir", str(out1),
         "--config", str(cfg_path)]
    ) == 0
    got = load_runconfig(out1 / "runconfig.txt")
    assert got.lr == 0.002 and got.steps == 4

    out2 = tmp_path / "flag-wins"
    assert main(
        ["train", "--manifest", str(manifest), "--out-dir", str(out2),
         "--config", str(cfg_path), "--lr", "0.005"]
    ) == 0
    got = load_runconfig(out2 / "runconfig.txt")
    assert got.lr == 0.005 and got.steps == 4


def test_no_sim_also_disables_inverse(tmp_path):
    manifest = _simulate(tmp_path / "data")
    out = tmp_path / "nosim"
    assert _train(manifest, out, extra=("--no-sim", "--lambda-div", "1.0")) == 0
    cfg = load_runconfig(out / "runconfig.txt")
    assert cfg.sim is False and cfg.inverse is False

    out = tmp_path / "nosim-inv"
    assert _train(manifest, out, extra=("--no-sim", "--inverse")) == 0
    cfg = load_runconfig(out / "runconfig.txt")
    assert cfg.sim is False and cfg.inverse is True


def test_eval_ground_truth_params_score_perfectly(tmp_path):
    manifest = _simulate(tmp_path / "data")
    ds = load_dataset(manifest)
    doc = {"videos": []}
    for v in ds.videos:
        centers = [(s + e) / 2 for s, e in v.gt_segments]
        widths = [e - s for s, e in v.gt_segments]
        doc["videos"].append(
            {"id": v.video_id, "centers": centers, "widths": widths}
        )
    params_path = tmp_path / "gt_params.json"
    params_path.write_text(json.dumps(doc))

    out = tmp_path / "eval"
    rc = main(
        ["eval", "--manifest", str(manifest), "--params", str(params_path),
         "--out-dir", str(out), "--with-baseline"]
    )
    assert rc == 0
    text = (out / "scores.txt").read_text()
    assert "trained.f1=1.000000" in text
    assert "trained.width_std_mean=" in text
    csv_rows = (out / "scores.csv").read_text().splitlines()
    assert len(csv_rows) == 3  # header, trained, baseline
    assert csv_rows[1].startswith("trained,")
    assert csv_rows[2].startswith("baseline,")


def test_eval_without_ground_truth_exits_2(tmp_path):
    import maskalign.dataio as dataio

    rng = np.random.default_rng(0)
    f32 = lambda a: np.asarray(a, dtype=np.float32).astype(np.float64)
    ds = dataio.Dataset(
        n_frames=4,
        embed_dim=3,
        videos=[
            dataio.VideoSample(
                video_id="v0",
                frames=f32(rng.standard_normal((4, 3))),
                captions=f32(rng.standard_normal((2, 3))),
            )
        ],
    )
    manifest = dataio.write_dataset(ds, tmp_path / "nogt")
    params_path = tmp_path / "p.json"
    params_path.write_text(
        json.dumps({"videos": [{"id": "v0", "centers": [0.3, 0.7], "widths": [0.2, 0.2]}]})
    )
    rc = main(
        ["eval", "--manifest", str(manifest), "--params", str(params_path),
         "--out-dir", str(tmp_path / "out")]
    )
    assert rc == 2


def test_eval_empty_params_file_exits_2(tmp_path):
    manifest = _simulate(tmp_path / "data")
    params_path = tmp_path / "empty.json"
    params_path.write_text("")
    rc = main(
        ["eval", "--manifest", str(manifest), "--params", str(params_path),
         "--out-dir", str(tmp_path / "out")]
    )
    assert rc == 2


def test_eval_params_must_match_manifest_ids(tmp_path):
    manifest = _simulate(tmp_path / "data")
    params_path = tmp_path / "wrong.json"
    params_path.write_text(
        json.dumps({"videos": [{"id": "ghost", "centers": [0.5], "widths": [0.2]}]})
    )
    rc = main(
        ["eval", "--manifest", str(manifest), "--params", str(params_path),
         "--out-dir", str(tmp_path / "out")]
    )
    assert rc == 2


def test_gradcheck_cli_pass_and_fail(tmp_path):
    assert main(["gradcheck", "--trials", "2"]) == 0
    assert main(["gradcheck", "--trials", "1", "--tolerance", "1e-18"]) == 1


def test_baseline_command(tmp_path):
    manifest = _simulate(tmp_path / "data")
    out = tmp_path / "base"
    assert main(
        ["baseline", "--manifest", str(manifest), "--out-dir", str(out)]
    ) == 0
    text = (out / "baseline.txt").read_text()
    assert "baseline.f1=" in text
    assert (out / "baseline.csv").exists()


def test_sweep_writes_grid_csv(tmp_path):
    out = tmp_path / "sweep"
    rc = main(
        [
            "sweep",
            "--out-dir", str(out),
            "--n-videos", "2",
            "--n-frames", "16",
            "--embed-dim", "8",
            "--events-min", "2",
            "--events-max", "2",
            "--seed", "0",
            "--steps", "2",
            "--batch-size", "2",
            "--lr", "0.01",
        ]
    )
    assert rc == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert len(rows) == 9
    labels = [r.split(",")[0] for r in rows[1:]]
    assert labels == [
        "keep_0.25", "keep_0.5", "keep_0.75", "keep_1",
        "winter_0.2", "winter_0.4", "winter_0.6", "winter_0.8",
    ]


def test_unknown_flag_exits_with_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--bogus"])
    assert exc.value.code == 2


def test_invalid_config_value_exits_2(tmp_path):
    manifest = _simulate(tmp_path / "data")
    rc = _train(manifest, tmp_path / "out", extra=("--margin", "-1.0"))
    assert rc == 2


def test_missing_manifest_exits_2(tmp_path):
    rc = main(
        ["train", "--manifest", str(tmp_path / "nope.json"),
         "--out-dir", str(tmp_path / "out")]
    )
    assert rc == 2


def test_non_finite_payload_exits_3(tmp_path):
    manifest = _simulate(tmp_path / "data")
    ds = load_dataset(manifest)
    victim = tmp_path / "data" / f"{ds.videos[0].video_id}.frames.emb"
    inf = struct.pack("<f", float("inf"))
    victim.write_bytes(MAGIC + struct.pack("<III", 1, 8, 16) + inf * (8 * 16))
    rc = _train(manifest, tmp_path / "out")
    assert rc == 3
