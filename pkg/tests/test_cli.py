"""End-to-end CLI tests over on-disk fixtures.

Every --json output is validated against the published schema files, and
deterministic commands are re-run from their own manifests to prove
bit-exact reproducibility.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from cutvos import dataset as ds
from cutvos.cli import cmd_dispatch, load_schema, overlay_frame

from .conftest import gradient_frame, square_mask, write_video


def run_cli(capsys, *argv) -> tuple[int, str, str]:
    code = cmd_dispatch(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def validate(instance, schema_name):
    jsonschema.validate(instance=instance, schema=load_schema(schema_name))


def tree_digest(root: Path) -> dict[str, str]:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


@pytest.fixture
def aug_root(tmp_path):
    """Three videos long enough for same-video donor sampling."""
    root = tmp_path / "aug_root"
    for vid, (bg, color) in {
        "v0": (0, (200, 40, 40)),
        "v1": (90, (30, 200, 220)),
        "v2": (180, (180, 40, 160)),
    }.items():
        frames, masks = [], []
        for i in range(20):
            frame = gradient_frame(24, 24, base=bg + i)
            mask = square_mask(24, 24, 6, 6, 8)
            frame[mask > 0] = color
            frames.append(frame)
            masks.append(mask)
        write_video(root, vid, frames, masks, shots=[
            {"start": 0, "end": 20, "presence": None, "view": None},
        ], fps=10.0)
    return root


class TestDispatch:
    def test_help_exits_zero(self, capsys):
        code, out, _ = run_cli(capsys, "stats", "--help")
        assert code == 0

    def test_unknown_subcommand_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "frobnicate")
        assert code == 1

    def test_missing_required_flag_is_usage_error(self, capsys, tmp_path):
        code, _, _ = run_cli(capsys, "augment", str(tmp_path))
        assert code == 1

    def test_data_error_maps_to_exit_2_with_code(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "stats", str(tmp_path / "nowhere"))
        assert code == 2
        assert err.startswith("MissingFrame:")


class TestStats:
    def test_json_output_validates(self, capsys, small_root):
        code, out, _ = run_cli(capsys, "stats", str(small_root), "--json")
        assert code == 0
        doc = json.loads(out)
        validate(doc, "cli_output")
        validate(doc["manifest"], "manifest")
        validate(doc["result"], "stats")
        assert doc["result"]["n_videos"] == 2

    def test_out_dir_receives_stats_and_manifest(self, capsys, small_root, tmp_path):
        out = tmp_path / "statsout"
        code, _, _ = run_cli(capsys, "stats", str(small_root), "--out", str(out))
        assert code == 0
        stats = json.loads((out / "stats.json").read_text())
        validate(stats, "stats")
        validate(json.loads((out / "manifest.json").read_text()), "manifest")


class TestAugment:
    def test_augment_writes_layout_and_validates(self, capsys, aug_root, tmp_path):
        out = tmp_path / "aug"
        code, stdout, _ = run_cli(
            capsys, "augment", str(aug_root), "--out", str(out), "--seed", "7", "--json"
        )
        assert code == 0
        doc = json.loads(stdout)
        validate(doc, "cli_output")
        validate(doc["manifest"], "manifest")
        transitions = json.loads((out / "transitions.json").read_text())
        provenance = json.loads((out / "provenance.json").read_text())
        validate(transitions, "transitions")
        validate(provenance, "provenance")
        for name in transitions:
            frames = sorted((out / "JPEGImages" / name).glob("*.jpg"))
            masks = sorted((out / "Annotations" / name).glob("*.png"))
            assert len(frames) == len(masks) == 8

    def test_same_seed_reproduces_bit_exact(self, capsys, aug_root, tmp_path):
        out1, out2 = tmp_path / "a1", tmp_path / "a2"
        for out in (out1, out2):
            code, _, _ = run_cli(
                capsys, "augment", str(aug_root), "--out", str(out), "--seed", "11"
            )
            assert code == 0
        assert tree_digest(out1) == tree_digest(out2)

    def test_replay_from_manifest(self, capsys, aug_root, tmp_path):
        out1 = tmp_path / "orig"
        code, _, _ = run_cli(
            capsys, "augment", str(aug_root), "--out", str(out1), "--seed", "3"
        )
        assert code == 0
        manifest = json.loads((out1 / "manifest.json").read_text())
        argv = list(manifest["argv_resolved"])
        out2 = tmp_path / "replay"
        argv[argv.index("--out") + 1] = str(out2)
        code, _, _ = run_cli(capsys, *argv)
        assert code == 0
        assert tree_digest(out1) == tree_digest(out2)

    def test_env_var_seed_default(self, capsys, aug_root, tmp_path, monkeypatch):
        out_env, out_flag = tmp_path / "e1", tmp_path / "e2"
        monkeypatch.setenv("CUTVOS_SEED", "99")
        code, _, _ = run_cli(capsys, "augment", str(aug_root), "--out", str(out_env))
        assert code == 0
        monkeypatch.delenv("CUTVOS_SEED")
        code, _, _ = run_cli(
            capsys, "augment", str(aug_root), "--out", str(out_flag), "--seed", "99"
        )
        assert code == 0
        assert tree_digest(out_env) == tree_digest(out_flag)

    def test_config_file_controls_engine(self, capsys, aug_root, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"p_trans": 0.0, "seed": 5}))
        out = tmp_path / "identity"
        code, _, _ = run_cli(
            capsys, "augment", str(aug_root), "--out", str(out), "--config", str(cfg)
        )
        assert code == 0
        transitions = json.loads((out / "transitions.json").read_text())
        assert all(v == [] for v in transitions.values())
        # identity branch: output masks equal input masks exactly
        for name in transitions:
            vid = name.split("_obj")[0]
            for i in range(8):
                got = ds.load_mask(out / "Annotations" / name / f"{i:05d}.png")
                want = ds.load_mask(aug_root / "Annotations" / vid / f"{i:05d}.png")
                assert np.array_equal(got, want)

    def test_bad_config_key_is_data_error(self, capsys, aug_root, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"p_transs": 0.5}))
        code, _, err = run_cli(
            capsys, "augment", str(aug_root), "--out", str(tmp_path / "x"),
            "--config", str(cfg),
        )
        assert code == 2 and err.startswith("ConfigKeyError:")


class TestDetect:
    def test_detect_on_spliced_fixture(self, capsys, tmp_path):
        root = tmp_path / "root"
        f1 = [gradient_frame(24, 24, base=i) for i in range(5)]
        f2 = [gradient_frame(24, 24, base=200 + i) for i in range(5)]
        frames = f1 + f2
        masks = [square_mask(24, 24, 4, 4, 6) for _ in range(10)]
        write_video(root, "spliced", frames, masks)
        out = tmp_path / "det"
        code, stdout, _ = run_cli(
            capsys, "detect", str(root), "--out", str(out), "--tau", "0.3", "--json"
        )
        assert code == 0
        doc = json.loads(stdout)
        validate(doc, "cli_output")
        assert doc["result"]["detections"]["spliced"] == [5]
        shots = json.loads((out / "shots" / "spliced.json").read_text())
        validate(shots, "shots")
        assert [s["start"] for s in shots] == [0, 5]
        scores = (out / "scores" / "spliced.csv").read_text().splitlines()
        assert scores[0] == "frame_index,score"
        assert len(scores) == 11

    def test_scores_file_sidecar(self, capsys, tmp_path):
        root = tmp_path / "root"
        frames = [gradient_frame(16, 16, base=i) for i in range(6)]
        masks = [square_mask(16, 16, 2, 2, 4) for _ in range(6)]
        write_video(root, "v", frames, masks)
        sidecar = tmp_path / "scores.txt"
        sidecar.write_text("0.0\n0.0\n0.9\n0.0\n0.0\n0.9\n")
        out = tmp_path / "det"
        code, stdout, _ = run_cli(
            capsys, "detect", str(root), "--out", str(out),
            "--scores-file", str(sidecar), "--json",
        )
        assert code == 0
        assert json.loads(stdout)["result"]["detections"]["v"] == [2, 5]


class TestEvaluate:
    def test_perfect_predictions(self, capsys, small_root, tmp_path):
        pred = small_root / "Annotations"  # evaluate gt against itself
        out = tmp_path / "eval"
        code, stdout, _ = run_cli(
            capsys, "evaluate", str(small_root), "--pred", str(pred),
            "--out", str(out), "--json",
        )
        assert code == 0
        doc = json.loads(stdout)
        validate(doc, "cli_output")
        report = json.loads((out / "eval_report.json").read_text())
        validate(report, "eval_report")
        agg = report["aggregate"]
        assert agg["mean_j"] == agg["mean_f"] == agg["j_and_f"] == agg["jt"] == 1.0
        assert report["transition_accuracy"]["expected_accuracy"] == 1.0

    def test_dimension_mismatch_exit_code(self, capsys, small_root, tmp_path):
        pred = tmp_path / "pred"
        for vid, (h, w) in {"alpha": (16, 16), "beta": (16, 16)}.items():
            d = pred / vid
            d.mkdir(parents=True)
            for i in range(12):
                ds.save_mask(d / f"{i:05d}.png", square_mask(h, w, 2, 2, 4))
        code, _, err = run_cli(
            capsys, "evaluate", str(small_root), "--pred", str(pred)
        )
        assert code == 2
        assert err.startswith("DimensionMismatch:")


class TestPartition:
    def test_partition_outputs(self, capsys, small_root, tmp_path):
        out = tmp_path / "part"
        code, stdout, _ = run_cli(
            capsys, "partition", str(small_root), "--out", str(out),
            "--groups", "2", "--json",
        )
        assert code == 0
        doc = json.loads(stdout)
        validate(doc, "cli_output")
        cues = json.loads((out / "cues.json").read_text())
        validate(cues, "cues")
        for name, cue in cues.items():
            label_map = ds.load_mask(out / "labels" / f"{name}.png")
            assert label_map.max() >= 1
            if not cue["skipped"]:
                assert label_map.max() == cue["k"]


class TestTrack:
    def test_oracle_track_then_evaluate(self, capsys, tmp_path):
        root = tmp_path / "root"
        f1 = [gradient_frame(32, 32, base=i) for i in range(5)]
        m1 = [square_mask(32, 32, 4, 4, 8) for _ in range(5)]
        f2 = [gradient_frame(32, 32, base=200) for _ in range(5)]
        m2 = [square_mask(32, 32, 20, 20, 8) for _ in range(5)]
        for f, m in zip(f1 + f2, m1 + m2):
            f[m > 0] = (250, 250, 30)
        write_video(root, "two", f1 + f2, m1 + m2, shots=[
            {"start": 0, "end": 5, "presence": None, "view": None},
            {"start": 5, "end": 10, "presence": None, "view": "SceneChange"},
        ], fps=5.0)
        out = tmp_path / "trk"
        code, stdout, _ = run_cli(
            capsys, "track", str(root), "--out", str(out), "--tau", "0.3",
            "--segmenter", "oracle", "--json",
        )
        assert code == 0
        doc = json.loads(stdout)
        validate(doc, "cli_output")
        traces = json.loads((out / "trace.json").read_text())
        validate(traces, "trace")
        routes = [r["route"] for r in traces["two/1"]["records"]]
        assert routes.count("Transition") == 1
        ev = tmp_path / "ev"
        code, _, _ = run_cli(
            capsys, "evaluate", str(root), "--pred", str(out / "Annotations"),
            "--out", str(ev),
        )
        assert code == 0
        report = json.loads((ev / "eval_report.json").read_text())
        assert report["aggregate"]["jt"] == 1.0

    def test_propagate_last_track(self, capsys, small_root, tmp_path):
        out = tmp_path / "trk"
        code, _, _ = run_cli(
            capsys, "track", str(small_root), "--out", str(out), "--segmenter", "last"
        )
        assert code == 0
        masks = sorted((out / "Annotations" / "beta").glob("*.png"))
        assert len(masks) == 12


class TestOverlay:
    def test_alpha_zero_is_identity(self):
        frame = gradient_frame(16, 16, base=50)
        mask = square_mask(16, 16, 4, 4, 6)
        assert np.array_equal(overlay_frame(frame, mask, 0.0), frame)

    def test_alpha_one_paints_palette_color(self):
        frame = gradient_frame(16, 16, base=50)
        mask = square_mask(16, 16, 4, 4, 6, label=1)
        out = overlay_frame(frame, mask, 1.0)
        assert tuple(out[5, 5]) == ds.OBJECT_PALETTE[0]

    def test_alpha_half_blends_per_channel(self):
        frame = np.full((4, 4, 3), 128, np.uint8)
        mask = np.ones((4, 4), np.uint8)
        out = overlay_frame(frame, mask, 0.5)
        expected = np.floor(
            0.5 * np.array(ds.OBJECT_PALETTE[0]) + 0.5 * 128 + 0.5
        ).astype(np.uint8)
        assert np.array_equal(out[0, 0], expected)

    def test_overlay_command_writes_frames(self, capsys, small_root, tmp_path):
        out = tmp_path / "ovr"
        code, stdout, _ = run_cli(
            capsys, "overlay", str(small_root), "--out", str(out),
            "--alpha", "0.5", "--json",
        )
        assert code == 0
        validate(json.loads(stdout), "cli_output")
        assert len(list((out / "alpha").glob("*.png"))) == 12

    def test_parallel_jobs_match_serial(self, capsys, small_root, tmp_path):
        out1, out2 = tmp_path / "s", tmp_path / "p"
        for out, jobs in ((out1, "1"), (out2, "4")):
            code, _, _ = run_cli(
                capsys, "overlay", str(small_root), "--out", str(out),
                "--jobs", jobs,
            )
            assert code == 0
        assert tree_digest(out1) == tree_digest(out2)
