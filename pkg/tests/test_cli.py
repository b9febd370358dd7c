import json
from pathlib import Path

import numpy as np
import pytest

from fingerspell.cli import main
from fingerspell.data_model import load_annotations, load_manifest

MODEL_KEYS = (
    "video_blocks=1\n"
    "video_hidden=8\n"
    "video_target_len=120\n"
    "text_layers=1\n"
    "text_heads=2\n"
    "text_width=16\n"
    "text_buckets=64\n"
    "text_target_len=48\n"
)


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_synth")
    cfg = root / "synth.cfg"
    cfg.write_text("n_videos=6\nframes_per_video=120\nnoise_sigma=0.01\n")
    out = root / "data"
    assert main(["synth", "--config", str(cfg), "--out", str(out), "--seed", "5"]) == 0
    return out


@pytest.fixture(scope="module")
def train_cfg_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli_cfg") / "train.cfg"
    path.write_text(MODEL_KEYS + "clip_len=40\nsamples_per_epoch=4\nsentential_text_len=48\n")
    return path


@pytest.fixture(scope="module")
def detection_ckpt(synth_dir, train_cfg_file, tmp_path_factory):
    ckpt = tmp_path_factory.mktemp("cli_ckpt") / "det.fspv"
    code = main(
        [
            "finetune",
            "--manifest", str(synth_dir / "manifest.tsv"),
            "--annotations", str(synth_dir / "annotations.csv"),
            "--config", str(train_cfg_file),
            "--epochs", "1",
            "--batch", "4",
            "--seed", "3",
            "--out", str(ckpt),
        ]
    )
    assert code == 0 and ckpt.exists()
    return ckpt


def test_synth_writes_valid_dataset(synth_dir):
    records = load_manifest(synth_dir / "manifest.tsv")
    assert len(records) == 6
    anns = load_annotations(synth_dir / "annotations.csv")
    assert anns and all(a.annotator_id == "gold" for a in anns)


def test_synth_deterministic_across_runs(synth_dir, tmp_path):
    cfg = tmp_path / "synth.cfg"
    cfg.write_text("n_videos=6\nframes_per_video=120\nnoise_sigma=0.01\n")
    again = tmp_path / "again"
    assert main(["synth", "--config", str(cfg), "--out", str(again), "--seed", "5"]) == 0
    for rel in sorted(p.relative_to(synth_dir) for p in synth_dir.rglob("*") if p.is_file()):
        assert (again / rel).read_bytes() == (synth_dir / rel).read_bytes(), rel


def test_pretrain_writes_checkpoint_and_log(synth_dir, train_cfg_file, tmp_path):
    ckpt = tmp_path / "pre.fspv"
    log = tmp_path / "loss.csv"
    code = main(
        [
            "pretrain",
            "--manifest", str(synth_dir / "manifest.tsv"),
            "--config", str(train_cfg_file),
            "--epochs", "1",
            "--batch", "4",
            "--lr", "0.001",
            "--seed", "2",
            "--out", str(ckpt),
            "--log", str(log),
        ]
    )
    assert code == 0 and ckpt.exists()
    lines = log.read_text().strip().splitlines()
    assert lines[0] == "epoch,step,objective,loss"
    assert any(",temporal," in line for line in lines[1:])
    assert any(",sentential," in line for line in lines[1:])


def test_finetune_from_pretrained_checkpoint(synth_dir, train_cfg_file, tmp_path):
    pre = tmp_path / "pre.fspv"
    assert (
        main(
            [
                "pretrain",
                "--manifest", str(synth_dir / "manifest.tsv"),
                "--config", str(train_cfg_file),
                "--epochs", "0",
                "--seed", "2",
                "--out", str(pre),
            ]
        )
        == 0
    )
    det = tmp_path / "det.fspv"
    code = main(
        [
            "finetune",
            "--ckpt", str(pre),
            "--manifest", str(synth_dir / "manifest.tsv"),
            "--annotations", str(synth_dir / "annotations.csv"),
            "--config", str(train_cfg_file),
            "--epochs", "1",
            "--batch", "4",
            "--seed", "3",
            "--out", str(det),
        ]
    )
    assert code == 0 and det.exists()


def test_detect_json_output(synth_dir, detection_ckpt, capsys):
    records = load_manifest(synth_dir / "manifest.tsv")
    code = main(
        [
            "detect",
            "--ckpt", str(detection_ckpt),
            "--video", str(synth_dir / records[0].pose_path),
            "--sentence", records[0].sentence,
            "--json",
            "--seed", "0",
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert "spans" in payload
    for span in payload["spans"]:
        assert set(span) == {"start", "end", "score"}


def test_align_cli(tmp_path, capsys):
    spans = tmp_path / "spans.json"
    spans.write_text(json.dumps({"spans": [{"start": 0, "end": 4, "score": 0.9}]}))
    freq = tmp_path / "freq.tsv"
    freq.write_text("the\t100\nacid\t1\nworks\t40\n")
    code = main(
        ["align", "--spans", str(spans), "--sentence", "the acid works", "--freq", str(freq), "--json"]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["alignments"] == [{"start": 0, "end": 4, "word_index": 1, "word": "acid"}]


def test_suggest_cli(synth_dir, detection_ckpt, capsys):
    records = load_manifest(synth_dir / "manifest.tsv")
    code = main(
        [
            "suggest",
            "--ckpt", str(detection_ckpt),
            "--video", str(synth_dir / records[0].pose_path),
            "--sentence", records[0].sentence,
            "--freq", str(synth_dir / "freq.tsv"),
            "--lexicon", str(synth_dir / "lexicon.csv"),
            "--json",
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    for entry in payload["suggestions"]:
        assert set(entry) == {"span", "word", "candidates"}


def test_eval_cli_oracle_predictions_score_one(synth_dir, tmp_path, capsys):
    from fingerspell.data_model import annotation_to_span

    records = load_manifest(synth_dir / "manifest.tsv")
    anns = load_annotations(synth_dir / "annotations.csv")
    preds = {}
    for rec in records:
        spans = [
            annotation_to_span(a, rec.fps, rec.n_frames)
            for a in anns
            if a.video_id == rec.video_id
        ]
        preds[rec.video_id] = [{"start": s.start, "end": s.end} for s in spans]
    pred_path = tmp_path / "pred.json"
    pred_path.write_text(json.dumps(preds))
    code = main(
        [
            "eval",
            "--pred", str(pred_path),
            "--gold", str(synth_dir / "annotations.csv"),
            "--manifest", str(synth_dir / "manifest.tsv"),
            "--mode", "detection",
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["mean_iou"] == 1.0


def test_agreement_cli(tmp_path, capsys):
    manifest = tmp_path / "m.tsv"
    manifest.write_text(
        "video_id\tarticle_id\tinterpreter_id\tfps\tn_frames\tpose_path\tsentence\n"
        "v0\ta\ti\t10.0\t1000\tv0.fspz\tSome sentence here\n"
    )
    annotations = tmp_path / "a.csv"
    annotations.write_text(
        "video_id,annotator_id,start_s,end_s,word\n"
        "v0,alpha,10.0,11.0,acid\n"
        "v0,beta,10.0,11.0,acid\n"
    )
    code = main(
        [
            "agreement",
            "--annotations", str(annotations),
            "--manifest", str(manifest),
            "--shuffle-trials", "50",
            "--seed", "1",
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["observed_iou"] == 1.0
    assert payload["shuffled_iou"] < 0.2
    assert payload["annotators"] == ["alpha", "beta"]


def test_stats_cli(synth_dir, tmp_path, capsys):
    categories = tmp_path / "cats.csv"
    categories.write_text("acid,STEM\nfourier,proper_noun\npanda,other\n")
    code = main(
        [
            "stats",
            "--annotations", str(synth_dir / "annotations.csv"),
            "--manifest", str(synth_dir / "manifest.tsv"),
            "--categories", str(categories),
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert 0.0 < payload["percent_all_words"] <= payload["percent_non_stop_words"]
    total = sum(v["percent"] for v in payload["categories"].values())
    assert total == pytest.approx(100.0, abs=0.1)


class TestExitCodes:
    def test_missing_file_is_validation_error(self, tmp_path):
        assert main(["stats", "--annotations", "missing.csv", "--manifest", "missing.tsv"]) == 1

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("definitely_not_a_key=1\n")
        out = tmp_path / "d"
        assert main(["synth", "--config", str(cfg), "--out", str(out)]) == 1

    def test_bad_usage_exits_one(self):
        assert main(["detect"]) == 1  # missing required flags

    def test_unknown_subcommand_exits_one(self):
        assert main(["frobnicate"]) == 1

    def test_corrupt_checkpoint_is_model_error(self, synth_dir, tmp_path):
        bad = tmp_path / "bad.fspv"
        bad.write_bytes(b"JUNKJUNKJUNK")
        records = load_manifest(synth_dir / "manifest.tsv")
        code = main(
            [
                "detect",
                "--ckpt", str(bad),
                "--video", str(synth_dir / records[0].pose_path),
                "--sentence", "words",
            ]
        )
        assert code == 2
