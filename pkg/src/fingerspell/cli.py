"""Command-line interface wiring all pipeline stages together.

Subcommands: synth, pretrain, finetune, detect, align, suggest, eval,
agreement, stats. Every subcommand accepts --seed and --config (a file of
key=value lines overriding defaults). Exit codes: 0 success, 1 validation
error, 2 runtime/model error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .alignment import align, load_frequency_table
from .checkpoint import load_checkpoint, load_module_arrays
from .config import ModelConfig, PretrainConfig, TrainConfig, apply_overrides, parse_config_file
from .data_model import (
    FrameSpan,
    annotation_to_span,
    load_annotations,
    load_manifest,
    read_pose_file,
)
from .detection import (
    FINETUNE_EPOCHS_PRETRAINED,
    FINETUNE_EPOCHS_SCRATCH,
    build_training_items,
    detect_probs,
    extract_spans,
    finetune,
    load_detection_model,
    new_detection_model,
    save_detection_checkpoint,
    span_scores,
)
from .errors import FingerspellError, ValidationError
from .evaluation import (
    category_tally,
    fingerspelling_percent,
    gold_aligned_spans,
    iou_alignment,
    iou_detection,
    pairwise_agreement,
    shuffled_agreement_baseline,
)
from .preprocessing import PoseSequence
from .pretraining import PretrainDataset, pretrain, save_pretrain_checkpoint
from .stopwords import load_stoplist
from .suggestion import load_lexicon, suggest
from .synth import SynthConfig, synth_generate, write_synth_dataset
from .textnorm import whitespace_tokens

_KNOWN_CONFIG_KEYS = frozenset(
    f.name
    for cls in (ModelConfig, TrainConfig, PretrainConfig, SynthConfig)
    for f in dataclasses.fields(cls)
) | {"threshold", "merge_gap", "min_len"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # bad usage is a validation error (exit 1)
        raise ValidationError(message)


def _emit(payload: dict, out_path) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _overrides(args) -> dict[str, str]:
    overrides = parse_config_file(args.config) if args.config else {}
    unknown = set(overrides) - _KNOWN_CONFIG_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return overrides


def _model_config(overrides) -> ModelConfig:
    cfg, _ = apply_overrides(ModelConfig(), overrides)
    cfg.validate()
    return cfg


def _decode_opts(args, overrides) -> dict:
    opts = {
        "threshold": float(overrides.get("threshold", 0.5)),
        "merge_gap": int(overrides.get("merge_gap", 2)),
        "min_len": int(overrides.get("min_len", 3)),
    }
    for key in opts:
        flag = getattr(args, key, None)
        if flag is not None:
            opts[key] = flag
    return opts


def _load_poses(manifest_path, records) -> dict[str, np.ndarray]:
    base = Path(manifest_path).parent
    poses = {}
    for rec in records:
        pose_path = Path(rec.pose_path)
        if not pose_path.is_absolute():
            pose_path = base / pose_path
        poses[rec.video_id] = read_pose_file(pose_path)
    return poses


def _write_loss_log(path, rows) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("epoch,step,objective,loss\n")
        for epoch, step, objective, loss in rows:
            fh.write(f"{epoch},{step},{objective},{loss!r}\n")


def _seed_everything(seed: int) -> None:
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_synth(args) -> int:
    overrides = _overrides(args)
    cfg, _ = apply_overrides(SynthConfig(), overrides)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    dataset = synth_generate(cfg)
    write_synth_dataset(dataset, args.out)
    sys.stdout.write(
        f"wrote {len(dataset.records)} videos, {len(dataset.annotations)} annotations to {args.out}\n"
    )
    return 0


def _cmd_pretrain(args) -> int:
    overrides = _overrides(args)
    model_cfg = _model_config(overrides)
    pre_cfg, _ = apply_overrides(PretrainConfig(), overrides)
    if args.epochs is not None:
        pre_cfg = dataclasses.replace(pre_cfg, epochs=args.epochs)
    if args.batch is not None:
        pre_cfg = dataclasses.replace(pre_cfg, batch_size=args.batch)
    if args.lr is not None:
        pre_cfg = dataclasses.replace(pre_cfg, lr=args.lr)
    pre_cfg = dataclasses.replace(pre_cfg, seed=args.seed if args.seed is not None else pre_cfg.seed)
    _seed_everything(pre_cfg.seed)

    records = load_manifest(args.manifest)
    poses = _load_poses(args.manifest, records)
    model, log = pretrain(PretrainDataset(records, poses), model_cfg, pre_cfg)
    save_pretrain_checkpoint(args.out, model)
    if args.log:
        _write_loss_log(args.log, log)
    sys.stdout.write(f"pretrained {pre_cfg.epochs} epochs on {len(records)} videos -> {args.out}\n")
    return 0


def _cmd_finetune(args) -> int:
    overrides = _overrides(args)
    train_cfg, _ = apply_overrides(TrainConfig(), overrides)
    if args.batch is not None:
        train_cfg = dataclasses.replace(train_cfg, batch_size=args.batch)
    if args.lr is not None:
        train_cfg = dataclasses.replace(train_cfg, lr=args.lr)
    train_cfg = dataclasses.replace(train_cfg, seed=args.seed if args.seed is not None else train_cfg.seed)

    epochs = args.epochs
    if args.ckpt:
        ckpt_cfg, arrays = load_checkpoint(args.ckpt)
        _seed_everything(train_cfg.seed)
        model = new_detection_model(ckpt_cfg, seed=train_cfg.seed)
        load_module_arrays(model.video, arrays, "video")
        load_module_arrays(model.text, arrays, "text")
        if epochs is None:
            epochs = FINETUNE_EPOCHS_PRETRAINED
    else:
        model_cfg = _model_config(overrides)
        _seed_everything(train_cfg.seed)
        model = new_detection_model(model_cfg, seed=train_cfg.seed)
        if epochs is None:
            epochs = FINETUNE_EPOCHS_SCRATCH
    train_cfg = dataclasses.replace(train_cfg, epochs=epochs)

    records = load_manifest(args.manifest)
    poses = _load_poses(args.manifest, records)
    annotations = load_annotations(args.annotations)
    items = build_training_items(records, poses, annotations, model.cfg)
    log = finetune(model, items, train_cfg)
    save_detection_checkpoint(args.out, model)
    if args.log:
        _write_loss_log(args.log, log)
    sys.stdout.write(f"fine-tuned {epochs} epochs on {len(items)} videos -> {args.out}\n")
    return 0


def _spans_payload(spans, scores) -> dict:
    return {
        "spans": [
            {"start": s.start, "end": s.end, "score": score}
            for s, score in zip(spans, scores)
        ]
    }


def _cmd_detect(args) -> int:
    overrides = _overrides(args)
    opts = _decode_opts(args, overrides)
    model = load_detection_model(args.ckpt)
    video = PoseSequence.from_array(read_pose_file(args.video))
    probs = detect_probs(video, args.sentence, model)
    spans = extract_spans(probs, **opts)
    payload = _spans_payload(spans, span_scores(probs, spans))
    if args.json or args.out:
        _emit(payload, args.out)
    else:
        for entry in payload["spans"]:
            sys.stdout.write(f"{entry['start']}\t{entry['end']}\t{entry['score']:.4f}\n")
    return 0


def _parse_spans_file(path) -> list[FrameSpan]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data.get("spans", [])
    try:
        return [FrameSpan(int(d["start"]), int(d["end"])) for d in data]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: spans must be objects with start/end: {exc}") from exc


def _cmd_align(args) -> int:
    _overrides(args)
    spans = _parse_spans_file(args.spans)
    table = load_frequency_table(args.freq)
    aligned = align(spans, args.sentence, table)
    tokens = whitespace_tokens(args.sentence)
    payload = {
        "alignments": [
            {
                "start": a.span.start,
                "end": a.span.end,
                "word_index": a.word_index,
                "word": tokens[a.word_index],
            }
            for a in aligned
        ]
    }
    if args.json or args.out:
        _emit(payload, args.out)
    else:
        for entry in payload["alignments"]:
            sys.stdout.write(
                f"{entry['start']}\t{entry['end']}\t{entry['word_index']}\t{entry['word']}\n"
            )
    return 0


def _cmd_suggest(args) -> int:
    overrides = _overrides(args)
    opts = _decode_opts(args, overrides)
    model = load_detection_model(args.ckpt)
    video = PoseSequence.from_array(read_pose_file(args.video))
    table = load_frequency_table(args.freq)
    lexicon = load_lexicon(args.lexicon)
    suggestions = suggest(video, args.sentence, model, table, lexicon, **opts)
    payload = {
        "suggestions": [
            {
                "span": {"start": s.span.start, "end": s.span.end},
                "word": s.word,
                "candidates": [
                    {"gloss": c.gloss, "uri": c.uri, "domain": c.domain} for c in s.candidates
                ],
            }
            for s in suggestions
        ]
    }
    if args.json or args.out:
        _emit(payload, args.out)
    else:
        for s in suggestions:
            glosses = ", ".join(c.gloss for c in s.candidates) or "(no lexicon entry)"
            sys.stdout.write(f"[{s.span.start}-{s.span.end}] {s.word}: {glosses}\n")
    return 0


def _cmd_eval(args) -> int:
    _overrides(args)
    records = load_manifest(args.manifest)
    annotations = load_annotations(args.gold)
    predictions = json.loads(Path(args.pred).read_text(encoding="utf-8"))
    anns_by_video: dict[str, list] = {}
    for ann in annotations:
        anns_by_video.setdefault(ann.video_id, []).append(ann)

    per_video = {}
    for rec in records:
        entries = predictions.get(rec.video_id, [])
        if isinstance(entries, dict):
            entries = entries.get("spans", [])
        gold_anns = anns_by_video.get(rec.video_id, [])
        if args.mode == "detection":
            pred_spans = [FrameSpan(int(e["start"]), int(e["end"])) for e in entries]
            gold_spans = [annotation_to_span(a, rec.fps, rec.n_frames) for a in gold_anns]
            per_video[rec.video_id] = iou_detection(pred_spans, gold_spans)
        else:
            from .data_model import AlignedSpan

            try:
                pred_aligned = [
                    AlignedSpan(FrameSpan(int(e["start"]), int(e["end"])), int(e["word_index"]))
                    for e in entries
                ]
            except KeyError as exc:
                raise ValidationError(f"alignment mode needs word_index in predictions: {exc}") from exc
            gold_aligned = gold_aligned_spans(rec, gold_anns)
            per_video[rec.video_id] = iou_alignment(pred_aligned, gold_aligned)

    mean_iou = float(np.mean(list(per_video.values()))) if per_video else 0.0
    _emit({"mode": args.mode, "mean_iou": mean_iou, "per_video": per_video}, args.out)
    return 0


def _cmd_agreement(args) -> int:
    _overrides(args)
    records = load_manifest(args.manifest)
    annotations = load_annotations(args.annotations)
    observed = pairwise_agreement(annotations, records)
    seed = args.seed if args.seed is not None else 0
    rng = np.random.default_rng(seed)
    shuffled = shuffled_agreement_baseline(annotations, records, rng, trials=args.shuffle_trials)
    annotators = sorted({a.annotator_id for a in annotations})
    _emit(
        {
            "observed_iou": observed,
            "shuffled_iou": shuffled,
            "annotators": annotators,
            "trials": args.shuffle_trials,
        },
        args.out,
    )
    return 0


def _cmd_stats(args) -> int:
    _overrides(args)
    records = load_manifest(args.manifest)
    annotations = load_annotations(args.annotations)
    sentences = {r.video_id: r.sentence for r in records}
    stop_words = load_stoplist(args.stoplist) if args.stoplist else None
    kwargs = {"stop_words": stop_words} if stop_words is not None else {}
    payload = {
        "n_annotations": len(annotations),
        "percent_all_words": fingerspelling_percent(annotations, sentences, "all_words"),
        "percent_non_stop_words": fingerspelling_percent(annotations, sentences, "non_stop_words", **kwargs),
    }
    if args.categories:
        rows = []
        with open(args.categories, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                word, _, category = line.partition(",")
                rows.append((word.strip(), category.strip()))
        payload["categories"] = category_tally(rows)
    _emit(payload, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fingerspell", description=__doc__)
    parser.add_argument("--version", action="version", version=f"fingerspell {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
        p.add_argument("--config", default=None, help="key=value config file overriding defaults")
        p.add_argument("--out", default=None, help="write primary output to this path")

    p = sub.add_parser("synth", help="generate a synthetic pose dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("pretrain", help="contrastive pretraining on unlabeled videos")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--log", default=None, help="loss log CSV path")
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("finetune", help="supervised detection training")
    common(p)
    p.add_argument("--ckpt", default=None, help="pretrained checkpoint (omit to train from scratch)")
    p.add_argument("--annotations", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--log", default=None, help="loss log CSV path")
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("detect", help="predict fingerspelling spans for one video")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--video", required=True, help="pose file")
    p.add_argument("--sentence", required=True)
    p.add_argument("--json", action="store_true")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--merge-gap", dest="merge_gap", type=int, default=None)
    p.add_argument("--min-len", dest="min_len", type=int, default=None)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("align", help="align detected spans to sentence words")
    common(p)
    p.add_argument("--spans", required=True, help="JSON file of spans")
    p.add_argument("--sentence", required=True)
    p.add_argument("--freq", required=True, help="word<TAB>count frequency table")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("suggest", help="detect, align, and query the sign lexicon")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--video", required=True)
    p.add_argument("--sentence", required=True)
    p.add_argument("--freq", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--json", action="store_true")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--merge-gap", dest="merge_gap", type=int, default=None)
    p.add_argument("--min-len", dest="min_len", type=int, default=None)
    p.set_defaults(func=_cmd_suggest)

    p = sub.add_parser("eval", help="score predictions against gold annotations")
    common(p)
    p.add_argument("--pred", required=True, help="JSON predictions per video")
    p.add_argument("--gold", required=True, help="gold annotation CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=("detection", "alignment"), default="detection")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("agreement", help="inter-annotator agreement and shuffle baseline")
    common(p)
    p.add_argument("--annotations", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--shuffle-trials", dest="shuffle_trials", type=int, default=1000)
    p.set_defaults(func=_cmd_agreement)

    p = sub.add_parser("stats", help="fingerspelling percentage and category tallies")
    common(p)
    p.add_argument("--annotations", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--stoplist", default=None, help="optional stop-word list file")
    p.add_argument("--categories", default=None, help="optional word,category CSV")
    p.set_defaults(func=_cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:  # unreadable/missing user-supplied files
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except FingerspellError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        sys.stderr.write(f"internal error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
