"""Synthetic pose-sequence datasets with planted fingerspelling segments.

The generator produces desk-scale datasets with exact ground truth so the
training loops, the aligner, and the metrics can be tested end to end
without any real video. Design of the planted signal:

* background signing: slow two-hand sinusoidal motion;
* fingerspelling: the dominant (right) hand shifts to a raised position and
  jitters at high frequency while the other hand goes near-static;
* a monotone left-to-right drift over the whole video makes temporal order
  recoverable, and small per-video "style" offsets (body geometry, resting
  hand positions, background tempo) make same-video/different-video
  discrimination possible;
* sentences mix frequent background words with one rare word per planted
  segment, in segment order, so inverse-frequency alignment is exactly
  satisfiable.

Same config (including seed) always reproduces byte-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data_model import (
    FingerspellingAnnotation,
    VideoRecord,
    annotation_to_span,
    save_annotations,
    save_manifest,
    spans_to_labels,
    write_pose_file,
)
from .errors import ValidationError

MIN_SEGMENT = 5
MAX_SEGMENT = 60
MIN_GAP = 8

BG_AMPLITUDE = 0.06
FS_AMPLITUDE = 0.03
FS_SHIFT = (0.10, -0.12)
SWAY_AMPLITUDE = 0.01

BODY = slice(0, 33)
LEFT_HAND = slice(33, 54)
RIGHT_HAND = slice(54, 75)

# Frequent background vocabulary with fixture corpus counts.
FREQUENT_WORDS = (
    ("the", 9000), ("of", 8200), ("and", 7600), ("to", 7100), ("in", 6600),
    ("is", 6100), ("was", 5600), ("for", 5200), ("that", 4900), ("with", 4500),
    ("are", 4200), ("this", 3900), ("from", 3600), ("which", 3300), ("were", 3100),
    ("has", 2900), ("have", 2700), ("they", 2500), ("into", 2300), ("used", 2100),
    ("found", 1900), ("known", 1700), ("called", 1500), ("system", 1300),
    ("process", 1200), ("theory", 1100), ("value", 1000), ("result", 900),
    ("method", 800), ("model", 700), ("field", 600), ("energy", 500),
    ("number", 450), ("water", 400), ("study", 350), ("group", 300),
    ("common", 250), ("large", 200), ("small", 150), ("early", 100),
)

# Rare technical vocabulary, each planted word has fixture count 1.
RARE_WORDS = (
    "zymurgy", "quasar", "isomer", "entropy", "gradient", "polymer",
    "neutrino", "enzyme", "catalysis", "algorithm", "manifold", "tensor",
    "quaternion", "eigenvalue", "photon", "plasmid", "ribosome", "chromatin",
    "alkaloid", "benzene", "covalent", "diode", "electrolyte", "fermion",
    "genome", "hydroxide", "isotope", "joule", "kinetics", "ligand",
    "mitosis", "nucleotide", "oxidation", "peptide", "quantum", "radian",
    "solvent", "titration", "uranium", "vector", "wavelength", "xylem",
    "yttrium", "zeolite", "apogee", "baryon", "chirality", "dipole",
    "exothermic", "flux", "gluon", "hadron", "impedance", "jacobian",
    "kelvin", "laplacian", "monomer", "nebula", "onticity", "parallax",
    "quark", "resistor", "sinusoid", "topology", "ultraviolet", "valence",
    "wavelet", "xenon", "yield", "zenith", "aldehyde", "boson",
    "capacitor", "dopamine", "electron", "fractal", "glucose", "hormone",
    "ionosphere", "jovian", "krypton", "lanthanide", "magnetron", "neuron",
    "oscillator", "proton", "quartile", "reactant", "spectrum", "thermistor",
    "uncertainty", "viscosity", "wurtzite", "xerophyte", "ytterbium", "zygote",
)


@dataclass(frozen=True)
class SynthConfig:
    n_videos: int = 20
    frames_per_video: int = 300
    fps: float = 25.0
    fingerspell_rate: float = 0.3
    drift_amplitude: float = 0.1
    noise_sigma: float = 0.01
    seed: int = 0
    n_articles: int = 5

    def validate(self) -> None:
        if self.n_videos < 1:
            raise ValidationError("n_videos must be >= 1")
        if self.frames_per_video < 50:
            raise ValidationError("frames_per_video must be >= 50")
        if not 0.0 < self.fingerspell_rate < 1.0:
            raise ValidationError("fingerspell_rate must be in (0, 1)")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        if not self.fps > 0:
            raise ValidationError("fps must be > 0")
        if self.n_articles < 1:
            raise ValidationError("n_articles must be >= 1")
        target = int(round(self.fingerspell_rate * self.frames_per_video))
        if target < MIN_SEGMENT:
            raise ValidationError(
                f"fingerspell_rate {self.fingerspell_rate} yields {target} frames, "
                f"below the minimum segment length {MIN_SEGMENT}"
            )


@dataclass
class SynthDataset:
    records: list[VideoRecord]
    poses: dict[str, np.ndarray]
    annotations: list[FingerspellingAnnotation]
    fs_masks: dict[str, np.ndarray]
    frequency_counts: dict[str, int]
    lexicon_rows: list[tuple[str, str, str, str]] = field(default_factory=list)


def _base_pose() -> np.ndarray:
    """Static 75x2 skeleton in normalized image coordinates (y grows down)."""
    pose = np.zeros((75, 2), dtype=np.float64)
    # head / face points cluster
    head = [
        (0.50, 0.18), (0.52, 0.16), (0.53, 0.16), (0.54, 0.16), (0.48, 0.16),
        (0.47, 0.16), (0.46, 0.16), (0.56, 0.18), (0.44, 0.18), (0.52, 0.21),
        (0.48, 0.21),
    ]
    # shoulders, elbows, wrists, hand stubs, hips, legs, feet
    limbs = [
        (0.63, 0.33), (0.37, 0.33),             # shoulders (R, L in image terms)
        (0.67, 0.46), (0.33, 0.46),             # elbows
        (0.62, 0.56), (0.38, 0.56),             # wrists
        (0.61, 0.59), (0.39, 0.59), (0.60, 0.60), (0.40, 0.60),
        (0.63, 0.58), (0.37, 0.58),             # pinky/index/thumb stubs
        (0.58, 0.68), (0.42, 0.68),             # hips
        (0.58, 0.85), (0.42, 0.85),             # knees
        (0.58, 0.97), (0.42, 0.97),             # ankles
        (0.59, 0.99), (0.41, 0.99), (0.57, 0.99), (0.43, 0.99),  # feet
    ]
    pose[0:11] = head
    pose[11:33] = limbs
    pose[LEFT_HAND] = _hand_layout((0.38, 0.56), mirror=True)
    pose[RIGHT_HAND] = _hand_layout((0.62, 0.56), mirror=False)
    return pose


def _hand_layout(wrist: tuple[float, float], mirror: bool) -> np.ndarray:
    """21 hand keypoints: wrist plus 5 fingers with 4 joints each."""
    side = -1.0 if mirror else 1.0
    pts = np.zeros((21, 2), dtype=np.float64)
    pts[0] = wrist
    idx = 1
    for finger in range(5):
        dx = side * (0.004 + 0.006 * finger)
        for joint in range(1, 5):
            pts[idx] = (wrist[0] + dx * joint * 0.6, wrist[1] - 0.012 * joint)
            idx += 1
    return pts


BASE_POSE = _base_pose()


def _segment_lengths(target: int, rng: np.random.Generator) -> list[int]:
    lengths: list[int] = []
    remaining = target
    while remaining >= MIN_SEGMENT:
        length = int(rng.integers(MIN_SEGMENT, min(MAX_SEGMENT, remaining) + 1))
        lengths.append(length)
        remaining -= length
    return lengths


def _place_segments(lengths: list[int], n_frames: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform non-overlapping placement with at least MIN_GAP frames between segments."""
    k = len(lengths)
    total = sum(lengths)
    free = n_frames - total - MIN_GAP * (k - 1)
    if free < 0:
        raise ValidationError(
            "fingerspell_rate incompatible with minimum segment length and gaps"
        )
    cuts = np.sort(rng.choice(free + k, size=k, replace=False))
    parts = np.diff(np.concatenate([[-1], cuts])) - 1  # slack before each segment
    segments = []
    cursor = 0
    for i, length in enumerate(lengths):
        gap = int(parts[i]) + (MIN_GAP if i > 0 else 0)
        cursor += gap
        segments.append((cursor, cursor + length - 1))
        cursor += length
    return segments


def _make_sentence(
    planted: list[str], rng: np.random.Generator
) -> tuple[str, list[int]]:
    """Sentence text plus the whitespace-token index of each planted word."""
    tokens: list[str] = []
    indices: list[int] = []
    for word in planted:
        for _ in range(int(rng.integers(1, 4))):
            tokens.append(FREQUENT_WORDS[int(rng.integers(len(FREQUENT_WORDS)))][0])
        indices.append(len(tokens))
        tokens.append(word)
    for _ in range(int(rng.integers(1, 4))):
        tokens.append(FREQUENT_WORDS[int(rng.integers(len(FREQUENT_WORDS)))][0])
    tokens[0] = tokens[0].capitalize()
    return " ".join(tokens), indices


def _render_video(
    cfg: SynthConfig, segments: list[tuple[int, int]], rng: np.random.Generator
) -> np.ndarray:
    n = cfg.frames_per_video
    t = np.arange(n, dtype=np.float64)[:, None, None]
    pose = np.broadcast_to(BASE_POSE, (n, 75, 2)).copy()

    # per-video style: global offset, per-hand rest offsets, head offset
    pose += rng.uniform(-0.03, 0.03, size=(1, 1, 2))
    pose[:, LEFT_HAND, :] += rng.uniform(-0.03, 0.03, size=(1, 1, 2))
    pose[:, RIGHT_HAND, :] += rng.uniform(-0.03, 0.03, size=(1, 1, 2))
    pose[:, 0:11, :] += rng.uniform(-0.02, 0.02, size=(1, 1, 2))

    seconds = t / cfg.fps
    f_bg = rng.uniform(0.5, 1.4)
    f_fs = rng.uniform(4.5, 7.5)
    phase_l, phase_r, phase_body = rng.uniform(0, 2 * math.pi, size=3)
    fs_phases = rng.uniform(0, 2 * math.pi, size=21)

    fs_mask = np.zeros(n, dtype=bool)
    for s, e in segments:
        fs_mask[s : e + 1] = True
    fs_col = fs_mask[:, None, None].astype(np.float64)

    # gentle whole-body sway
    sway = SWAY_AMPLITUDE * np.sin(2 * math.pi * 0.3 * seconds[:, 0, 0] + phase_body)
    pose[:, BODY, 0] += sway[:, None]

    # background signing: both hands oscillate slowly; the non-dominant hand
    # keeps oscillating (damped) during fingerspelling, the dominant hand
    # switches to the fingerspelling signal instead
    bg_l = np.stack(
        [
            BG_AMPLITUDE * np.sin(2 * math.pi * f_bg * seconds[:, 0, 0] + phase_l),
            BG_AMPLITUDE * np.cos(2 * math.pi * f_bg * seconds[:, 0, 0] + phase_l),
        ],
        axis=-1,
    )[:, None, :]
    bg_r = np.stack(
        [
            BG_AMPLITUDE * np.sin(2 * math.pi * f_bg * seconds[:, 0, 0] + phase_r),
            BG_AMPLITUDE * np.cos(2 * math.pi * f_bg * seconds[:, 0, 0] + phase_r),
        ],
        axis=-1,
    )[:, None, :]
    pose[:, LEFT_HAND, :] += bg_l * (1.0 - 0.9 * fs_col[:, :, 0:1])
    pose[:, RIGHT_HAND, :] += bg_r * (1.0 - fs_col[:, :, 0:1])

    # fingerspelling: dominant hand raised and jittering at high frequency
    jitter = np.stack(
        [
            FS_AMPLITUDE * np.sin(2 * math.pi * f_fs * seconds[:, :, 0] + fs_phases[None, :]),
            FS_AMPLITUDE * np.cos(2 * math.pi * f_fs * seconds[:, :, 0] + 2.0 * fs_phases[None, :]),
        ],
        axis=-1,
    )
    fs_signal = np.asarray(FS_SHIFT)[None, None, :] + jitter
    pose[:, RIGHT_HAND, :] += fs_signal * fs_col

    # monotone temporal drift on x so clip order is decodable
    if cfg.drift_amplitude != 0.0:
        drift = cfg.drift_amplitude * (t[:, :, 0] / max(n - 1, 1))
        pose[:, :, 0] += drift

    if cfg.noise_sigma > 0:
        pose += rng.normal(0.0, cfg.noise_sigma, size=pose.shape)

    return pose.astype(np.float32)


def synth_generate(cfg: SynthConfig) -> SynthDataset:
    """Generate the full synthetic dataset in memory.

    Raises ValidationError for infeasible configs. The same config always
    produces identical output; videos use per-video derived seeds so they
    could be generated concurrently.
    """
    cfg.validate()
    target = int(round(cfg.fingerspell_rate * cfg.frames_per_video))

    records: list[VideoRecord] = []
    poses: dict[str, np.ndarray] = {}
    annotations: list[FingerspellingAnnotation] = []
    fs_masks: dict[str, np.ndarray] = {}

    counts: dict[str, int] = {w: c for w, c in FREQUENT_WORDS}
    for w in RARE_WORDS:
        counts[w] = 1

    for index in range(cfg.n_videos):
        rng = np.random.default_rng([cfg.seed, index])
        video_id = f"vid{index:04d}"
        article_id = f"art{index % cfg.n_articles:02d}"
        interpreter_id = f"interp{index % 4}"

        lengths = _segment_lengths(target, rng)
        segments = _place_segments(lengths, cfg.frames_per_video, rng)
        planted = [RARE_WORDS[int(i)] for i in rng.choice(len(RARE_WORDS), size=len(segments), replace=False)]
        sentence, _ = _make_sentence(planted, rng)

        pose = _render_video(cfg, segments, rng)
        record = VideoRecord(
            video_id=video_id,
            article_id=article_id,
            interpreter_id=interpreter_id,
            fps=cfg.fps,
            n_frames=cfg.frames_per_video,
            pose_path=f"poses/{video_id}.fspz",
            sentence=sentence,
        )
        record.validate()

        video_anns = [
            FingerspellingAnnotation(
                video_id=video_id,
                annotator_id="gold",
                start_s=(s + 0.5) / cfg.fps,
                end_s=(e + 0.5) / cfg.fps,
                word=word,
            )
            for (s, e), word in zip(segments, planted)
        ]

        # generator self-checks: the annotations must reproduce the frame
        # mask exactly, and planted words must be strictly rarer than all
        # background words of their sentence
        mask = np.zeros(cfg.frames_per_video, dtype=np.uint8)
        for s, e in segments:
            mask[s : e + 1] = 1
        spans = [annotation_to_span(a, cfg.fps, cfg.frames_per_video) for a in video_anns]
        if not np.array_equal(spans_to_labels(spans, cfg.frames_per_video), mask):
            raise AssertionError(f"{video_id}: annotation round-trip does not match planted mask")
        background = [w for w in sentence.lower().split() if w not in planted]
        if background and planted:
            if max(counts[w] for w in planted) >= min(counts[w] for w in background):
                raise AssertionError(f"{video_id}: planted word not strictly least frequent")

        records.append(record)
        poses[video_id] = pose
        annotations.extend(video_anns)
        fs_masks[video_id] = mask

    lexicon_rows = [
        (w, w.upper(), f"https://lexicon.example/{w}", "stem") for w in sorted(RARE_WORDS)
    ]
    return SynthDataset(
        records=records,
        poses=poses,
        annotations=annotations,
        fs_masks=fs_masks,
        frequency_counts=counts,
        lexicon_rows=lexicon_rows,
    )


def write_synth_dataset(dataset: SynthDataset, out_dir) -> None:
    """Write manifest, annotations, poses, frequency table, and lexicon."""
    out = Path(out_dir)
    (out / "poses").mkdir(parents=True, exist_ok=True)
    save_manifest(dataset.records, out / "manifest.tsv")
    save_annotations(dataset.annotations, out / "annotations.csv")
    for rec in dataset.records:
        write_pose_file(out / rec.pose_path, dataset.poses[rec.video_id])
    with (out / "freq.tsv").open("w", encoding="utf-8") as fh:
        for word in sorted(dataset.frequency_counts):
            fh.write(f"{word}\t{dataset.frequency_counts[word]}\n")
    with (out / "lexicon.csv").open("w", encoding="utf-8", newline="") as fh:
        fh.write("word,gloss,uri,domain\n")
        for word, gloss, uri, domain in dataset.lexicon_rows:
            fh.write(f"{word},{gloss},{uri},{domain}\n")
