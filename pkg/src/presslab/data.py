"""Synthetic tactile datasets: pretraining corpus, fine-tune protocol, eval sets.

Mirrors the collection protocol the hardness model expects downstream. The
pretraining corpus spans a wide hardness band gated at SSIM<0.90; the
fine-tune set is 7 reference objects x 40 jittered poses = 280 clips under
the stricter collection gate; evaluation uses held-out fruit-range presses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tactile import (
    COLLECTION_GATE,
    PRETRAIN_GATE,
    TactileClip,
    capture_clip,
    detect_contact,
    load_clip,
    press,
    save_clip,
    select_frames,
)

PRETRAIN_HARDNESS_RANGE = (20.0, 95.0)
FRUIT_HARDNESS_RANGE = (60.0, 90.0)
# five rubber-cube analogs spanning 66-80, a band analog at 88, a pouch at 62
FINETUNE_HARDNESS = (62.0, 66.0, 69.5, 73.0, 76.5, 80.0, 88.0)
POSES_PER_OBJECT = 40
INPUT_SCALE = 32.0

# ranking protocol: per condition, (level name, true hardness); all pairs that
# must separate have gaps >= 5 HA, the lime pair is deliberately sub-1 HA
RANKING_CONDITIONS = {
    "mango": (("hard", 79.0), ("soft", 68.0)),
    "lime": (("hard", 64.1), ("soft", 63.9)),
    "tomato": (("hard", 71.0), ("soft", 64.0)),
    "banana": (("hard", 74.0), ("medium", 68.0), ("soft", 63.0)),
    "avocado": (("hard", 71.0), ("medium", 66.0), ("soft", 61.0)),
}
RANKING_SAMPLES_PER_LEVEL = 20


@dataclass(frozen=True)
class LabeledClip:
    clip: TactileClip
    hardness: float
    object_id: str = ""


def _random_pose(rng) -> tuple:
    return (
        float(rng.uniform(-5.0, 5.0)),
        float(rng.uniform(-5.0, 5.0)),
        float(rng.uniform(0.0, 45.0)),
    )


def collect_clip(hardness, pose, seed, gate=COLLECTION_GATE) -> TactileClip:
    """Press, gate, and cut one clip; None when the gate never fires."""
    stream = press(hardness, pose, max_depth=3.5, seed=seed)
    idx = detect_contact(stream, gate)
    if idx is None or idx + 8 > len(stream.frames):
        return None
    return capture_clip(stream, idx)


def _collect(hardness, rng, gate, object_id="") -> LabeledClip:
    # gates are calibrated to fire well inside the stream, but a pose can in
    # principle push the crossing out; resample rather than crash
    for _ in range(20):
        clip = collect_clip(hardness, _random_pose(rng), int(rng.integers(0, 2**31)), gate)
        if clip is not None:
            return LabeledClip(clip=clip, hardness=float(hardness), object_id=object_id)
    raise RuntimeError(f"contact gate kept missing at hardness {hardness}")


def make_pretrain_set(n: int = 1000, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    lo, hi = PRETRAIN_HARDNESS_RANGE
    return [_collect(rng.uniform(lo, hi), rng, PRETRAIN_GATE) for _ in range(n)]


def make_finetune_set(seed: int = 0) -> list:
    """7 reference objects x 40 poses under the collection gate."""
    rng = np.random.default_rng(seed)
    out = []
    for k, h in enumerate(FINETUNE_HARDNESS):
        for _ in range(POSES_PER_OBJECT):
            out.append(_collect(h, rng, COLLECTION_GATE, object_id=f"ref-{k}"))
    return out


def make_eval_fruit_set(n: int = 100, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    lo, hi = FRUIT_HARDNESS_RANGE
    return [_collect(rng.uniform(lo, hi), rng, COLLECTION_GATE) for _ in range(n)]


def make_ranking_sets(seed: int = 0) -> dict:
    """Condition -> list of (level, hardness, clips) for the rank tests."""
    rng = np.random.default_rng(seed)
    out = {}
    for condition, levels in RANKING_CONDITIONS.items():
        rows = []
        for level, h in levels:
            clips = [
                _collect(h, rng, COLLECTION_GATE, object_id=f"{condition}-{level}")
                for _ in range(RANKING_SAMPLES_PER_LEVEL)
            ]
            rows.append((level, h, clips))
        out[condition] = rows
    return out


def clip_input(clip: TactileClip, t: int) -> np.ndarray:
    """Stack T difference images into a (T, 1, S, S) model input."""
    return np.stack([d[None, :, :] for d in select_frames(clip, t)]) / INPUT_SCALE


def batch_inputs(clips, t: int) -> np.ndarray:
    return np.stack([clip_input(c, t) for c in clips])


def labels_of(samples) -> np.ndarray:
    return np.array([s.hardness for s in samples], dtype=np.float64)


def save_dataset(samples, directory) -> None:
    """Clip directories plus a JSONL manifest."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with (d / "manifest.jsonl").open("w") as fh:
        for i, sample in enumerate(samples):
            rel = f"clip_{i:05d}"
            save_clip(sample.clip, d / rel)
            fh.write(
                json.dumps(
                    {"dir": rel, "hardness": sample.hardness, "object_id": sample.object_id}
                )
                + "\n"
            )


def load_dataset(directory) -> list:
    d = Path(directory)
    out = []
    for line in (d / "manifest.jsonl").read_text().splitlines():
        row = json.loads(line)
        out.append(
            LabeledClip(
                clip=load_clip(d / row["dir"]),
                hardness=float(row["hardness"]),
                object_id=row.get("object_id", ""),
            )
        )
    return out
