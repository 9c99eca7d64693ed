"""Photometric and flip augmentation for tactile frames and RGB images.

A press clip is one photometric condition: every frame in it must get the
same flip and jitter factors or the temporal difference signal breaks. The
clip helper therefore draws parameters once and reuses them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .tactile import TactileClip, TactileFrame


@dataclass(frozen=True)
class AugmentParams:
    flip: bool = False
    brightness: float = 1.0  # multiplicative, [0.9, 1.1]
    contrast: float = 1.0  # stretch about the mean, [0.9, 1.1]
    saturation: float = 1.0  # RGB only, [0.9, 1.1]
    hue: float = 0.0  # fraction of a full hue turn, [-0.01, 0.01]


IDENTITY = AugmentParams()


def draw_params(seed) -> AugmentParams:
    rng = np.random.default_rng(seed)
    return AugmentParams(
        flip=bool(rng.random() < 0.5),
        brightness=float(rng.uniform(0.9, 1.1)),
        contrast=float(rng.uniform(0.9, 1.1)),
        saturation=float(rng.uniform(0.9, 1.1)),
        hue=float(rng.uniform(-0.01, 0.01)),
    )


def _rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    v = maxc
    spread = maxc - minc
    s = np.where(maxc > 0, spread / np.maximum(maxc, 1e-12), 0.0)
    safe = np.maximum(spread, 1e-12)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(r == maxc, bc - gc, np.where(g == maxc, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(spread > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, v], axis=-1)


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    choices = [
        np.stack([v, t, p], axis=-1),
        np.stack([q, v, p], axis=-1),
        np.stack([p, v, t], axis=-1),
        np.stack([p, q, v], axis=-1),
        np.stack([t, p, v], axis=-1),
        np.stack([v, p, q], axis=-1),
    ]
    out = np.zeros(hsv.shape)
    for k, c in enumerate(choices):
        out[i == k] = c[i == k]
    return out


def apply_params(image: np.ndarray, params: AugmentParams) -> np.ndarray:
    """Flip then jitter a 0-255 image; grayscale ignores saturation/hue."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim not in (2, 3):
        raise ValueError("expected HxW or HxWx3 image")
    if params.flip:
        img = img[:, ::-1].copy()
    img = img * params.brightness
    img = img.mean() + (img - img.mean()) * params.contrast
    if img.ndim == 3:
        hsv = _rgb_to_hsv(np.clip(img, 0, 255) / 255.0)
        hsv[..., 1] = np.clip(hsv[..., 1] * params.saturation, 0.0, 1.0)
        hsv[..., 0] = (hsv[..., 0] + params.hue) % 1.0
        img = _hsv_to_rgb(hsv) * 255.0
    return np.clip(img, 0.0, 255.0)


def augment(image: np.ndarray, seed) -> np.ndarray:
    return apply_params(image, draw_params(seed))


def augment_clip(clip: TactileClip, seed) -> TactileClip:
    """Same flip/jitter for all 8 frames and the reference."""
    params = draw_params(seed)

    def redo(frame: TactileFrame) -> TactileFrame:
        return TactileFrame(
            image=apply_params(frame.image, params),
            markers=frame.markers,
            indentation_depth=frame.indentation_depth,
        )

    return TactileClip(
        frames=[redo(f) for f in clip.frames],
        reference=redo(clip.reference),
        object_hardness_label=clip.object_hardness_label,
        contact_index=clip.contact_index,
        pose=clip.pose,
        seed=clip.seed,
    )
