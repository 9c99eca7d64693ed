"""Marker-gel tactile sensing: pressing streams, SSIM, contact gates, clips.

A press is modeled as two springs in series: the gel (fixed stiffness) against
the object (stiffness k(H) = H, strictly increasing in hardness). Commanded
depth d therefore produces gel indentation delta = d*k/(k+gel), so a harder
object at the same depth deforms the gel more and every image statistic
derived from the bump is strictly monotone in hardness. The gel image is a
fixed smooth texture plus a yaw-rotated elliptical Gaussian bump and a grid of
dark markers that displace radially from the contact point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import pngio


@dataclass(frozen=True)
class GelConfig:
    image_size: tuple = (64, 64)
    marker_rows: int = 8
    marker_cols: int = 8
    marker_spacing: float = 8.0  # px
    gel_stiffness: float = 70.0
    intensity_gain: float = 140.0  # image response per mm of indentation
    marker_gain: float = 64.0  # px of radial marker travel per mm of indentation
    sensor_noise_sigma: float = 1.5
    px_per_mm: float = 4.0

    def __post_init__(self):
        if self.gel_stiffness <= 0:
            raise ValueError("gel_stiffness must be positive")
        h, w = self.image_size
        if (self.marker_rows - 1) * self.marker_spacing >= h or (self.marker_cols - 1) * self.marker_spacing >= w:
            raise ValueError("marker grid must fit inside the image")

    def marker_grid(self) -> np.ndarray:
        h, w = self.image_size
        y0 = (h - (self.marker_rows - 1) * self.marker_spacing) / 2
        x0 = (w - (self.marker_cols - 1) * self.marker_spacing) / 2
        pts = [
            (x0 + c * self.marker_spacing, y0 + r * self.marker_spacing)
            for r in range(self.marker_rows)
            for c in range(self.marker_cols)
        ]
        return np.array(pts, dtype=np.float64)


DEFAULT_GEL = GelConfig()

# Fixed smooth background texture shared by reference and press frames: SSIM
# needs local structure to lose, otherwise flat noise keeps it pinned near 1.
_TEXTURE_SEED = 20240917
_TEXTURE_AMP = 90.0
_DOT_DEPTH = 20.0
_DOT_SIGMA = 1.5
_TEXTURE_CACHE = {}


def _texture(shape) -> np.ndarray:
    key = (tuple(shape), _TEXTURE_AMP)
    if key not in _TEXTURE_CACHE:
        rng = np.random.default_rng(_TEXTURE_SEED)
        field = rng.normal(0.0, 1.0, shape)
        field = ndimage.gaussian_filter(field, sigma=3.0)
        field = field / np.abs(field).max() * _TEXTURE_AMP
        _TEXTURE_CACHE[key] = 128.0 + field
    return _TEXTURE_CACHE[key]


@dataclass(frozen=True)
class ContactCriteria:
    ssim_threshold: float
    marker_disp_threshold: float = None  # px, or None for "no marker gate"

    def __post_init__(self):
        if not 0 < self.ssim_threshold <= 1:
            raise ValueError("ssim_threshold must be in (0, 1]")


COLLECTION_GATE = ContactCriteria(ssim_threshold=0.96, marker_disp_threshold=2.0)
PRETRAIN_GATE = ContactCriteria(ssim_threshold=0.90, marker_disp_threshold=None)


@dataclass
class TactileFrame:
    image: np.ndarray  # HxW float64, 0-255
    markers: np.ndarray  # (N, 2) px positions
    indentation_depth: float  # commanded press depth (mm) at capture

    def __post_init__(self):
        if self.image.min() < 0 or self.image.max() > 255:
            raise ValueError("intensities out of range")


@dataclass
class PressStream:
    reference: TactileFrame  # pre-contact frame at depth 0
    frames: list  # depth-stepped frames, frames[0] at depth 0
    hardness: float
    pose: tuple  # (dx mm, dy mm, yaw deg)
    seed: int
    step_mm: float = 0.25


@dataclass
class TactileClip:
    frames: list  # exactly 8 consecutive frames from first contact
    reference: TactileFrame
    object_hardness_label: float = None
    contact_index: int = 0
    pose: tuple = (0.0, 0.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        if len(self.frames) != 8:
            raise ValueError("clip must hold exactly 8 frames")
        depths = [f.indentation_depth for f in self.frames]
        steps = np.diff(depths)
        if not np.allclose(steps, steps[0]) or steps[0] <= 0:
            raise ValueError("clip depths must increase in equal steps")


def gel_indentation(hardness: float, depth: float, gel: GelConfig = DEFAULT_GEL) -> float:
    """Series-spring split of the commanded depth; k(H) = H."""
    k = float(hardness)
    return depth * k / (k + gel.gel_stiffness)


def _render_gel_frame(depth, hardness, pose, gel, rng) -> TactileFrame:
    h, w = gel.image_size
    dx, dy, yaw = pose
    delta = gel_indentation(hardness, depth, gel)
    image = _texture(gel.image_size).copy()
    markers = gel.marker_grid().copy()
    cx = w / 2 + dx * gel.px_per_mm
    cy = h / 2 + dy * gel.px_per_mm

    if delta > 0:
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        theta = math.radians(yaw)
        ct, st = math.cos(theta), math.sin(theta)
        xr = (xs - cx) * ct + (ys - cy) * st
        yr = -(xs - cx) * st + (ys - cy) * ct
        # contact patch grows like sqrt(delta); mild fixed ellipticity so yaw
        # actually changes the image
        sig = 6.0 * math.sqrt(delta)
        sx, sy = sig * (1 + 0.15), sig * (1 - 0.15)
        image += gel.intensity_gain * delta * np.exp(-0.5 * ((xr / sx) ** 2 + (yr / sy) ** 2))

        # markers slide radially away from the contact center, fading with
        # distance; fixed-width falloff keeps mean displacement strictly
        # increasing in delta
        mx, my = markers[:, 0] - cx, markers[:, 1] - cy
        rho = np.hypot(mx, my)
        falloff = np.exp(-0.5 * (rho / 16.0) ** 2)
        gain = gel.marker_gain * delta * falloff
        safe = np.maximum(rho, 1e-9)
        markers[:, 0] += gain * mx / safe
        markers[:, 1] += gain * my / safe

    _stamp_markers(image, markers)

    if gel.sensor_noise_sigma > 0:
        image = image + rng.normal(0.0, gel.sensor_noise_sigma, image.shape)
    return TactileFrame(
        image=np.clip(image, 0.0, 255.0),
        markers=markers,
        indentation_depth=float(depth),
    )


def _stamp_markers(image: np.ndarray, markers: np.ndarray, radius: int = 6) -> None:
    """Subtract a dark Gaussian dot at each marker, in-place."""
    h, w = image.shape
    for px, py in markers:
        u0, v0 = int(round(px)), int(round(py))
        us = slice(max(0, u0 - radius), min(w, u0 + radius + 1))
        vs = slice(max(0, v0 - radius), min(h, v0 + radius + 1))
        if us.start >= us.stop or vs.start >= vs.stop:
            continue
        xs = np.arange(us.start, us.stop, dtype=np.float64)
        ys = np.arange(vs.start, vs.stop, dtype=np.float64)
        d2 = (xs[None, :] - px) ** 2 + (ys[:, None] - py) ** 2
        image[vs, us] -= _DOT_DEPTH * np.exp(-0.5 * d2 / _DOT_SIGMA**2)


def press(
    hardness: float,
    pose_offset,
    gel: GelConfig = DEFAULT_GEL,
    max_depth: float = 3.5,
    seed: int = 0,
    step_mm: float = 0.25,
) -> PressStream:
    """Simulate a stepped top-down press; deterministic per seed."""
    dx, dy, yaw = pose_offset
    if abs(dx) > 5 or abs(dy) > 5:
        raise ValueError("|dx|, |dy| must be <= 5 mm")
    if not 0 <= yaw <= 45:
        raise ValueError("yaw must be in [0, 45] degrees")
    if not 0 <= hardness <= 100:
        raise ValueError("hardness must be in [0, 100]")
    rng = np.random.default_rng(seed)
    reference = _render_gel_frame(0.0, hardness, (dx, dy, yaw), gel, rng)
    n_steps = int(round(max_depth / step_mm))
    frames = [
        _render_gel_frame(i * step_mm, hardness, (dx, dy, yaw), gel, rng)
        for i in range(n_steps + 1)
    ]
    return PressStream(
        reference=reference,
        frames=frames,
        hardness=float(hardness),
        pose=(float(dx), float(dy), float(yaw)),
        seed=int(seed),
        step_mm=float(step_mm),
    )


def _gaussian_window(size=11, sigma=1.5) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2
    g = np.exp(-0.5 * (ax / sigma) ** 2)
    win = np.outer(g, g)
    return win / win.sum()


_SSIM_WINDOW = _gaussian_window()


def ssim(img_a: np.ndarray, img_b: np.ndarray) -> float:
    """Mean local SSIM, 11x11 Gaussian window sigma=1.5, K1=0.01, K2=0.03."""
    a = np.asarray(img_a, dtype=np.float64)
    b = np.asarray(img_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError("ssim needs two single-channel images of equal size")
    c1 = (0.01 * 255) ** 2
    c2 = (0.03 * 255) ** 2
    win = _SSIM_WINDOW

    def filt(x):
        return ndimage.convolve(x, win, mode="reflect")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def mean_marker_displacement(frame: TactileFrame, reference: TactileFrame) -> float:
    if frame.markers.shape != reference.markers.shape:
        raise ValueError("marker counts differ")
    return float(np.linalg.norm(frame.markers - reference.markers, axis=1).mean())


def detect_contact(stream: PressStream, criteria: ContactCriteria, reference: TactileFrame = None):
    """Smallest frame index meeting the criteria, or None for no contact."""
    if not stream.frames:
        raise ValueError("stream is empty")
    ref = reference if reference is not None else stream.reference
    for i, frame in enumerate(stream.frames):
        if ssim(frame.image, ref.image) > criteria.ssim_threshold:
            continue
        if criteria.marker_disp_threshold is not None:
            if mean_marker_displacement(frame, ref) <= criteria.marker_disp_threshold:
                continue
        return i
    return None


def capture_clip(stream: PressStream, contact_index: int) -> TactileClip:
    """Frames 1..8 counted from first contact, with the reference attached."""
    if contact_index is None:
        raise ValueError("no contact index given")
    if contact_index + 8 > len(stream.frames):
        raise ValueError("not enough frames after contact to fill a clip")
    return TactileClip(
        frames=list(stream.frames[contact_index : contact_index + 8]),
        reference=stream.reference,
        object_hardness_label=stream.hardness,
        contact_index=int(contact_index),
        pose=stream.pose,
        seed=stream.seed,
    )


def select_frames(clip: TactileClip, t: int) -> list:
    """T difference images: clip frames {2,8} or {2,4,6,8} minus clip frame 1."""
    if t == 2:
        picks = (1, 7)
    elif t == 4:
        picks = (1, 3, 5, 7)
    else:
        raise ValueError("T must be 2 or 4")
    base = clip.frames[0].image
    return [clip.frames[i].image - base for i in picks]


def save_clip(clip: TactileClip, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(clip.frames):
        pngio.save_gray_png(d / f"frame_{i}.png", frame.image)
    pngio.save_gray_png(d / "reference.png", clip.reference.image)
    meta = {
        "hardness": clip.object_hardness_label,
        "pose": list(clip.pose),
        "seed": clip.seed,
        "contact_index": clip.contact_index,
        "depths": [f.indentation_depth for f in clip.frames],
        "markers": [f.markers.tolist() for f in clip.frames],
        "reference_markers": clip.reference.markers.tolist(),
    }
    (d / "meta.json").write_text(json.dumps(meta))


def load_clip(directory) -> TactileClip:
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    frames = []
    for i in range(8):
        frames.append(
            TactileFrame(
                image=pngio.load_gray_png(d / f"frame_{i}.png"),
                markers=np.array(meta["markers"][i]),
                indentation_depth=float(meta["depths"][i]),
            )
        )
    reference = TactileFrame(
        image=pngio.load_gray_png(d / "reference.png"),
        markers=np.array(meta["reference_markers"]),
        indentation_depth=0.0,
    )
    return TactileClip(
        frames=frames,
        reference=reference,
        object_hardness_label=meta["hardness"],
        contact_index=int(meta["contact_index"]),
        pose=tuple(meta["pose"]),
        seed=int(meta["seed"]),
    )
