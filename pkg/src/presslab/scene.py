"""Synthetic tabletop fruit scenes rendered through a fixed top-down pinhole camera.

The camera looks straight down at a 600x400 mm workspace from 600 mm above its
center; camera X/Y axes align with workspace X/Y, so a camera-frame point is a
workspace point with Z measured as distance from the camera. Objects are
flat-topped discs whose height equals their radius: the top face is a single
depth plane, which keeps the noiseless grounded centroid within one pixel of
ground truth for every in-frustum pose (a curved profile does not; its visible
cap is asymmetric off-axis and the median-depth centroid picks up a
millimeter-scale bias).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

TABLE_COLOR = (64, 64, 64)

# Per-class (hardness range HA, radius range mm, RGB). Hardness priors stay
# inside the 60-90 HA band fruit are expected to occupy.
FRUIT_CLASSES = {
    "banana": ((60.0, 85.0), (32.0, 40.0), (228, 214, 76)),
    "lime": ((62.0, 90.0), (24.0, 30.0), (104, 178, 70)),
    "lemon": ((62.0, 90.0), (26.0, 33.0), (242, 224, 75)),
    "mango": ((60.0, 85.0), (38.0, 46.0), (243, 160, 62)),
    "tomato": ((60.0, 85.0), (30.0, 38.0), (222, 72, 56)),
    "avocado": ((60.0, 85.0), (34.0, 42.0), (87, 108, 56)),
    "kiwi": ((60.0, 86.0), (28.0, 34.0), (134, 106, 70)),
    "apple": ((62.0, 90.0), (36.0, 44.0), (196, 58, 62)),
    "orange": ((63.0, 89.0), (35.0, 42.0), (240, 140, 44)),
    "pear": ((61.0, 87.0), (32.0, 40.0), (186, 196, 96)),
}

CAMERA_HEIGHT_MM = 600.0
WORKSPACE_BOUNDS = ((-300.0, 300.0), (-200.0, 200.0))

# Objects are placed so their whole footprint projects at least this many
# pixels inside the image border; nothing is ever clipped by the frustum.
PLACEMENT_MARGIN_PX = 8.0


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


DEFAULT_INTRINSICS = CameraIntrinsics(fx=608.5, fy=606.9, cx=309.4, cy=213.83)


@dataclass(frozen=True)
class SceneObject:
    """One fruit: a flat-topped disc of height equal to its radius."""

    id: str
    cls: str
    center: tuple  # (x, y) mm in workspace coordinates
    radius: float  # mm
    color: tuple  # RGB
    hardness: float  # HA

    def __post_init__(self):
        if self.cls not in FRUIT_CLASSES:
            raise ValueError(f"unknown fruit class {self.cls!r}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if not 0.0 <= self.hardness <= 100.0:
            raise ValueError("hardness must be in [0, 100]")

    @property
    def height(self) -> float:
        return self.radius

    @property
    def top_depth(self) -> float:
        """Camera-to-top-face distance in mm."""
        return CAMERA_HEIGHT_MM - self.height

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "class": self.cls,
            "center": [self.center[0], self.center[1]],
            "radius": self.radius,
            "color": list(self.color),
            "hardness": self.hardness,
        }

    @staticmethod
    def from_json(d: dict) -> "SceneObject":
        return SceneObject(
            id=d["id"],
            cls=d["class"],
            center=(float(d["center"][0]), float(d["center"][1])),
            radius=float(d["radius"]),
            color=tuple(int(c) for c in d["color"]),
            hardness=float(d["hardness"]),
        )


@dataclass(frozen=True)
class Scene:
    objects: tuple
    workspace: tuple = WORKSPACE_BOUNDS
    seed: int = 0

    def __post_init__(self):
        if not 1 <= len(self.objects) <= 6:
            raise ValueError("scene must contain 1 to 6 objects")
        (x0, x1), (y0, y1) = self.workspace
        for obj in self.objects:
            if not (x0 <= obj.center[0] <= x1 and y0 <= obj.center[1] <= y1):
                raise ValueError(f"object {obj.id} center outside workspace")
        for i, a in enumerate(self.objects):
            for b in self.objects[i + 1 :]:
                d = float(np.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]))
                if d <= a.radius + b.radius:
                    raise ValueError(f"objects {a.id} and {b.id} overlap")

    def object_by_id(self, object_id: str) -> SceneObject:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(f"no object with id {object_id!r}")

    def to_json(self) -> dict:
        return {
            "objects": [o.to_json() for o in self.objects],
            "workspace": [list(self.workspace[0]), list(self.workspace[1])],
            "seed": self.seed,
        }

    @staticmethod
    def from_json(d: dict) -> "Scene":
        return Scene(
            objects=tuple(SceneObject.from_json(o) for o in d["objects"]),
            workspace=(tuple(d["workspace"][0]), tuple(d["workspace"][1])),
            seed=int(d["seed"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @staticmethod
    def loads(s: str) -> "Scene":
        return Scene.from_json(json.loads(s))


@dataclass
class RgbdFrame:
    color: np.ndarray  # HxWx3 uint8
    depth: np.ndarray  # HxW float64 mm
    timestamp: int = 0

    def __post_init__(self):
        if self.color.shape[:2] != self.depth.shape:
            raise ValueError("color and depth dimensions differ")
        if np.any(self.depth < 0):
            raise ValueError("depth must be non-negative")


def project_pixel(intrinsics: CameraIntrinsics, u: float, v: float, depth: float):
    """Back-project one pixel at a known depth into the camera frame (mm)."""
    if depth <= 0:
        raise ValueError("depth must be positive")
    x = depth * (u - intrinsics.cx) / intrinsics.fx
    y = depth * (v - intrinsics.cy) / intrinsics.fy
    return np.array([x, y, float(depth)])


def placement_bounds(radius: float, intrinsics: CameraIntrinsics, workspace=WORKSPACE_BOUNDS):
    """Center bounds keeping the whole top face PLACEMENT_MARGIN_PX inside the image."""
    z = CAMERA_HEIGHT_MM - radius
    m = PLACEMENT_MARGIN_PX
    x_lo = z * (m - intrinsics.cx) / intrinsics.fx + radius
    x_hi = z * (intrinsics.width - 1 - m - intrinsics.cx) / intrinsics.fx - radius
    y_lo = z * (m - intrinsics.cy) / intrinsics.fy + radius
    y_hi = z * (intrinsics.height - 1 - m - intrinsics.cy) / intrinsics.fy - radius
    (wx0, wx1), (wy0, wy1) = workspace
    return (max(x_lo, wx0), min(x_hi, wx1)), (max(y_lo, wy0), min(y_hi, wy1))


def generate_scene(seed: int, n_objects="random", classes=None, intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS) -> Scene:
    """Deterministically place 1-6 non-overlapping, fully visible fruits.

    `classes` optionally pins the class of each object in order (used by the
    ranking and scenario builders); otherwise classes are drawn uniformly.
    """
    rng = np.random.default_rng(seed)
    if n_objects == "random":
        n = int(rng.integers(1, 7))
    else:
        n = int(n_objects)
        if not 1 <= n <= 6:
            raise ValueError("n_objects must be in [1, 6]")
    if classes is not None:
        if len(classes) != n:
            raise ValueError("classes must match n_objects")
        picked = list(classes)
    else:
        picked = [str(rng.choice(sorted(FRUIT_CLASSES))) for _ in range(n)]

    placed = []
    for i, cls in enumerate(picked):
        (h_lo, h_hi), (r_lo, r_hi), color = FRUIT_CLASSES[cls]
        for attempt in range(500):
            radius = float(rng.uniform(r_lo, r_hi))
            (x_lo, x_hi), (y_lo, y_hi) = placement_bounds(radius, intrinsics)
            cx = float(rng.uniform(x_lo, x_hi))
            cy = float(rng.uniform(y_lo, y_hi))
            # 2 mm clearance keeps the non-overlap invariant strict.
            if all(np.hypot(cx - o.center[0], cy - o.center[1]) > radius + o.radius + 2.0 for o in placed):
                placed.append(
                    SceneObject(
                        id=f"obj-{i}",
                        cls=cls,
                        center=(cx, cy),
                        radius=radius,
                        color=color,
                        hardness=float(rng.uniform(h_lo, h_hi)),
                    )
                )
                break
        else:
            raise RuntimeError(f"could not place object {i} after 500 attempts; workspace too crowded")
    return Scene(objects=tuple(placed), seed=int(seed))


def _footprint(obj: SceneObject, intrinsics: CameraIntrinsics):
    """Pixel mask slice of the object's top face.

    A pixel belongs to the footprint when its ray, evaluated at the top-face
    depth plane, lands inside the disc.
    """
    z = obj.top_depth
    x0, y0 = obj.center
    u_lo = int(np.floor(intrinsics.cx + intrinsics.fx * (x0 - obj.radius) / z)) - 1
    u_hi = int(np.ceil(intrinsics.cx + intrinsics.fx * (x0 + obj.radius) / z)) + 1
    v_lo = int(np.floor(intrinsics.cy + intrinsics.fy * (y0 - obj.radius) / z)) - 1
    v_hi = int(np.ceil(intrinsics.cy + intrinsics.fy * (y0 + obj.radius) / z)) + 1
    u_lo, u_hi = max(u_lo, 0), min(u_hi, intrinsics.width - 1)
    v_lo, v_hi = max(v_lo, 0), min(v_hi, intrinsics.height - 1)
    if u_lo > u_hi or v_lo > v_hi:
        return None, None
    us = np.arange(u_lo, u_hi + 1)
    vs = np.arange(v_lo, v_hi + 1)
    xs = z * (us - intrinsics.cx) / intrinsics.fx
    ys = z * (vs - intrinsics.cy) / intrinsics.fy
    inside = (xs[None, :] - x0) ** 2 + (ys[:, None] - y0) ** 2 <= obj.radius**2
    return (slice(v_lo, v_hi + 1), slice(u_lo, u_hi + 1)), inside


def ground_truth_mask(scene: Scene, object_id: str, intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS) -> np.ndarray:
    obj = scene.object_by_id(object_id)
    mask = np.zeros((intrinsics.height, intrinsics.width), dtype=bool)
    window, inside = _footprint(obj, intrinsics)
    if window is not None:
        mask[window] = inside
    return mask


def render(
    scene: Scene,
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS,
    depth_noise_sigma: float = 0.0,
    seed: int = 0,
    timestamp: int = 0,
    rng: np.random.Generator = None,
) -> RgbdFrame:
    """Render one RGB-D frame; sigma=0 is exact and consumes no randomness."""
    if depth_noise_sigma < 0:
        raise ValueError("depth noise sigma must be >= 0")
    color = np.empty((intrinsics.height, intrinsics.width, 3), dtype=np.uint8)
    color[:] = TABLE_COLOR
    depth = np.full((intrinsics.height, intrinsics.width), CAMERA_HEIGHT_MM, dtype=np.float64)
    for obj in scene.objects:
        window, inside = _footprint(obj, intrinsics)
        if window is None:
            continue
        patch = color[window]
        patch[inside] = obj.color
        dpatch = depth[window]
        dpatch[inside] = obj.top_depth
    if depth_noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng(seed)
        depth = np.maximum(depth + rng.normal(0.0, depth_noise_sigma, depth.shape), 0.0)
    return RgbdFrame(color=color, depth=depth, timestamp=timestamp)


def render_burst(
    scene: Scene,
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS,
    depth_noise_sigma: float = 0.0,
    n_frames: int = 10,
    seed: int = 0,
    dropout_rate: float = 0.05,
    edge_mixing: bool = True,
) -> list:
    """Consecutive frames of static geometry as a real depth camera sees them.

    On top of the per-frame iid Gaussian channel, a noisy burst carries the
    two structured artifacts of consumer depth sensors, both disabled when
    sigma=0: silhouette pixels read a persistent random mixture of foreground
    and background depth (flying pixels; survives any per-frame filter, which
    is what mask refinement is for), and interior object pixels intermittently
    drop out to the table depth (per-frame flicker, which is what the
    cross-frame median is for).
    """
    if not 0 <= dropout_rate < 1:
        raise ValueError("dropout_rate must be in [0, 1)")
    rng = np.random.default_rng(seed)
    base = render(scene, intrinsics, 0.0)
    if depth_noise_sigma == 0:
        return [RgbdFrame(color=base.color.copy(), depth=base.depth.copy(), timestamp=t) for t in range(n_frames)]

    clean = base.depth
    object_px = clean < CAMERA_HEIGHT_MM
    mixed = clean
    if edge_mixing:
        # 3x3 extrema around each pixel locate depth discontinuities.
        lo = _neighborhood_min(clean)
        hi = _neighborhood_max(clean)
        band = hi - lo > 1.0
        alpha = rng.uniform(size=clean.shape)
        mixed = np.where(band, alpha * lo + (1 - alpha) * hi, clean)

    frames = []
    for t in range(n_frames):
        depth = mixed.copy()
        if dropout_rate > 0:
            drop = object_px & (rng.uniform(size=clean.shape) < dropout_rate)
            depth[drop] = CAMERA_HEIGHT_MM
        depth = np.maximum(depth + rng.normal(0.0, depth_noise_sigma, depth.shape), 0.0)
        frames.append(RgbdFrame(color=base.color.copy(), depth=depth, timestamp=t))
    return frames


def _neighborhood_min(depth: np.ndarray) -> np.ndarray:
    padded = np.pad(depth, 1, mode="edge")
    out = depth.copy()
    for dv in (-1, 0, 1):
        for du in (-1, 0, 1):
            np.minimum(out, padded[1 + dv : padded.shape[0] - 1 + dv, 1 + du : padded.shape[1] - 1 + du], out=out)
    return out


def _neighborhood_max(depth: np.ndarray) -> np.ndarray:
    padded = np.pad(depth, 1, mode="edge")
    out = depth.copy()
    for dv in (-1, 0, 1):
        for du in (-1, 0, 1):
            np.maximum(out, padded[1 + dv : padded.shape[0] - 1 + dv, 1 + du : padded.shape[1] - 1 + du], out=out)
    return out
