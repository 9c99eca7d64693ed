"""End-to-end orchestration: parse, ground, localize, press, estimate, explain.

Six sequential stages per query. Stage failures are recorded in the run
record rather than raised, so a run always produces an explanation and a
complete outcome row per target. Stage durations come from a deterministic
workload model (a seeded virtual clock), keeping fixed-seed reports
byte-identical where real wall time would not be; absolute latency values
are out of scope, the breakdown structure is what is reported.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .data import RANKING_CONDITIONS, batch_inputs, make_ranking_sets
from .lang import (
    DEFAULT_RIPENESS,
    DETECTOR_PROMPT_LIST,
    ExplanationInput,
    Intent,
    ObjectReading,
    Unparseable,
    compose_explanation,
    describe_location,
    judge,
    parse_query,
)
from .scene import DEFAULT_INTRINSICS, Scene, generate_scene, ground_truth_mask, render_burst
from .stats import one_sample_t, rank_report, welch_t
from .tactile import COLLECTION_GATE, capture_clip, detect_contact, press
from .vision import (
    GSAM_LIKE,
    YOLO_LIKE,
    DetectorProfile,
    detect,
    ground_object,
    iou,
)

STAGES = ("parse", "detect", "centroid", "tactile-collection", "inference", "explanation")

LOCALIZATION_TOLERANCE_MM = 5.0

# virtual clock: base cost + per-unit cost, milliseconds
_STAGE_BASE = {
    "parse": 3.0,
    "detect": 45.0,
    "centroid": 14.0,
    "tactile-collection": 120.0,
    "inference": 40.0,
    "explanation": 22.0,
}
_PRESS_MS = 2600.0  # one stepped press dominates everything else


@dataclass(frozen=True)
class StageTiming:
    stage: str
    duration_ms: float

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.duration_ms < 0:
            raise ValueError("duration must be >= 0")


@dataclass(frozen=True)
class ObjectOutcome:
    object_id: str
    label: str
    grounded: bool
    localized: bool
    measured: bool
    communicated: bool
    centroid_error_mm: float = None
    hardness_true: float = None
    hardness_pred: float = None
    position: tuple = None  # measured workspace (x, y) mm

    @property
    def succeeded(self) -> bool:
        return self.grounded and self.localized and self.measured and self.communicated

    def to_json(self) -> dict:
        return {
            "object_id": self.object_id,
            "label": self.label,
            "grounded": self.grounded,
            "localized": self.localized,
            "measured": self.measured,
            "communicated": self.communicated,
            "centroid_error_mm": self.centroid_error_mm,
            "hardness_true": self.hardness_true,
            "hardness_pred": self.hardness_pred,
            "position": list(self.position) if self.position else None,
            "succeeded": self.succeeded,
        }


@dataclass(frozen=True)
class RunRecord:
    scenario_id: int
    query: str
    outcomes: tuple
    timings: tuple
    text: str
    judge_scores: tuple = None  # (accuracy, completeness, clarity)
    parse_failed: bool = False

    @property
    def total_ms(self) -> float:
        return sum(t.duration_ms for t in self.timings)

    @property
    def ol_fraction(self) -> float:
        if not self.outcomes:
            return 0.0
        return sum(o.succeeded for o in self.outcomes) / len(self.outcomes)

    @property
    def sl_success(self) -> bool:
        if self.parse_failed or not self.outcomes:
            return False
        if not all(o.succeeded for o in self.outcomes):
            return False
        acc, comp, _ = self.judge_scores
        return acc >= 4 and comp == 5

    def to_json(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "query": self.query,
            "outcomes": [o.to_json() for o in self.outcomes],
            "timings": [{"stage": t.stage, "duration_ms": t.duration_ms} for t in self.timings],
            "total_ms": self.total_ms,
            "text": self.text,
            "judge": None
            if self.judge_scores is None
            else dict(zip(("accuracy", "completeness", "clarity"), self.judge_scores)),
            "parse_failed": self.parse_failed,
            "ol_fraction": self.ol_fraction,
            "sl_success": self.sl_success,
        }


def noiseless_profile(profile: DetectorProfile) -> DetectorProfile:
    """No misses, no boundary jitter, no threshold: geometry passthrough."""
    return replace(profile, miss_rate=0.0, boundary_noise=0, confidence_threshold=0.0)


def _resolve_targets(scene: Scene, intent: Intent):
    """Ground-truth objects the query addresses, plus absent target classes."""
    if not intent.targets:
        return list(scene.objects), []
    targets, missing = [], []
    for cls in intent.targets:
        instances = [o for o in scene.objects if o.cls == cls]
        if instances:
            targets.extend(instances)
        else:
            missing.append(cls)
    return targets, missing


def _mask_overlap(a, b) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


def _associate(detections, targets, scene, intrinsics):
    """Greedy best-overlap assignment of detections to target instances."""
    gt = {o.id: ground_truth_mask(scene, o.id, intrinsics) for o in targets}
    pairs = []
    for d_idx, det in enumerate(detections):
        for obj in targets:
            if det.label != obj.cls:
                continue
            pairs.append((_mask_overlap(det.mask, gt[obj.id]), d_idx, obj.id))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    det_of = {}
    used = set()
    for overlap, d_idx, obj_id in pairs:
        if overlap <= 0.0 or d_idx in used or obj_id in det_of:
            continue
        det_of[obj_id] = detections[d_idx]
        used.add(d_idx)
    return det_of


def run_query(
    scene: Scene,
    text: str,
    model,
    t: int,
    profile: DetectorProfile = GSAM_LIKE,
    seed: int = 0,
    depth_noise_sigma: float = 2.0,
    scenario_id: int = 0,
    rules=DEFAULT_RIPENESS,
    intrinsics=DEFAULT_INTRINSICS,
    emit=None,
) -> RunRecord:
    """Execute one query end to end; failures land in the record."""
    rng = np.random.default_rng((seed, 911))
    timings = []
    clock = [0.0]

    def _publish(kind, payload):
        if emit is not None:
            emit({"kind": kind, "t_ms": round(clock[0], 3), **payload})

    def _stage(name, units=0.0):
        _publish("stage-started", {"stage": name})
        duration = _STAGE_BASE[name] + units + float(rng.uniform(0.0, 1.5))
        clock[0] += duration
        timings.append(StageTiming(name, duration))
        _publish("stage-finished", {"stage": name, "duration_ms": round(duration, 3)})

    # parse
    intent = parse_query(text)
    _stage("parse", 0.05 * len(text))
    if isinstance(intent, Unparseable):
        reply = f'I could not interpret the request "{text}".'
        _publish("explanation", {"text": reply})
        return RunRecord(
            scenario_id=scenario_id,
            query=text,
            outcomes=(),
            timings=tuple(timings),
            text=reply,
            parse_failed=True,
        )

    targets, absent_classes = _resolve_targets(scene, intent)
    prompt = intent.targets if intent.explicit else DETECTOR_PROMPT_LIST

    # detect: one RGB-D burst feeds detection and depth filtering
    frames = render_burst(
        scene, intrinsics, depth_noise_sigma, n_frames=10, seed=int(rng.integers(2**31))
    )
    detections = detect(frames[0], scene, prompt, profile, seed=int(rng.integers(2**31)))
    det_of = _associate(detections, targets, scene, intrinsics)
    _stage("detect", 18.0 * len(scene.objects))

    # centroid
    grounded = {}
    errors = {}
    for obj in targets:
        det = det_of.get(obj.id)
        if det is None:
            continue
        g = ground_object(det, frames, intrinsics)
        err = float(np.hypot(g.centroid[0] - obj.center[0], g.centroid[1] - obj.center[1]))
        grounded[obj.id] = g
        errors[obj.id] = err
    _stage("centroid", 11.0 * len(grounded))

    # tactile-collection: press only what localized within tolerance
    clips = {}
    for obj in targets:
        if obj.id not in grounded or errors[obj.id] > LOCALIZATION_TOLERANCE_MM:
            continue
        g = grounded[obj.id]
        pose = (
            float(g.centroid[0] - obj.center[0]),
            float(g.centroid[1] - obj.center[1]),
            float(rng.uniform(0.0, 45.0)),
        )
        stream = press(obj.hardness, pose, seed=int(rng.integers(2**31)))
        idx = detect_contact(stream, COLLECTION_GATE)
        if idx is not None and idx + 8 <= len(stream.frames):
            clips[obj.id] = capture_clip(stream, idx)
    _stage("tactile-collection", _PRESS_MS * len(clips))

    # inference
    preds = {}
    if clips:
        ordered = [obj for obj in targets if obj.id in clips]
        x = batch_inputs([clips[o.id] for o in ordered], t)
        values = model.predict(x)
        preds = {o.id: float(v) for o, v in zip(ordered, values)}
    _stage("inference", 16.0 * len(clips))

    # explanation: the text reports the system's own measurements
    readings = tuple(
        ObjectReading(
            label=obj.cls,
            position=(float(grounded[obj.id].centroid[0]), float(grounded[obj.id].centroid[1])),
            hardness=preds[obj.id],
        )
        for obj in targets
        if obj.id in preds
    )
    found_classes = {r.label for r in readings}
    not_found = tuple(
        sorted(set(absent_classes) | {o.cls for o in targets if o.id not in preds and o.cls not in found_classes})
    )
    exp_input = ExplanationInput(objects=readings, not_found=not_found, intent=intent)
    explanation = compose_explanation(exp_input, rules=rules)
    _stage("explanation", 0.15 * len(explanation.text))
    _publish("explanation", {"text": explanation.text})

    scores = judge(explanation.text, exp_input, rules)
    low = explanation.text.lower()

    outcomes = []
    for obj in targets:
        measured = obj.id in preds
        if measured:
            place, _ = describe_location(
                (grounded[obj.id].centroid[0], grounded[obj.id].centroid[1])
            )
            communicated = (
                obj.cls in low and f"{preds[obj.id]:.1f}" in low and place in low
            )
        else:
            communicated = False
        outcomes.append(
            ObjectOutcome(
                object_id=obj.id,
                label=obj.cls,
                grounded=obj.id in grounded,
                localized=obj.id in grounded and errors[obj.id] <= LOCALIZATION_TOLERANCE_MM,
                measured=measured,
                communicated=communicated,
                centroid_error_mm=errors.get(obj.id),
                hardness_true=obj.hardness,
                hardness_pred=preds.get(obj.id),
                position=(
                    (float(grounded[obj.id].centroid[0]), float(grounded[obj.id].centroid[1]))
                    if obj.id in grounded
                    else None
                ),
            )
        )
        _publish("object-result", {"object": outcomes[-1].to_json()})

    return RunRecord(
        scenario_id=scenario_id,
        query=text,
        outcomes=tuple(outcomes),
        timings=tuple(timings),
        text=explanation.text,
        judge_scores=(scores.accuracy, scores.completeness, scores.clarity),
    )


# -- scenarios ---------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    template: str
    n_objects: int
    n_distinct: tuple  # (lo, hi) distinct classes among the targets
    explicit: bool
    complexity: str


SCENARIOS = {
    1: ScenarioSpec(1, "Identify the {property} of the {a}.", 1, (1, 1), True, "Low"),
    2: ScenarioSpec(
        2, "Identify the most {adj} {a} in the scene.", 2, (1, 1), True, "Medium"
    ),
    3: ScenarioSpec(
        3,
        "Summarize the {property} of the {a}, {b} and {c}.",
        3,
        (3, 3),
        True,
        "Medium-High",
    ),
    4: ScenarioSpec(
        4, "Summarize the {property} of all fruits in the scene.", 5, (3, 5), False, "High"
    ),
}

_CLASS_RING = tuple(sorted(RANKING_CONDITIONS) + ["lemon", "kiwi", "apple", "orange", "pear"])
_PROPERTY_RING = ("hardness", "ripeness", "softness")
_ADJ = {"hardness": "hard", "ripeness": "ripe", "softness": "soft"}


def build_scenario_run(spec: ScenarioSpec, run_index: int, seed: int):
    """Scene and query for one scenario run; fruit rotate across runs."""
    ring = _CLASS_RING
    base = ring[run_index % len(ring)]
    prop = _PROPERTY_RING[run_index % len(_PROPERTY_RING)]
    others = [c for c in ring if c != base]
    if spec.id == 1:
        classes = [base, others[run_index % len(others)], others[(run_index + 3) % len(others)]]
        query = spec.template.format(property=prop, a=base)
    elif spec.id == 2:
        classes = [base, base, others[run_index % len(others)]]
        query = spec.template.format(adj=_ADJ[prop], a=base)
    elif spec.id == 3:
        classes = [ring[(run_index + k) % len(ring)] for k in range(3)]
        query = spec.template.format(property=prop, a=classes[0], b=classes[1], c=classes[2])
    elif spec.id == 4:
        distinct = 3 + run_index % 3
        picked = [ring[(run_index + k) % len(ring)] for k in range(distinct)]
        classes = [picked[k % distinct] for k in range(5)]
        query = spec.template.format(property=prop)
    else:
        raise ValueError(f"unknown scenario id {spec.id}")
    scene = generate_scene(seed, n_objects=len(classes), classes=classes)
    return scene, query


@dataclass(frozen=True)
class SuccessReport:
    scenario_id: int
    runs: tuple
    ol_sr: float
    sl_sr: float
    latency_ms: dict

    def to_json(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "ol_sr": self.ol_sr,
            "sl_sr": self.sl_sr,
            "latency_ms": self.latency_ms,
            "runs": [r.to_json() for r in self.runs],
        }


def success_rates(records) -> tuple:
    """(OL-SR, SL-SR) over a list of run records."""
    if not records:
        return 0.0, 0.0
    ol = float(np.mean([r.ol_fraction for r in records]))
    sl = float(np.mean([r.sl_success for r in records]))
    return ol, sl


def latency_breakdown(records) -> dict:
    """Per-stage mean over fully successful runs (all runs if none succeed)."""
    pool = [r for r in records if r.sl_success] or list(records)
    sums, counts = {}, {}
    for r in pool:
        for timing in r.timings:
            sums[timing.stage] = sums.get(timing.stage, 0.0) + timing.duration_ms
            counts[timing.stage] = counts.get(timing.stage, 0) + 1
    return {s: sums[s] / counts[s] for s in STAGES if s in sums}


def run_scenario(
    spec: ScenarioSpec,
    model,
    t: int,
    profile: DetectorProfile = GSAM_LIKE,
    runs: int = 10,
    seed: int = 0,
    depth_noise_sigma: float = 2.0,
    emit=None,
) -> SuccessReport:
    records = []
    for i in range(runs):
        scene, query = build_scenario_run(spec, i, seed * 1009 + 13 * i)
        records.append(
            run_query(
                scene,
                query,
                model,
                t,
                profile=profile,
                seed=seed * 7919 + i,
                depth_noise_sigma=depth_noise_sigma,
                scenario_id=spec.id,
                emit=emit,
            )
        )
    ol, sl = success_rates(records)
    return SuccessReport(
        scenario_id=spec.id,
        runs=tuple(records),
        ol_sr=ol,
        sl_sr=sl,
        latency_ms=latency_breakdown(records),
    )


# -- servoing evaluation -------------------------------------------------


def evaluate_servoing(
    n_scenes: int = 200,
    profiles=(YOLO_LIKE, GSAM_LIKE),
    depth_noise_sigma: float = 2.0,
    seed: int = 0,
    use_refine: bool = True,
    use_median: bool = True,
    intrinsics=DEFAULT_INTRINSICS,
) -> dict:
    """Grounding-geometry study over synthetic scenes, one target per scene.

    Profiles share scene/burst/detection seeds, so differences are purely
    profile-driven (common random numbers).
    """
    per_profile = {}
    for profile in profiles:
        confs, ious, errs = [], [], []
        found = 0
        for i in range(n_scenes):
            scene = generate_scene(10000 + seed * 100000 + i)
            target = scene.objects[i % len(scene.objects)]
            frames = render_burst(
                scene, intrinsics, depth_noise_sigma, n_frames=10,
                seed=20000 + seed * 100000 + i,
            )
            detections = detect(
                frames[0], scene, [target.cls], profile, seed=30000 + seed * 100000 + i
            )
            det = _associate(detections, [target], scene, intrinsics).get(target.id)
            if det is None:
                continue
            found += 1
            g = ground_object(det, frames, intrinsics, use_refine, use_median)
            confs.append(det.confidence)
            ious.append(iou(det.mask, ground_truth_mask(scene, target.id, intrinsics)))
            errs.append(
                float(np.hypot(g.centroid[0] - target.center[0], g.centroid[1] - target.center[1]))
            )
        confs, ious, errs = map(np.asarray, (confs, ious, errs))

        def _ci(x):
            if len(x) < 2:
                return [float("nan"), float("nan")]
            half = 1.96 * float(np.std(x, ddof=1)) / len(x) ** 0.5
            return [float(np.mean(x) - half), float(np.mean(x) + half)]

        t_greater = one_sample_t(errs, 5.0, alternative="greater")
        t_less = one_sample_t(errs, 5.0, alternative="less")
        per_profile[profile.name] = {
            "n_scenes": n_scenes,
            "n_found": int(found),
            "success_rate": found / n_scenes,
            "confidence_mean": float(np.mean(confs)),
            "confidence_ci95": _ci(confs),
            "iou_mean": float(np.mean(ious)),
            "iou_ci95": _ci(ious),
            "centroid_error_mean_mm": float(np.mean(errs)),
            "error_t_vs_5mm_greater": {"t": t_greater.statistic, "p": t_greater.p_value},
            "error_t_vs_5mm_less": {"t": t_less.statistic, "p": t_less.p_value},
            "_samples": {"confidence": confs, "iou": ious},
        }

    report = {"profiles": {}, "comparisons": {}}
    names = [p.name for p in profiles]
    for name in names:
        entry = dict(per_profile[name])
        entry.pop("_samples")
        report["profiles"][name] = entry
    if len(names) == 2:
        a, b = names
        sa, sb = per_profile[a]["_samples"], per_profile[b]["_samples"]
        conf_t = welch_t(sa["confidence"], sb["confidence"])
        iou_t = welch_t(sa["iou"], sb["iou"])
        report["comparisons"] = {
            "confidence_welch": {"a": a, "b": b, "t": conf_t.statistic, "p": conf_t.p_value},
            "iou_welch": {"a": a, "b": b, "t": iou_t.statistic, "p": iou_t.p_value},
        }
    return report


# -- ranking evaluation ----------------------------------------------------


def evaluate_ranking(model, t: int, seed: int = 0, alpha: float = 0.01) -> dict:
    """Predict hardness over the staged-fruit protocol and test the ordering.

    Each condition's adjacent and extreme level pairs are tested one-sided
    (harder level predicted harder) with Holm correction across the family.
    """
    sets = make_ranking_sets(seed)
    results = {}
    for condition, levels in sets.items():
        named_groups = []
        true_hardness = {}
        for level_name, hardness, clips in levels:
            preds = model.predict(batch_inputs(clips, t))
            named_groups.append((level_name, preds))
            true_hardness[level_name] = hardness
        ordered = sorted(true_hardness, key=true_hardness.get, reverse=True)
        comparisons = [
            (ordered[i], ordered[j])
            for i in range(len(ordered))
            for j in range(i + 1, len(ordered))
        ]
        rep = rank_report(named_groups, comparisons, alternative="greater", alpha=alpha)
        results[condition] = {
            "true_hardness": true_hardness,
            "report": rep.to_json(),
        }
    return results


def miss_rate_sweep(model, t: int, grid, runs: int = 10, seed: int = 0) -> list:
    """OL-SR of scenario 1 as detector miss_rate rises; common random numbers."""
    out = []
    for m in grid:
        profile = replace(GSAM_LIKE, miss_rate=float(m))
        report = run_scenario(SCENARIOS[1], model, t, profile=profile, runs=runs, seed=seed)
        out.append((float(m), report.ol_sr))
    return out
