"""Query parsing, location phrasing, ripeness rules, and explanations.

Parsing is closed-lexicon keyword extraction; explanation text comes from a
deterministic template engine. An external language-model client can be
plugged in for phrasing, but nothing downstream may require it: any client
failure falls back to the template with a degraded-mode flag.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .scene import FRUIT_CLASSES, WORKSPACE_BOUNDS

ROLE_STRING = "You turn object data into scene descriptions, explain and interpret tactile levels."

PROPERTIES = ("hardness", "softness", "ripeness")
MODES = ("identify", "superlative", "summarize")

# singular class name -> accepted surface forms
_FRUIT_FORMS = {
    "banana": ("banana", "bananas"),
    "lime": ("lime", "limes"),
    "lemon": ("lemon", "lemons"),
    "mango": ("mango", "mangos", "mangoes"),
    "tomato": ("tomato", "tomatoes"),
    "avocado": ("avocado", "avocados"),
    "kiwi": ("kiwi", "kiwis"),
    "apple": ("apple", "apples"),
    "orange": ("orange", "oranges"),
    "pear": ("pear", "pears"),
}
assert set(_FRUIT_FORMS) == set(FRUIT_CLASSES)

_PROPERTY_WORDS = {
    "hard": "hardness", "hardness": "hardness", "harder": "hardness", "hardest": "hardness",
    "soft": "softness", "softness": "softness", "softer": "softness", "softest": "softness",
    "firm": "hardness", "firmness": "hardness", "firmest": "hardness",
    "ripe": "ripeness", "ripeness": "ripeness", "riper": "ripeness", "ripest": "ripeness",
    "unripe": "ripeness",
}
_SUPERLATIVE_WORDS = {"hardest", "softest", "ripest", "firmest"}
_SUMMARY_WORDS = {"summarize", "summarise", "summary", "overview", "rank", "ranking"}

# fixed 20-item grounding vocabulary handed to prompt-based detectors when a
# query does not name fruits
DETECTOR_PROMPT_LIST = tuple(sorted(_FRUIT_FORMS)) + (
    "grape", "plum", "peach", "strawberry", "cucumber",
    "carrot", "potato", "onion", "pepper", "zucchini",
)


@dataclass(frozen=True)
class Intent:
    targets: tuple  # () means all fruits in the scene
    property: str
    mode: str
    explicit: bool

    def __post_init__(self):
        if self.property not in PROPERTIES:
            raise ValueError(f"unknown property {self.property!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "superlative" and len(self.targets) != 1:
            raise ValueError("superlative mode needs exactly one target class")
        for t in self.targets:
            if t not in _FRUIT_FORMS:
                raise ValueError(f"unknown fruit class {t!r}")


@dataclass(frozen=True)
class Unparseable:
    text: str


def parse_query(text: str):
    """Extract an Intent from free text; never raises on content."""
    tokens = re.findall(r"[a-z]+", (text or "").lower())
    if not tokens:
        return Unparseable(text or "")

    fruits = []
    form_to_class = {form: cls for cls, forms in _FRUIT_FORMS.items() for form in forms}
    for tok in tokens:
        cls = form_to_class.get(tok)
        if cls and cls not in fruits:
            fruits.append(cls)

    joined = " ".join(tokens)
    universal = (
        "all fruits" in joined
        or "all the fruits" in joined
        or "every fruit" in joined
        or "all fruit" in joined
        or "everything" in tokens
    )

    prop = next((_PROPERTY_WORDS[t] for t in tokens if t in _PROPERTY_WORDS), None)
    if prop is None and not fruits:
        return Unparseable(text)
    if prop is None:
        prop = "hardness"  # fruit named without a property: measure it

    superlative = any(t in _SUPERLATIVE_WORDS for t in tokens) or (
        "most" in tokens and any(t in _PROPERTY_WORDS for t in tokens)
    )
    if superlative and len(fruits) == 1 and not universal:
        mode = "superlative"
    elif any(t in _SUMMARY_WORDS for t in tokens) or universal or superlative:
        mode = "summarize"
    else:
        mode = "identify"

    targets = () if (universal or not fruits) else tuple(fruits)
    return Intent(targets=targets, property=prop, mode=mode, explicit=bool(fruits))


# -- locations --------------------------------------------------------------


def describe_location(position, bounds=WORKSPACE_BOUNDS) -> tuple:
    """Thirds-rule phrase for a workspace point; returns (phrase, clamped).

    The lower-y edge of the workspace is "front". A coordinate exactly on a
    third boundary goes to the lower band.
    """
    (xmin, xmax), (ymin, ymax) = bounds
    x, y = float(position[0]), float(position[1])
    clamped = not (xmin <= x <= xmax and ymin <= y <= ymax)
    x = min(max(x, xmin), xmax)
    y = min(max(y, ymin), ymax)

    def band(v, lo, hi, names):
        frac = (v - lo) / (hi - lo)
        if frac <= 1 / 3:
            return names[0]
        if frac <= 2 / 3:
            return names[1]
        return names[2]

    row = band(y, ymin, ymax, ("front", "center", "back"))
    col = band(x, xmin, xmax, ("left", "center", "right"))
    phrase = "center" if (row == "center" and col == "center") else f"{row}-{col}"
    return phrase, clamped


# -- ripeness ----------------------------------------------------------------


@dataclass(frozen=True)
class RipenessRules:
    ripe_below: dict = field(
        default_factory=lambda: {"banana": 65.0, "lime": 64.0, "lemon": 64.0}
    )

    def __post_init__(self):
        for fruit, threshold in self.ripe_below.items():
            if not 0 <= threshold <= 100:
                raise ValueError(f"threshold for {fruit} out of range")


DEFAULT_RIPENESS = RipenessRules()


def interpret_ripeness(fruit: str, hardness: float, rules: RipenessRules = DEFAULT_RIPENESS) -> str:
    if not 0 <= hardness <= 100:
        raise ValueError("hardness must be in [0, 100]")
    threshold = rules.ripe_below.get(fruit)
    if threshold is None:
        return "not-applicable"
    return "ripe" if hardness <= threshold else "unripe"


# -- explanations ------------------------------------------------------------


@dataclass(frozen=True)
class ObjectReading:
    label: str
    position: tuple  # workspace (x, y) mm
    hardness: float


@dataclass(frozen=True)
class ExplanationInput:
    objects: tuple
    not_found: tuple
    intent: Intent

    def __post_init__(self):
        found = {o.label for o in self.objects}
        for target in self.intent.targets:
            if target not in found and target not in self.not_found:
                raise ValueError(f"target {target!r} neither measured nor marked missing")


@dataclass(frozen=True)
class Explanation:
    text: str
    backend: str
    degraded: bool = False


def _ranking_key(prop: str):
    # harder is "more" for hardness; softer/riper correspond to lower HA
    return (lambda r: -r.hardness) if prop == "hardness" else (lambda r: r.hardness)


def _adjective(prop: str) -> str:
    return {"hardness": "hardest", "softness": "softest", "ripeness": "ripest"}[prop]


def compose_template(inp: ExplanationInput, rules: RipenessRules = DEFAULT_RIPENESS) -> str:
    intent = inp.intent
    sentences = []
    for obj in inp.objects:
        place, _ = describe_location(obj.position)
        ripeness = interpret_ripeness(obj.label, obj.hardness, rules)
        clause = f", so it is {ripeness}" if ripeness != "not-applicable" else ""
        sentences.append(
            f"The {obj.label} at {place} measures {obj.hardness:.1f} HA{clause}."
        )
    for label in inp.not_found:
        sentences.append(f"No {label} was found in the scene.")
    if intent.mode in ("superlative", "summarize") and len(inp.objects) >= 2:
        ranked = sorted(
            inp.objects,
            key=lambda r: (_ranking_key(intent.property)(r), r.label,
                           describe_location(r.position)[0]),
        )
        if intent.mode == "superlative":
            top = ranked[0]
            place, _ = describe_location(top.position)
            sentences.append(
                f"The {_adjective(intent.property)} {top.label} is the one at "
                f"{place} ({top.hardness:.1f} HA)."
            )
        else:
            order = ", then ".join(
                f"the {r.label} at {describe_location(r.position)[0]}" for r in ranked
            )
            sentences.append(
                f"Ordered from {_adjective(intent.property)} to least: {order}."
            )
    return " ".join(sentences)


class ExternalClientError(RuntimeError):
    pass


def compose_explanation(
    inp: ExplanationInput,
    backend: str = "template",
    client=None,
    rules: RipenessRules = DEFAULT_RIPENESS,
    timeout: float = 10.0,
) -> Explanation:
    """Deterministic template text, or an external client's phrasing.

    Any external failure (no client, timeout, exception) degrades to the
    template so the primary pipeline never depends on network access.
    """
    if backend == "template":
        return Explanation(text=compose_template(inp, rules), backend="template")
    if backend != "external":
        raise ValueError(f"unknown backend {backend!r}")
    payload = {
        "role_string": ROLE_STRING,
        "rules": {
            "locations": "thirds rule: front/center/back x left/center/right",
            "ripe_below": dict(rules.ripe_below),
            "style": "concise, fluent, operator-friendly",
        },
        "objects": [
            {
                "label": o.label,
                "location": describe_location(o.position)[0],
                "hardness": o.hardness,
            }
            for o in inp.objects
        ],
        "not_found": list(inp.not_found),
        "intent": {
            "targets": list(inp.intent.targets),
            "property": inp.intent.property,
            "mode": inp.intent.mode,
        },
        "temperature": 0.1,
    }
    try:
        if client is None:
            raise ExternalClientError("no external client configured")
        text = client.complete(payload, timeout=timeout)
        if not isinstance(text, str) or not text.strip():
            raise ExternalClientError("empty reply")
        return Explanation(text=text, backend="external")
    except Exception:
        return Explanation(
            text=compose_template(inp, rules), backend="template", degraded=True
        )


# -- judge -------------------------------------------------------------------


@dataclass(frozen=True)
class JudgeScore:
    accuracy: int
    completeness: int
    clarity: int

    def __post_init__(self):
        for v in (self.accuracy, self.completeness, self.clarity):
            if not 1 <= v <= 5:
                raise ValueError("judge scores live on 1-5")


def _scale(fraction: float) -> int:
    return 1 + int(4 * min(max(fraction, 0.0), 1.0))


def judge(
    text: str,
    truth: ExplanationInput,
    rules: RipenessRules = DEFAULT_RIPENESS,
    client=None,
    timeout: float = 10.0,
) -> JudgeScore:
    """Rule-based scoring of an explanation against its ground truth.

    An external judge client may be supplied; its failure or absence falls
    back to the rule-based scores, so no primary path depends on it.
    """
    if client is not None:
        try:
            reply = client.complete(
                {
                    "instruction": "Score the explanation 1-5 for accuracy, "
                    "completeness, and clarity against the ground truth.",
                    "text": text,
                    "truth": {
                        "objects": [
                            {
                                "label": o.label,
                                "location": describe_location(o.position)[0],
                                "hardness": o.hardness,
                            }
                            for o in truth.objects
                        ],
                        "not_found": list(truth.not_found),
                    },
                    "temperature": 0.1,
                },
                timeout=timeout,
            )
            return JudgeScore(
                accuracy=int(reply["accuracy"]),
                completeness=int(reply["completeness"]),
                clarity=int(reply["clarity"]),
            )
        except Exception:
            pass

    low = text.lower()
    numbers = [float(m) for m in re.findall(r"\d+(?:\.\d+)?", low)]

    # accuracy: each measured object needs its label, a stated value within
    # +-1 HA, and its location phrase
    checks = []
    for obj in truth.objects:
        place, _ = describe_location(obj.position)
        value_ok = any(abs(n - obj.hardness) <= 1.0 for n in numbers)
        checks.append(obj.label in low and value_ok and place in low)
    if checks:
        accuracy = _scale(sum(checks) / len(checks))
    elif truth.not_found:
        accuracy = _scale(sum(l in low for l in truth.not_found) / len(truth.not_found))
    else:
        accuracy = 5

    # completeness: every object addressed and every missing target flagged;
    # a separate component requires ripeness wording where the rules apply,
    # so omitting a target costs exactly its coverage share
    coverage = [obj.label in low for obj in truth.objects]
    coverage += [
        label in low and ("no " + label in low or "found" in low)
        for label in truth.not_found
    ]
    interpreted = [
        "ripe" in low  # matches "ripe" and "unripe"
        for obj in truth.objects
        if interpret_ripeness(obj.label, obj.hardness, rules) != "not-applicable"
    ]
    completeness = _scale(sum(coverage) / len(coverage)) if coverage else 5
    if interpreted:
        completeness = min(completeness, _scale(sum(interpreted) / len(interpreted)))

    # clarity: structural sanity of the prose; split only at terminators
    # followed by whitespace or end so decimal points survive
    sentences = [s.strip() for s in re.split(r"[.!?]+(?=\s|$)", text) if s.strip()]
    clarity = 5
    if not sentences:
        clarity = 1
    else:
        if len(sentences) != len(set(sentences)):
            clarity -= 2
        if len(sentences) > len(truth.objects) + len(truth.not_found) + 3:
            clarity -= 1
        if any(len(s.split()) > 40 for s in sentences):
            clarity -= 1
    return JudgeScore(accuracy=accuracy, completeness=completeness, clarity=max(clarity, 1))


# -- config ------------------------------------------------------------------


def load_ripeness_rules(path) -> RipenessRules:
    """JSON override for the ripe-below thresholds."""
    payload = json.loads(Path(path).read_text())
    table = payload.get("ripe_below", payload)
    return RipenessRules(ripe_below={str(k): float(v) for k, v in table.items()})
