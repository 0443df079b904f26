"""Static signature rules: the traditional baseline the adaptive loop is measured against.

Each rule compares one named raw feature against a threshold; the first
matching rule decides the label, and a window matching nothing is benign.
Rules live in a packaged JSON document rather than code so the baseline is
auditable and swappable.
"""

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .detector import ThreatVerdict
from .errors import InputError
from .features import FeatureLayout
from .telemetry import LABELS

_OPS = {
    ">=": lambda v, t: v >= t,
    "<=": lambda v, t: v <= t,
    ">": lambda v, t: v > t,
    "<": lambda v, t: v < t,
}


@dataclass(frozen=True)
class Rule:
    """First-match signature: one feature, one comparison, one label."""

    label: str
    feature: str
    op: str
    threshold: float

    def __post_init__(self):
        if self.label not in LABELS:
            raise InputError(f"rule labels a class outside the label set: "
                             f"{self.label!r}")
        if self.op not in _OPS:
            raise InputError(f"unknown rule operator {self.op!r}")

    def matches(self, value: float) -> bool:
        return _OPS[self.op](value, self.threshold)


class RuleBasedDetector:
    """Orders rules, resolves feature names once per layout, emits verdicts."""

    def __init__(self, rules: tuple, layout: FeatureLayout):
        self.rules = tuple(rules)
        self.layout = layout
        self._indices = [layout.index_of(r.feature) for r in self.rules]

    def classify(self, raw_features: np.ndarray) -> ThreatVerdict:
        """First matching rule wins; no match means benign.

        Rule verdicts are always confident: a signature either fires or it
        does not, there is no probability mass to threshold.
        """
        raw_features = np.asarray(raw_features, dtype=np.float64)
        if raw_features.shape != (self.layout.dim,):
            raise InputError(
                f"feature vector shape {raw_features.shape} does not match "
                f"layout dimension {self.layout.dim}"
            )
        label = "benign"
        for rule, idx in zip(self.rules, self._indices):
            if rule.matches(float(raw_features[idx])):
                label = rule.label
                break
        predicted = LABELS.index(label)
        probs = np.zeros(len(LABELS))
        probs[predicted] = 1.0
        return ThreatVerdict(probabilities=probs, predicted=predicted,
                             max_probability=1.0, confident=True)


def parse_rules(doc: dict) -> tuple[Rule, ...]:
    if not isinstance(doc, dict) or "rules" not in doc:
        raise InputError("rule document must be an object with a 'rules' list")
    out = []
    for entry in doc["rules"]:
        try:
            out.append(Rule(label=entry["label"], feature=entry["feature"],
                            op=entry["op"], threshold=float(entry["threshold"])))
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed rule entry: {entry!r}") from exc
    return tuple(out)


def load_rules(path) -> tuple[Rule, ...]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read rule file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"rule file is not valid JSON: {exc}") from exc
    return parse_rules(doc)


@lru_cache(maxsize=1)
def default_rules() -> tuple[Rule, ...]:
    """The packaged signature set."""
    ref = resources.files("cloudguard").joinpath("data/baseline_rules.json")
    with resources.as_file(ref) as path:
        return load_rules(path)
