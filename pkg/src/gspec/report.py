"""Structured pass/fail records with deterministic JSON output."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

VERDICTS = ("pass", "fail", "inconclusive", "skipped")


class SolverError(RuntimeError):
    """Base class for solver failures."""


class ConvergenceError(SolverError):
    def __init__(self, message, residual=None, iterations=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.history = history or []


class DivergenceError(ConvergenceError):
    pass


class HypothesisError(ValueError):
    """An input violates a structural hypothesis of the method."""


def to_jsonable(v):
    if isinstance(v, dict):
        return {str(k): to_jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [to_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return to_jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, complex):
        return [to_jsonable(v.real), to_jsonable(v.imag)]
    return v


@dataclass
class Entry:
    name: str
    verdict: str
    value: object = None
    threshold: object = None
    anchor: str = ""

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")


@dataclass
class VerificationReport:
    """Ordered predicate entries plus free-form measured quantities."""

    entries: list = field(default_factory=list)
    quantities: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)

    def add(self, name, verdict, value=None, threshold=None, anchor=""):
        if any(e.name == name for e in self.entries):
            raise ValueError(f"predicate {name!r} already recorded")
        if isinstance(verdict, (bool, np.bool_)):
            verdict = "pass" if verdict else "fail"
        self.entries.append(Entry(name, verdict, value, threshold, anchor))
        return verdict

    def check(self, name, value, threshold, anchor="", below=True):
        """Record ``value < threshold`` (or ``>`` with ``below=False``)."""
        ok = value < threshold if below else value > threshold
        return self.add(name, bool(ok), value, threshold, anchor)

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def verdict(self, name):
        return self[name].verdict

    @property
    def passed(self):
        """True when nothing failed (inconclusive and skipped are tolerated)."""
        return all(e.verdict != "fail" for e in self.entries)

    def failures(self):
        return [e.name for e in self.entries if e.verdict == "fail"]

    def to_dict(self):
        return to_jsonable(
            {
                "environment": self.environment,
                "predicates": [
                    {
                        "name": e.name,
                        "verdict": e.verdict,
                        "value": e.value,
                        "threshold": e.threshold,
                        "anchor": e.anchor,
                    }
                    for e in self.entries
                ],
                **self.quantities,
            }
        )

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())
