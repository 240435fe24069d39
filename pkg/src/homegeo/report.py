"""Experiment reports: JSON with 17-significant-digit floats."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

REPORT_KEYS = ("command", "config", "checks", "artifacts", "duration_s")
RESULT_KEYS = ("area", "grad_norm", "slab_min", "slab_max", "inner_gap", "is_graph", "c_star", "contact_kind")


def _plain(obj):
    """Convert numpy scalars/arrays and enums to plain JSON-compatible values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if hasattr(obj, "value") and isinstance(obj.value, str):
        return obj.value
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            # JSON has no inf/nan; keep the information as a string
            return json.dumps(repr(obj))
        text = "%.17g" % obj
        return text if any(ch in text for ch in ".en") else text + ".0"
    return json.dumps(obj)


def dumps(obj, indent: int = 2) -> str:
    """JSON text in which every float carries 17 significant digits."""
    return _encode(_plain(obj), indent, 0) + "\n"


@dataclass
class ExperimentReport:
    command: str
    config: dict
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    duration_s: float = 0.0
    results: dict | None = None
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def check(self, name: str, passed: bool, value, tol=None) -> bool:
        if any(c["name"] == name for c in self.checks):
            raise ValueError(f"duplicate check {name!r}")
        self.checks.append({"name": name, "pass": bool(passed), "value": value, "tol": tol})
        return bool(passed)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_json(self) -> dict:
        out = {"command": self.command, "config": self.config, "checks": self.checks,
               "artifacts": [str(a) for a in self.artifacts], "duration_s": self.duration_s}
        if self.results is not None:
            out["results"] = {k: self.results.get(k) for k in RESULT_KEYS}
            out["results"].update({k: v for k, v in self.results.items() if k not in RESULT_KEYS})
        return out

    def write(self, out_dir: Path) -> Path:
        self.duration_s = time.perf_counter() - self._t0
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{self.command}_report.json"
        path.write_text(dumps(self.to_json()))
        return path


def load_report(path) -> dict:
    return json.loads(Path(path).read_text())
