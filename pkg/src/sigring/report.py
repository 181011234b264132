"""Run reports: one record rendered as JSON, plain text, CSV and a figure.

Every float goes through :func:`fmt`, so the three text forms carry the
same digits (Python's shortest round-trip repr, at most 17 significant).
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

BOUND_COLUMNS = ("kind", "level", "bound", "status", "solve_time", "certificate")


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if v is None:
        return "null"
    return str(v)


def _jsonable(v):
    """Non-finite floats become the strings used by the text rendering."""
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else fmt(v)
    if hasattr(v, "value") and isinstance(getattr(v, "value"), str):  # enums
        return v.value
    return v


@dataclass
class Report:
    command: str
    argv: List[str]
    problem: str = ""
    config: Dict[str, Any] = field(default_factory=dict)
    sources: Dict[str, str] = field(default_factory=dict)
    defaults: Dict[str, Any] = field(default_factory=dict)
    bounds: List[Dict[str, Any]] = field(default_factory=list)
    candidates: List[Dict[str, Any]] = field(default_factory=list)
    oracle: Optional[Dict[str, Any]] = None
    results: Dict[str, Any] = field(default_factory=dict)
    messages: List[str] = field(default_factory=list)
    exit_code: int = 0

    def to_dict(self) -> dict:
        d = {
            "command": self.command, "argv": list(self.argv), "problem": self.problem,
            "config": self.config, "config_sources": self.sources, "defaults": self.defaults,
            "bounds": self.bounds, "candidates": self.candidates, "oracle": self.oracle,
            "results": self.results, "messages": self.messages, "exit_code": self.exit_code,
        }
        return _jsonable(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        d = self.to_dict()
        out = [f"command: sigring {' '.join(d['argv'])}".rstrip()]
        if d["problem"]:
            out.append(f"problem: {d['problem']}")
        out.append("configuration:")
        for k in sorted(d["config"]):
            out.append(f"  {k} = {_txt(d['config'][k])}  [{d['config_sources'].get(k, 'default')}]")
        out.append("defaults:")
        for k in sorted(d["defaults"]):
            out.append(f"  {k} = {_txt(d['defaults'][k])}")
        if d["bounds"]:
            out.append("bounds:")
            out.append("  " + "  ".join(BOUND_COLUMNS))
            for row in d["bounds"]:
                out.append("  " + "  ".join(_txt(row.get(c)) for c in BOUND_COLUMNS))
        if d["candidates"]:
            out.append("candidates:")
            for c in d["candidates"]:
                out.append(f"  x = {_txt(c['x'])}  value = {_txt(c['value'])}  "
                           f"violation = {_txt(c['violation'])}  source = {c['source']}")
        if d["oracle"] is not None:
            out.append("oracle:")
            for k, v in d["oracle"].items():
                out.append(f"  {k} = {_txt(v)}")
        if d["results"]:
            out.append("results:")
            for k, v in d["results"].items():
                out.append(f"  {k} = {_txt(v)}")
        for m in d["messages"]:
            out.append(f"note: {m}")
        out.append(f"exit code: {d['exit_code']}")
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(BOUND_COLUMNS)
        for row in self.to_dict()["bounds"]:
            w.writerow([_txt(row.get(c)) for c in BOUND_COLUMNS])
        return buf.getvalue()

    def write(self, directory: str) -> List[str]:
        os.makedirs(directory, exist_ok=True)
        paths = []
        for name, text in (("report.json", self.to_json()), ("report.txt", self.to_text()),
                           ("bounds.csv", self.to_csv())):
            p = os.path.join(directory, name)
            with open(p, "w", encoding="utf-8") as fh:
                fh.write(text)
            paths.append(p)
        fig = self.figure(os.path.join(directory, "bounds.png"))
        if fig:
            paths.append(fig)
        return paths

    def figure(self, path: str) -> Optional[str]:
        """Bound against level for each kind, with the oracle value as a reference line."""
        rows = [r for r in self.bounds if isinstance(r.get("bound"), float) and math.isfinite(r["bound"])]
        if not rows:
            return None
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 3.5))
        for kind, marker in (("lower", "o"), ("upper", "s")):
            pts = sorted((r["level"], r["bound"]) for r in rows if r["kind"] == kind)
            if pts:
                ax.plot(*zip(*pts), marker=marker, label=f"{kind} bound")
        if self.oracle and isinstance(self.oracle.get("value"), float) and math.isfinite(self.oracle["value"]):
            ax.axhline(self.oracle["value"], color="k", ls="--", lw=1, label="grid oracle")
        ax.set_xlabel("level d")
        ax.set_ylabel("bound")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        return path


def _txt(v) -> str:
    if isinstance(v, list):
        return "[" + ", ".join(_txt(x) for x in v) + "]"
    return fmt(v)
