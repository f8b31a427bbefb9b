"""Episode logs: append-only records, canonical NDJSON, summary statistics.

The canonical serialization is deterministic (sorted keys, repr-exact
floats), so identical simulated-time runs serialize and hash identically.
Measured wall-clock times are inherently non-reproducible, so the canonical
form nulls them out: ``phase_times`` in telemetry records and the
``solve_time_* / time_*`` summary keys live only on the in-memory object
(experiments surface them through separate timing artifacts).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


@dataclass
class EpisodeLog:
    """Time-ordered record stream plus a run summary.

    Record types: ``state`` (true/estimated state, applied control, active
    solution id, instantaneous cost and per-term breakdown, contact forces),
    ``telemetry`` (one per plan step), ``disturbance``, and ``event``
    (termination and mode changes).
    """

    task: str
    seed: int
    mode: str
    records: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    failed: bool = False

    def add(self, record: dict) -> None:
        self.records.append(_plain(record))

    def states(self) -> list[dict]:
        return [r for r in self.records if r["type"] == "state"]

    def telemetry(self) -> list[dict]:
        return [r for r in self.records if r["type"] == "telemetry"]

    def canonical_lines(self) -> list[str]:
        header = {"type": "header", "task": self.task, "seed": self.seed,
                  "mode": self.mode, "schema": 1}
        lines = [json.dumps(header, sort_keys=True)]
        for r in self.records:
            if r["type"] == "telemetry" and r.get("phase_times") is not None:
                r = {**r, "phase_times": None}
            lines.append(json.dumps(r, sort_keys=True))
        summary = {k: v for k, v in _plain(self.summary).items()
                   if not (k.startswith("time_") or k.startswith("solve_time_"))}
        lines.append(json.dumps({"type": "summary", "failed": self.failed,
                                 **summary}, sort_keys=True))
        return lines

    def timing_report(self) -> dict:
        """Measured wall-time statistics (empty when not recorded)."""
        out = {k: v for k, v in _plain(self.summary).items()
               if k.startswith("time_") or k.startswith("solve_time_")}
        per_solve = [r["phase_times"] for r in self.telemetry()
                     if r.get("phase_times")
                     and r["phase_times"].get("model_derivs") is not None]
        if per_solve:
            out["per_solve"] = per_solve
        return out

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.canonical_lines():
            h.update(line.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.canonical_lines():
                fh.write(line)
                fh.write("\n")

    @staticmethod
    def read(path) -> "EpisodeLog":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
        header = lines[0]
        summary = lines[-1]
        log = EpisodeLog(task=header["task"], seed=header["seed"],
                         mode=header["mode"],
                         records=lines[1:-1],
                         failed=summary.pop("failed", False))
        summary.pop("type", None)
        log.summary = summary
        return log

    # Summary helpers -----------------------------------------------------------

    def finalize(self) -> None:
        states = self.states()
        tele = self.telemetry()
        costs = np.array([r["cost"] for r in states]) if states else np.array([0.0])
        controls = [np.asarray(r["u"]) for r in states]
        du = [np.abs(b - a).mean() for a, b in zip(controls, controls[1:])]
        summary = {
            "final_cost": float(costs[-1]),
            "mean_cost": float(costs.mean()),
            "control_ticks": len(states),
            "plan_steps": len(tele),
            "fd_evals": int(sum(r["fd_evals"] for r in tele)),
            "mean_abs_du": float(np.mean(du)) if du else 0.0,
            "degraded_steps": int(sum(1 for r in tele if r["degraded"])),
        }
        solve_times = [r["phase_times"] for r in tele
                       if r.get("phase_times") and
                       r["phase_times"].get("model_derivs") is not None]
        if solve_times:
            totals = np.array([sum(v for v in pt.values() if v is not None)
                               for pt in solve_times])
            summary["solve_time_p50"] = float(np.percentile(totals, 50))
            summary["solve_time_p95"] = float(np.percentile(totals, 95))
            for phase in ("model_derivs", "cost_derivs", "backward_pass",
                          "rollouts"):
                vals = np.array([pt[phase] for pt in solve_times
                                 if pt[phase] is not None])
                if vals.size:
                    summary[f"time_{phase}_mean"] = float(vals.mean())
        self.summary.update(_plain(summary))
