from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

TIMING_KEYS = ("from_scratch_s", "in_place_s", "solve_s", "mesh_io_s")


def empty_timings() -> dict[str, float | None]:
    return {key: None for key in TIMING_KEYS}


@dataclass
class RunReport:
    """Machine-readable outcome of a driver or benchmark run.

    ``to_dict`` always emits the keys ``dofs``, ``errors``, ``timings`` (all of
    TIMING_KEYS, ``None`` for phases that did not run) and ``iterations``.
    """

    problem: str
    dofs: int
    errors: dict[str, float] = field(default_factory=dict)
    timings: dict[str, float | None] = field(default_factory=empty_timings)
    iterations: int = 0
    converged: bool = True
    residual: float = 0.0
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        timings = empty_timings()
        timings.update(self.timings)
        return {
            "problem": self.problem,
            "dofs": int(self.dofs),
            "errors": {key: float(value) for key, value in self.errors.items()},
            "timings": {key: (None if value is None else float(value)) for key, value in timings.items()},
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "residual": float(self.residual),
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunReport":
        return cls(
            problem=data["problem"],
            dofs=data["dofs"],
            errors=dict(data.get("errors", {})),
            timings={**empty_timings(), **data.get("timings", {})},
            iterations=data.get("iterations", 0),
            converged=data.get("converged", True),
            residual=data.get("residual", 0.0),
            details=dict(data.get("details", {})),
        )


def write_report(report: RunReport, path: str | Path) -> None:
    Path(path).write_text(report.to_json() + "\n", encoding="utf-8")
