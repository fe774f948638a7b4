"""Named residuals with tolerances: the common currency of checks, tests and the CLI."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field


@dataclass
class ResidualEntry:
    check_name: str
    max_residual: float
    tolerance: float
    anchor: str = ""
    num_points: int = 0
    informational: bool = False
    note: str = ""

    @property
    def passed(self) -> bool:
        if self.informational:
            return True
        return bool(math.isfinite(self.max_residual) and self.max_residual <= self.tolerance)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ResidualEntry":
        d = {k: v for k, v in d.items() if k != "pass"}
        return cls(**d)


@dataclass
class ResidualReport:
    """Ordered collection of residual entries.

    The report passes iff every non-informational entry passes.  ``extras``
    holds JSON-friendly diagnostics (margins, chosen constants, verdicts).
    """

    entries: list[ResidualEntry] = field(default_factory=list)
    seed: int | None = None
    run_id: str = ""
    config_hash: str = ""
    wall_time: float = 0.0
    extras: dict = field(default_factory=dict)

    def add(self, check_name, residual, tolerance, anchor="", num_points=0, informational=False, note=""):
        r = float(residual)
        self.entries.append(
            ResidualEntry(check_name, r, float(tolerance), anchor, int(num_points), bool(informational), note)
        )
        return self.entries[-1]

    def extend(self, other: "ResidualReport", prefix: str = "") -> "ResidualReport":
        for e in other.entries:
            self.entries.append(ResidualEntry(**{**asdict(e), "check_name": prefix + e.check_name}))
        for k, v in other.extras.items():
            self.extras[prefix + k] = v
        return self

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def __getitem__(self, name: str) -> ResidualEntry:
        for e in self.entries:
            if e.check_name == name:
                return e
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(e.check_name == name for e in self.entries)

    def failures(self) -> list[ResidualEntry]:
        return [e for e in self.entries if not e.passed]

    def scaled(self, factor: float) -> "ResidualReport":
        """Copy with every tolerance multiplied by ``factor``."""
        out = ResidualReport(seed=self.seed, run_id=self.run_id, config_hash=self.config_hash,
                             wall_time=self.wall_time, extras=dict(self.extras))
        for e in self.entries:
            out.entries.append(ResidualEntry(**{**asdict(e), "tolerance": e.tolerance * factor}))
        return out

    def to_dict(self, include_wall_time: bool = True) -> dict:
        d = {
            "run_id": self.run_id,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "pass": self.passed,
            "entries": [e.to_dict() for e in self.entries],
            "extras": self.extras,
        }
        if include_wall_time:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, include_wall_time: bool = True) -> str:
        return json.dumps(self.to_dict(include_wall_time), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ResidualReport":
        return cls(
            entries=[ResidualEntry.from_dict(e) for e in d.get("entries", [])],
            seed=d.get("seed"),
            run_id=d.get("run_id", ""),
            config_hash=d.get("config_hash", ""),
            wall_time=d.get("wall_time", 0.0),
            extras=d.get("extras", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "ResidualReport":
        return cls.from_dict(json.loads(text))

    def table(self) -> str:
        rows = [f"{'check':48s} {'residual':>11s} {'tol':>9s}  verdict"]
        for e in self.entries:
            verdict = "info" if e.informational else ("pass" if e.passed else "FAIL")
            rows.append(f"{e.check_name:48s} {e.max_residual:11.3e} {e.tolerance:9.1e}  {verdict}")
        return "\n".join(rows)
