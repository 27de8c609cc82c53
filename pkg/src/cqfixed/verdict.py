from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

HOLDS = "holds"
VIOLATED = "violated"
NO_COUNTEREXAMPLE = "no_counterexample"
NOT_FOUND = "not_found"
DIVERGED = "divergence"
VACUOUS = "vacuous"

# exit-code contribution of each status
SEVERITY = {HOLDS: 0, NO_COUNTEREXAMPLE: 0, VACUOUS: 0, VIOLATED: 1, NOT_FOUND: 2, DIVERGED: 2}


def jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and nested containers to plain JSON types."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


@dataclass
class Verdict:
    status: str
    witness: dict | None = None
    samples: int = 0
    detail: dict = field(default_factory=dict)
    heuristic: bool = False

    @classmethod
    def holds(cls, samples: int = 0, **detail) -> Verdict:
        return cls(HOLDS, None, samples, detail)

    @classmethod
    def violated(cls, witness: dict, samples: int = 0, **detail) -> Verdict:
        return cls(VIOLATED, witness, samples, detail)

    @property
    def ok(self) -> bool:
        return SEVERITY[self.status] == 0

    def to_dict(self) -> dict:
        out = {"status": self.status, "samples": int(self.samples)}
        if self.heuristic:
            out["heuristic"] = True
        if self.witness is not None:
            out["witness"] = jsonable(self.witness)
        if self.detail:
            out["detail"] = jsonable(self.detail)
        return out
