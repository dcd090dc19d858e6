"""Outcome of a single algorithm run."""
from dataclasses import dataclass, field, asdict
import json
import math


@dataclass
class RunRecord:
    chosen: int | None
    true_mean: float
    samples_used: int
    arms_touched: int
    success: bool
    target: float
    degenerate_params: bool = False
    trace: list | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self, with_trace=False):
        d = asdict(self)
        if not with_trace:
            d.pop("trace")
        if isinstance(d["true_mean"], float) and math.isnan(d["true_mean"]):
            d["true_mean"] = None
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), default=_jsonable)


def _jsonable(x):
    # numpy scalars and arrays
    if hasattr(x, "tolist"):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")
