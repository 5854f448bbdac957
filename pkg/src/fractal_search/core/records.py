"""
Result records passed between the controller, the exporters and the CLI.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from fractal_search.core.search import SearchRun


@dataclass
class StageResult:
    """Outcome of one stage: the plain run and, with ancilla control, the calibrated run."""

    d_E: int
    S: int
    N: int = 0
    t1: int = 2
    plain: Optional[SearchRun] = None
    tulsi: Optional[SearchRun] = None
    cos_delta: Optional[float] = None
    lower_bounds: Dict[str, float] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def no_peak(self) -> bool:
        runs = [r for r in (self.plain, self.tulsi) if r is not None]
        return any(r.no_peak for r in runs)

    def summary_rows(self) -> List[Dict[str, Any]]:
        """One summary row per run, in the order plain then controlled."""
        rows = []
        for run in (self.plain, self.tulsi):
            if run is None:
                continue
            rows.append({
                "d_E": self.d_E,
                "S": self.S,
                "N": self.N,
                "t1": self.t1,
                "ancilla": int(run.ancilla),
                "cos_delta": run.params.cos_delta,
                "Q": run.Q,
                "P": run.P,
                "Q_over_sqrtP": run.complexity,
            })
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d_E": self.d_E,
            "S": self.S,
            "N": self.N,
            "t1": self.t1,
            "cos_delta": self.cos_delta,
            "lower_bounds": self.lower_bounds,
            "plain": self.plain.to_dict() if self.plain else None,
            "tulsi": self.tulsi.to_dict() if self.tulsi else None,
            "error": self.error,
        }


@dataclass
class SweepResult:
    d_E: int
    stages: List[StageResult]
    fit_report: Dict[str, Any] = field(default_factory=dict)

    @property
    def failed_stages(self) -> List[int]:
        return [r.S for r in self.stages if r.failed]

    @property
    def completed(self) -> List[StageResult]:
        return [r for r in self.stages if not r.failed]

    def summary_rows(self) -> List[Dict[str, Any]]:
        return [row for r in self.completed for row in r.summary_rows()]
