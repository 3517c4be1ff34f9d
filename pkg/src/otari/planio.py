"""Plan serialisation.

JSON is the interchange format: canonical key order, full-precision
floats (shortest round-trip repr), so export -> import -> export is
byte-stable. Plans with many exact zeros are stored as triplets, dense
otherwise; both forms are lossless. CSV holds the plan matrix only.
"""

import json
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .core import SolveReport
from .diagnostics import col_perplexity, row_perplexity
from .errors import ParseError

TRIPLET_CUTOVER = 0.5


@dataclass
class PlanExport:
    """Self-describing snapshot of one solved plan."""

    plan: np.ndarray
    source_marginal: np.ndarray
    target_marginal: np.ndarray
    row_perplexity: np.ndarray
    col_perplexity: np.ndarray
    method: str = ""
    objective: float = 0.0
    residuals: Dict[str, float] = field(default_factory=dict)
    converged: bool = True
    iterations: int = 0

    @classmethod
    def from_report(cls, report: SolveReport) -> "PlanExport":
        P = report.plan.values
        return cls(
            plan=P.copy(),
            source_marginal=report.plan.source_marginal.weights.copy(),
            target_marginal=report.plan.target_marginal.weights.copy(),
            row_perplexity=row_perplexity(P),
            col_perplexity=col_perplexity(P),
            method=report.method,
            objective=report.objective,
            residuals=dict(report.residuals),
            converged=report.converged,
            iterations=report.iterations,
        )

    def to_payload(self) -> dict:
        n, m = self.plan.shape
        zeros = float((self.plan == 0).sum()) / self.plan.size
        if zeros >= TRIPLET_CUTOVER:
            ii, jj = np.nonzero(self.plan)
            entries = {
                "triplets": [[int(i), int(j), float(self.plan[i, j])] for i, j in zip(ii, jj)]
            }
        else:
            entries = {"dense": self.plan.tolist()}
        return {
            "shape": [n, m],
            "plan": entries,
            "source_marginal": self.source_marginal.tolist(),
            "target_marginal": self.target_marginal.tolist(),
            "row_perplexity": self.row_perplexity.tolist(),
            "col_perplexity": self.col_perplexity.tolist(),
            "method": self.method,
            "objective": self.objective,
            "residuals": {k: float(v) for k, v in sorted(self.residuals.items())},
            "converged": self.converged,
            "iterations": self.iterations,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_payload(cls, data: dict) -> "PlanExport":
        try:
            n, m = data["shape"]
            entries = data["plan"]
            if "dense" in entries:
                plan = np.array(entries["dense"], dtype=float).reshape(n, m)
            else:
                plan = np.zeros((n, m))
                for i, j, v in entries["triplets"]:
                    plan[i, j] = v
            return cls(
                plan=plan,
                source_marginal=np.array(data["source_marginal"], dtype=float),
                target_marginal=np.array(data["target_marginal"], dtype=float),
                row_perplexity=np.array(data["row_perplexity"], dtype=float),
                col_perplexity=np.array(data["col_perplexity"], dtype=float),
                method=data["method"],
                objective=float(data["objective"]),
                residuals=dict(data["residuals"]),
                converged=bool(data["converged"]),
                iterations=int(data["iterations"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed plan payload: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "PlanExport":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", line=exc.lineno) from None
        return cls.from_payload(data)

    def to_csv(self) -> str:
        lines = [",".join(repr(float(v)) for v in row) for row in self.plan]
        return "\n".join(lines) + "\n"


def write_plan(export, path, fmt="json"):
    if isinstance(export, SolveReport):
        export = PlanExport.from_report(export)
    text = export.to_json() if fmt == "json" else export.to_csv()
    with open(path, "w") as fh:
        fh.write(text)


def read_plan(path) -> PlanExport:
    with open(path) as fh:
        return PlanExport.from_json(fh.read())
