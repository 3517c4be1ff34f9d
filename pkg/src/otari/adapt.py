"""Domain adaptation by barycentric transfer.

Protocol per trial: split the target 90/10, build a squared-Euclidean
cost between sources and target-train points, solve a plan with uniform
marginals, map each source to its plan-weighted average of target-train
points, fit 1-NN on the mapped sources with the source labels, score on
the held-out target points. The test split never touches the cost
matrix, the solve, or the mapping.

Trials are independent; trial t draws from a generator seeded seed ^ t,
so the table is a pure function of the experiment spec regardless of
worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import TransportPlan
from .datasets import LabeledDataset, squared_euclidean_cost
from .errors import DimensionMismatch, DomainViolation, EmptyTrainSet, OtariError
from .solvers import METHODS, solve

DEFAULT_TRIALS = 10
DEFAULT_TEST_FRACTION = 0.1


def barycentric_map(P, X_T, a):
    """Map source i to (1/a_i) sum_j P_ij x^T_j, a convex combination of
    the target points whenever row i sums to a_i."""
    V = P.values if isinstance(P, TransportPlan) else np.asarray(P, dtype=float)
    X_T = np.asarray(X_T, dtype=float)
    a = np.asarray(a, dtype=float)
    if V.shape[1] != X_T.shape[0] or V.shape[0] != a.size:
        raise DimensionMismatch(
            f"plan {V.shape} vs {X_T.shape[0]} target points, {a.size} source weights"
        )
    return (V @ X_T) / a[:, None]


def knn_predict(train_points, train_labels, query_points, k=1):
    """k-NN labels under squared Euclidean distance.

    Distance ties resolve to the lowest training index; k > 1 vote ties
    resolve to the lowest label. Both rules are deterministic.
    """
    train_points = np.asarray(train_points, dtype=float)
    train_labels = np.asarray(train_labels, dtype=int)
    query_points = np.asarray(query_points, dtype=float)
    if train_points.shape[0] == 0:
        raise EmptyTrainSet("k-NN needs at least one training point")
    if k < 1:
        raise DomainViolation(f"k must be >= 1, got {k}")
    D = squared_euclidean_cost(query_points, train_points).values
    if k == 1:
        return train_labels[np.argmin(D, axis=1)]
    k = min(k, train_points.shape[0])
    order = np.argsort(D, axis=1, kind="stable")[:, :k]
    out = np.empty(query_points.shape[0], dtype=int)
    for q in range(order.shape[0]):
        votes = np.bincount(train_labels[order[q]])
        out[q] = int(np.argmax(votes))
    return out


@dataclass
class ExperimentSpec:
    """Everything a domain-adaptation run depends on."""

    source: LabeledDataset
    target: LabeledDataset
    methods: Sequence[str] = ("exact", "eotari-d")
    xis: Sequence[float] = (5.0,)
    trials: int = DEFAULT_TRIALS
    test_fraction: float = DEFAULT_TEST_FRACTION
    seed: int = 0
    solver_options: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise DomainViolation(
                f"test_fraction must lie in (0, 1), got {self.test_fraction}"
            )
        if self.trials < 1:
            raise DomainViolation(f"trials must be >= 1, got {self.trials}")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise DomainViolation(f"unknown methods: {sorted(unknown)}")

    def cells(self) -> List[Tuple[str, Optional[float]]]:
        """(method, xi) pairs in table order; 'exact' takes no xi."""
        out = []
        for m in self.methods:
            if m == "exact":
                out.append((m, None))
            else:
                out.extend((m, float(xi)) for xi in self.xis)
        return out


@dataclass
class AccuracyCell:
    method: str
    xi: Optional[float]
    accuracies: List[float]
    error: Optional[str] = None

    @property
    def n_trials(self) -> int:
        return len(self.accuracies)

    @property
    def mean(self) -> Optional[float]:
        return float(np.mean(self.accuracies)) if self.accuracies else None

    @property
    def std(self) -> Optional[float]:
        return float(np.std(self.accuracies)) if self.accuracies else None


@dataclass
class AccuracyTable:
    cells: List[AccuracyCell]

    def cell(self, method, xi=None) -> AccuracyCell:
        for c in self.cells:
            if c.method == method and (c.xi == xi or (c.xi is None and xi is None)):
                return c
        raise KeyError((method, xi))

    def to_csv(self) -> str:
        lines = ["method,xi,mean,std,n_trials"]
        for c in self.cells:
            xi = "" if c.xi is None else repr(c.xi)
            mean = "NA" if c.mean is None else repr(c.mean)
            std = "NA" if c.std is None else repr(c.std)
            lines.append(f"{c.method},{xi},{mean},{std},{c.n_trials}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        import json

        rows = []
        for c in self.cells:
            row = {
                "method": c.method,
                "xi": c.xi,
                "mean": c.mean,
                "std": c.std,
                "n_trials": c.n_trials,
            }
            if c.error is not None:
                row["error"] = c.error
            rows.append(row)
        return json.dumps(rows, sort_keys=True, separators=(",", ":")) + "\n"


def _split_target(n, test_fraction, rng):
    n_test = max(1, int(round(test_fraction * n)))
    if n_test >= n:
        raise DomainViolation(f"test fraction {test_fraction} leaves no training points")
    perm = rng.permutation(n)
    return perm[n_test:], perm[:n_test]


def _run_trial(spec: ExperimentSpec, trial: int):
    """Accuracy (or error string) for every cell on one split."""
    rng = np.random.default_rng(spec.seed ^ trial)
    train_idx, test_idx = _split_target(len(spec.target), spec.test_fraction, rng)
    X_train = spec.target.points[train_idx]
    X_test = spec.target.points[test_idx]
    y_test = spec.target.labels[test_idx]
    X_src = spec.source.points
    a = np.full(len(spec.source), 1.0 / len(spec.source))
    b = np.full(len(train_idx), 1.0 / len(train_idx))
    C = squared_euclidean_cost(X_src, X_train)

    results = {}
    for method, xi in spec.cells():
        try:
            kwargs = dict(spec.solver_options)
            if xi is not None:
                kwargs["xi"] = xi
            report = solve(C, a, b, method, **kwargs)
            mapped = barycentric_map(report.plan, X_train, a)
            pred = knn_predict(mapped, spec.source.labels, X_test, k=1)
            results[(method, xi)] = float(np.mean(pred == y_test))
        except OtariError as exc:
            results[(method, xi)] = f"{type(exc).__name__}: {exc}"
    return results


def _worker_count(n_tasks):
    cap = os.environ.get("OTARI_THREADS")
    if cap is not None:
        try:
            return max(1, min(int(cap), n_tasks))
        except ValueError:
            pass
    return max(1, min(os.cpu_count() or 1, n_tasks))


def run_experiment(spec: ExperimentSpec) -> AccuracyTable:
    """Run all trials and aggregate per (method, xi).

    A trial whose solve raises marks the cell with the error string; the
    remaining trials still count, and mean/std are NA only when every
    trial failed. Aggregation runs in trial order, so the table is
    bit-identical across repeat runs and worker counts.
    """
    workers = _worker_count(spec.trials)
    if workers == 1:
        per_trial = [_run_trial(spec, t) for t in range(spec.trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(lambda t: _run_trial(spec, t), range(spec.trials)))

    table = []
    for method, xi in spec.cells():
        accs, error = [], None
        for t in range(spec.trials):
            got = per_trial[t][(method, xi)]
            if isinstance(got, str):
                error = error or got
            else:
                accs.append(got)
        table.append(AccuracyCell(method=method, xi=xi, accuracies=accs, error=error))
    return AccuracyTable(table)
