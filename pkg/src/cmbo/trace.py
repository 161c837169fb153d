"""Per-query records of a BO run and their CSV/JSON forms."""
import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np


def nsr(best_y, y_min, y_max):
    """Normalized simple regret in [0, 1]; 0 when the task range is degenerate."""
    if y_max < y_min:
        raise ValueError("y_max must be >= y_min")
    if y_max == y_min:
        return 0.0
    return float(min(max((y_max - best_y) / (y_max - y_min), 0.0), 1.0))


def csv_header(n_weights):
    return ["run_id", "method", "tau", "x_index", "y", "best_y", "nsr"] + [
        f"w_{i + 1}" for i in range(n_weights)
    ]


@dataclass(frozen=True)
class TraceRecord:
    tau: int
    x_index: int
    x: tuple
    y: float
    best_y: float
    weights: tuple = ()
    distances: tuple = ()


@dataclass(eq=False)
class RunTrace:
    method: str
    seed: int
    grid_id: str = ""
    run_id: str = ""
    y_min: float = float("nan")
    y_max: float = float("nan")
    records: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def append(self, tau, x_index, x, y, weights=(), distances=()):
        best = y if not self.records else max(self.records[-1].best_y, y)
        self.records.append(
            TraceRecord(
                int(tau),
                int(x_index),
                tuple(float(v) for v in np.ravel(x)),
                float(y),
                float(best),
                tuple(float(w) for w in weights),
                tuple(float(d) for d in distances),
            )
        )

    @property
    def T(self):
        return max((r.tau for r in self.records), default=0)

    @property
    def queried(self):
        return [r.x_index for r in self.records]

    def answer(self):
        """Record holding the best observed value (first one on ties)."""
        ys = [r.y for r in self.records]
        return self.records[int(np.argmax(ys))]

    def nsr_values(self):
        if not (np.isfinite(self.y_min) and np.isfinite(self.y_max)):
            return [float("nan")] * len(self.records)
        return [nsr(r.best_y, self.y_min, self.y_max) for r in self.records]

    def nsr_by_tau(self):
        """NSR after each query count tau (tau = 0 is after the initial design)."""
        out = {}
        for r, v in zip(self.records, self.nsr_values()):
            out[r.tau] = v
        return [out[t] for t in sorted(out)]

    def n_weights(self):
        return max((len(r.weights) for r in self.records), default=0)

    def to_csv(self, n_weights=None, header=True):
        n_w = self.n_weights() if n_weights is None else n_weights
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if header:
            writer.writerow(csv_header(n_w))
        for r, v in zip(self.records, self.nsr_values()):
            w = list(r.weights) + [""] * (n_w - len(r.weights))
            writer.writerow(
                [self.run_id, self.method, r.tau, r.x_index, repr(r.y), repr(r.best_y), repr(v)]
                + [repr(float(x)) if x != "" else "" for x in w]
            )
        return buf.getvalue()

    def to_json(self):
        return {
            "run_id": self.run_id,
            "method": self.method,
            "seed": self.seed,
            "grid_id": self.grid_id,
            "y_min": self.y_min,
            "y_max": self.y_max,
            "config": self.config,
            "records": [
                {
                    "tau": r.tau,
                    "x_index": r.x_index,
                    "x": list(r.x),
                    "y": r.y,
                    "best_y": r.best_y,
                    "weights": list(r.weights),
                    "distances": list(r.distances),
                }
                for r in self.records
            ],
        }

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, doc):
        tr = cls(
            doc["method"], doc["seed"], doc.get("grid_id", ""), doc.get("run_id", ""),
            doc.get("y_min", float("nan")), doc.get("y_max", float("nan")),
            config=doc.get("config", {}),
        )
        for r in doc["records"]:
            tr.records.append(
                TraceRecord(r["tau"], r["x_index"], tuple(r["x"]), r["y"], r["best_y"],
                            tuple(r["weights"]), tuple(r["distances"]))
            )
        return tr
