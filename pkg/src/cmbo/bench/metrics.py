"""Aggregation of run traces into per-tau summaries."""
import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ..errors import InsufficientData, MismatchedTraceLengths

DEFAULT_THRESHOLD = 0.005
REPORT_COLUMNS = ("method", "tau", "mean_nsr", "avg_rank", "solvable_frac")


@dataclass(frozen=True)
class ReportRow:
    method: str
    tau: int
    mean_nsr: float
    avg_rank: float
    solvable_frac: float


@dataclass(frozen=True, eq=False)
class Report:
    rows: list
    methods: list
    T: int
    threshold: float

    def curve(self, method, field="mean_nsr"):
        return [getattr(r, field) for r in self.rows if r.method == method]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r.method, r.tau, repr(r.mean_nsr), repr(r.avg_rank), repr(r.solvable_frac)])
        return buf.getvalue()

    def to_json(self):
        return {
            "threshold": self.threshold,
            "T": self.T,
            "methods": list(self.methods),
            "rows": [dict(zip(REPORT_COLUMNS, (r.method, r.tau, r.mean_nsr, r.avg_rank, r.solvable_frac)))
                     for r in self.rows],
        }

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)


def aggregate(traces, threshold=DEFAULT_THRESHOLD):
    """Mean NSR, average rank and solvable fraction for each method and tau.

    Ranks are taken within groups of traces sharing a ``run_id`` (one run
    per method on the same target and seed); tied NSRs share the average
    rank. A run counts as solved at tau when its NSR is strictly below
    ``threshold``.
    """
    traces = list(traces)
    if not traces:
        raise InsufficientData("no traces to aggregate")
    curves = [np.asarray(t.nsr_by_tau(), dtype=float) for t in traces]
    lengths = {c.size for c in curves}
    if len(lengths) != 1:
        raise MismatchedTraceLengths(f"traces have differing lengths {sorted(lengths)}")
    n_tau = lengths.pop()
    methods = sorted({t.method for t in traces})
    m_index = {m: i for i, m in enumerate(methods)}

    nsr_sum = np.zeros((len(methods), n_tau))
    solved = np.zeros((len(methods), n_tau))
    rank_sum = np.zeros((len(methods), n_tau))
    counts = np.zeros(len(methods))
    rank_counts = np.zeros(len(methods))
    groups = {}
    for t, c in zip(traces, curves):
        i = m_index[t.method]
        nsr_sum[i] += c
        solved[i] += c < threshold
        counts[i] += 1
        groups.setdefault(t.run_id, []).append((i, c))

    for members in groups.values():
        idx = [i for i, _ in members]
        block = np.vstack([c for _, c in members])
        ranks = rankdata(block, method="average", axis=0)
        for row, i in enumerate(idx):
            rank_sum[i] += ranks[row]
            rank_counts[i] += 1

    rows = []
    for i, m in enumerate(methods):
        for tau in range(n_tau):
            rows.append(ReportRow(
                m, tau,
                float(nsr_sum[i, tau] / counts[i]),
                float(rank_sum[i, tau] / rank_counts[i]),
                float(solved[i, tau] / counts[i]),
            ))
    return Report(rows, methods, n_tau - 1, threshold)
