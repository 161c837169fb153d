import csv
import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cmbo.bench.metrics import REPORT_COLUMNS, aggregate
from cmbo.errors import MismatchedTraceLengths
from cmbo.trace import RunTrace


def trace(method, run_id, best_values, y_min=0.0, y_max=1.0):
    tr = RunTrace(method, 0, "g", run_id, y_min, y_max)
    for tau, y in enumerate(best_values):
        tr.append(tau, tau, [0.0], y)
    return tr


def test_single_method_ranks_one():
    rep = aggregate([trace("a", f"r{i}", [0.1, 0.5, 0.6]) for i in range(3)])
    assert all(r.avg_rank == 1.0 for r in rep.rows)


def test_identical_traces_share_rank():
    rep = aggregate([trace("a", "r0", [0.1, 0.5]), trace("b", "r0", [0.1, 0.5])])
    assert all(r.avg_rank == 1.5 for r in rep.rows)


def test_solvable_fraction_strict_threshold():
    # final NSR 0.004, 0.006, 0.001 and one exactly at the threshold
    runs = [trace("a", f"r{i}", [0.0, 1.0 - v]) for i, v in enumerate([0.004, 0.006, 0.001])]
    rep = aggregate(runs, threshold=0.005)
    assert rep.curve("a", "solvable_frac")[-1] == pytest.approx(2 / 3)
    edge = aggregate([trace("a", "r", [0.0, 0.5])], threshold=0.5)
    assert edge.curve("a", "solvable_frac")[-1] == 0.0


def test_mean_nsr_and_csv():
    rep = aggregate([trace("a", "r0", [0.2, 0.8]), trace("a", "r1", [0.4, 0.6]),
                     trace("b", "r0", [0.5, 0.5]), trace("b", "r1", [0.1, 0.9])])
    assert rep.curve("a") == pytest.approx([0.7, 0.3])
    assert rep.curve("b", "avg_rank") == pytest.approx([1.5, 1.5])
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert tuple(rows[0]) == REPORT_COLUMNS
    assert len(rows) == 1 + 2 * 2


def test_mismatched_lengths():
    with pytest.raises(MismatchedTraceLengths):
        aggregate([trace("a", "r0", [0.1, 0.2]), trace("b", "r0", [0.1])])


@pytest.mark.property
@given(st.integers(1, 5), st.integers(1, 4), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_rank_sums(M, R, T, seed):
    rng = np.random.default_rng(seed)
    traces = []
    for r in range(R):
        for m in range(M):
            ys = np.round(rng.uniform(size=T), 1)  # rounding creates ties
            traces.append(trace(f"m{m}", f"r{r}", ys))
    rep = aggregate(traces)
    for tau in range(T):
        ranks = [row.avg_rank for row in rep.rows if row.tau == tau]
        assert sum(ranks) == pytest.approx(M * (M + 1) / 2)
