import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from moscope.corpus import CorpusManifest, UtteranceRecord
from moscope.metrics import (DegenerateGroupsError, PredictionSet, UndefinedMetricError,
                             aggregate_by, average_ranks, bundle, bundles_to_csv, evaluate,
                             kendall_tau_b, mse, pearson, spearman)

values = st.lists(st.integers(-4, 4), min_size=2, max_size=30)
# dyadic values keep the monotone transforms below strictly increasing in floating point
reals = st.integers(-8000, 8000).map(lambda i: i / 8)


def pair_counts(x, y):
    conc = disc = tx = ty = 0
    for i, j in itertools.combinations(range(len(x)), 2):
        sx, sy = np.sign(x[i] - x[j]), np.sign(y[i] - y[j])
        tx += sx == 0
        ty += sy == 0
        conc += sx * sy > 0
        disc += sx * sy < 0
    return conc, disc, tx, ty


def manifest_of(rows, lo=1.0, hi=10.0):
    """rows: (utt_id, speaker, system, mos[, split])."""
    recs = [UtteranceRecord(r[0], r[1], r[2], r[3], r[4] if len(r) > 4 else "test", f"{r[0]}.wav")
            for r in rows]
    return CorpusManifest(tuple(recs), lo, hi)


# --------------------------------------------------------------------------
# scalar metrics

def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == 1.0
    assert pearson([1, 2, 3], [3, 2, 1]) == -1.0
    assert abs(pearson([1, 2, 3, 4], [1, 3, 2, 4]) - 0.8) < 1e-12


def test_spearman_examples():
    assert spearman([1, 2, 3, 4], [10, 20, 25, 100]) == 1.0
    assert abs(spearman([1, 2, 2, 3], [1, 2, 3, 4]) - 4.5 / math.sqrt(22.5)) < 1e-12
    assert average_ranks([10, 20, 20, 30]).tolist() == [1, 2.5, 2.5, 4]


def test_mse_examples():
    assert mse([1, 2, 3], [1, 2, 3]) == 0
    assert mse([1, 2], [2, 4]) == 2.5


def test_kendall_examples():
    assert kendall_tau_b([1, 2, 3], [3, 2, 1]) == -1.0
    assert abs(kendall_tau_b([1, 2, 3], [1, 3, 2]) - 1 / 3) < 1e-12
    assert abs(kendall_tau_b([1, 1, 2], [1, 2, 3]) - 2 / math.sqrt(6)) < 1e-12


def test_undefined_cases():
    with pytest.raises(UndefinedMetricError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(UndefinedMetricError):
        spearman([1, 2, 3], [4, 4, 4])
    with pytest.raises(UndefinedMetricError):
        kendall_tau_b([2, 2], [1, 3])
    with pytest.raises(ValueError, match="length mismatch"):
        mse([1, 2], [1])
    with pytest.raises(ValueError):
        pearson([1], [1])


@settings(max_examples=200, deadline=None)
@given(values, st.data())
def test_kendall_matches_pair_counts(x, data):
    y = data.draw(st.lists(st.integers(-4, 4), min_size=len(x), max_size=len(x)))
    c, d, tx, ty = pair_counts(x, y)
    n0 = len(x) * (len(x) - 1) // 2
    if tx == n0 or ty == n0:
        with pytest.raises(UndefinedMetricError):
            kendall_tau_b(x, y)
        return
    assert abs(kendall_tau_b(x, y) - (c - d) / math.sqrt((n0 - tx) * (n0 - ty))) < 1e-12


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(reals, reals), min_size=2, max_size=25))
def test_correlations_bounded_and_invariant(pairs):
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    assume(np.ptp(x) > 1e-6 and np.ptp(y) > 1e-6)
    for fn in (pearson, spearman, kendall_tau_b):
        try:
            r = fn(x, y)
        except UndefinedMetricError:
            continue
        assert -1 <= r <= 1
        if fn is pearson:
            assert abs(fn(3 * x + 7, y) - r) < 1e-9
        else:
            # any strictly increasing transform leaves rank statistics unchanged
            assert fn(np.arctan(x / 100) * 5 + 2, y) == pytest.approx(r, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(reals, min_size=2, max_size=25, unique=True))
def test_monotone_relation_gives_one(x):
    x = np.array(x)
    y = np.exp(x / 500)
    assert len(set(y)) == len(y)
    assert spearman(x, y) == 1.0
    assert kendall_tau_b(x, y) == 1.0


@settings(max_examples=100, deadline=None)
@given(values, st.data())
def test_kendall_on_values_equals_kendall_on_ranks(x, data):
    y = data.draw(st.lists(st.integers(-4, 4), min_size=len(x), max_size=len(x)))
    assume(len(set(x)) > 1 and len(set(y)) > 1)
    assert kendall_tau_b(x, y) == kendall_tau_b(average_ranks(x), average_ranks(y))


# --------------------------------------------------------------------------
# predictions and aggregation

def test_prediction_set_csv_round_trip(tmp_path):
    preds = PredictionSet({"b": 2.5, "a": 1 / 3})
    path = tmp_path / "p.csv"
    preds.write(path)
    assert path.read_bytes() == b"utt_id,pred_mos\na,0.3333333333333333\nb,2.5\n"
    assert PredictionSet.read(path) == preds
    with pytest.raises(ValueError):
        PredictionSet({"a": float("nan")})
    path.write_text("utt_id,pred_mos\na,1\na,2\n")
    with pytest.raises(ValueError, match="duplicate"):
        PredictionSet.read(path)


def test_aggregate_examples():
    m = manifest_of([("1", "A", "s", 1.0), ("2", "A", "s", 3.0), ("3", "B", "s", 5.0),
                     ("4", "B", "s", 7.0)])
    perfect = {r.utt_id: r.mos for r in m.records}
    aggs = aggregate_by(perfect, m, "speaker")
    assert [(a.group_id, a.mean_true, a.count) for a in aggs] == [("A", 2.0, 2), ("B", 6.0, 2)]
    assert all(a.mean_pred == a.mean_true for a in aggs)


def test_aggregate_respects_split_and_unlabeled():
    m = manifest_of([("1", "A", "s", 2.0, "train"), ("2", "A", "s", None, "test"),
                     ("3", "B", "s", 5.0, "test"), ("4", "C", "s", 6.0, "test")])
    preds = {"1": 1.0, "2": 9.0, "3": 5.0, "4": 4.0}
    assert [a.group_id for a in aggregate_by(preds, m, "speaker", "test")] == ["B", "C"]
    with pytest.raises(DegenerateGroupsError):
        aggregate_by({}, m, "speaker")


@settings(max_examples=50, deadline=None)
@given(st.permutations(list(range(12))), st.integers(0, 2 ** 31))
def test_aggregate_is_order_invariant(perm, seed):
    rng = np.random.default_rng(seed)
    rows = [(f"u{i}", f"spk{i % 3}", f"sys{i % 2}", float(rng.uniform(1, 10))) for i in range(12)]
    preds = {r[0]: float(rng.uniform(1, 10)) for r in rows}
    a = aggregate_by(preds, manifest_of(rows), "system")
    b = aggregate_by(dict(reversed(list(preds.items()))), manifest_of([rows[i] for i in perm]),
                     "system")
    for x, y in zip(a, b):
        assert x.group_id == y.group_id and x.count == y.count
        assert x.mean_true == pytest.approx(y.mean_true, abs=1e-12)
        assert x.mean_pred == pytest.approx(y.mean_pred, abs=1e-12)


def test_evaluate_perfect_and_constant():
    rows = [(f"u{i}", f"spk{i % 3}", f"sys{i % 4}", 1.0 + (i * 7 % 10)) for i in range(24)]
    m = manifest_of(rows)
    perfect = {r[0]: r[3] for r in rows}
    for level in ("utterance", "speaker", "system"):
        b = evaluate(perfect, m, level)
        assert (b.lcc, b.srcc, b.ktau, b.mse) == (1.0, 1.0, 1.0, 0.0)
        assert b.flags == ()
    const = evaluate({r[0]: 5.0 for r in rows}, m, "utterance")
    assert const.lcc is None and const.srcc is None and const.ktau is None
    assert math.isfinite(const.mse)
    assert const.flags == ("lcc_undefined", "srcc_undefined", "ktau_undefined")
    assert bundles_to_csv([const]).splitlines()[1].endswith(",lcc_undefined|srcc_undefined|ktau_undefined")


def test_evaluate_needs_two_groups():
    m = manifest_of([("1", "A", "only", 2.0), ("2", "B", "only", 3.0)])
    with pytest.raises(DegenerateGroupsError):
        evaluate({"1": 2.0, "2": 3.0}, m, "system")
    with pytest.raises(DegenerateGroupsError):
        bundle([1.0], [1.0])
