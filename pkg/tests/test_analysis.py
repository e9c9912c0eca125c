import csv
import io
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moscope.analysis import (best_worst, per_system_speaker_table, rank_groups, ranking_csv,
                              scatter_report, scatter_svg)
from moscope.corpus import CorpusManifest, UtteranceRecord
from moscope.metrics import DegenerateGroupsError, GroupAggregate, kendall_tau_b

SVG = "{http://www.w3.org/2000/svg}"


def aggs(true, pred=None):
    pred = pred or true
    return [GroupAggregate(g, "speaker", true[g], pred[g], 1) for g in sorted(true)]


def test_rank_examples():
    ranked = rank_groups(aggs({"A": 3.2, "B": 2.9}))
    assert [(r.group_id, r.true_rank) for r in ranked] == [("A", 1), ("B", 2)]
    tied = rank_groups(aggs({"B": 3.0, "A": 3.0}))
    assert [(r.group_id, r.true_rank) for r in tied] == [("A", 1), ("B", 2)]


def test_reversed_prediction_ranking():
    ranked = rank_groups(aggs({"A": 1.0, "B": 2.0, "C": 3.0}, {"A": 3.0, "B": 2.0, "C": 1.0}))
    assert kendall_tau_b([r.true_rank for r in ranked], [r.pred_rank for r in ranked]) == -1


def test_best_worst():
    assert best_worst(aggs({"A": 1.0, "B": 2.0, "C": 3.0})) == ("C", "A")
    assert best_worst(aggs({"B": 2.0, "A": 2.0})) == ("A", "A")
    assert best_worst(aggs({"A": 1.0, "B": 2.0}, {"A": 5.0, "B": 4.0}), by="pred") == ("A", "B")
    with pytest.raises(DegenerateGroupsError):
        best_worst(aggs({"A": 1.0}))


group_means = st.dictionaries(st.sampled_from("ABCDEFGH"), st.floats(1, 10), min_size=2)


@settings(max_examples=100, deadline=None)
@given(group_means, st.data())
def test_ranking_properties(true, data):
    pred = {g: data.draw(st.floats(1, 10)) for g in true}
    a = aggs(true, pred)
    ranked = rank_groups(a)
    means = [r.mean_true for r in ranked]
    assert means == sorted(means, reverse=True)
    assert sorted(r.pred_rank for r in ranked) == list(range(1, len(a) + 1))
    best, worst = best_worst(a)
    by_rank = {r.true_rank: r.group_id for r in ranked}
    assert by_rank[1] == best
    if len(set(true.values())) == len(true):
        assert by_rank[len(a)] == worst
        if len(set(pred.values())) == len(pred):
            assert kendall_tau_b([x.mean_true for x in a], [x.mean_pred for x in a]) == \
                kendall_tau_b([r.true_rank for r in ranked], [r.pred_rank for r in ranked])


def crossed_manifest(drop=None):
    recs = []
    for sys in ("s1", "s2"):
        for spk in ("a", "b"):
            if (sys, spk) == drop:
                continue
            for u in range(2):
                uid = f"{sys}_{spk}_{u}"
                recs.append(UtteranceRecord(uid, spk, sys, 2.0 + u + (sys == "s2"), "test",
                                            f"{uid}.wav"))
    return CorpusManifest(tuple(recs))


def test_cell_table():
    m = crossed_manifest()
    preds = {r.utt_id: r.mos + 0.5 for r in m.records}
    cells = per_system_speaker_table(preds, m)
    assert len(cells) == 4
    assert (cells[0].system_id, cells[0].speaker_id, cells[0].mean_true, cells[0].count) == \
        ("s1", "a", 2.5, 2)
    m3 = crossed_manifest(drop=("s2", "b"))
    assert len(per_system_speaker_table({r.utt_id: r.mos for r in m3.records}, m3)) == 3


def test_scatter_report_perfect(tmp_path):
    m = crossed_manifest()
    preds = {r.utt_id: r.mos for r in m.records}
    scatter_report(preds, m, "system", tmp_path / "s.csv", tmp_path / "s.svg")
    rows = list(csv.DictReader(io.StringIO((tmp_path / "s.csv").read_text())))
    assert len(rows) == 2 and all(r["mean_true"] == r["mean_pred"] for r in rows)
    root = ET.parse(tmp_path / "s.svg").getroot()
    assert len(root.findall(f"{SVG}circle")) == 2
    assert root.find(f"{SVG}line[@class='identity']") is not None


def test_svg_axes_grow_to_outliers():
    a = aggs({"A": 2.0, "B": 4.0}, {"A": -3.0, "B": 14.0})
    root = ET.fromstring(scatter_svg(a, (1, 10)).encode())
    labels = [t.text for t in root.findall(f"{SVG}text")]
    assert "-3.0" in labels and "14.0" in labels
    width, height = float(root.get("width")), float(root.get("height"))
    for c in root.findall(f"{SVG}circle"):
        assert 0 <= float(c.get("cx")) <= width and 0 <= float(c.get("cy")) <= height
    notes = [t.text for t in root.findall(f"{SVG}text[@class='annotation']")]
    assert any("best" in n for n in notes) and any("worst" in n for n in notes)


def test_reports_are_deterministic(tmp_path):
    rng = np.random.default_rng(0)
    a = aggs({g: float(rng.uniform(1, 10)) for g in "ABCDE"},
             {g: float(rng.uniform(1, 10)) for g in "ABCDE"})
    assert scatter_svg(a) == scatter_svg(list(a))
    assert ranking_csv(rank_groups(a)) == ranking_csv(rank_groups(a[::-1]))
