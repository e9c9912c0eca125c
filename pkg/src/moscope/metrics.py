"""LCC, SRCC, MSE and Kendall tau-b, plus speaker/system aggregation.

Degenerate inputs (a constant sequence, an all-tied ranking) raise
:class:`UndefinedMetricError`; :func:`evaluate` turns those into flags on the
returned :class:`MetricBundle` instead of reporting 0 or NaN.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
from scipy.stats import rankdata

from .corpus import CorpusManifest
from .nn._backend import kernels

log = logging.getLogger(__name__)

LEVELS = ("utterance", "speaker", "system")
GROUP_LEVELS = ("speaker", "system")


class UndefinedMetricError(ValueError):
    """A correlation is undefined for the given input (zero variance or all ties)."""


class DegenerateGroupsError(ValueError):
    """Fewer than two groups (or utterances) remain after aggregation."""


def _pair(x, y, min_len):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < min_len:
        raise ValueError(f"need at least {min_len} values, got {x.size}")
    return x, y


def pearson(x, y) -> float:
    x, y = _pair(x, y, 2)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedMetricError("pearson: zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of the positions they span."""
    return rankdata(np.asarray(x, dtype=np.float64), method="average")


def spearman(x, y) -> float:
    x, y = _pair(x, y, 2)
    try:
        return pearson(average_ranks(x), average_ranks(y))
    except UndefinedMetricError:
        raise UndefinedMetricError("spearman: constant input") from None


def mse(x, y) -> float:
    x, y = _pair(x, y, 1)
    d = x - y
    return float(np.mean(d * d))


def kendall_tau_b(x, y) -> float:
    """Tau-b from O(n^2) pair counts: (C - D) / sqrt((n0 - n1)(n0 - n2))."""
    x, y = _pair(x, y, 2)
    conc, disc, tied_x, tied_y = kernels.kendall_counts(np.ascontiguousarray(x),
                                                        np.ascontiguousarray(y))
    n = x.size
    n0 = n * (n - 1) // 2
    if tied_x == n0 or tied_y == n0:
        raise UndefinedMetricError("kendall_tau_b: all pairs tied")
    tau = (conc - disc) / math.sqrt((n0 - tied_x) * (n0 - tied_y))
    return min(1.0, max(-1.0, tau))


# --------------------------------------------------------------------------
# predictions and aggregation

class PredictionSet(dict):
    """Mapping utt_id -> predicted MOS."""

    def __init__(self, entries: Optional[Mapping[str, float]] = None):
        super().__init__()
        for k, v in (entries or {}).items():
            self[k] = v

    def __setitem__(self, key, value):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"prediction for {key!r} is not finite")
        super().__setitem__(key, value)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("utt_id", "pred_mos"))
        for k in sorted(self):
            w.writerow((k, repr(self[k])))
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8", newline="")

    @classmethod
    def read(cls, path) -> "PredictionSet":
        out = cls()
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"utt_id", "pred_mos"} <= set(reader.fieldnames):
                raise ValueError(f"{path}: expected header utt_id,pred_mos")
            for lineno, row in enumerate(reader, start=2):
                uid = row["utt_id"]
                if uid in out:
                    raise ValueError(f"{path}:{lineno}: duplicate utt_id {uid!r}")
                try:
                    out[uid] = float(row["pred_mos"])
                except (TypeError, ValueError):
                    raise ValueError(f"{path}:{lineno}: bad prediction {row['pred_mos']!r}") from None
        return out


@dataclass(frozen=True)
class GroupAggregate:
    group_id: str
    level: str
    mean_true: float
    mean_pred: float
    count: int


def labeled_pairs(preds, manifest, split):
    """(record, prediction) pairs for labeled, predicted records in ``split`` (None: all)."""
    out = []
    unlabeled = 0
    for r in manifest.records:
        if split is not None and r.split != split:
            continue
        if r.utt_id not in preds:
            continue
        if r.mos is None:
            unlabeled += 1
            continue
        out.append((r, preds[r.utt_id]))
    if unlabeled:
        log.warning("%d predicted utterance(s) have no MOS label and were excluded", unlabeled)
    return out


def aggregate_by(preds: Mapping[str, float], manifest: CorpusManifest, level: str,
                 split: Optional[str] = None) -> list[GroupAggregate]:
    if level not in GROUP_LEVELS:
        raise ValueError(f"level must be one of {GROUP_LEVELS}, got {level!r}")
    groups: dict[str, list[tuple[float, float]]] = {}
    for r, p in labeled_pairs(preds, manifest, split):
        key = r.speaker_id if level == "speaker" else r.system_id
        groups.setdefault(key, []).append((r.mos, p))
    if not groups:
        raise DegenerateGroupsError("no utterance has both a label and a prediction")
    out = []
    for gid in sorted(groups):
        vals = np.array(groups[gid])
        out.append(GroupAggregate(gid, level, float(vals[:, 0].mean()),
                                  float(vals[:, 1].mean()), len(vals)))
    return out


@dataclass(frozen=True)
class MetricBundle:
    level: str
    lcc: Optional[float]
    srcc: Optional[float]
    mse: float
    ktau: Optional[float]
    n: int

    @property
    def flags(self) -> tuple[str, ...]:
        return tuple(f"{name}_undefined" for name in ("lcc", "srcc", "ktau")
                     if getattr(self, name) is None)

    def csv_row(self) -> list[str]:
        fmt = lambda v: "" if v is None else repr(v)  # noqa: E731
        return [self.level, fmt(self.lcc), fmt(self.srcc), fmt(self.mse), fmt(self.ktau),
                "|".join(self.flags)]


BUNDLE_HEADER = ("level", "lcc", "srcc", "mse", "ktau", "flags")
AGGREGATE_HEADER = ("level", "group_id", "mean_true", "mean_pred", "count")


def _defined(fn, x, y):
    try:
        return fn(x, y)
    except UndefinedMetricError:
        return None


def bundle(true, pred, level="utterance") -> MetricBundle:
    true = np.asarray(true, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if true.size < 2:
        raise DegenerateGroupsError(f"{level}: need at least 2 points, got {true.size}")
    return MetricBundle(level, _defined(pearson, true, pred), _defined(spearman, true, pred),
                        mse(true, pred), _defined(kendall_tau_b, true, pred), int(true.size))


def evaluate(preds: Mapping[str, float], manifest: CorpusManifest, level: str,
             split: Optional[str] = None) -> MetricBundle:
    """All four metrics at one aggregation level.

    Group levels compare per-group mean true vs mean predicted MOS. Kendall tau
    is computed on the means directly; tau-b depends only on their ordering.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}, got {level!r}")
    if level == "utterance":
        pairs = labeled_pairs(preds, manifest, split)
        true = [r.mos for r, _ in pairs]
        pred = [p for _, p in pairs]
    else:
        aggs = aggregate_by(preds, manifest, level, split)
        if len(aggs) < 2:
            raise DegenerateGroupsError(f"{level}: need at least 2 groups, got {len(aggs)}")
        true = [a.mean_true for a in aggs]
        pred = [a.mean_pred for a in aggs]
    return bundle(true, pred, level)


def bundles_to_csv(bundles) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BUNDLE_HEADER)
    for b in bundles:
        w.writerow(b.csv_row())
    return buf.getvalue()


def aggregates_to_csv(aggs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_HEADER)
    for a in aggs:
        w.writerow((a.level, a.group_id, repr(a.mean_true), repr(a.mean_pred), a.count))
    return buf.getvalue()
