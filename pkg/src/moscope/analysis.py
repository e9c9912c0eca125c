"""Speaker/system rankings, per-system speaker tables and scatter reports.

Ties are always broken by group id (lexicographic), so every report is
reproducible byte for byte.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .corpus import CorpusManifest
from .metrics import DegenerateGroupsError, GroupAggregate, labeled_pairs, aggregate_by


@dataclass(frozen=True)
class RankedGroup:
    group_id: str
    true_rank: int
    pred_rank: int
    mean_true: float
    mean_pred: float


def _need_two(aggregates):
    if len(aggregates) < 2:
        raise DegenerateGroupsError(f"need at least 2 groups, got {len(aggregates)}")


def _order(aggregates, attr):
    return sorted(aggregates, key=lambda a: (-getattr(a, attr), a.group_id))


def rank_groups(aggregates: Sequence[GroupAggregate]) -> list[RankedGroup]:
    """Rank 1 is the highest mean; output is sorted by true rank."""
    _need_two(aggregates)
    true_rank = {a.group_id: i for i, a in enumerate(_order(aggregates, "mean_true"), start=1)}
    pred_rank = {a.group_id: i for i, a in enumerate(_order(aggregates, "mean_pred"), start=1)}
    out = [RankedGroup(a.group_id, true_rank[a.group_id], pred_rank[a.group_id],
                       a.mean_true, a.mean_pred) for a in aggregates]
    return sorted(out, key=lambda r: r.true_rank)


def best_worst(aggregates: Sequence[GroupAggregate], by: str = "true") -> tuple[str, str]:
    if by not in ("true", "pred"):
        raise ValueError(f"by must be 'true' or 'pred', got {by!r}")
    _need_two(aggregates)
    order = _order(aggregates, f"mean_{by}")
    # worst: lowest mean, ties again resolved to the lexicographically first id
    worst = min(aggregates, key=lambda a: (getattr(a, f"mean_{by}"), a.group_id))
    return order[0].group_id, worst.group_id


@dataclass(frozen=True)
class CellSummary:
    system_id: str
    speaker_id: str
    mean_true: float
    mean_pred: float
    count: int


def per_system_speaker_table(preds: Mapping[str, float], manifest: CorpusManifest,
                             split: Optional[str] = None) -> list[CellSummary]:
    cells: dict = {}
    for r, p in labeled_pairs(preds, manifest, split):
        cells.setdefault((r.system_id, r.speaker_id), []).append((r.mos, p))
    if not cells:
        raise DegenerateGroupsError("no utterance has both a label and a prediction")
    out = []
    for key in sorted(cells):
        v = np.array(cells[key])
        out.append(CellSummary(key[0], key[1], float(v[:, 0].mean()), float(v[:, 1].mean()), len(v)))
    return out


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def ranking_csv(ranked: Sequence[RankedGroup]) -> str:
    return _csv(("group_id", "true_rank", "pred_rank", "mean_true", "mean_pred"),
                [(r.group_id, r.true_rank, r.pred_rank, repr(r.mean_true), repr(r.mean_pred))
                 for r in ranked])


def scatter_csv(aggregates: Sequence[GroupAggregate]) -> str:
    return _csv(("group_id", "mean_true", "mean_pred", "count"),
                [(a.group_id, repr(a.mean_true), repr(a.mean_pred), a.count) for a in aggregates])


def cell_table_csv(cells: Sequence[CellSummary]) -> str:
    return _csv(("system_id", "speaker_id", "mean_true", "mean_pred", "count"),
                [(c.system_id, c.speaker_id, repr(c.mean_true), repr(c.mean_pred), c.count)
                 for c in cells])


def mean_group(aggregates: Sequence[GroupAggregate]) -> str:
    """The group whose true mean is closest to the average of all true means."""
    centre = float(np.mean([a.mean_true for a in aggregates]))
    return min(aggregates, key=lambda a: (abs(a.mean_true - centre), a.group_id)).group_id


def scatter_svg(aggregates: Sequence[GroupAggregate], scale=(1.0, 10.0), level="speaker",
                width=800, height=600) -> str:
    """True-vs-predicted scatter with identity line and best/worst/mean labels.

    The axis box starts at the MOS scale and grows to include any point that
    falls outside it; points are never clamped.
    """
    _need_two(aggregates)
    values = [v for a in aggregates for v in (a.mean_true, a.mean_pred)]
    lo = min(scale[0], min(values))
    hi = max(scale[1], max(values))
    left, right, top, bottom = 70, 30, 40, 60
    pw, ph = width - left - right, height - top - bottom

    def sx(v):
        return left + (v - lo) / (hi - lo) * pw

    def sy(v):
        return top + ph - (v - lo) / (hi - lo) * ph

    best, worst = best_worst(aggregates, "true")
    mid = mean_group(aggregates)
    notes = {best: "best", worst: "worst"}
    notes.setdefault(mid, "mean")
    f = "{:.2f}".format
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<line class="identity" x1="{f(sx(lo))}" y1="{f(sy(lo))}" x2="{f(sx(hi))}" '
        f'y2="{f(sy(hi))}" stroke="gray" stroke-dasharray="4,4"/>',
    ]
    n_ticks = 5
    for i in range(n_ticks + 1):
        v = lo + (hi - lo) * i / n_ticks
        out.append(f'<text x="{f(sx(v))}" y="{top + ph + 18}" font-size="11" '
                   f'text-anchor="middle">{v:.1f}</text>')
        out.append(f'<text x="{left - 8}" y="{f(sy(v) + 4)}" font-size="11" '
                   f'text-anchor="end">{v:.1f}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 15}" font-size="13" '
               f'text-anchor="middle">mean true MOS ({level})</text>')
    out.append(f'<text x="18" y="{top + ph / 2:.2f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2:.2f})">mean predicted MOS ({level})</text>')
    for a in aggregates:
        gid = escape(a.group_id)
        out.append(f'<circle class="marker" data-group="{gid}" cx="{f(sx(a.mean_true))}" '
                   f'cy="{f(sy(a.mean_pred))}" r="4" fill="steelblue"/>')
        if a.group_id in notes:
            out.append(f'<text class="annotation" x="{f(sx(a.mean_true) + 6)}" '
                       f'y="{f(sy(a.mean_pred) - 6)}" font-size="11">'
                       f'{gid} ({notes[a.group_id]})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter_report(preds: Mapping[str, float], manifest: CorpusManifest, level: str,
                   out_csv, out_svg, split: Optional[str] = None) -> list[GroupAggregate]:
    aggs = aggregate_by(preds, manifest, level, split)
    _need_two(aggs)
    Path(out_csv).write_text(scatter_csv(aggs), encoding="utf-8", newline="")
    Path(out_svg).write_text(scatter_svg(aggs, (manifest.scale_min, manifest.scale_max), level),
                             encoding="utf-8", newline="")
    return aggs
