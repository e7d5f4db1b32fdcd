"""Scoring of proposal rankings against a known corruption manifest.

A proposal counts as a hit when its box reaches the match threshold against
the anchor box of some error record on the same image; anchors are the
original box for removed labels and the corrupted box otherwise.  Errors no
proposal reaches are folded into ranking metrics as positives with a key of
negative infinity, so a method pays for what it fails to surface.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .datamodel import (
    ERROR_KINDS,
    VERDICT_VALUES,
    CorruptionManifest,
    Dataset,
    ErrorRecord,
    Proposal,
    VerdictRecord,
)
from .errors import InputError
from .geometry import iou

DEFAULT_MATCH_IOU = 0.3


@dataclass(frozen=True)
class MatchResult:
    """Per-proposal assignment against one set of error records."""

    assignments: tuple  # record index or None, aligned with the proposals
    matched_records: frozenset
    num_records: int

    @property
    def flags(self) -> list[bool]:
        return [a is not None for a in self.assignments]

    @property
    def num_true_positives(self) -> int:
        return sum(1 for a in self.assignments if a is not None)

    @property
    def num_missed(self) -> int:
        return self.num_records - len(self.matched_records)


def _check_ranked(proposals: Sequence[Proposal]):
    for prev, cur in zip(proposals, proposals[1:]):
        if cur.key > prev.key:
            raise InputError("proposals must be sorted by non-increasing key")


def match(
    proposals: Sequence[Proposal],
    records: Sequence[ErrorRecord],
    alpha: float = DEFAULT_MATCH_IOU,
) -> MatchResult:
    """Assign each proposal to its highest-overlap anchor on the same image.

    Assignment is class agnostic and not exclusive: several proposals may
    land on the same record, each proposal lands on at most one.
    """
    if not 0.0 < alpha <= 1.0:
        raise InputError("alpha must be in (0, 1]")
    _check_ranked(proposals)
    by_image: dict[int, list[int]] = {}
    for idx, rec in enumerate(records):
        by_image.setdefault(rec.anchor_image_id, []).append(idx)
    assignments: list[int | None] = []
    for prop in proposals:
        best, best_iou = None, 0.0
        for idx in by_image.get(prop.image_id, ()):
            value = iou(prop.box, records[idx].anchor_box)
            if value > best_iou:
                best, best_iou = idx, value
        assignments.append(best if best is not None and best_iou >= alpha else None)
    matched = frozenset(a for a in assignments if a is not None)
    return MatchResult(tuple(assignments), matched, len(records))


def auroc(keys: Sequence[float], flags: Sequence[bool], num_missed: int = 0) -> float | None:
    """Rank-based area under the ROC curve with ties counted half.

    `flags` marks which entries are true positives; `num_missed` unreached
    errors enter as positives below every real key.  Undefined (None) when
    either class is empty.
    """
    if len(keys) != len(flags):
        raise InputError("keys and flags must align")
    if num_missed < 0:
        raise InputError("num_missed must be >= 0")
    values = list(map(float, keys)) + [float("-inf")] * num_missed
    labels = list(map(bool, flags)) + [True] * num_missed
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(np.asarray(values, dtype=float), method="average")
    pos_rank_sum = float(ranks[np.asarray(labels, dtype=bool)].sum())
    u = pos_rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    tpr: float
    fpr: float
    precision: float
    recall: float
    f1: float


def ranking_curve(
    proposals: Sequence[Proposal],
    result: MatchResult,
) -> list[CurvePoint]:
    """Operating points at every distinct key, highest threshold first.

    Precision counts proposals, recall counts distinct errors, so duplicate
    hits on one record raise precision without inflating recall.
    """
    n = len(proposals)
    if n != len(result.assignments):
        raise InputError("match result does not align with proposals")
    total_tp = result.num_true_positives
    total_fp = n - total_tp
    total_pos = total_tp + result.num_missed
    points: list[CurvePoint] = []
    tp = fp = 0
    seen: set[int] = set()
    i = 0
    while i < n:
        key = proposals[i].key
        while i < n and proposals[i].key == key:
            if result.assignments[i] is not None:
                tp += 1
                seen.add(result.assignments[i])
            else:
                fp += 1
            i += 1
        precision = tp / (tp + fp)
        recall = len(seen) / result.num_records if result.num_records else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        points.append(
            CurvePoint(
                threshold=key,
                tpr=tp / total_pos if total_pos else 0.0,
                fpr=fp / total_fp if total_fp else 0.0,
                precision=precision,
                recall=recall,
                f1=f1,
            )
        )
    return points


def max_f1(points: Sequence[CurvePoint]) -> float:
    return max((p.f1 for p in points), default=0.0)


def _same_class_overlap(prop: Proposal, dataset: Dataset) -> float:
    labels = dataset.labels_by_image.get(prop.image_id, [])
    return max(
        (iou(prop.box, l.box) for l in labels if l.class_id == prop.predicted_class),
        default=0.0,
    )


def per_type_pool(
    kind: str,
    proposals: Sequence[Proposal],
    noisy: Dataset,
    alpha: float = DEFAULT_MATCH_IOU,
) -> list[int]:
    """Candidate indices a method may reasonably surface for one error kind.

    Removed and misclassified labels can only be flagged by boxes whose
    predicted class has no nearby label of that class; misplaced labels by
    boxes that do overlap a same-class label; relocated labels by anything.
    """
    if kind not in ERROR_KINDS:
        raise InputError(f"unknown error kind {kind!r}")
    if kind == "spawn":
        return list(range(len(proposals)))
    pool = []
    for idx, prop in enumerate(proposals):
        overlap = _same_class_overlap(prop, noisy)
        if kind == "shift":
            if overlap >= alpha:
                pool.append(idx)
        elif overlap < alpha:
            pool.append(idx)
    return pool


def per_type_eval(
    proposals: Sequence[Proposal],
    manifest: CorruptionManifest,
    noisy: Dataset,
    alpha: float = DEFAULT_MATCH_IOU,
) -> dict:
    """Per-kind ranking quality over the kind's candidate pool.

    None when the manifest carries no errors of a kind; 0.0 when errors exist
    but the method surfaces none of them; 1.0 when every pool entry is a hit.
    """
    out: dict[str, dict | None] = {}
    for kind in ERROR_KINDS:
        records = manifest.records_of(kind)
        if not records:
            out[kind] = None
            continue
        pool = per_type_pool(kind, proposals, noisy, alpha)
        subset = [proposals[i] for i in pool]
        result = match(subset, records, alpha)
        value = auroc([p.key for p in subset], result.flags, result.num_missed)
        if value is None:
            value = 0.0 if result.num_true_positives == 0 else 1.0
        out[kind] = {
            "auroc": value,
            "num_errors": len(records),
            "num_matched": len(result.matched_records),
            "pool_size": len(pool),
            "num_true_positives": result.num_true_positives,
        }
    return out


def evaluate_method(
    proposals: Sequence[Proposal],
    manifest: CorruptionManifest,
    noisy: Dataset,
    alpha: float = DEFAULT_MATCH_IOU,
) -> dict:
    """Full report for one ranking: overall AUROC, best F1, per-kind AUROC,
    and the operating-point curve."""
    result = match(proposals, manifest.records, alpha)
    points = ranking_curve(proposals, result)
    overall = auroc([p.key for p in proposals], result.flags, result.num_missed)
    return {
        "method": proposals[0].method if proposals else "",
        "alpha": alpha,
        "num_proposals": len(proposals),
        "num_errors": len(manifest.records),
        "num_true_positives": result.num_true_positives,
        "num_matched_errors": len(result.matched_records),
        "num_missed_errors": result.num_missed,
        "auroc": overall,
        "max_f1": max_f1(points),
        "per_type": per_type_eval(proposals, manifest, noisy, alpha),
        "curve": [vars(p) for p in points],
    }


def latest_by_rank(verdicts: Sequence[VerdictRecord]) -> dict[int, VerdictRecord]:
    """Collapse an append-only verdict log; the last write for a rank wins."""
    latest: dict[int, VerdictRecord] = {}
    for v in verdicts:
        latest[v.proposal_rank] = v
    return latest


def review_precision(verdicts: Sequence[VerdictRecord], k: int) -> float:
    """Fraction of the top k proposals a reviewer confirmed as real errors.

    Requires a verdict for every rank 1..k; unsure counts against precision
    the same way a rejection does.
    """
    if k <= 0:
        raise InputError("k must be positive")
    latest = latest_by_rank(verdicts)
    gaps = [rank for rank in range(1, k + 1) if rank not in latest]
    if gaps:
        head = ", ".join(str(r) for r in gaps[:5])
        raise InputError(f"missing verdicts for ranks {head} (need all of 1..{k})")
    confirmed = sum(1 for rank in range(1, k + 1) if latest[rank].verdict == "tp")
    return confirmed / k


def verdict_stats(verdicts: Sequence[VerdictRecord]) -> dict:
    """Aggregate counts over the latest verdict per rank, for status reporting."""
    latest = latest_by_rank(verdicts)
    counts = {value: 0 for value in VERDICT_VALUES}
    per_type = {kind: 0 for kind in ERROR_KINDS}
    for v in latest.values():
        counts[v.verdict] += 1
        if v.verdict == "tp":
            for kind in v.error_types:
                per_type[kind] += 1
    reviewed = len(latest)
    return {
        "reviewed": reviewed,
        "counts": counts,
        "precision": counts["tp"] / reviewed if reviewed else None,
        "per_type": per_type,
    }
