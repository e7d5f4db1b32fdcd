"""Ranking pipelines that turn detector outputs into label-error proposals.

All box-level pipelines share one shape: noisy labels are injected as extra
second-stage candidates with s0 = 1, both suppression stages run with the
injected boxes exempt (kept unconditionally, suppressing overlapping
detector boxes), and every surviving box becomes a proposal ranked by the
method's key.  The per-label probability-differential baseline and the
random-ranking baseline skip injection and suppression entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .datamodel import (
    BoxLabel,
    CorruptionManifest,
    Dataset,
    Proposal,
    ScoredBox,
    derived_s2,
    predicted_class,
)
from .errors import InputError
from .geometry import (
    bce,
    binary_entropy,
    cross_entropy,
    encode_deltas,
    entropy,
    iou,
    nms,
    smooth_l1,
)
from .rng import derive_rng

METHODS = ("loss", "score", "entropy", "pd", "naive")

SecondStageSource = Callable[[BoxLabel], ScoredBox]


@dataclass(frozen=True)
class PipelineConfig:
    s_epsilon: float = 0.25
    tau: float = 0.0
    nms_iou_stage1: float = 0.7
    nms_iou_stage2: float = 0.5
    assign_iou: float = 0.5
    pd_assign_iou: float = 0.5
    smooth_l1_beta: float = 1.0
    # The first-stage score filter also runs in the loss pipeline so all
    # box-level methods see the same candidate pool; injected labels pass
    # regardless because they carry s0 = 1.
    s_epsilon_in_loss: bool = True

    def __post_init__(self):
        if not 0.0 <= self.s_epsilon < 1.0:
            raise InputError("s_epsilon must be in [0, 1)")
        if self.tau < 0:
            raise InputError("tau must be >= 0")
        for name in ("nms_iou_stage1", "nms_iou_stage2"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise InputError(f"{name} must be in (0, 1]")
        for name in ("assign_iou", "pd_assign_iou"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise InputError(f"{name} must be in (0, 1]")


def _max_iou_label(box, labels: Sequence[BoxLabel]) -> tuple[BoxLabel | None, float]:
    best, best_iou = None, 0.0
    for label in labels:
        value = iou(box, label.box)
        if value > best_iou:
            best, best_iou = label, value
    return best, best_iou


def rpn_loss(
    scored: ScoredBox,
    labels: Sequence[BoxLabel],
    assign_iou: float = 0.5,
    beta: float = 1.0,
) -> tuple[float, float]:
    """First-stage loss of one box against the labels of its image.

    A box is assigned to its highest-IoU label when that IoU reaches
    `assign_iou`; assigned boxes pay objectness BCE toward 1 plus smooth-L1
    on the encoded offsets, unassigned boxes pay BCE toward 0 only.
    """
    match, match_iou = _max_iou_label(scored.box, labels)
    if match is not None and match_iou >= assign_iou:
        cls = bce(scored.s0, 1)
        reg = smooth_l1(encode_deltas(scored.box, match.box), beta)
    else:
        cls = bce(scored.s0, 0)
        reg = 0.0
    return cls, reg


def roi_loss(
    scored: ScoredBox,
    labels: Sequence[BoxLabel],
    assign_iou: float = 0.5,
    beta: float = 1.0,
) -> tuple[float, float]:
    """Second-stage loss of one box: classification cross-entropy against the
    assigned label's class (background when unassigned) plus smooth-L1 on the
    refined box.  Assignment uses the refined box."""
    match, match_iou = _max_iou_label(scored.refined_box, labels)
    if match is not None and match_iou >= assign_iou:
        cls = cross_entropy(scored.class_dist, match.class_id)
        reg = smooth_l1(encode_deltas(scored.refined_box, match.box), beta)
    else:
        cls = cross_entropy(scored.class_dist, 0)
        reg = 0.0
    return cls, reg


def oracle_from_detections(detections: Mapping[int, Sequence[ScoredBox]]) -> SecondStageSource:
    """Look injected-label rows up by label id from a detector-output table."""
    table: dict[int, ScoredBox] = {}
    for boxes in detections.values():
        for sb in boxes:
            if sb.source == "injected_label" and sb.label_ref is not None:
                table[sb.label_ref] = sb

    def lookup(label: BoxLabel) -> ScoredBox:
        found = table.get(label.id)
        if found is None:
            raise InputError(f"no second-stage result for label {label.id}")
        return found

    return lookup


def simulator_oracle(clean: Dataset, sim_cfg) -> SecondStageSource:
    """Second-stage source backed by the detector simulator's query oracle."""
    from .detector_sim import second_stage_query

    def query(label: BoxLabel) -> ScoredBox:
        return second_stage_query(clean, sim_cfg, label.box, label.image_id, label=label)

    return query


def inject_labels(
    labels: Sequence[BoxLabel],
    boxes: Sequence[ScoredBox],
    oracle: SecondStageSource,
) -> list[ScoredBox]:
    """Append one injected row (s0 = 1, geometry equal to the label) per label."""
    combined = list(boxes)
    for label in labels:
        row = oracle(label)
        if row.source != "injected_label" or row.label_ref != label.id:
            raise InputError(f"oracle returned a non-injected row for label {label.id}")
        combined.append(row)
    return combined


def _sorted_proposals(proposals: list[Proposal]) -> list[Proposal]:
    # Descending key; image id then insertion order break ties deterministically.
    order = sorted(range(len(proposals)), key=lambda i: (-proposals[i].key, proposals[i].image_id, i))
    return [proposals[i] for i in order]


def _box_pipeline(
    noisy: Dataset,
    detections: Mapping[int, Sequence[ScoredBox]],
    cfg: PipelineConfig,
    method: str,
) -> list[Proposal]:
    oracle = oracle_from_detections(detections)
    proposals: list[Proposal] = []
    for image in noisy.images:
        labels = noisy.labels_by_image.get(image.id, [])
        dets = [sb for sb in detections.get(image.id, ()) if sb.source == "detector"]
        combined = inject_labels(labels, dets, oracle)
        if not combined:
            continue
        exempt = set(range(len(dets), len(combined)))

        if method == "loss":
            rpn = [
                rpn_loss(sb, labels, cfg.assign_iou, cfg.smooth_l1_beta) for sb in combined
            ]
            stage1_keys = [c + r for c, r in rpn]
        elif method == "score":
            stage1_keys = [sb.s0 for sb in combined]
        else:
            stage1_keys = [binary_entropy(sb.s0) for sb in combined]

        keep1 = nms([sb.box for sb in combined], stage1_keys, cfg.nms_iou_stage1, exempt)
        if method != "loss" or cfg.s_epsilon_in_loss:
            keep1 = [i for i in keep1 if i in exempt or combined[i].s0 >= cfg.s_epsilon]

        survivors = [combined[i] for i in keep1]
        exempt2 = {pos for pos, i in enumerate(keep1) if i in exempt}

        if method == "loss":
            stage1 = [rpn[i] for i in keep1]
            roi = [
                roi_loss(sb, labels, cfg.assign_iou, cfg.smooth_l1_beta) for sb in survivors
            ]
            keys = [rc + rr + oc + orr for (rc, rr), (oc, orr) in zip(stage1, roi)]
            components = [
                {"rpn_cls": rc, "rpn_reg": rr, "roi_cls": oc, "roi_reg": orr}
                for (rc, rr), (oc, orr) in zip(stage1, roi)
            ]
        elif method == "score":
            keys = [derived_s2(sb) for sb in survivors]
            components = [{"s0": sb.s0, "s2": k} for sb, k in zip(survivors, keys)]
        else:
            keys = [entropy(sb.class_dist) for sb in survivors]
            components = [
                {"stage1_entropy": binary_entropy(sb.s0), "stage2_entropy": k}
                for sb, k in zip(survivors, keys)
            ]

        keep2 = nms([sb.refined_box for sb in survivors], keys, cfg.nms_iou_stage2, exempt2)
        if method in ("score", "entropy") and cfg.tau > 0:
            keep2 = [i for i in keep2 if i in exempt2 or derived_s2(survivors[i]) >= cfg.tau]

        for i in keep2:
            sb = survivors[i]
            proposals.append(
                Proposal(
                    image_id=image.id,
                    box=sb.refined_box,
                    key=keys[i],
                    method=method,
                    predicted_class=predicted_class(sb.class_dist),
                    components=components[i],
                    source=sb.source,
                    label_ref=sb.label_ref,
                )
            )
    return _sorted_proposals(proposals)


def run_loss_method(
    noisy: Dataset,
    detections: Mapping[int, Sequence[ScoredBox]],
    cfg: PipelineConfig = PipelineConfig(),
) -> list[Proposal]:
    """Rank boxes by total two-stage loss: rpn_cls + rpn_reg + roi_cls + roi_reg."""
    return _box_pipeline(noisy, detections, cfg, "loss")


def run_score_method(
    noisy: Dataset,
    detections: Mapping[int, Sequence[ScoredBox]],
    cfg: PipelineConfig = PipelineConfig(),
) -> list[Proposal]:
    """Rank boxes by detection score: stage one keys on s0 (with the s_epsilon
    filter), stage two on the largest foreground probability."""
    return _box_pipeline(noisy, detections, cfg, "score")


def run_entropy_method(
    noisy: Dataset,
    detections: Mapping[int, Sequence[ScoredBox]],
    cfg: PipelineConfig = PipelineConfig(),
) -> list[Proposal]:
    """Rank boxes by uncertainty: binary entropy of s0 in stage one, entropy of
    the class distribution in stage two."""
    return _box_pipeline(noisy, detections, cfg, "entropy")


def run_pd(
    noisy: Dataset,
    detections: Mapping[int, Sequence[ScoredBox]],
    cfg: PipelineConfig = PipelineConfig(),
) -> list[Proposal]:
    """Per-label probability differential.

    Every noisy label becomes exactly one proposal.  Detector boxes whose
    refined box overlaps the label at pd_assign_iou or better contribute
    (1 + max off-class probability - labeled-class probability) / 2, averaged
    over the assigned boxes; labels with no assigned box score 1.  The
    proposal's class is the one the assigned detections favor (the labeled
    class only when nothing is assigned), so downstream class-aware
    subsetting sees what the detector believes, not what the label claims.
    """
    proposals: list[Proposal] = []
    for label in noisy.labels:
        dets = [sb for sb in detections.get(label.image_id, ()) if sb.source == "detector"]
        assigned = [
            sb for sb in dets if iou(sb.refined_box, label.box) >= cfg.pd_assign_iou
        ]
        if assigned:
            total = 0.0
            mean_fg = [0.0] * len(assigned[0].class_dist.foreground)
            for sb in assigned:
                fg = sb.class_dist.foreground
                own = fg[label.class_id - 1]
                other = max(
                    (p for k, p in enumerate(fg, start=1) if k != label.class_id),
                    default=0.0,
                )
                total += (1.0 + other - own) / 2.0
                for k, p in enumerate(fg):
                    mean_fg[k] += p
            key = total / len(assigned)
            consensus = 1 + max(range(len(mean_fg)), key=lambda k: mean_fg[k])
        else:
            key = 1.0
            consensus = label.class_id
        proposals.append(
            Proposal(
                image_id=label.image_id,
                box=label.box,
                key=key,
                method="pd",
                predicted_class=consensus,
                components={"pd": key, "assigned": float(len(assigned))},
                source="injected_label",
                label_ref=label.id,
            )
        )
    return _sorted_proposals(proposals)


def naive_cost(gamma: float, num_labels: int) -> int:
    """floor((1 + gamma / 4) * G): labels plus the expected drop count."""
    return int(math.floor((1.0 + gamma / 4.0) * num_labels + 1e-9))


def run_naive(
    noisy: Dataset, manifest: CorruptionManifest, seed: int
) -> tuple[int, list[Proposal]]:
    """Random-order review baseline.

    Returns the review cost floor((1 + gamma / 4) * G) and a uniformly random
    ranking over all noisy labels plus the dropped originals (so every error
    kind is reachable).  Expected ranking quality is chance level.
    """
    rng = derive_rng(seed, "naive")
    items: list[tuple[int, object, int, int | None]] = []
    for label in noisy.labels:
        items.append((label.image_id, label.box, label.class_id, label.id))
    for rec in manifest.records_of("drop"):
        orig = rec.original_label
        items.append((orig.image_id, orig.box, orig.class_id, orig.id))
    keys = rng.random(len(items))
    proposals = [
        Proposal(
            image_id=image_id,
            box=box,
            key=float(k),
            method="naive",
            predicted_class=class_id,
            components={},
            source="injected_label",
            label_ref=label_id,
        )
        for (image_id, box, class_id, label_id), k in zip(items, keys)
    ]
    return naive_cost(manifest.gamma, len(noisy.labels)), _sorted_proposals(proposals)


def run_method(
    method: str,
    noisy: Dataset,
    detections: Mapping[int, Sequence[ScoredBox]] | None = None,
    cfg: PipelineConfig = PipelineConfig(),
    manifest: CorruptionManifest | None = None,
    seed: int = 0,
) -> list[Proposal]:
    """Dispatch by method name; the naive baseline needs a manifest."""
    if method not in METHODS:
        raise InputError(f"unknown method {method!r}")
    if method == "naive":
        if manifest is None:
            raise InputError("the naive baseline needs a corruption manifest")
        return run_naive(noisy, manifest, seed)[1]
    if detections is None:
        raise InputError(f"method {method!r} needs detector outputs")
    if method == "pd":
        return run_pd(noisy, detections, cfg)
    return _box_pipeline(noisy, detections, cfg, method)
