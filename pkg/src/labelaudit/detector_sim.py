"""Synthetic two-stage detector over a clean dataset.

The simulator emits one jittered proposal per annotated object (minus a miss
rate) plus Poisson clutter, and exposes the second stage as a deterministic
oracle that can be queried at any box.  Query streams are derived from the
seed, the image id, and the box coordinates, so the same box always receives
the same refined box and class distribution no matter who asks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datamodel import BoxLabel, Dataset, ScoredBox
from .errors import InputError
from .geometry import Box, ClassDistribution, iou
from .rng import derive_rng

# IoU above which a query box is treated as covering an object.
FG_MATCH_IOU = 0.5
# Fraction of the gap to the true box removed by refinement.
REFINE_PULL = 0.8
# Background mass ramps from this floor (empty region) up to 0.99 near a match.
BG_FLOOR = 0.9


@dataclass(frozen=True)
class SimulatorConfig:
    seed: int = 0
    loc_noise_factor: float = 0.05
    miss_rate: float = 0.02
    clutter_per_image: float = 1.0
    class_accuracy: float = 0.95
    dirichlet_concentration: float = 50.0
    objectness_sharpness: float = 8.0

    def __post_init__(self):
        if self.loc_noise_factor < 0:
            raise InputError("loc_noise_factor must be >= 0")
        if not 0.0 <= self.miss_rate <= 1.0:
            raise InputError("miss_rate must be in [0, 1]")
        if self.clutter_per_image < 0:
            raise InputError("clutter_per_image must be >= 0")
        if not 0.0 < self.class_accuracy <= 1.0:
            raise InputError("class_accuracy must be in (0, 1]")
        if self.dirichlet_concentration <= 0:
            raise InputError("dirichlet_concentration must be positive")
        if self.objectness_sharpness <= 0:
            raise InputError("objectness_sharpness must be positive")


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _objectness(cfg: SimulatorConfig, evidence: float, noise: float = 0.0) -> float:
    return _sigmoid(cfg.objectness_sharpness * (evidence - 0.5 + noise))


def _box_scope(box: Box) -> tuple:
    return tuple(round(float(v), 6) for v in (box.cx, box.cy, box.w, box.h))


def _best_match(box: Box, labels: list[BoxLabel]) -> tuple[BoxLabel | None, float]:
    best, best_iou = None, 0.0
    for label in labels:
        value = iou(box, label.box)
        if value > best_iou:
            best, best_iou = label, value
    return best, best_iou


def _lerp_box(a: Box, b: Box, f: float) -> Box:
    return Box(
        a.cx + f * (b.cx - a.cx),
        a.cy + f * (b.cy - a.cy),
        a.w + f * (b.w - a.w),
        a.h + f * (b.h - a.h),
    )


def _foreground_dist(cfg: SimulatorConfig, num_classes: int, class_id: int, rng) -> ClassDistribution:
    """Mass `class_accuracy` on the true class; the remainder is split over
    background and the other classes by a symmetric Dirichlet draw."""
    remainder = 1.0 - cfg.class_accuracy
    off_slots = num_classes  # background plus the other foreground classes
    probs = np.zeros(num_classes + 1)
    probs[class_id] = cfg.class_accuracy
    if off_slots > 0 and remainder > 0:
        split = rng.dirichlet(np.full(off_slots, cfg.dirichlet_concentration / max(off_slots, 1)))
        others = [k for k in range(num_classes + 1) if k != class_id]
        probs[others] = remainder * split
    total = probs.sum()
    return ClassDistribution(tuple(float(p) for p in probs / total))


def _background_dist(cfg: SimulatorConfig, num_classes: int, evidence: float, rng) -> ClassDistribution:
    """Background-dominant distribution.  Mass on background grows with the
    evidence (best IoU), so entropy rises as a box drifts into empty space."""
    t = min(max(evidence, 0.0), FG_MATCH_IOU) / FG_MATCH_IOU
    bg = BG_FLOOR + (0.99 - BG_FLOOR) * t
    probs = np.zeros(num_classes + 1)
    probs[0] = bg
    split = rng.dirichlet(np.full(num_classes, cfg.dirichlet_concentration / num_classes))
    probs[1:] = (1.0 - bg) * split
    total = probs.sum()
    return ClassDistribution(tuple(float(p) for p in probs / total))


def _second_stage(
    clean: Dataset, cfg: SimulatorConfig, box: Box, image_id: int
) -> tuple[Box, ClassDistribution, float]:
    """Refined box, class distribution, and best clean IoU for a query box."""
    labels = clean.labels_by_image.get(image_id, [])
    best, best_iou = _best_match(box, labels)
    rng = derive_rng(cfg.seed, "roi", image_id, *_box_scope(box))
    if best is not None and best_iou >= FG_MATCH_IOU:
        refined = _lerp_box(box, best.box, REFINE_PULL)
        dist = _foreground_dist(cfg, clean.num_classes, best.class_id, rng)
    else:
        refined = box
        dist = _background_dist(cfg, clean.num_classes, best_iou, rng)
    return refined, dist, best_iou


def second_stage_query(
    clean: Dataset,
    cfg: SimulatorConfig,
    box: Box,
    image_id: int,
    label: BoxLabel | None = None,
) -> ScoredBox:
    """Evaluate the second stage at an arbitrary box.

    With `label` given, the result is an injected-label row (s0 = 1,
    source "injected_label"); otherwise a plain probe with the noiseless
    objectness of the query box.
    """
    if image_id not in clean.images_by_id:
        raise InputError(f"unknown image {image_id}")
    refined, dist, best_iou = _second_stage(clean, cfg, box, image_id)
    if label is not None:
        return ScoredBox(
            image_id=image_id,
            box=label.box,
            s0=1.0,
            refined_box=refined,
            class_dist=dist,
            source="injected_label",
            label_ref=label.id,
        )
    return ScoredBox(
        image_id=image_id,
        box=box,
        s0=_objectness(cfg, best_iou),
        refined_box=refined,
        class_dist=dist,
        source="detector",
    )


def simulate(clean: Dataset, cfg: SimulatorConfig) -> dict[int, list[ScoredBox]]:
    """Produce detector outputs for every image of a clean dataset.

    Per object: skipped with probability miss_rate, otherwise one proposal
    with location jitter scaled by loc_noise_factor and an objectness score
    tied to its IoU with the object.  Clutter boxes (Poisson count per image)
    carry low evidence drawn below the match threshold.
    """
    out: dict[int, list[ScoredBox]] = {}
    for image in clean.images:
        rng = derive_rng(cfg.seed, "image", image.id)
        boxes: list[ScoredBox] = []
        for label in clean.labels_by_image.get(image.id, []):
            if rng.random() < cfg.miss_rate:
                continue
            f = cfg.loc_noise_factor
            b = label.box
            proposal = Box(
                b.cx + rng.normal(0.0, f * b.w) if f > 0 else b.cx,
                b.cy + rng.normal(0.0, f * b.h) if f > 0 else b.cy,
                b.w * math.exp(rng.normal(0.0, f)) if f > 0 else b.w,
                b.h * math.exp(rng.normal(0.0, f)) if f > 0 else b.h,
            )
            noise = rng.normal(0.0, 0.5 * f) if f > 0 else 0.0
            s0 = _objectness(cfg, iou(proposal, b), noise)
            refined, dist, _ = _second_stage(clean, cfg, proposal, image.id)
            boxes.append(
                ScoredBox(
                    image_id=image.id,
                    box=proposal,
                    s0=s0,
                    refined_box=refined,
                    class_dist=dist,
                    source="detector",
                )
            )
        for _ in range(int(rng.poisson(cfg.clutter_per_image))):
            w = image.width * rng.uniform(0.05, 0.3)
            h = image.height * rng.uniform(0.05, 0.3)
            cx = rng.uniform(w / 2, image.width - w / 2)
            cy = rng.uniform(h / 2, image.height - h / 2)
            clutter = Box(cx, cy, w, h)
            evidence = rng.uniform(0.0, 0.5)
            refined, dist, _ = _second_stage(clean, cfg, clutter, image.id)
            boxes.append(
                ScoredBox(
                    image_id=image.id,
                    box=clutter,
                    s0=_objectness(cfg, evidence),
                    refined_box=refined,
                    class_dist=dist,
                    source="detector",
                )
            )
        out[image.id] = boxes
    return out


def export_detections(
    clean: Dataset, cfg: SimulatorConfig, noisy: Dataset | None = None
) -> dict[int, list[ScoredBox]]:
    """Simulate detector rows and, when a noisy dataset is given, append one
    injected-label row per noisy label so downstream scoring is file-driven."""
    out = simulate(clean, cfg)
    if noisy is not None:
        for label in noisy.labels:
            if label.image_id not in out:
                raise InputError(f"noisy label {label.id} references unknown image")
            out[label.image_id].append(
                second_stage_query(clean, cfg, label.box, label.image_id, label=label)
            )
    return out
