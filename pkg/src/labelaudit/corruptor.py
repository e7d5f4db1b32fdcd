"""Simulated label errors: drop, flip, shift, and spawn.

Given an error budget `gamma`, each error type receives floor(gamma / 4 * G)
labels, drawn sequentially without replacement so the four index sets are
disjoint.  Drops remove a label, flips replace its class, shifts perturb its
box, and spawns copy it onto another image where it annotates background.
Removed drops and added spawn copies balance out, so the noisy dataset keeps
exactly G labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .datamodel import BoxLabel, CorruptionManifest, Dataset, ErrorRecord
from .errors import CorruptionError, InputError
from .geometry import Box, iou
from .rng import derive_rng


@dataclass(frozen=True)
class CorruptionConfig:
    gamma: float
    seed: int
    shift_std_factor: float = 0.15
    shift_iou_low: float = 0.4
    shift_iou_high: float = 0.7
    max_rejection_iters: int = 1000
    # When set, vertical shift noise scales with box width instead of height.
    shift_std_from_width: bool = False

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise InputError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.shift_std_factor <= 0:
            raise InputError("shift_std_factor must be positive")
        if not 0.0 <= self.shift_iou_low < self.shift_iou_high <= 1.0:
            raise InputError("shift IoU window must satisfy 0 <= low < high <= 1")
        if self.max_rejection_iters < 1:
            raise InputError("max_rejection_iters must be >= 1")


def per_type_count(gamma: float, num_labels: int) -> int:
    """floor(gamma / 4 * G); the small offset guards float representation."""
    return int(math.floor(gamma * num_labels / 4 + 1e-9))


def sample_flip(label: BoxLabel, num_classes: int, rng) -> BoxLabel:
    """Replace the class with one drawn uniformly from the other classes."""
    if num_classes < 2:
        raise InputError("class flips need at least two classes")
    draw = int(rng.integers(1, num_classes))
    new_class = draw if draw < label.class_id else draw + 1
    return replace(label, class_id=new_class)


def sample_shift(label: BoxLabel, cfg: CorruptionConfig, rng) -> BoxLabel:
    """Gaussian-perturb the box, rejecting until IoU with the original lands
    in [shift_iou_low, shift_iou_high] and both extents stay positive."""
    box = label.box
    std_x = cfg.shift_std_factor * box.w
    std_y = cfg.shift_std_factor * (box.w if cfg.shift_std_from_width else box.h)
    for _ in range(cfg.max_rejection_iters):
        cx = rng.normal(box.cx, std_x)
        w = rng.normal(box.w, std_x)
        cy = rng.normal(box.cy, std_y)
        h = rng.normal(box.h, std_y)
        if w <= 0 or h <= 0:
            continue
        candidate = Box(cx, cy, w, h)
        if cfg.shift_iou_low <= iou(box, candidate) <= cfg.shift_iou_high:
            return replace(label, box=candidate)
    raise CorruptionError(
        f"shift sampling for label {label.id} found no box in the IoU window "
        f"after {cfg.max_rejection_iters} draws"
    )


def sample_spawn(label: BoxLabel, dataset: Dataset, rng, max_iters: int = 1000) -> BoxLabel:
    """Relocate the label to a uniformly drawn other image; the box must fit
    inside the target image, otherwise the target is redrawn."""
    others = [im for im in dataset.images if im.id != label.image_id]
    if not others:
        raise InputError("spawns need at least two images")
    box = label.box
    for _ in range(max_iters):
        target = others[int(rng.integers(0, len(others)))]
        if box.x1 >= 0 and box.y1 >= 0 and box.x2 <= target.width and box.y2 <= target.height:
            return replace(label, image_id=target.id)
    raise CorruptionError(
        f"spawn sampling for label {label.id} found no image that fits its box "
        f"after {max_iters} draws"
    )


def plan(dataset: Dataset, cfg: CorruptionConfig) -> CorruptionManifest:
    """Choose the error sets and sample every perturbation.

    Records are listed grouped by kind (drops, flips, shifts, spawns) with
    each group in dataset label order.  Spawn copies receive fresh label ids
    above the current maximum, assigned in record order.
    """
    labels = dataset.labels
    count = per_type_count(cfg.gamma, len(labels))
    if 4 * count > len(labels):
        raise InputError(
            f"gamma {cfg.gamma} asks for {4 * count} errors but only "
            f"{len(labels)} labels exist"
        )

    perm = derive_rng(cfg.seed, "select").permutation(len(labels))
    groups = [sorted(perm[i * count : (i + 1) * count]) for i in range(4)]
    drop_idx, flip_idx, shift_idx, spawn_idx = groups

    records: list[ErrorRecord] = []
    for i in drop_idx:
        orig = labels[i]
        records.append(
            ErrorRecord(
                kind="drop",
                original_label=orig,
                noisy_label=None,
                anchor_image_id=orig.image_id,
                anchor_box=orig.box,
            )
        )
    for i in flip_idx:
        orig = labels[i]
        noisy = sample_flip(orig, dataset.num_classes, derive_rng(cfg.seed, "flip", orig.id))
        records.append(
            ErrorRecord(
                kind="flip",
                original_label=orig,
                noisy_label=noisy,
                anchor_image_id=noisy.image_id,
                anchor_box=noisy.box,
            )
        )
    for i in shift_idx:
        orig = labels[i]
        noisy = sample_shift(orig, cfg, derive_rng(cfg.seed, "shift", orig.id))
        records.append(
            ErrorRecord(
                kind="shift",
                original_label=orig,
                noisy_label=noisy,
                anchor_image_id=noisy.image_id,
                anchor_box=noisy.box,
            )
        )
    next_id = max((lb.id for lb in labels), default=0) + 1
    for i in spawn_idx:
        orig = labels[i]
        moved = sample_spawn(orig, dataset, derive_rng(cfg.seed, "spawn", orig.id))
        noisy = replace(moved, id=next_id)
        next_id += 1
        records.append(
            ErrorRecord(
                kind="spawn",
                original_label=orig,
                noisy_label=noisy,
                anchor_image_id=noisy.image_id,
                anchor_box=noisy.box,
            )
        )
    return CorruptionManifest(
        gamma=cfg.gamma, seed=cfg.seed, per_type_count=count, records=records
    )


def apply(dataset: Dataset, manifest: CorruptionManifest) -> Dataset:
    """Materialize a noisy dataset from a manifest planned on `dataset`.

    Pure function of its inputs: applying the same manifest twice yields an
    identical dataset.  Raises when the manifest references labels that do
    not match the dataset.
    """
    by_original: dict[int, ErrorRecord] = {}
    for rec in manifest.records:
        by_original[rec.original_label.id] = rec

    from .datamodel import validate_against

    validate_against(dataset, [rec.original_label for rec in manifest.records])

    noisy: list[BoxLabel] = []
    for label in dataset.labels:
        rec = by_original.get(label.id)
        if rec is None or rec.kind == "spawn":
            noisy.append(label)
        elif rec.kind == "drop":
            continue
        else:
            noisy.append(rec.noisy_label)
    for rec in manifest.records:
        if rec.kind == "spawn":
            noisy.append(rec.noisy_label)

    return Dataset(images=dataset.images, labels=noisy, class_names=dataset.class_names)
