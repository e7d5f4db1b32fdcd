"""Core record types: datasets, error records, scored boxes, proposals, verdicts."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

from .errors import InputError
from .geometry import Box, ClassDistribution

ERROR_KINDS = ("drop", "flip", "shift", "spawn")
BOX_SOURCES = ("detector", "injected_label")
VERDICT_VALUES = ("tp", "fp", "unsure")


@dataclass(frozen=True)
class ImageMeta:
    """One image: integer id, pixel extent, optional file name for serving."""

    id: int
    width: int
    height: int
    file_name: str | None = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InputError(f"image {self.id} has non-positive extent")


@dataclass(frozen=True)
class BoxLabel:
    """One annotated box.  class_id is 1-based; 0 is reserved for background."""

    id: int
    image_id: int
    box: Box
    class_id: int

    def __post_init__(self):
        if self.class_id < 1:
            raise InputError(f"label {self.id}: class_id must be >= 1")


@dataclass
class Dataset:
    """An annotated image collection.  Treated as immutable after construction."""

    images: list[ImageMeta]
    labels: list[BoxLabel]
    class_names: list[str]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @cached_property
    def images_by_id(self) -> dict[int, ImageMeta]:
        return {im.id: im for im in self.images}

    @cached_property
    def labels_by_image(self) -> dict[int, list[BoxLabel]]:
        table: dict[int, list[BoxLabel]] = {im.id: [] for im in self.images}
        for label in self.labels:
            table.setdefault(label.image_id, []).append(label)
        return table

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.images == other.images
            and self.labels == other.labels
            and self.class_names == other.class_names
        )


@dataclass(frozen=True)
class ErrorRecord:
    """One injected label error plus the anchor box used for evaluation."""

    kind: str
    original_label: BoxLabel
    noisy_label: BoxLabel | None
    anchor_image_id: int
    anchor_box: Box

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise InputError(f"unknown error kind {self.kind!r}")
        orig, noisy = self.original_label, self.noisy_label
        if self.kind == "drop":
            if noisy is not None:
                raise InputError(f"drop record {orig.id} must have no noisy label")
            if self.anchor_box != orig.box or self.anchor_image_id != orig.image_id:
                raise InputError(f"drop record {orig.id}: anchor must be the original box")
            return
        if noisy is None:
            raise InputError(f"{self.kind} record {orig.id} needs a noisy label")
        if self.anchor_box != noisy.box or self.anchor_image_id != noisy.image_id:
            raise InputError(f"{self.kind} record {orig.id}: anchor must be the noisy box")
        if self.kind == "flip":
            if noisy.class_id == orig.class_id or noisy.box != orig.box:
                raise InputError(f"flip record {orig.id}: class must change, box must not")
        elif self.kind == "shift":
            if noisy.class_id != orig.class_id or noisy.image_id != orig.image_id:
                raise InputError(f"shift record {orig.id}: only the box may change")
        elif self.kind == "spawn":
            if noisy.image_id == orig.image_id:
                raise InputError(f"spawn record {orig.id}: target image must differ")
            if noisy.box != orig.box or noisy.class_id != orig.class_id:
                raise InputError(f"spawn record {orig.id}: geometry and class must be kept")


@dataclass
class CorruptionManifest:
    """Exact description of every injected error, sufficient to replay them."""

    gamma: float
    seed: int
    per_type_count: int
    records: list[ErrorRecord]

    def __post_init__(self):
        counts = {kind: 0 for kind in ERROR_KINDS}
        seen: set[int] = set()
        for rec in self.records:
            counts[rec.kind] += 1
            if rec.original_label.id in seen:
                raise InputError(f"label {rec.original_label.id} appears in two records")
            seen.add(rec.original_label.id)
        for kind, count in counts.items():
            if count != self.per_type_count:
                raise InputError(
                    f"{kind} count {count} != per_type_count {self.per_type_count}"
                )

    def records_of(self, kind: str) -> list[ErrorRecord]:
        if kind not in ERROR_KINDS:
            raise InputError(f"unknown error kind {kind!r}")
        return [rec for rec in self.records if rec.kind == kind]


@dataclass(frozen=True)
class ScoredBox:
    """One detector output box with first- and second-stage results."""

    image_id: int
    box: Box
    s0: float
    refined_box: Box
    class_dist: ClassDistribution
    source: str = "detector"
    label_ref: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.s0 <= 1.0:
            raise InputError(f"s0 must be in [0, 1], got {self.s0}")
        if self.source not in BOX_SOURCES:
            raise InputError(f"unknown box source {self.source!r}")
        if self.source == "injected_label":
            if self.s0 != 1.0:
                raise InputError("injected label boxes must carry s0 = 1")
            if self.label_ref is None:
                raise InputError("injected label boxes must reference their label")


@dataclass(frozen=True)
class Proposal:
    """One ranked label-error candidate."""

    image_id: int
    box: Box
    key: float
    method: str
    predicted_class: int
    components: Mapping[str, float] = field(default_factory=dict)
    source: str = "detector"
    label_ref: int | None = None

    def __post_init__(self):
        import math

        if not math.isfinite(self.key):
            raise InputError(f"proposal key must be finite, got {self.key}")


@dataclass(frozen=True)
class VerdictRecord:
    """One review decision for a proposal rank.  Append-only on disk."""

    proposal_rank: int
    verdict: str
    error_types: tuple[str, ...] = ()
    reviewer: str = ""
    timestamp: str = ""

    def __post_init__(self):
        if self.proposal_rank < 1:
            raise InputError(f"proposal_rank must be >= 1, got {self.proposal_rank}")
        if self.verdict not in VERDICT_VALUES:
            raise InputError(f"unknown verdict {self.verdict!r}")
        for t in self.error_types:
            if t not in ERROR_KINDS:
                raise InputError(f"unknown error type {t!r}")
        if self.verdict == "tp" and not self.error_types:
            raise InputError("a tp verdict must name at least one error type")


def predicted_class(dist: ClassDistribution) -> int:
    """Most likely foreground class (1-based); ties go to the lower index."""
    fg = dist.foreground
    best = 0
    for i in range(1, len(fg)):
        if fg[i] > fg[best]:
            best = i
    return best + 1


def derived_s2(scored: ScoredBox) -> float:
    """Second-stage score: the largest foreground probability."""
    return max(scored.class_dist.foreground)


def validate(dataset: Dataset) -> list[str]:
    """Return human-readable violations; an empty list means the dataset is valid.

    A label box is accepted as long as it overlaps its image region; boxes
    produced by perturbation may overhang the border.
    """
    violations: list[str] = []
    seen_images: set[int] = set()
    for im in dataset.images:
        if im.id in seen_images:
            violations.append(f"duplicate image id {im.id}")
        seen_images.add(im.id)
    num_classes = dataset.num_classes
    seen_labels: set[int] = set()
    for label in dataset.labels:
        if label.id in seen_labels:
            violations.append(f"duplicate label id {label.id}")
        seen_labels.add(label.id)
        if not 1 <= label.class_id <= num_classes:
            violations.append(
                f"label {label.id}: class_id {label.class_id} outside [1, {num_classes}]"
            )
        image = dataset.images_by_id.get(label.image_id)
        if image is None:
            violations.append(f"label {label.id}: unknown image {label.image_id}")
            continue
        if (
            label.box.x2 <= 0
            or label.box.y2 <= 0
            or label.box.x1 >= image.width
            or label.box.y1 >= image.height
        ):
            violations.append(
                f"label {label.id}: box does not overlap image {image.id}"
            )
    return violations


def validate_against(dataset: Dataset, labels: Sequence[BoxLabel]) -> None:
    """Raise unless every label exists in `dataset` with identical fields."""
    by_id = {label.id: label for label in dataset.labels}
    for label in labels:
        found = by_id.get(label.id)
        if found is None:
            raise InputError(f"label {label.id} not present in dataset")
        if found != label:
            raise InputError(f"label {label.id} differs from the dataset copy")
