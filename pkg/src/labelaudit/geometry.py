"""Box geometry, loss primitives, and key-generic non-maximum suppression."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError

# Clamp bound for every probability entering a log.
PROB_EPS = 1e-7


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in center/extent form (pixel units)."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.cx, self.cy, self.w, self.h)):
            raise InputError(f"box fields must be finite, got {self!r}")
        if self.w <= 0 or self.h <= 0:
            raise InputError(f"box extent must be positive, got {self!r}")

    @property
    def x1(self) -> float:
        return self.cx - self.w / 2

    @property
    def y1(self) -> float:
        return self.cy - self.h / 2

    @property
    def x2(self) -> float:
        return self.cx + self.w / 2

    @property
    def y2(self) -> float:
        return self.cy + self.h / 2

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) corner form."""
        return (self.x1, self.y1, self.x2, self.y2)

    @staticmethod
    def from_corners(x1: float, y1: float, x2: float, y2: float) -> "Box":
        return Box((x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1)


@dataclass(frozen=True)
class DeltaVector:
    """Normalized box offsets (dx, dy, dw, dh) between a proposal and a target."""

    dx: float
    dy: float
    dw: float
    dh: float

    def components(self) -> tuple[float, float, float, float]:
        return (self.dx, self.dy, self.dw, self.dh)


@dataclass(frozen=True)
class ClassDistribution:
    """Probabilities over background (index 0) and C foreground classes."""

    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.probs) < 2:
            raise InputError("class distribution needs background plus >= 1 class")
        if any(p < -1e-12 or p > 1 + 1e-12 for p in self.probs):
            raise InputError(f"probabilities outside [0, 1]: {self.probs}")
        total = sum(self.probs)
        if abs(total - 1.0) > 1e-9:
            raise InputError(f"probabilities sum to {total!r}, expected 1")

    @property
    def num_foreground(self) -> int:
        return len(self.probs) - 1

    @property
    def background(self) -> float:
        return self.probs[0]

    @property
    def foreground(self) -> tuple[float, ...]:
        return self.probs[1:]


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes.  Always in [0, 1]."""
    ix = min(a.cx + a.w / 2, b.cx + b.w / 2) - max(a.cx - a.w / 2, b.cx - b.w / 2)
    if ix <= 0:
        return 0.0
    iy = min(a.cy + a.h / 2, b.cy + b.h / 2) - max(a.cy - a.h / 2, b.cy - b.h / 2)
    if iy <= 0:
        return 0.0
    inter = ix * iy
    # corner arithmetic can overshoot by an ulp; keep the ratio in range
    return min(1.0, inter / (a.w * a.h + b.w * b.h - inter))


def nms(
    boxes: Sequence[Box],
    keys: Sequence[float],
    iou_threshold: float,
    exempt: Iterable[int] = (),
) -> list[int]:
    """Greedy non-maximum suppression under an arbitrary ranking key.

    Boxes are visited in descending key order (ties broken by lower index).
    Exempt indices are kept unconditionally and count as suppressors from the
    start; any other box whose IoU with a kept box reaches `iou_threshold`
    is discarded.  Returns kept indices in descending key order.
    """
    if len(boxes) != len(keys):
        raise InputError(f"{len(boxes)} boxes vs {len(keys)} keys")
    if not 0 < iou_threshold <= 1:
        raise InputError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    n = len(boxes)
    exempt_set = set(exempt)
    for i in exempt_set:
        if not 0 <= i < n:
            raise InputError(f"exempt index {i} out of range")
    if n == 0:
        return []

    x1 = np.array([b.cx - b.w / 2 for b in boxes])
    y1 = np.array([b.cy - b.h / 2 for b in boxes])
    x2 = np.array([b.cx + b.w / 2 for b in boxes])
    y2 = np.array([b.cy + b.h / 2 for b in boxes])
    area = (x2 - x1) * (y2 - y1)

    order = sorted(range(n), key=lambda i: (-keys[i], i))
    kept = sorted(exempt_set)
    for i in order:
        if i in exempt_set:
            continue
        if kept:
            ix = np.minimum(x2[kept], x2[i]) - np.maximum(x1[kept], x1[i])
            iy = np.minimum(y2[kept], y2[i]) - np.maximum(y1[kept], y1[i])
            inter = np.clip(ix, 0, None) * np.clip(iy, 0, None)
            overlap = inter / (area[kept] + area[i] - inter)
            if overlap.max() >= iou_threshold:
                continue
        kept.append(i)
    return sorted(kept, key=lambda i: (-keys[i], i))


def encode_deltas(proposal: Box, target: Box) -> DeltaVector:
    """Offsets that map `proposal` onto `target`, normalized by proposal size."""
    return DeltaVector(
        dx=(target.cx - proposal.cx) / proposal.w,
        dy=(target.cy - proposal.cy) / proposal.h,
        dw=math.log(target.w / proposal.w),
        dh=math.log(target.h / proposal.h),
    )


def decode_deltas(proposal: Box, deltas: DeltaVector) -> Box:
    """Inverse of encode_deltas: apply offsets to a proposal box."""
    return Box(
        cx=proposal.cx + deltas.dx * proposal.w,
        cy=proposal.cy + deltas.dy * proposal.h,
        w=proposal.w * math.exp(deltas.dw),
        h=proposal.h * math.exp(deltas.dh),
    )


def smooth_l1(deltas: DeltaVector, beta: float = 1.0) -> float:
    """Summed smooth-L1 over the four delta components.

    Quadratic below `beta`, linear above, continuous at the joint.
    """
    if beta <= 0:
        raise InputError(f"beta must be positive, got {beta}")
    total = 0.0
    for t in deltas.components():
        a = abs(t)
        if a < beta:
            total += 0.5 * a * a / beta
        else:
            total += a - 0.5 * beta
    return total


def _clamp_prob(p: float) -> float:
    return min(max(p, PROB_EPS), 1.0 - PROB_EPS)


def bce(p: float, target: int) -> float:
    """Binary cross-entropy of predicted probability `p` against target 0 or 1."""
    if target not in (0, 1):
        raise InputError(f"bce target must be 0 or 1, got {target}")
    if not 0.0 <= p <= 1.0:
        raise InputError(f"probability must be in [0, 1], got {p}")
    p = _clamp_prob(p)
    return -math.log(p) if target == 1 else -math.log(1.0 - p)


def cross_entropy(dist: ClassDistribution, target_class: int) -> float:
    """Cross-entropy against a one-hot target; class 0 is background."""
    if not 0 <= target_class < len(dist.probs):
        raise InputError(
            f"target class {target_class} outside [0, {len(dist.probs) - 1}]"
        )
    return -math.log(_clamp_prob(dist.probs[target_class]))


def entropy(dist: ClassDistribution) -> float:
    """Shannon entropy in nats; zero-probability terms contribute zero."""
    return -sum(p * math.log(p) for p in dist.probs if p > 0)


def binary_entropy(p: float) -> float:
    """Entropy of a Bernoulli(p) variable in nats."""
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log(p) - (1 - p) * math.log(1 - p)
