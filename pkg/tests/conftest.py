"""Shared fixtures: synthetic datasets with controlled geometry.

The grid generator keeps all labels of an image pairwise disjoint with a
guaranteed gap, so overlap-based matching in the tests is unambiguous:
nothing matches an anchor by coincidence of placement.
"""

from __future__ import annotations

import pytest

from labelaudit.datamodel import BoxLabel, Dataset, ImageMeta
from labelaudit.geometry import Box, iou
from labelaudit.rng import derive_rng

IMAGE_W = 640
IMAGE_H = 480
_COLS = 5
_ROWS = 4
_MARGIN = 4.0


def make_grid_dataset(
    num_images: int,
    per_image: int,
    num_classes: int,
    seed: int,
    jitter: bool = True,
    image_w: int = IMAGE_W,
    image_h: int = IMAGE_H,
    box_frac: tuple[float, float] = (0.45, 0.95),
) -> Dataset:
    """Synthetic dataset with up to 20 disjoint objects per image.

    Each object occupies one cell of a 5x4 grid with at least a small gap
    to its neighbors, mimicking rendered-character benchmarks where objects
    rarely overlap.  `box_frac` sets object size as a fraction of the cell;
    small fractions give sparse scenes where random box placement almost
    never lands near an object.
    """
    if not 1 <= per_image <= _COLS * _ROWS:
        raise ValueError(f"per_image must be in [1, {_COLS * _ROWS}]")
    cell_w = image_w // _COLS
    cell_h = image_h // _ROWS
    rng = derive_rng(seed, "grid-fixture")
    images, labels = [], []
    names = [f"class_{i}" for i in range(1, num_classes + 1)]
    lid = 1
    for img_id in range(1, num_images + 1):
        images.append(
            ImageMeta(id=img_id, width=image_w, height=image_h, file_name=f"img_{img_id:05d}.png")
        )
        cells = rng.permutation(_COLS * _ROWS)[:per_image]
        for cell in sorted(int(c) for c in cells):
            col, row = cell % _COLS, cell // _COLS
            max_w = cell_w - 2 * _MARGIN
            max_h = cell_h - 2 * _MARGIN
            w = float(rng.uniform(*box_frac) * max_w)
            h = float(rng.uniform(*box_frac) * max_h)
            cx = col * cell_w + cell_w / 2
            cy = row * cell_h + cell_h / 2
            if jitter:
                cx += float(rng.uniform(-1, 1)) * (max_w - w) / 2
                cy += float(rng.uniform(-1, 1)) * (max_h - h) / 2
            labels.append(
                BoxLabel(
                    id=lid,
                    image_id=img_id,
                    box=Box(cx, cy, w, h),
                    class_id=int(rng.integers(1, num_classes + 1)),
                )
            )
            lid += 1
    return Dataset(images=images, labels=labels, class_names=names)


def assert_disjoint(dataset: Dataset):
    for image_labels in dataset.labels_by_image.values():
        for i, a in enumerate(image_labels):
            for b in image_labels[i + 1 :]:
                assert iou(a.box, b.box) == 0.0


@pytest.fixture(scope="session")
def small_dataset() -> Dataset:
    return make_grid_dataset(num_images=40, per_image=5, num_classes=5, seed=7)


@pytest.fixture(scope="session")
def medium_dataset() -> Dataset:
    return make_grid_dataset(num_images=200, per_image=10, num_classes=8, seed=42)
