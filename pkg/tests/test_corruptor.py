import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelaudit.corruptor import (
    CorruptionConfig,
    apply,
    per_type_count,
    plan,
    sample_flip,
    sample_shift,
    sample_spawn,
)
from labelaudit.datamodel import BoxLabel, Dataset, ImageMeta
from labelaudit.errors import CorruptionError, InputError
from labelaudit.geometry import Box, iou
from labelaudit.rng import derive_rng

from conftest import make_grid_dataset


class TestPerTypeCount:
    def test_known_values(self):
        assert per_type_count(0.2, 1000) == 50
        assert per_type_count(0.2, 999) == 49
        assert per_type_count(0.0, 1000) == 0
        assert per_type_count(1.0, 1000) == 250

    @given(
        st.integers(min_value=0, max_value=10_000),
        st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    )
    def test_never_exceeds_quarter(self, g, gamma):
        count = per_type_count(gamma, g)
        assert 0 <= 4 * count <= g or count == 0

    def test_float_representation_does_not_undercount(self):
        # 0.1 * 1200 / 4 is 29.999... in binary; the guard must round it up.
        assert per_type_count(0.1, 1200) == 30
        assert per_type_count(0.3, 2000) == 150


class TestSamplers:
    def _label(self, **kw):
        base = dict(id=1, image_id=1, box=Box(50, 50, 20, 16), class_id=2)
        base.update(kw)
        return BoxLabel(**base)

    def test_flip_changes_class(self):
        label = self._label()
        for trial in range(200):
            flipped = sample_flip(label, 5, derive_rng(trial, "t"))
            assert flipped.class_id != label.class_id
            assert 1 <= flipped.class_id <= 5
            assert flipped.box == label.box and flipped.id == label.id

    def test_flip_uniform_over_other_classes(self):
        label = self._label(class_id=3)
        rng = derive_rng(0, "flip-hist")
        counts = {c: 0 for c in (1, 2, 4, 5)}
        n = 20_000
        for _ in range(n):
            counts[sample_flip(label, 5, rng).class_id] += 1
        for c, count in counts.items():
            assert abs(count / n - 0.25) < 0.02, (c, count)

    def test_flip_needs_two_classes(self):
        with pytest.raises(InputError):
            sample_flip(self._label(class_id=1), 1, derive_rng(0, "t"))

    def test_shift_lands_in_iou_window(self):
        cfg = CorruptionConfig(gamma=0.2, seed=0)
        label = self._label()
        for trial in range(200):
            shifted = sample_shift(label, cfg, derive_rng(trial, "s"))
            overlap = iou(label.box, shifted.box)
            assert cfg.shift_iou_low <= overlap <= cfg.shift_iou_high
            assert shifted.class_id == label.class_id
            assert shifted.box.w > 0 and shifted.box.h > 0

    def test_shift_gives_up_on_impossible_window(self):
        cfg = CorruptionConfig(
            gamma=0.2, seed=0, shift_iou_low=0.99, shift_iou_high=0.991,
            shift_std_factor=5.0, max_rejection_iters=50,
        )
        with pytest.raises(CorruptionError, match="IoU window"):
            sample_shift(self._label(), cfg, derive_rng(0, "s"))

    def test_spawn_moves_to_other_image(self):
        ds = make_grid_dataset(num_images=6, per_image=2, num_classes=3, seed=1)
        label = ds.labels[0]
        seen = set()
        for trial in range(100):
            moved = sample_spawn(label, ds, derive_rng(trial, "sp"))
            assert moved.image_id != label.image_id
            assert moved.box == label.box and moved.class_id == label.class_id
            seen.add(moved.image_id)
        assert len(seen) == 5

    def test_spawn_respects_image_bounds(self):
        images = [
            ImageMeta(id=1, width=200, height=200),
            ImageMeta(id=2, width=40, height=40),
            ImageMeta(id=3, width=200, height=200),
        ]
        label = BoxLabel(id=1, image_id=1, box=Box(100, 100, 80, 80), class_id=1)
        ds = Dataset(images=images, labels=[label], class_names=["a"])
        for trial in range(50):
            moved = sample_spawn(label, ds, derive_rng(trial, "sp"))
            assert moved.image_id == 3

    def test_spawn_needs_second_image(self):
        images = [ImageMeta(id=1, width=100, height=100)]
        label = BoxLabel(id=1, image_id=1, box=Box(50, 50, 10, 10), class_id=1)
        ds = Dataset(images=images, labels=[label], class_names=["a"])
        with pytest.raises(InputError):
            sample_spawn(label, ds, derive_rng(0, "sp"))

    def test_spawn_fails_when_nothing_fits(self):
        images = [
            ImageMeta(id=1, width=300, height=300),
            ImageMeta(id=2, width=40, height=40),
        ]
        label = BoxLabel(id=1, image_id=1, box=Box(150, 150, 100, 100), class_id=1)
        ds = Dataset(images=images, labels=[label], class_names=["a"])
        with pytest.raises(CorruptionError, match="fits"):
            sample_spawn(label, ds, derive_rng(0, "sp"), max_iters=20)


class TestPlan:
    def test_counts_and_disjoint_sets(self, small_dataset):
        cfg = CorruptionConfig(gamma=0.2, seed=3)
        manifest = plan(small_dataset, cfg)
        count = per_type_count(0.2, len(small_dataset.labels))
        assert manifest.per_type_count == count
        assert len(manifest.records) == 4 * count
        originals = [rec.original_label.id for rec in manifest.records]
        assert len(set(originals)) == len(originals)

    def test_record_grouping_and_order(self, small_dataset):
        manifest = plan(small_dataset, CorruptionConfig(gamma=0.2, seed=3))
        kinds = [rec.kind for rec in manifest.records]
        count = manifest.per_type_count
        assert kinds == ["drop"] * count + ["flip"] * count + ["shift"] * count + ["spawn"] * count
        for kind in ("drop", "flip", "shift", "spawn"):
            ids = [r.original_label.id for r in manifest.records if r.kind == kind]
            assert ids == sorted(ids)

    def test_deterministic_in_seed(self, small_dataset):
        cfg = CorruptionConfig(gamma=0.2, seed=3)
        assert plan(small_dataset, cfg).records == plan(small_dataset, cfg).records
        other = plan(small_dataset, CorruptionConfig(gamma=0.2, seed=4))
        assert other.records != plan(small_dataset, cfg).records

    def test_spawn_ids_fresh_and_sequential(self, small_dataset):
        manifest = plan(small_dataset, CorruptionConfig(gamma=0.2, seed=3))
        max_id = max(lb.id for lb in small_dataset.labels)
        spawn_ids = [r.noisy_label.id for r in manifest.records_of("spawn")]
        assert spawn_ids == list(range(max_id + 1, max_id + 1 + len(spawn_ids)))

    def test_gamma_above_one_rejected(self):
        with pytest.raises(InputError, match="gamma"):
            CorruptionConfig(gamma=1.2, seed=0)

    def test_gamma_one_touches_every_label(self):
        ds = make_grid_dataset(num_images=4, per_image=2, num_classes=3, seed=0)
        manifest = plan(ds, CorruptionConfig(gamma=1.0, seed=0))
        assert manifest.per_type_count == 2
        assert {r.original_label.id for r in manifest.records} == {lb.id for lb in ds.labels}

    def test_gamma_zero_plans_nothing(self, small_dataset):
        manifest = plan(small_dataset, CorruptionConfig(gamma=0.0, seed=3))
        assert manifest.records == []


class TestApply:
    def test_label_count_preserved(self, small_dataset):
        manifest = plan(small_dataset, CorruptionConfig(gamma=0.2, seed=3))
        noisy = apply(small_dataset, manifest)
        assert len(noisy.labels) == len(small_dataset.labels)

    def test_membership_per_kind(self, small_dataset):
        manifest = plan(small_dataset, CorruptionConfig(gamma=0.2, seed=3))
        noisy = apply(small_dataset, manifest)
        by_id = {lb.id: lb for lb in noisy.labels}
        for rec in manifest.records:
            if rec.kind == "drop":
                assert rec.original_label.id not in by_id
            elif rec.kind == "spawn":
                assert by_id[rec.original_label.id] == rec.original_label
                assert by_id[rec.noisy_label.id] == rec.noisy_label
            else:
                assert by_id[rec.original_label.id] == rec.noisy_label

    def test_untouched_labels_identical(self, small_dataset):
        manifest = plan(small_dataset, CorruptionConfig(gamma=0.2, seed=3))
        noisy = apply(small_dataset, manifest)
        touched = {rec.original_label.id for rec in manifest.records}
        spawned = {rec.noisy_label.id for rec in manifest.records_of("spawn")}
        originals = {lb.id: lb for lb in small_dataset.labels}
        for lb in noisy.labels:
            if lb.id not in touched and lb.id not in spawned:
                assert lb == originals[lb.id]

    def test_apply_is_idempotent_replay(self, small_dataset):
        manifest = plan(small_dataset, CorruptionConfig(gamma=0.2, seed=3))
        assert apply(small_dataset, manifest) == apply(small_dataset, manifest)

    def test_apply_rejects_foreign_manifest(self, small_dataset):
        manifest = plan(small_dataset, CorruptionConfig(gamma=0.2, seed=3))
        other = make_grid_dataset(num_images=40, per_image=5, num_classes=5, seed=99)
        with pytest.raises(InputError):
            apply(other, manifest)

    def test_noisy_dataset_still_valid(self, small_dataset):
        from labelaudit.datamodel import validate

        manifest = plan(small_dataset, CorruptionConfig(gamma=0.2, seed=3))
        assert validate(apply(small_dataset, manifest)) == []


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_plan_apply_invariants_across_seeds(seed):
    ds = make_grid_dataset(num_images=12, per_image=5, num_classes=4, seed=5)
    cfg = CorruptionConfig(gamma=0.2, seed=seed)
    manifest = plan(ds, cfg)
    noisy = apply(ds, manifest)
    assert len(noisy.labels) == len(ds.labels)
    for rec in manifest.records_of("shift"):
        assert 0.4 <= iou(rec.original_label.box, rec.noisy_label.box) <= 0.7
    for rec in manifest.records_of("flip"):
        assert rec.noisy_label.class_id != rec.original_label.class_id
    for rec in manifest.records_of("spawn"):
        assert rec.noisy_label.image_id != rec.original_label.image_id
