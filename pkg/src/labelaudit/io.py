"""File formats: datasets, detector outputs, manifests, proposals, verdicts, reports.

All files are UTF-8.  JSON documents carry a top-level format field and
newline-delimited files carry a header line; both name the schema and an
integer version.  Loaders reject versions they do not understand.

Datasets use the common COCO layout (images / annotations / categories) with
corner-form bboxes on disk; boxes are converted to center form on load.
Category ids are mapped to contiguous class ids 1..C in category-id order.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Mapping, Sequence

from .datamodel import (
    BoxLabel,
    CorruptionManifest,
    Dataset,
    ErrorRecord,
    ImageMeta,
    Proposal,
    ScoredBox,
    VerdictRecord,
)
from .errors import InputError, SchemaError
from .geometry import Box, ClassDistribution

FORMAT_VERSION = 1
_PROB_SUM_TOL = 1e-6


def _check_version(schema: str, payload: Mapping[str, Any], path: Path) -> None:
    version = payload.get("version")
    if payload.get("schema") != schema:
        raise SchemaError(f"{path}: expected schema {schema!r}, got {payload.get('schema')!r}")
    if version != FORMAT_VERSION:
        raise SchemaError(f"{path}: unsupported {schema} version {version!r}")


def _load_json(path: Path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}") from exc


def _dump_json(path: Path, payload: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def _parse_ndjson_line(path: Path, lineno: int, line: str) -> Any:
    try:
        return json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {lineno}: parse error at column {exc.colno}") from exc


def _box_to_list(box: Box) -> list[float]:
    return [box.cx, box.cy, box.w, box.h]


def _box_from_list(values: Any, where: str) -> Box:
    if not isinstance(values, list) or len(values) != 4:
        raise SchemaError(f"{where}: box must be a list of four numbers")
    try:
        return Box(*[float(v) for v in values])
    except (TypeError, ValueError, InputError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc


# ---------------------------------------------------------------------------
# Datasets


def load_dataset(path: str | Path) -> Dataset:
    """Read a COCO-style dataset file and return a validated Dataset."""
    path = Path(path)
    payload = _load_json(path)
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: top level must be an object")
    fmt = payload.get("format")
    if fmt is not None:
        _check_version("dataset", fmt, path)
    for key in ("images", "annotations", "categories"):
        if key not in payload:
            raise SchemaError(f"{path}: missing required key {key!r}")

    categories = sorted(payload["categories"], key=lambda c: c["id"])
    class_names = [str(c["name"]) for c in categories]
    id_to_class = {c["id"]: i + 1 for i, c in enumerate(categories)}

    images = []
    for entry in payload["images"]:
        try:
            images.append(
                ImageMeta(
                    id=int(entry["id"]),
                    width=int(entry["width"]),
                    height=int(entry["height"]),
                    file_name=entry.get("file_name"),
                )
            )
        except (KeyError, TypeError, ValueError, InputError) as exc:
            raise SchemaError(f"{path}: bad image entry {entry!r}: {exc}") from exc

    labels = []
    for entry in payload["annotations"]:
        where = f"{path}: annotation {entry.get('id')!r}"
        if entry.get("category_id") not in id_to_class:
            raise SchemaError(f"{where}: unknown category_id {entry.get('category_id')!r}")
        bbox = entry.get("bbox")
        if not isinstance(bbox, list) or len(bbox) != 4:
            raise SchemaError(f"{where}: bbox must be [x_min, y_min, w, h]")
        x, y, w, h = (float(v) for v in bbox)
        try:
            labels.append(
                BoxLabel(
                    id=int(entry["id"]),
                    image_id=int(entry["image_id"]),
                    box=Box(x + w / 2, y + h / 2, w, h),
                    class_id=id_to_class[entry["category_id"]],
                )
            )
        except (KeyError, TypeError, ValueError, InputError) as exc:
            raise SchemaError(f"{where}: {exc}") from exc

    from .datamodel import validate

    dataset = Dataset(images=images, labels=labels, class_names=class_names)
    violations = validate(dataset)
    if violations:
        raise SchemaError(f"{path}: invalid dataset: " + "; ".join(violations))
    return dataset


def save_dataset(path: str | Path, dataset: Dataset) -> None:
    payload = {
        "format": {"schema": "dataset", "version": FORMAT_VERSION},
        "images": [
            {
                "id": im.id,
                "width": im.width,
                "height": im.height,
                **({"file_name": im.file_name} if im.file_name else {}),
            }
            for im in dataset.images
        ],
        "annotations": [
            {
                "id": lb.id,
                "image_id": lb.image_id,
                "bbox": [lb.box.x1, lb.box.y1, lb.box.w, lb.box.h],
                "category_id": lb.class_id,
            }
            for lb in dataset.labels
        ],
        "categories": [
            {"id": i + 1, "name": name} for i, name in enumerate(dataset.class_names)
        ],
    }
    _dump_json(Path(path), payload)


# ---------------------------------------------------------------------------
# Detector outputs


def _scored_box_to_json(sb: ScoredBox) -> dict[str, Any]:
    row: dict[str, Any] = {
        "box": _box_to_list(sb.box),
        "s0": sb.s0,
        "refined_box": _box_to_list(sb.refined_box),
        "probs": list(sb.class_dist.probs),
        "source": sb.source,
    }
    if sb.label_ref is not None:
        row["label_ref"] = sb.label_ref
    return row


def _scored_box_from_json(row: Any, image_id: int, where: str, num_classes: int | None) -> ScoredBox:
    if not isinstance(row, dict):
        raise SchemaError(f"{where}: box entry must be an object")
    probs = row.get("probs")
    if not isinstance(probs, list) or len(probs) < 2:
        raise SchemaError(f"{where}: probs must list background plus classes")
    if num_classes is not None and len(probs) != num_classes + 1:
        raise SchemaError(
            f"{where}: probs has {len(probs)} entries, expected {num_classes + 1}"
        )
    values = [float(p) for p in probs]
    if any(p < 0 for p in values):
        raise SchemaError(f"{where}: negative probability")
    total = sum(values)
    if abs(total - 1.0) > _PROB_SUM_TOL:
        raise SchemaError(f"{where}: probs sum to {total!r}")
    values = [p / total for p in values]
    try:
        return ScoredBox(
            image_id=image_id,
            box=_box_from_list(row.get("box"), where),
            s0=float(row.get("s0")),
            refined_box=_box_from_list(row.get("refined_box"), where),
            class_dist=ClassDistribution(tuple(values)),
            source=row.get("source", "detector"),
            label_ref=row.get("label_ref"),
        )
    except (TypeError, ValueError, InputError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def load_detector_output(
    path: str | Path, num_classes: int | None = None
) -> dict[int, list[ScoredBox]]:
    """Read detections.ndjson into a per-image table of ScoredBox rows.

    Probability rows are renormalized when their sum is within 1e-6 of one
    and rejected otherwise.
    """
    path = Path(path)
    out: dict[int, list[ScoredBox]] = {}
    expected = num_classes
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            row = _parse_ndjson_line(path, lineno, line)
            if lineno == 1 and isinstance(row, dict) and "schema" in row:
                _check_version("detections", row, path)
                header_classes = row.get("num_classes")
                if header_classes is not None:
                    if expected is not None and header_classes != expected:
                        raise SchemaError(
                            f"{path}: header num_classes {header_classes} != expected {expected}"
                        )
                    expected = int(header_classes)
                continue
            if not isinstance(row, dict) or "image_id" not in row:
                raise SchemaError(f"{path}: line {lineno}: expected an image record")
            image_id = int(row["image_id"])
            if image_id in out:
                raise SchemaError(f"{path}: line {lineno}: duplicate image {image_id}")
            boxes = row.get("boxes", [])
            if not isinstance(boxes, list):
                raise SchemaError(f"{path}: line {lineno}: boxes must be a list")
            parsed = []
            for j, entry in enumerate(boxes):
                where = f"{path}: line {lineno}, box {j}"
                sb = _scored_box_from_json(entry, image_id, where, expected)
                if expected is None:
                    expected = sb.class_dist.num_foreground
                parsed.append(sb)
            out[image_id] = parsed
    return out


def save_detector_output(
    path: str | Path, detections: Mapping[int, Sequence[ScoredBox]]
) -> None:
    path = Path(path)
    num_classes = None
    for boxes in detections.values():
        if boxes:
            num_classes = boxes[0].class_dist.num_foreground
            break
    with open(path, "w", encoding="utf-8") as fh:
        header: dict[str, Any] = {"schema": "detections", "version": FORMAT_VERSION}
        if num_classes is not None:
            header["num_classes"] = num_classes
        fh.write(json.dumps(header) + "\n")
        for image_id, boxes in detections.items():
            row = {
                "image_id": image_id,
                "boxes": [_scored_box_to_json(sb) for sb in boxes],
            }
            fh.write(json.dumps(row) + "\n")


# ---------------------------------------------------------------------------
# Corruption manifests


def _label_to_json(label: BoxLabel) -> dict[str, Any]:
    return {
        "id": label.id,
        "image_id": label.image_id,
        "box": _box_to_list(label.box),
        "class_id": label.class_id,
    }


def _label_from_json(row: Any, where: str) -> BoxLabel:
    if not isinstance(row, dict):
        raise SchemaError(f"{where}: label must be an object")
    try:
        return BoxLabel(
            id=int(row["id"]),
            image_id=int(row["image_id"]),
            box=_box_from_list(row.get("box"), where),
            class_id=int(row["class_id"]),
        )
    except (KeyError, TypeError, ValueError, InputError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def save_manifest(path: str | Path, manifest: CorruptionManifest) -> None:
    payload = {
        "schema": "manifest",
        "version": FORMAT_VERSION,
        "gamma": manifest.gamma,
        "seed": manifest.seed,
        "per_type_count": manifest.per_type_count,
        "records": [
            {
                "kind": rec.kind,
                "original_label": _label_to_json(rec.original_label),
                "noisy_label": None if rec.noisy_label is None else _label_to_json(rec.noisy_label),
                "anchor_image_id": rec.anchor_image_id,
                "anchor_box": _box_to_list(rec.anchor_box),
            }
            for rec in manifest.records
        ],
    }
    _dump_json(Path(path), payload)


def load_manifest(path: str | Path) -> CorruptionManifest:
    path = Path(path)
    payload = _load_json(path)
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: top level must be an object")
    _check_version("manifest", payload, path)
    records = []
    for i, row in enumerate(payload.get("records", [])):
        where = f"{path}: record {i}"
        noisy = row.get("noisy_label")
        try:
            records.append(
                ErrorRecord(
                    kind=row["kind"],
                    original_label=_label_from_json(row["original_label"], where),
                    noisy_label=None if noisy is None else _label_from_json(noisy, where),
                    anchor_image_id=int(row["anchor_image_id"]),
                    anchor_box=_box_from_list(row.get("anchor_box"), where),
                )
            )
        except (KeyError, TypeError, ValueError, InputError) as exc:
            raise SchemaError(f"{where}: {exc}") from exc
    try:
        return CorruptionManifest(
            gamma=float(payload["gamma"]),
            seed=int(payload["seed"]),
            per_type_count=int(payload["per_type_count"]),
            records=records,
        )
    except (KeyError, TypeError, ValueError, InputError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Proposals


def save_proposals(path: str | Path, proposals: Sequence[Proposal]) -> None:
    """Write proposals sorted by descending key (stable for equal keys)."""
    path = Path(path)
    ordered = sorted(range(len(proposals)), key=lambda i: (-proposals[i].key, i))
    method = proposals[0].method if proposals else None
    with open(path, "w", encoding="utf-8") as fh:
        header: dict[str, Any] = {"schema": "proposals", "version": FORMAT_VERSION}
        if method is not None:
            header["method"] = method
        fh.write(json.dumps(header) + "\n")
        for i in ordered:
            p = proposals[i]
            row: dict[str, Any] = {
                "image_id": p.image_id,
                "box": _box_to_list(p.box),
                "key": p.key,
                "method": p.method,
                "predicted_class": p.predicted_class,
                "components": dict(p.components),
                "source": p.source,
            }
            if p.label_ref is not None:
                row["label_ref"] = p.label_ref
            fh.write(json.dumps(row) + "\n")


def load_proposals(path: str | Path) -> list[Proposal]:
    """Read proposals.ndjson; keys must be monotonically non-increasing."""
    path = Path(path)
    proposals: list[Proposal] = []
    last_key: float | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            row = _parse_ndjson_line(path, lineno, line)
            if lineno == 1 and isinstance(row, dict) and "schema" in row:
                _check_version("proposals", row, path)
                continue
            where = f"{path}: line {lineno}"
            try:
                proposal = Proposal(
                    image_id=int(row["image_id"]),
                    box=_box_from_list(row.get("box"), where),
                    key=float(row["key"]),
                    method=str(row["method"]),
                    predicted_class=int(row["predicted_class"]),
                    components=dict(row.get("components", {})),
                    source=str(row.get("source", "detector")),
                    label_ref=row.get("label_ref"),
                )
            except (KeyError, TypeError, ValueError, InputError) as exc:
                raise SchemaError(f"{where}: {exc}") from exc
            if last_key is not None and proposal.key > last_key:
                raise SchemaError(
                    f"{where}: key {proposal.key} breaks descending order (previous {last_key})"
                )
            last_key = proposal.key
            proposals.append(proposal)
    return proposals


# ---------------------------------------------------------------------------
# Verdicts


def append_verdict(path: str | Path, record: VerdictRecord) -> None:
    """Append one verdict line, creating the file (with header) if needed."""
    path = Path(path)
    line = json.dumps(
        {
            "proposal_rank": record.proposal_rank,
            "verdict": record.verdict,
            "error_types": list(record.error_types),
            "reviewer": record.reviewer,
            "timestamp": record.timestamp,
        }
    )
    new_file = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8") as fh:
        if new_file:
            fh.write(json.dumps({"schema": "verdicts", "version": FORMAT_VERSION}) + "\n")
        fh.write(line + "\n")
        fh.flush()


def load_verdicts(path: str | Path) -> list[VerdictRecord]:
    """Read the full verdict log in append order."""
    path = Path(path)
    records: list[VerdictRecord] = []
    if not path.exists():
        return records
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            row = _parse_ndjson_line(path, lineno, line)
            if lineno == 1 and isinstance(row, dict) and "schema" in row:
                _check_version("verdicts", row, path)
                continue
            where = f"{path}: line {lineno}"
            try:
                records.append(
                    VerdictRecord(
                        proposal_rank=int(row["proposal_rank"]),
                        verdict=str(row["verdict"]),
                        error_types=tuple(row.get("error_types", [])),
                        reviewer=str(row.get("reviewer", "")),
                        timestamp=str(row.get("timestamp", "")),
                    )
                )
            except (KeyError, TypeError, ValueError, InputError) as exc:
                raise SchemaError(f"{where}: {exc}") from exc
    return records


def latest_verdicts(records: Sequence[VerdictRecord]) -> dict[int, VerdictRecord]:
    """Collapse an append-only log: the last verdict per rank wins."""
    latest: dict[int, VerdictRecord] = {}
    for rec in records:
        latest[rec.proposal_rank] = rec
    return latest


# ---------------------------------------------------------------------------
# Evaluation reports


def save_report(path: str | Path, report: Mapping[str, Any]) -> None:
    payload = {"schema": "report", "version": FORMAT_VERSION, **report}
    _dump_json(Path(path), payload)


def load_report(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    payload = _load_json(path)
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: top level must be an object")
    _check_version("report", payload, path)
    return payload


def write_curves_csv(path: str | Path, reports: Sequence[Mapping[str, Any]]) -> None:
    """Merge the curve points of several reports into one CSV for plotting."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "threshold", "tpr", "fpr", "precision", "recall", "f1"])
        for report in reports:
            method = report.get("method", "")
            for point in report.get("curve", []):
                writer.writerow(
                    [
                        method,
                        point["threshold"],
                        point["tpr"],
                        point["fpr"],
                        point["precision"],
                        point["recall"],
                        point["f1"],
                    ]
                )
