"""Command-line entry points for the corruption, ranking, and review tools.

Exit codes: 0 on success, 1 on usage errors, 2 when input data violates a
contract (bad schema, impossible configuration, failed sampling).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import io
from .corruptor import CorruptionConfig, apply, plan
from .detector_sim import SimulatorConfig, export_detections
from .errors import LabelAuditError, SchemaError
from .evaluation import evaluate_method
from .scoring import METHODS, PipelineConfig, run_method, run_naive
from .separation import FlipNoiseModel, separation_experiment


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the data-error code is 2
    # here, so usage errors move to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_config(path: str | None, cls):
    if path is None:
        return cls()
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: config must be a JSON object")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def cmd_corrupt(args) -> int:
    dataset = io.load_dataset(args.dataset)
    cfg = CorruptionConfig(gamma=args.gamma, seed=args.seed)
    manifest = plan(dataset, cfg)
    noisy = apply(dataset, manifest)
    io.save_dataset(args.out_noisy, noisy)
    io.save_manifest(args.out_manifest, manifest)
    print(
        f"corrupted {len(dataset.labels)} labels: "
        f"{manifest.per_type_count} per type ({len(manifest.records)} records), "
        f"noisy labels {len(noisy.labels)}"
    )
    return 0


def cmd_simulate(args) -> int:
    clean = io.load_dataset(args.dataset)
    cfg = _load_config(args.config, SimulatorConfig)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    noisy = io.load_dataset(args.noisy) if args.noisy else None
    detections = export_detections(clean, cfg, noisy)
    io.save_detector_output(args.out, detections)
    total = sum(len(v) for v in detections.values())
    print(f"simulated {total} boxes over {len(detections)} images -> {args.out}")
    return 0


def cmd_score(args) -> int:
    noisy = io.load_dataset(args.noisy)
    if args.method == "naive":
        if not args.manifest:
            raise LabelAuditError("the naive baseline needs --manifest")
        manifest = io.load_manifest(args.manifest)
        cost, proposals = run_naive(noisy, manifest, args.seed)
        io.save_proposals(args.out, proposals)
        print(f"naive review cost {cost}; wrote {len(proposals)} proposals -> {args.out}")
        return 0
    if not args.detections:
        raise LabelAuditError(f"method {args.method!r} needs --detections")
    detections = io.load_detector_output(args.detections)
    cfg = PipelineConfig(s_epsilon=args.s_epsilon, tau=args.tau)
    proposals = run_method(args.method, noisy, detections, cfg)
    io.save_proposals(args.out, proposals)
    print(f"wrote {len(proposals)} {args.method} proposals -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    proposals = io.load_proposals(args.proposals)
    manifest = io.load_manifest(args.manifest)
    noisy = io.load_dataset(args.noisy)
    report = evaluate_method(proposals, manifest, noisy, args.alpha)
    io.save_report(args.out, report)
    auroc = report["auroc"]
    per_type = {
        kind: (None if entry is None else round(entry["auroc"], 4))
        for kind, entry in report["per_type"].items()
    }
    print(
        f"{report['method']}: auroc="
        f"{'n/a' if auroc is None else round(auroc, 4)} "
        f"max_f1={round(report['max_f1'], 4)} per_type={per_type}"
    )
    return 0


def _theory_models(args) -> list[FlipNoiseModel]:
    if args.grid:
        with open(args.grid, "r", encoding="utf-8") as f:
            try:
                rows = json.load(f)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{args.grid}: invalid JSON ({exc})") from exc
        if not isinstance(rows, list):
            raise SchemaError(f"{args.grid}: grid must be a JSON array of model objects")
        return [FlipNoiseModel(**row) for row in rows]
    return [
        FlipNoiseModel(
            num_classes=args.classes,
            flip_rate=args.flip_rate,
            slack=args.slack,
            kl_budget=args.kl_budget,
        )
    ]


def cmd_theory(args) -> int:
    results = []
    lines = []
    for model in _theory_models(args):
        report = separation_experiment(model, args.samples, args.seed)
        results.append(report.to_dict())
        tag = f"C={model.num_classes} flip={model.flip_rate} slack={model.slack} budget={model.kl_budget}"
        if not report.ran:
            lines.append(f"SKIP  {tag}  thresholds not separated")
            continue
        ok = (
            report.violation_rate_correct <= report.bound
            and report.violation_rate_incorrect <= report.bound
        )
        lines.append(
            f"{'PASS' if ok else 'FAIL'}  {tag}  "
            f"lower={report.thresholds.lower:.6f} upper={report.thresholds.upper:.6f} "
            f"rates=({report.violation_rate_correct:.5f}, "
            f"{report.violation_rate_incorrect:.5f}) bound={report.bound:.5f}"
        )
    if args.out:
        payload = {"schema": "theory_report", "version": io.FORMAT_VERSION, "results": results}
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
    print("\n".join(lines))
    return 0


def cmd_report(args) -> int:
    reports = [io.load_report(path) for path in args.inputs]
    io.write_curves_csv(args.out, reports)
    print(f"wrote operating-point curves for {len(reports)} methods -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    # Imported lazily: the web stack is only needed by this subcommand.
    import uvicorn

    from .service import ReviewSession, create_app

    session = ReviewSession(
        session_id=args.session_id,
        dataset_path=args.dataset,
        proposals_path=args.proposals,
        verdicts_path=args.verdicts,
        image_root=args.image_root,
        k=args.k,
        require_no_label_overlap=args.require_no_label_overlap,
        alpha=args.alpha,
        ui_dir=args.ui_dir,
    )
    app = create_app(session)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="labelaudit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("corrupt", help="inject label errors into a dataset")
    p.add_argument("--dataset", required=True, help="clean dataset JSON")
    p.add_argument("--gamma", type=float, required=True, help="total error rate; gamma/4 per type")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-noisy", required=True, help="corrupted dataset JSON to write")
    p.add_argument("--out-manifest", required=True, help="corruption manifest JSON to write")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("simulate", help="run the detector simulator over a dataset")
    p.add_argument("--dataset", required=True, help="clean dataset JSON (drives the simulated detector)")
    p.add_argument("--config", help="simulator config JSON (defaults when omitted)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--noisy", help="noisy dataset JSON; adds one injected row per noisy label")
    p.add_argument("--out", required=True, help="detections NDJSON to write")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("score", help="rank label-error proposals")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--noisy", required=True, help="noisy dataset JSON")
    p.add_argument("--detections", help="detections NDJSON (all methods except naive)")
    p.add_argument("--manifest", help="corruption manifest JSON (naive only)")
    p.add_argument("--seed", type=int, default=0, help="naive ranking seed")
    p.add_argument("--s-epsilon", type=float, default=0.25, help="first-stage score floor")
    p.add_argument("--tau", type=float, default=0.0, help="final score floor for score/entropy")
    p.add_argument("--out", required=True, help="proposals NDJSON to write")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="score a proposal ranking against a manifest")
    p.add_argument("--proposals", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--noisy", required=True, help="noisy dataset JSON (per-type candidate pools)")
    p.add_argument("--alpha", type=float, default=0.3, help="match overlap threshold")
    p.add_argument("--out", required=True, help="report JSON to write")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("theory", help="check loss-separation thresholds numerically")
    p.add_argument("--grid", help="JSON array of flip-noise model objects")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--flip-rate", type=float, default=0.2)
    p.add_argument("--slack", type=float, default=0.1)
    p.add_argument("--kl-budget", type=float, default=1e-4)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="theory report JSON to write")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("report", help="merge evaluation reports into a curves CSV")
    p.add_argument("--inputs", nargs="+", required=True, help="report JSON files")
    p.add_argument("--out", required=True, help="curves CSV to write")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="host the review service")
    p.add_argument("--dataset", required=True, help="noisy dataset JSON")
    p.add_argument("--proposals", required=True, help="ranked proposals NDJSON")
    p.add_argument("--verdicts", required=True, help="verdict log NDJSON (appended to)")
    p.add_argument("--image-root", help="directory with image files")
    p.add_argument("--k", type=int, default=200, help="review depth")
    p.add_argument("--session-id", default="review")
    p.add_argument("--require-no-label-overlap", action="store_true",
                   help="drop proposals overlapping any noisy label at --alpha or more")
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--ui-dir", help="UI bundle directory (index.html + assets)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits directly on usage errors and --help; surface the
        # code as a return value so callers of main() never see SystemExit.
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (LabelAuditError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
