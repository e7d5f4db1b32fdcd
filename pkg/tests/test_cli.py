import json

import pytest

from labelaudit import io
from labelaudit.cli import main

from conftest import make_grid_dataset


@pytest.fixture
def workdir(tmp_path):
    ds = make_grid_dataset(num_images=30, per_image=5, num_classes=5, seed=7)
    dataset_path = tmp_path / "clean.json"
    io.save_dataset(dataset_path, ds)
    return tmp_path, dataset_path


def _run(argv):
    return main([str(a) for a in argv])


def _corrupt(tmp_path, dataset_path, gamma="0.2", seed="3"):
    noisy_path = tmp_path / "noisy.json"
    manifest_path = tmp_path / "manifest.json"
    code = _run(
        [
            "corrupt",
            "--dataset", dataset_path,
            "--gamma", gamma,
            "--seed", seed,
            "--out-noisy", noisy_path,
            "--out-manifest", manifest_path,
        ]
    )
    assert code == 0
    return noisy_path, manifest_path


def _simulate(tmp_path, dataset_path, noisy_path, seed="11"):
    det_path = tmp_path / "detections.ndjson"
    code = _run(
        [
            "simulate",
            "--dataset", dataset_path,
            "--seed", seed,
            "--noisy", noisy_path,
            "--out", det_path,
        ]
    )
    assert code == 0
    return det_path


class TestCorrupt:
    def test_writes_noisy_and_manifest(self, workdir, capsys):
        tmp_path, dataset_path = workdir
        noisy_path, manifest_path = _corrupt(tmp_path, dataset_path)
        noisy = io.load_dataset(noisy_path)
        manifest = io.load_manifest(manifest_path)
        clean = io.load_dataset(dataset_path)
        assert len(noisy.labels) == len(clean.labels)
        assert manifest.per_type_count == len(clean.labels) // 20
        summary = capsys.readouterr().out
        assert "per type" in summary and str(manifest.per_type_count) in summary

    def test_missing_flag_is_usage_error(self, workdir, capsys):
        tmp_path, dataset_path = workdir
        code = _run(["corrupt", "--dataset", dataset_path, "--gamma", "0.2"])
        assert code == 1

    def test_bad_gamma_is_data_error(self, workdir, capsys):
        tmp_path, dataset_path = workdir
        code = _run(
            [
                "corrupt",
                "--dataset", dataset_path,
                "--gamma", "1.5",
                "--out-noisy", tmp_path / "n.json",
                "--out-manifest", tmp_path / "m.json",
            ]
        )
        assert code == 2
        assert "gamma" in capsys.readouterr().err

    def test_missing_file_is_data_error(self, tmp_path, capsys):
        code = _run(
            [
                "corrupt",
                "--dataset", tmp_path / "absent.json",
                "--gamma", "0.2",
                "--out-noisy", tmp_path / "n.json",
                "--out-manifest", tmp_path / "m.json",
            ]
        )
        assert code == 2


class TestSimulate:
    def test_plain_run(self, workdir):
        tmp_path, dataset_path = workdir
        det_path = tmp_path / "det.ndjson"
        code = _run(["simulate", "--dataset", dataset_path, "--out", det_path])
        assert code == 0
        detections = io.load_detector_output(det_path)
        clean = io.load_dataset(dataset_path)
        assert set(detections) == {im.id for im in clean.images}
        assert all(
            sb.source == "detector" for boxes in detections.values() for sb in boxes
        )

    def test_noisy_adds_injected_rows(self, workdir):
        tmp_path, dataset_path = workdir
        noisy_path, _ = _corrupt(tmp_path, dataset_path)
        det_path = _simulate(tmp_path, dataset_path, noisy_path)
        detections = io.load_detector_output(det_path)
        noisy = io.load_dataset(noisy_path)
        injected = [
            sb for boxes in detections.values() for sb in boxes if sb.source == "injected_label"
        ]
        assert {sb.label_ref for sb in injected} == {lb.id for lb in noisy.labels}

    def test_config_file_with_seed_override(self, workdir):
        tmp_path, dataset_path = workdir
        cfg_path = tmp_path / "sim.json"
        cfg_path.write_text(json.dumps({"seed": 1, "clutter_per_image": 0.0, "miss_rate": 0.0}))
        out_a = tmp_path / "a.ndjson"
        out_b = tmp_path / "b.ndjson"
        assert _run(["simulate", "--dataset", dataset_path, "--config", cfg_path, "--out", out_a]) == 0
        assert (
            _run(
                [
                    "simulate",
                    "--dataset", dataset_path,
                    "--config", cfg_path,
                    "--seed", "99",
                    "--out", out_b,
                ]
            )
            == 0
        )
        assert io.load_detector_output(out_a) != io.load_detector_output(out_b)
        clean = io.load_dataset(dataset_path)
        n_rows = sum(len(v) for v in io.load_detector_output(out_a).values())
        assert n_rows == len(clean.labels)  # no clutter, no misses

    def test_unknown_config_key_rejected(self, workdir, capsys):
        tmp_path, dataset_path = workdir
        cfg_path = tmp_path / "sim.json"
        cfg_path.write_text(json.dumps({"velocity": 3}))
        code = _run(["simulate", "--dataset", dataset_path, "--config", cfg_path, "--out", tmp_path / "x.ndjson"])
        assert code == 2


class TestScoreAndEvaluate:
    @pytest.fixture
    def prepared(self, workdir):
        tmp_path, dataset_path = workdir
        noisy_path, manifest_path = _corrupt(tmp_path, dataset_path)
        det_path = _simulate(tmp_path, dataset_path, noisy_path)
        return tmp_path, noisy_path, manifest_path, det_path

    def test_each_method_produces_sorted_proposals(self, prepared):
        tmp_path, noisy_path, manifest_path, det_path = prepared
        for method in ("loss", "score", "entropy", "pd"):
            out = tmp_path / f"props_{method}.ndjson"
            code = _run(
                [
                    "score",
                    "--method", method,
                    "--noisy", noisy_path,
                    "--detections", det_path,
                    "--out", out,
                ]
            )
            assert code == 0, method
            proposals = io.load_proposals(out)
            assert proposals, method
            assert all(p.method == method for p in proposals)

    def test_naive_prints_cost(self, prepared, capsys):
        tmp_path, noisy_path, manifest_path, det_path = prepared
        out = tmp_path / "props_naive.ndjson"
        code = _run(
            [
                "score",
                "--method", "naive",
                "--noisy", noisy_path,
                "--manifest", manifest_path,
                "--seed", "5",
                "--out", out,
            ]
        )
        assert code == 0
        noisy = io.load_dataset(noisy_path)
        expected_cost = int((1 + 0.2 / 4) * len(noisy.labels))
        assert str(expected_cost) in capsys.readouterr().out
        assert io.load_proposals(out)

    def test_score_without_detections_fails(self, prepared, capsys):
        tmp_path, noisy_path, manifest_path, det_path = prepared
        code = _run(
            [
                "score",
                "--method", "loss",
                "--noisy", noisy_path,
                "--out", tmp_path / "x.ndjson",
            ]
        )
        assert code == 2

    def test_evaluate_writes_report(self, prepared, capsys):
        tmp_path, noisy_path, manifest_path, det_path = prepared
        props = tmp_path / "props.ndjson"
        assert (
            _run(
                [
                    "score",
                    "--method", "loss",
                    "--noisy", noisy_path,
                    "--detections", det_path,
                    "--out", props,
                ]
            )
            == 0
        )
        report_path = tmp_path / "report.json"
        code = _run(
            [
                "evaluate",
                "--proposals", props,
                "--manifest", manifest_path,
                "--noisy", noisy_path,
                "--out", report_path,
            ]
        )
        assert code == 0
        report = io.load_report(report_path)
        assert report["method"] == "loss"
        assert report["auroc"] is not None
        assert "auroc" in capsys.readouterr().out
        assert set(report["per_type"]) == {"drop", "flip", "shift", "spawn"}

    def test_report_merges_curves(self, prepared):
        tmp_path, noisy_path, manifest_path, det_path = prepared
        report_paths = []
        for method in ("loss", "score"):
            props = tmp_path / f"p_{method}.ndjson"
            _run(
                [
                    "score",
                    "--method", method,
                    "--noisy", noisy_path,
                    "--detections", det_path,
                    "--out", props,
                ]
            )
            rp = tmp_path / f"r_{method}.json"
            assert (
                _run(
                    [
                        "evaluate",
                        "--proposals", props,
                        "--manifest", manifest_path,
                        "--noisy", noisy_path,
                        "--out", rp,
                    ]
                )
                == 0
            )
            report_paths.append(rp)
        csv_path = tmp_path / "curves.csv"
        assert _run(["report", "--inputs", *report_paths, "--out", csv_path]) == 0
        lines = csv_path.read_text().splitlines()
        methods = {line.split(",")[0] for line in lines[1:]}
        assert methods == {"loss", "score"}


class TestTheory:
    def test_single_model_run(self, tmp_path, capsys):
        out = tmp_path / "theory.json"
        code = _run(
            [
                "theory",
                "--classes", "10",
                "--flip-rate", "0.2",
                "--slack", "0.1",
                "--kl-budget", "0.001",
                "--samples", "2000",
                "--seed", "0",
                "--out", out,
            ]
        )
        assert code == 0
        assert "PASS" in capsys.readouterr().out
        payload = json.loads(out.read_text())
        assert payload["schema"] == "theory_report"
        assert len(payload["results"]) == 1
        result = payload["results"][0]
        assert result["ran"] is True
        assert result["violation_rate_correct"] <= result["bound"]

    def test_grid_includes_skips(self, tmp_path, capsys):
        grid = [
            {"num_classes": 10, "flip_rate": 0.2, "slack": 0.1, "kl_budget": 0.0},
            {"num_classes": 2, "flip_rate": 0.45, "slack": 0.1, "kl_budget": 0.0},
        ]
        grid_path = tmp_path / "grid.json"
        grid_path.write_text(json.dumps(grid))
        code = _run(["theory", "--grid", grid_path, "--samples", "500"])
        assert code == 0
        output = capsys.readouterr().out
        assert "PASS" in output and "SKIP" in output


class TestUsageErrors:
    def test_no_command(self, capsys):
        assert main([]) == 1

    def test_unknown_command(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_unknown_flag(self, capsys):
        assert main(["theory", "--wat", "1"]) == 1
