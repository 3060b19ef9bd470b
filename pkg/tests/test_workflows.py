import json

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image as PilImage

from faceauth import workflows
from faceauth.classifier import TrainConfig
from faceauth.cli import main as cli_main
from faceauth.detector import SyntheticStageBackend
from faceauth.evaluation import SplitConfig
from faceauth.workflows import (
    STATUS_DECODE_ERROR,
    STATUS_NO_FACE,
    STATUS_OK,
    EmptyDataset,
    ingest,
    load_archive,
    run_bias_audit,
    run_experiment,
)
from conftest import make_identity_faces, write_crop_archive
from stubs import ZeroBackend

QUICK_TRAIN = TrainConfig(max_epochs=200, tolerance=1e-4)


def write_identity_folders(root, n_identities, n_per, rng, size=160):
    for k in range(n_identities):
        base = rng.integers(0, 256, size=(size, size, 3)).astype(np.int64)
        folder = root / f"person{k:02d}"
        folder.mkdir(parents=True)
        for i in range(n_per):
            noise = rng.integers(-10, 11, size=(size, size, 3))
            img = np.clip(base + noise, 0, 255).astype(np.uint8)
            PilImage.fromarray(img, "RGB").save(folder / f"{i:02d}.png")


class TestIngest:
    def test_crops_all_images(self, tmp_path):
        rng = np.random.default_rng(0)
        raw = tmp_path / "raw"
        write_identity_folders(raw, 3, 4, rng)
        manifest = ingest(raw, SyntheticStageBackend(), output_dir=tmp_path / "out")
        assert len(manifest.entries) == 12
        assert manifest.status_counts == {STATUS_OK: 12}
        assert manifest.crop_count == 12 and manifest.skip_count == 0
        faces, labels = load_archive(tmp_path / "out")
        assert len(faces) == 12
        assert all(f.shape == (160, 160, 3) for f in faces)
        assert sorted(set(labels)) == [f"person{k:02d}" for k in range(3)]

    def test_undetectable_image_recorded(self, tmp_path):
        rng = np.random.default_rng(1)
        raw = tmp_path / "raw"
        write_identity_folders(raw, 1, 1, rng)
        manifest = ingest(raw, ZeroBackend(), output_dir=tmp_path / "out")
        assert manifest.status_counts == {STATUS_NO_FACE: 1}
        assert not any((tmp_path / "out" / "crops").rglob("*.png"))

    def test_decode_error_recorded(self, tmp_path):
        raw = tmp_path / "raw"
        folder = raw / "someone"
        folder.mkdir(parents=True)
        (folder / "broken.png").write_bytes(b"this is not a png")
        manifest = ingest(raw, SyntheticStageBackend(), output_dir=tmp_path / "out")
        assert manifest.status_counts == {STATUS_DECODE_ERROR: 1}

    def test_crop_plus_skip_equals_input(self, tmp_path):
        rng = np.random.default_rng(2)
        raw = tmp_path / "raw"
        write_identity_folders(raw, 2, 3, rng)
        (raw / "person00" / "junk.png").write_bytes(b"junk")
        manifest = ingest(raw, SyntheticStageBackend(), output_dir=tmp_path / "out")
        assert manifest.crop_count + manifest.skip_count == len(manifest.entries) == 7

    def test_rerun_is_idempotent(self, tmp_path):
        rng = np.random.default_rng(3)
        raw = tmp_path / "raw"
        write_identity_folders(raw, 2, 2, rng)
        out = tmp_path / "out"
        ingest(raw, SyntheticStageBackend(), output_dir=out)
        first = {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
        ingest(raw, SyntheticStageBackend(), output_dir=out)
        second = {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
        assert first == second

    def test_empty_root_rejected(self, tmp_path):
        raw = tmp_path / "raw"
        raw.mkdir()
        with pytest.raises(EmptyDataset):
            ingest(raw, SyntheticStageBackend(), output_dir=tmp_path / "out")


@pytest.fixture(scope="module")
def archive(tmp_path_factory):
    rng = np.random.default_rng(4)
    root = tmp_path_factory.mktemp("archive")
    faces, labels = make_identity_faces(3, 7, rng)
    write_crop_archive(root, faces, labels)
    return root


class TestRunExperiment:
    def test_separable_archive_perfect_accuracy(self, archive, tmp_path, mock_embedder):
        result = run_experiment(
            archive, mock_embedder, SplitConfig(folds=3, seed=0), QUICK_TRAIN,
            output_dir=tmp_path / "exp",
        )
        assert result.report.accuracy == 1.0

    def test_output_files_present(self, archive, tmp_path, mock_embedder):
        out = tmp_path / "exp"
        run_experiment(archive, mock_embedder, SplitConfig(folds=3, seed=0),
                       QUICK_TRAIN, output_dir=out)
        for name in ("metrics.txt", "metrics.json", "confusion.csv", "cv.json"):
            assert (out / name).exists()
        cv = json.loads((out / "cv.json").read_text())
        assert cv["folds"] == 3
        header = (out / "confusion.csv").read_text().splitlines()[0]
        assert header.startswith("true\\predicted,")

    def test_identical_seeds_byte_identical_reports(self, archive, tmp_path, mock_embedder):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            run_experiment(archive, mock_embedder, SplitConfig(folds=3, seed=7),
                           QUICK_TRAIN, output_dir=out)
        for name in ("metrics.txt", "metrics.json", "confusion.csv", "cv.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


class TestRunBiasAudit:
    def test_same_archive_zero_deltas(self, tmp_path, mock_embedder):
        rng = np.random.default_rng(5)
        root = tmp_path / "arch"
        faces, labels = make_identity_faces(2, 6, rng)
        write_crop_archive(root, faces, labels)
        report = run_bias_audit(root, root, mock_embedder,
                                SplitConfig(folds=2, seed=0), QUICK_TRAIN,
                                output_dir=tmp_path / "bias")
        assert all(v == 0.0 for v in report.deltas.values())
        assert (tmp_path / "bias" / "bias_report.txt").exists()
        assert (tmp_path / "bias" / "bias_report.json").exists()

    def test_contrast_produces_planted_sign(self, tmp_path, mock_embedder):
        rng = np.random.default_rng(6)
        good_root, bad_root = tmp_path / "good", tmp_path / "bad"
        faces, labels = make_identity_faces(2, 16, rng)
        write_crop_archive(good_root, faces, labels)
        # labels decoupled from identity by construction: each label gets
        # exactly half of every identity's images, so dataset B carries
        # no learnable signal while A stays separable
        mixed = ["id00" if i % 2 == 0 else "id01" for i in range(len(faces))]
        write_crop_archive(bad_root, faces, mixed)
        report = run_bias_audit(good_root, bad_root, mock_embedder,
                                SplitConfig(folds=2, seed=0), QUICK_TRAIN,
                                output_dir=tmp_path / "bias")
        assert report.report_a.accuracy == 1.0
        assert report.deltas["accuracy"] > 0.0


class TestCli:
    def test_ingest_then_evaluate(self, tmp_path):
        rng = np.random.default_rng(7)
        raw = tmp_path / "raw"
        write_identity_folders(raw, 3, 6, rng, size=120)
        runner = CliRunner()

        archive_out = tmp_path / "archive"
        result = runner.invoke(
            cli_main, ["--output", str(archive_out), "ingest", str(raw)]
        )
        assert result.exit_code == 0, result.output
        assert "ok: 18" in result.output

        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"split": {"folds": 3}, "train": {"max_epochs": 200}}))
        eval_out = tmp_path / "eval"
        result = runner.invoke(
            cli_main,
            ["--config", str(cfg), "--output", str(eval_out), "evaluate", str(archive_out)],
        )
        assert result.exit_code == 0, result.output
        assert (eval_out / "metrics.json").exists()
        metrics = json.loads((eval_out / "metrics.json").read_text())
        assert metrics["accuracy"] == 1.0

    def test_embed_train_cross_validate_export(self, tmp_path):
        rng = np.random.default_rng(8)
        archive = tmp_path / "archive"
        faces, labels = make_identity_faces(2, 6, rng)
        write_crop_archive(archive, faces, labels)
        runner = CliRunner()

        emb_out = tmp_path / "emb"
        result = runner.invoke(cli_main, ["--output", str(emb_out), "embed", str(archive)])
        assert result.exit_code == 0, result.output
        emb_file = emb_out / "embeddings.npz"
        assert emb_file.exists()

        train_out = tmp_path / "train"
        result = runner.invoke(cli_main, ["--output", str(train_out), "train", str(emb_file)])
        assert result.exit_code == 0, result.output
        model_file = train_out / "model.bin"
        assert model_file.exists()

        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"split": {"folds": 3}}))
        cv_out = tmp_path / "cv"
        result = runner.invoke(
            cli_main,
            ["--config", str(cfg), "--output", str(cv_out), "cross-validate", str(emb_file)],
        )
        assert result.exit_code == 0, result.output
        assert (cv_out / "cv.json").exists()

        exported = tmp_path / "exported.bin"
        result = runner.invoke(cli_main, ["export-model", str(model_file), str(exported)])
        assert result.exit_code == 0, result.output
        assert exported.exists()

    def test_bias_audit_command(self, tmp_path):
        rng = np.random.default_rng(9)
        archive = tmp_path / "archive"
        faces, labels = make_identity_faces(2, 6, rng)
        write_crop_archive(archive, faces, labels)
        runner = CliRunner()
        out = tmp_path / "bias"
        result = runner.invoke(
            cli_main,
            ["--output", str(out), "bias-audit", str(archive), str(archive)],
        )
        assert result.exit_code == 0, result.output
        assert (out / "bias_report.json").exists()
        report = json.loads((out / "bias_report.json").read_text())
        assert report["columns"] == ["Precision", "Accuracy", "Recall", "F1 Score"]
        assert all(v == 0.0 for v in report["deltas"].values())


class TestLoadArchive:
    def test_missing_crops_dir(self, tmp_path):
        with pytest.raises(workflows.WorkflowError):
            load_archive(tmp_path)
