"""Operator command line.

    faceauth [--seed N] [--config cfg.json] [--output DIR] <command> ...

Commands: ingest, embed, train, evaluate, cross-validate, bias-audit,
export-model, serve. See config.py for the config file schema.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from faceauth import classifier, evaluation, workflows
from faceauth.config import AppConfig, load_config
from faceauth.datasets import LabeledDataset
from faceauth.embedder import embed_dataset
from faceauth.service.core import AuthService, master_key_from_env
from faceauth.service.http import create_app
from faceauth.service.store import UserStore


@click.group()
@click.option("--seed", type=int, default=None, help="Override every configured seed.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON config file.")
@click.option("--output", type=click.Path(file_okay=False), default="out",
              help="Output directory for command artifacts.")
@click.pass_context
def main(ctx: click.Context, seed: int | None, config_path: str | None, output: str):
    """Face-recognition pipeline and authentication service tooling."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = load_config(config_path, seed=seed)
    ctx.obj["output"] = Path(output)


def _cfg(ctx: click.Context) -> AppConfig:
    return ctx.obj["config"]


def _out(ctx: click.Context) -> Path:
    return ctx.obj["output"]


@main.command()
@click.argument("root", type=click.Path(exists=True, file_okay=False))
@click.pass_context
def ingest(ctx: click.Context, root: str):
    """Detect and crop faces from a folder-per-identity dataset."""
    cfg = _cfg(ctx)
    started = time.monotonic()
    manifest = workflows.ingest(
        root, cfg.build_detector_backend(), cfg.detector, output_dir=_out(ctx)
    )
    elapsed = time.monotonic() - started
    click.echo(f"ingested {len(manifest.entries)} images in {elapsed:.1f}s")
    for status, count in sorted(manifest.status_counts.items()):
        click.echo(f"  {status}: {count}")
    click.echo(f"archive written to {_out(ctx)}")


@main.command()
@click.argument("archive", type=click.Path(exists=True, file_okay=False))
@click.pass_context
def embed(ctx: click.Context, archive: str):
    """Embed a crop archive into embeddings.npz."""
    cfg = _cfg(ctx)
    faces, labels = workflows.load_archive(archive)
    data = embed_dataset(faces, labels, cfg.build_embedder_backend())
    out = _out(ctx)
    out.mkdir(parents=True, exist_ok=True)
    np.savez(out / "embeddings.npz", embeddings=data.embeddings,
             labels=np.array(data.labels))
    click.echo(f"embedded {len(data)} faces -> {out / 'embeddings.npz'}")


def _load_embeddings(path: str) -> LabeledDataset:
    with np.load(path, allow_pickle=False) as archive:
        return LabeledDataset(archive["embeddings"], tuple(str(l) for l in archive["labels"]))


@main.command()
@click.argument("embeddings", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def train(ctx: click.Context, embeddings: str):
    """Train the classifier on an embeddings.npz file."""
    cfg = _cfg(ctx)
    data = _load_embeddings(embeddings)
    started = time.monotonic()
    model = classifier.train(data.embeddings, list(data.labels), cfg.train)
    elapsed = time.monotonic() - started
    predicted = classifier.predict_many(model, data.embeddings)
    accuracy = sum(p == t for p, t in zip(predicted, data.labels)) / len(data)
    out = _out(ctx)
    out.mkdir(parents=True, exist_ok=True)
    classifier.save_model(model, out / "model.bin")
    click.echo(
        f"trained {len(model.classes)} classes in {elapsed:.1f}s, "
        f"training accuracy {accuracy:.4f} -> {out / 'model.bin'}"
    )


@main.command()
@click.argument("archive", type=click.Path(exists=True, file_okay=False))
@click.pass_context
def evaluate(ctx: click.Context, archive: str):
    """Embed, split, train, and report metrics for a crop archive."""
    cfg = _cfg(ctx)
    result = workflows.run_experiment(
        archive, cfg.build_embedder_backend(), cfg.split, cfg.train, output_dir=_out(ctx)
    )
    click.echo(f"train/test: {result.train_size}/{result.test_size}")
    click.echo(result.report.to_text())
    click.echo(f"cv mean accuracy: {result.cv.mean_accuracy:.4f}")
    click.echo(f"reports written to {_out(ctx)}")


@main.command("cross-validate")
@click.argument("embeddings", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def cross_validate(ctx: click.Context, embeddings: str):
    """Stratified k-fold cross-validation on an embeddings.npz file."""
    cfg = _cfg(ctx)
    data = _load_embeddings(embeddings)
    result = evaluation.cross_validate(data, cfg.split, cfg.train)
    for i, acc in enumerate(result.fold_accuracies):
        click.echo(f"fold {i}: {acc:.4f}")
    click.echo(f"mean: {result.mean_accuracy:.4f}")
    out = _out(ctx)
    out.mkdir(parents=True, exist_ok=True)
    (out / "cv.json").write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True), "utf-8")


@main.command("bias-audit")
@click.argument("archive_a", type=click.Path(exists=True, file_okay=False))
@click.argument("archive_b", type=click.Path(exists=True, file_okay=False))
@click.pass_context
def bias_audit(ctx: click.Context, archive_a: str, archive_b: str):
    """Paired metrics report over two crop archives."""
    cfg = _cfg(ctx)
    report = workflows.run_bias_audit(
        archive_a, archive_b, cfg.build_embedder_backend(), cfg.split, cfg.train,
        output_dir=_out(ctx),
    )
    click.echo(report.to_text())
    click.echo(f"reports written to {_out(ctx)}")


@main.command("export-model")
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.argument("destination", type=click.Path(dir_okay=False))
def export_model(source: str, destination: str):
    """Integrity-checked copy of a model file (load, verify, re-save)."""
    model = classifier.load_model(source)
    classifier.save_model(model, destination)
    click.echo(f"exported {len(model.classes)}-class model to {destination}")


@main.command()
@click.option("--store", "store_dir", type=click.Path(file_okay=False), required=True,
              help="Persistent store directory.")
@click.option("--host", default=None, help="Bind host (default from config).")
@click.option("--port", type=int, default=None, help="Bind port (default from config).")
@click.pass_context
def serve(ctx: click.Context, store_dir: str, host: str | None, port: int | None):
    """Run the authentication HTTP service."""
    import uvicorn

    cfg = _cfg(ctx)
    listen_host, _, listen_port = cfg.service.listen.partition(":")
    service = AuthService(
        store=UserStore(store_dir),
        detector_backend=cfg.build_detector_backend(),
        embedder_backend=cfg.build_embedder_backend(),
        master_key=master_key_from_env(cfg.service),
        config=cfg.service,
    )
    uvicorn.run(
        create_app(service),
        host=host or listen_host or "127.0.0.1",
        port=port or int(listen_port or 8000),
        log_level="info",
    )


if __name__ == "__main__":
    main(sys.argv[1:])
