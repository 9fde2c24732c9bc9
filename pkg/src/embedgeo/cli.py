"""Command-line surface tying the library into runnable pipelines.

Subcommands: synth, recover, project, indicators, retrieval, fewshot. Each
run writes a metric report (``report.json``) plus any artifacts into the
--out directory. Outputs are staged in a temporary directory and moved into
place only on success, so a failing run leaves no partial files.

BLAS pools are pinned to one thread for bit-reproducible reports; the
EMBEDGEO_THREADS environment variable sets the worker count for chunked
pair-similarity evaluation, which is reproducible by construction for any
worker count. Failures print a machine-readable category to stderr and
exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .core import LabeledEmbeddingSet, Modality, cosine_matrix
from .errors import EmbedGeoError, ValidationError
from .fileio import (
    MetricReport,
    file_digest,
    load_embeddings,
    load_labels,
    save_embeddings,
    save_labels,
    write_histogram_csv,
    write_report,
)
from .indicators import (
    DEFAULT_BINS,
    DEFAULT_MAX_PAIRS,
    class_pair_histograms,
    modality_gap,
    modality_pair_histograms,
)
from .projection import fit_class_axes, project, projected_similarity
from .recovery import (
    AnchorSelection,
    recover_intra_anchor,
    recover_intra_anchorfree,
    select_anchors,
)
from .seeding import derive_seed
from .synthetic import ConeSpec, cone_labels, generate_modality_pair
from .tasks import (
    classify,
    fewshot_accuracy,
    lda_classifier,
    prototype_classifier,
    retrieval_map,
    zero_shot_classifier,
)

THREAD_ENV = "EMBEDGEO_THREADS"
REPORT_NAME = "report.json"


def _workers() -> int | None:
    raw = os.environ.get(THREAD_ENV)
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValidationError(f"{THREAD_ENV} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ValidationError(f"{THREAD_ENV} must be at least 1, got {value}")
    return value


class _Stage:
    """Staged output directory: files land in a temp dir, committed on success."""

    def __init__(self, out_dir: str) -> None:
        self.out = Path(out_dir)
        self.names: list[str] = []
        self.tmp: Path | None = None

    def __enter__(self) -> "_Stage":
        self.out.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(dir=self.out, prefix=".stage-"))
        return self

    def path(self, name: str) -> Path:
        assert self.tmp is not None
        self.names.append(name)
        return self.tmp / name

    def commit(self) -> None:
        assert self.tmp is not None
        for name in self.names:
            os.replace(self.tmp / name, self.out / name)

    def __exit__(self, exc_type, exc, tb) -> None:
        if self.tmp is not None:
            shutil.rmtree(self.tmp, ignore_errors=True)


def _keep_count(dim: int, fraction: float) -> int:
    if not 0.0 < fraction <= 1.0:
        raise ValidationError(f"--keep must lie in (0, 1], got {fraction}")
    return max(1, min(dim, int(dim * fraction)))


def _offset_vector(dim: int, magnitude: float) -> np.ndarray | None:
    if magnitude == 0:
        return None
    offset = np.zeros(dim)
    offset[0] = magnitude
    return offset


def _load_labeled(images_path: str, labels_path: str) -> LabeledEmbeddingSet:
    images = load_embeddings(images_path, fallback_modality=Modality.IMAGE)
    labels, _ = load_labels(labels_path)
    return LabeledEmbeddingSet(images, labels)


def _cmd_synth(args: argparse.Namespace, stage: _Stage) -> MetricReport:
    spec = ConeSpec(
        dim=args.dim,
        n_classes=args.classes,
        per_class=args.per_class,
        class_spread=args.spread,
        modality_offset=_offset_vector(args.dim, args.offset),
        seed=args.seed,
    )
    images, texts, _ = generate_modality_pair(spec)
    save_embeddings(images, stage.path("images.emb"))
    save_embeddings(texts, stage.path("texts.emb"))
    save_labels(cone_labels(spec), stage.path("labels.csv"))
    return MetricReport(
        command="synth",
        parameters={
            "dim": args.dim,
            "classes": args.classes,
            "per_class": args.per_class,
            "spread": args.spread,
            "offset": args.offset,
            "seed": args.seed,
        },
        metrics={
            "n_images": images.n,
            "n_texts": texts.n,
            "modality_gap": modality_gap(images, texts),
        },
        artifacts=["images.emb", "texts.emb", "labels.csv"],
    )


def _cmd_recover(args: argparse.Namespace, stage: _Stage) -> MetricReport:
    images = load_embeddings(args.images, fallback_modality=Modality.IMAGE)
    texts = load_embeddings(args.texts, fallback_modality=Modality.TEXT)
    s_inter = cosine_matrix(texts, images)
    truth = cosine_matrix(images, images)
    metrics: dict[str, object] = {"rank": images.dim}
    if args.method == "anchor":
        if args.anchors:
            try:
                indices = [int(v) for v in args.anchors.split(",")]
            except ValueError as exc:
                raise ValidationError(
                    f"--anchors must be comma-separated integers, got {args.anchors!r}"
                ) from exc
            selection = AnchorSelection(np.array(indices))
        else:
            selection = select_anchors(texts)
        recovered = recover_intra_anchor(s_inter, texts, selection)
        metrics["anchor_condition"] = float(
            np.linalg.cond(texts.data[selection.indices])
        )
    else:
        recovered, factorization = recover_intra_anchorfree(s_inter, images.dim)
        metrics["residual"] = factorization.residual
    metrics["max_abs_error"] = float(np.max(np.abs(recovered.data - truth.data)))
    return MetricReport(
        command="recover",
        inputs={"images": file_digest(args.images), "texts": file_digest(args.texts)},
        parameters={"method": args.method, "seed": args.seed},
        metrics=metrics,
    )


def _cmd_project(args: argparse.Namespace, stage: _Stage) -> MetricReport:
    images = load_embeddings(args.images, fallback_modality=Modality.IMAGE)
    texts = load_embeddings(args.texts, fallback_modality=Modality.TEXT)
    projector = fit_class_axes(texts, keep_count=_keep_count(texts.dim, args.keep))
    projected = project(
        images,
        projector,
        mean_adjust=args.mean_adjust,
        renormalize=not args.no_renormalize,
    )
    save_embeddings(projected, stage.path("projected.emb"))
    total = float(projector.eigenvalues.sum())
    kept = float((projector.eigenvalues * projector.keep).sum())
    return MetricReport(
        command="project",
        inputs={"images": file_digest(args.images), "texts": file_digest(args.texts)},
        parameters={
            "keep": args.keep,
            "mean_adjust": args.mean_adjust,
            "renormalize": not args.no_renormalize,
            "seed": args.seed,
        },
        metrics={
            "keep_count": projector.keep_count,
            "kept_variance_fraction": kept / total if total > 0 else 1.0,
        },
        artifacts=["projected.emb"],
    )


def _cmd_indicators(args: argparse.Namespace, stage: _Stage) -> MetricReport:
    if not args.labels and not args.texts:
        raise ValidationError("indicators needs --labels and/or --texts")
    images = load_embeddings(args.images, fallback_modality=Modality.IMAGE)
    workers = _workers()
    inputs = {"images": file_digest(args.images)}
    metrics: dict[str, object] = {}
    artifacts: list[str] = []
    if args.labels:
        labels, _ = load_labels(args.labels)
        pair = class_pair_histograms(
            LabeledEmbeddingSet(images, labels),
            bins=args.bins,
            max_pairs=args.max_pairs,
            seed=derive_seed(args.seed, "indicators:class"),
            workers=workers,
        )
        write_histogram_csv(pair, stage.path("class_pairs.csv"))
        artifacts.append("class_pairs.csv")
        inputs["labels"] = file_digest(args.labels)
        metrics.update(
            overlap_class=pair.overlap,
            mean_same=pair.mean_a,
            std_same=pair.std_a,
            mean_diff=pair.mean_b,
            std_diff=pair.std_b,
        )
    if args.texts:
        texts = load_embeddings(args.texts, fallback_modality=Modality.TEXT)
        pair = modality_pair_histograms(
            images,
            texts,
            bins=args.bins,
            max_pairs=args.max_pairs,
            seed=derive_seed(args.seed, "indicators:modality"),
            workers=workers,
        )
        write_histogram_csv(pair, stage.path("modality_pairs.csv"))
        artifacts.append("modality_pairs.csv")
        inputs["texts"] = file_digest(args.texts)
        metrics.update(
            overlap_modality=pair.overlap,
            mean_intra=pair.mean_a,
            std_intra=pair.std_a,
            mean_inter=pair.mean_b,
            std_inter=pair.std_b,
            modality_gap=modality_gap(images, texts),
        )
    return MetricReport(
        command="indicators",
        inputs=inputs,
        parameters={"bins": args.bins, "max_pairs": args.max_pairs, "seed": args.seed},
        metrics=metrics,
        artifacts=artifacts,
    )


def _cmd_retrieval(args: argparse.Namespace, stage: _Stage) -> MetricReport:
    pool = _load_labeled(args.images, args.labels)
    inputs = {"images": file_digest(args.images), "labels": file_digest(args.labels)}
    if args.method == "pca-back":
        if not args.texts:
            raise ValidationError("--method pca-back requires --texts")
        texts = load_embeddings(args.texts, fallback_modality=Modality.TEXT)
        inputs["texts"] = file_digest(args.texts)
        projector = fit_class_axes(texts, keep_count=_keep_count(texts.dim, args.keep))
        sim = projected_similarity(pool.embeddings, pool.embeddings, projector)
    else:
        sim = cosine_matrix(pool.embeddings, pool.embeddings)
    result = retrieval_map(pool, pool, sim, exclude_self=True)
    artifacts: list[str] = []
    if args.per_query:
        lines = ["query,ap"] + [
            f"{q},{float(ap)!r}" for q, ap in enumerate(result.per_query_ap)
        ]
        stage.path("per_query_ap.csv").write_bytes(("\n".join(lines) + "\n").encode())
        artifacts.append("per_query_ap.csv")
    return MetricReport(
        command="retrieval",
        inputs=inputs,
        parameters={
            "method": args.method,
            "keep": args.keep,
            "model_tag": args.model_tag,
            "seed": args.seed,
        },
        metrics={
            "map": result.mean_ap,
            "n_queries": result.per_query_ap.size,
            "n_skipped": result.skipped_queries.size,
        },
        artifacts=artifacts,
    )


def _cmd_fewshot(args: argparse.Namespace, stage: _Stage) -> MetricReport:
    pool = _load_labeled(args.images, args.labels)
    inputs = {"images": file_digest(args.images), "labels": file_digest(args.labels)}
    texts = None
    if args.texts:
        texts = load_embeddings(args.texts, fallback_modality=Modality.TEXT)
        inputs["texts"] = file_digest(args.texts)
    if args.method == "pca-back":
        if texts is None:
            raise ValidationError("--method pca-back requires --texts")
        projector = fit_class_axes(texts, keep_count=_keep_count(texts.dim, args.keep))
        pool = LabeledEmbeddingSet(
            project(pool.embeddings, projector, renormalize=True), pool.labels
        )
        texts = project(texts, projector, renormalize=True)

    metrics: dict[str, object] = {}
    if args.classifier == "zeroshot":
        if texts is None or not args.text_labels:
            raise ValidationError("--classifier zeroshot requires --texts and --text-labels")
        text_labels, _ = load_labels(args.text_labels)
        inputs["text_labels"] = file_digest(args.text_labels)
        clf = zero_shot_classifier(LabeledEmbeddingSet(texts, text_labels))
        predictions = classify(clf, pool.embeddings)
        metrics["accuracy"] = float(np.mean(predictions == pool.labels))
    else:
        if args.classifier == "lda":
            def builder(train: LabeledEmbeddingSet):
                return lda_classifier(train, shrinkage=args.shrinkage)
        else:
            builder = prototype_classifier
        accuracies = [
            fewshot_accuracy(
                pool, args.shots, derive_seed(args.seed, f"fewshot:{rep}"), builder
            )
            for rep in range(args.seeds)
        ]
        metrics["accuracy_mean"] = float(np.mean(accuracies))
        metrics["accuracy_std"] = float(np.std(accuracies))
    return MetricReport(
        command="fewshot",
        inputs=inputs,
        parameters={
            "classifier": args.classifier,
            "method": args.method,
            "keep": args.keep,
            "shots": args.shots,
            "seeds": args.seeds,
            "shrinkage": args.shrinkage,
            "model_tag": args.model_tag,
            "seed": args.seed,
        },
        metrics=metrics,
    )


_HANDLERS = {
    "synth": _cmd_synth,
    "recover": _cmd_recover,
    "project": _cmd_project,
    "indicators": _cmd_indicators,
    "retrieval": _cmd_retrieval,
    "fewshot": _cmd_fewshot,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embedgeo",
        description="Embedding-space geometry toolkit over precomputed embedding files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", required=True, help="output directory for the report")
        p.add_argument("--seed", type=int, default=0, help="master random seed")

    p = sub.add_parser("synth", help="generate a synthetic two-cone embedding pair")
    common(p)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--classes", type=int, default=16)
    p.add_argument("--per-class", type=int, default=8)
    p.add_argument("--spread", type=float, default=0.2)
    p.add_argument("--offset", type=float, default=0.0, help="text offset along the first axis")

    p = sub.add_parser("recover", help="recover image-image similarities from text-image ones")
    common(p)
    p.add_argument("--images", required=True)
    p.add_argument("--texts", required=True)
    p.add_argument("--method", choices=["anchor", "anchor-free"], default="anchor-free")
    p.add_argument("--anchors", help="comma-separated explicit anchor row indices")

    p = sub.add_parser("project", help="project image embeddings onto class-text axes")
    common(p)
    p.add_argument("--images", required=True)
    p.add_argument("--texts", required=True)
    p.add_argument("--keep", type=float, default=0.5, help="fraction of axes to keep")
    p.add_argument("--mean-adjust", action="store_true")
    p.add_argument("--no-renormalize", action="store_true")

    p = sub.add_parser("indicators", help="similarity histograms and modality gap")
    common(p)
    p.add_argument("--images", required=True)
    p.add_argument("--texts")
    p.add_argument("--labels")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--max-pairs", type=int, default=DEFAULT_MAX_PAIRS)

    p = sub.add_parser("retrieval", help="image-to-image retrieval mAP")
    common(p)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--texts")
    p.add_argument("--method", choices=["original", "pca-back"], default="original")
    p.add_argument("--keep", type=float, default=0.5)
    p.add_argument("--model-tag", default="")
    p.add_argument("--per-query", action="store_true", help="emit per-query AP CSV")

    p = sub.add_parser("fewshot", help="few-shot / zero-shot classification accuracy")
    common(p)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--texts")
    p.add_argument("--text-labels", help="labels CSV for text rows (zeroshot)")
    p.add_argument("--classifier", choices=["prototype", "lda", "zeroshot"], default="prototype")
    p.add_argument("--method", choices=["original", "pca-back"], default="original")
    p.add_argument("--keep", type=float, default=0.5)
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--seeds", type=int, default=10, help="number of shot-sampling seeds")
    p.add_argument("--shrinkage", type=float, default=0.1)
    p.add_argument("--model-tag", default="")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        # BLAS pinned to one thread: report bytes must not depend on the
        # thread-count override, which only drives chunked pair evaluation
        with threadpool_limits(limits=1):
            with _Stage(args.out) as stage:
                report = _HANDLERS[args.command](args, stage)
                write_report(report, stage.path(REPORT_NAME))
                stage.commit()
        sys.stdout.write(report.to_json())
        return 0
    except (EmbedGeoError, OSError) as exc:
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
