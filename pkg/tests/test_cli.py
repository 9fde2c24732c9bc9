import json

import pytest

from embedgeo.cli import main
from embedgeo.fileio import load_embeddings, load_report


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    rc = main([
        "synth", "--out", str(out), "--seed", "7", "--dim", "8",
        "--classes", "12", "--per-class", "8", "--spread", "0.25", "--offset", "0.8",
    ])
    assert rc == 0
    return out


def test_synth_writes_artifacts_and_report(synth_dir):
    report = load_report(synth_dir / "report.json")
    assert sorted(report["artifacts"]) == ["images.emb", "labels.csv", "texts.emb"]
    assert report["metrics"]["n_images"] == 96
    assert (synth_dir / "images.emb").exists()
    assert (synth_dir / "texts.emb").exists()
    assert (synth_dir / "labels.csv").exists()


def test_recover_anchor_free_round_trip(synth_dir, tmp_path):
    out = tmp_path / "rec"
    rc = main([
        "recover", "--images", str(synth_dir / "images.emb"),
        "--texts", str(synth_dir / "texts.emb"),
        "--method", "anchor-free", "--out", str(out),
    ])
    assert rc == 0
    report = load_report(out / "report.json")
    assert report["metrics"]["max_abs_error"] <= 1e-6
    assert report["metrics"]["rank"] == 8
    assert "residual" in report["metrics"]


def test_recover_anchor_method(synth_dir, tmp_path):
    out = tmp_path / "rec"
    rc = main([
        "recover", "--images", str(synth_dir / "images.emb"),
        "--texts", str(synth_dir / "texts.emb"),
        "--method", "anchor", "--out", str(out),
    ])
    assert rc == 0
    report = load_report(out / "report.json")
    assert report["metrics"]["max_abs_error"] <= 1e-6
    assert report["metrics"]["anchor_condition"] < 1e8


def test_retrieval_pca_back_contract(synth_dir, tmp_path):
    out = tmp_path / "ret"
    rc = main([
        "retrieval", "--images", str(synth_dir / "images.emb"),
        "--labels", str(synth_dir / "labels.csv"),
        "--texts", str(synth_dir / "texts.emb"),
        "--method", "pca-back", "--keep", "0.5", "--out", str(out),
    ])
    assert rc == 0
    report = load_report(out / "report.json")
    assert 0.0 <= report["metrics"]["map"] <= 1.0
    assert report["parameters"]["method"] == "pca-back"
    assert report["parameters"]["keep"] == 0.5
    assert report["metrics"]["n_queries"] == 96


def test_retrieval_per_query_artifact(synth_dir, tmp_path):
    out = tmp_path / "ret"
    rc = main([
        "retrieval", "--images", str(synth_dir / "images.emb"),
        "--labels", str(synth_dir / "labels.csv"),
        "--method", "original", "--per-query", "--out", str(out),
    ])
    assert rc == 0
    lines = (out / "per_query_ap.csv").read_text().strip().split("\n")
    assert lines[0] == "query,ap"
    assert len(lines) == 97


def test_fewshot_lda_one_shot_zero_shrinkage_is_chance(synth_dir, tmp_path):
    out = tmp_path / "few"
    rc = main([
        "fewshot", "--images", str(synth_dir / "images.emb"),
        "--labels", str(synth_dir / "labels.csv"),
        "--classifier", "lda", "--shots", "1", "--seeds", "5",
        "--shrinkage", "0", "--out", str(out), "--seed", "3",
    ])
    assert rc == 0
    report = load_report(out / "report.json")
    assert abs(report["metrics"]["accuracy_mean"] - 1.0 / 12.0) <= 1e-9
    assert report["parameters"]["shots"] == 1


def test_fewshot_prototype_beats_chance(synth_dir, tmp_path):
    out = tmp_path / "few"
    rc = main([
        "fewshot", "--images", str(synth_dir / "images.emb"),
        "--labels", str(synth_dir / "labels.csv"),
        "--classifier", "prototype", "--shots", "4", "--seeds", "3",
        "--out", str(out), "--seed", "3",
    ])
    assert rc == 0
    report = load_report(out / "report.json")
    assert report["metrics"]["accuracy_mean"] > 0.5


def test_fewshot_pca_back(synth_dir, tmp_path):
    out = tmp_path / "few"
    rc = main([
        "fewshot", "--images", str(synth_dir / "images.emb"),
        "--labels", str(synth_dir / "labels.csv"),
        "--texts", str(synth_dir / "texts.emb"),
        "--classifier", "prototype", "--method", "pca-back", "--keep", "0.5",
        "--shots", "2", "--seeds", "2", "--out", str(out), "--seed", "1",
    ])
    assert rc == 0
    report = load_report(out / "report.json")
    assert 0.0 <= report["metrics"]["accuracy_mean"] <= 1.0
    assert report["parameters"]["method"] == "pca-back"


def test_fewshot_zeroshot(synth_dir, tmp_path):
    out = tmp_path / "zero"
    rc = main([
        "fewshot", "--images", str(synth_dir / "images.emb"),
        "--labels", str(synth_dir / "labels.csv"),
        "--texts", str(synth_dir / "texts.emb"),
        "--text-labels", str(synth_dir / "labels.csv"),
        "--classifier", "zeroshot", "--out", str(out),
    ])
    assert rc == 0
    report = load_report(out / "report.json")
    assert report["metrics"]["accuracy"] > 0.5


def test_indicators_outputs(synth_dir, tmp_path):
    out = tmp_path / "ind"
    rc = main([
        "indicators", "--images", str(synth_dir / "images.emb"),
        "--labels", str(synth_dir / "labels.csv"),
        "--texts", str(synth_dir / "texts.emb"),
        "--bins", "50", "--out", str(out), "--seed", "5",
    ])
    assert rc == 0
    report = load_report(out / "report.json")
    assert set(report["artifacts"]) == {"class_pairs.csv", "modality_pairs.csv"}
    assert 0.0 <= report["metrics"]["overlap_class"] <= 1.0
    assert report["metrics"]["modality_gap"] > 0.0
    header = (out / "class_pairs.csv").read_text().split("\n", 1)[0]
    assert header == "bin_left,bin_right,density_a,density_b"


def test_project_emits_normalized_embeddings(synth_dir, tmp_path):
    out = tmp_path / "proj"
    rc = main([
        "project", "--images", str(synth_dir / "images.emb"),
        "--texts", str(synth_dir / "texts.emb"),
        "--keep", "0.5", "--out", str(out),
    ])
    assert rc == 0
    report = load_report(out / "report.json")
    assert report["metrics"]["keep_count"] == 4
    assert 0.0 < report["metrics"]["kept_variance_fraction"] <= 1.0
    projected = load_embeddings(out / "projected.emb")
    assert projected.normalized
    assert projected.n == 96


def test_failure_leaves_no_partial_outputs(tmp_path, capsys):
    out = tmp_path / "broken"
    rc = main([
        "recover", "--images", str(tmp_path / "missing.emb"),
        "--texts", str(tmp_path / "missing.emb"),
        "--out", str(out),
    ])
    assert rc != 0
    error = json.loads(capsys.readouterr().err)
    assert error["error"] == "FileNotFoundError"
    assert not list(out.iterdir())


def test_domain_error_category(synth_dir, tmp_path, capsys):
    out = tmp_path / "bad"
    rc = main([
        "indicators", "--images", str(synth_dir / "images.emb"),
        "--out", str(out),
    ])
    assert rc != 0
    error = json.loads(capsys.readouterr().err)
    assert error["error"] == "ValidationError"
    assert not list(out.iterdir())


def test_rerun_reproduces_report_bytes(synth_dir, tmp_path):
    args = lambda out: [
        "indicators", "--images", str(synth_dir / "images.emb"),
        "--labels", str(synth_dir / "labels.csv"),
        "--out", str(out), "--seed", "11",
    ]
    assert main(args(tmp_path / "a")) == 0
    assert main(args(tmp_path / "b")) == 0
    assert (tmp_path / "a/report.json").read_bytes() == (tmp_path / "b/report.json").read_bytes()
    assert (tmp_path / "a/class_pairs.csv").read_bytes() == (tmp_path / "b/class_pairs.csv").read_bytes()


def test_pca_back_requires_texts(synth_dir, tmp_path, capsys):
    out = tmp_path / "ret"
    rc = main([
        "retrieval", "--images", str(synth_dir / "images.emb"),
        "--labels", str(synth_dir / "labels.csv"),
        "--method", "pca-back", "--out", str(out),
    ])
    assert rc != 0
    assert json.loads(capsys.readouterr().err)["error"] == "ValidationError"
