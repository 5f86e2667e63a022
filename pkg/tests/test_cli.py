"""CLI pipeline tests: every subcommand through its flags, plus reports glue."""

import hashlib
import json

import numpy as np
import pytest

from mosaico import corpus, densemos, reports
from mosaico.cli import main
from mosaico.ratings import RatingRecord, load_ratings, save_ratings


def make_stimulus(i, speaker, system, **kw):
    defaults = dict(
        stimulus_id=f"s{i:05d}",
        audio_path=f"wav/s{i:05d}.wav",
        system_id=system,
        speaker_id=speaker,
        gender="F" if i % 2 else "M",
        dialect="es-AR",
        text="una frase de prueba corta",
        duration_s=3.0,
    )
    defaults.update(kw)
    return corpus.Stimulus(**defaults)


@pytest.fixture
def rated_corpus(tmp_path):
    """Six systems x four stimuli, six raters with system-driven scores."""
    rng = np.random.default_rng(123)
    stimuli = []
    i = 0
    for sys_idx in range(6):
        for _ in range(4):
            stimuli.append(make_stimulus(i, f"spk{sys_idx}", f"sys{sys_idx}"))
            i += 1
    manifest_path = tmp_path / "manifest.jsonl"
    corpus.save_manifest(manifest_path, stimuli)

    base = {f"sys{k}": 1.0 + 0.7 * k for k in range(6)}
    records = []
    for rater in range(6):
        for s in stimuli:
            noisy = base[s.system_id] + rng.normal(0, 0.5) + 0.15 * rater
            score = int(np.clip(round(noisy), 1, 5))
            records.append(
                RatingRecord(
                    session_id=f"rater{rater}",
                    stimulus_id=s.stimulus_id,
                    score=score,
                    listen_ms=3200.0,
                    response_ms=4200.0,
                    batch_index=0,
                    timestamp=f"2025-06-01T10:{rater:02d}:00+00:00",
                )
            )
    ratings_path = tmp_path / "ratings.jsonl"
    save_ratings(ratings_path, records)
    return tmp_path, manifest_path, ratings_path, stimuli, records


class TestReportsGlue:
    def test_full_report_fields(self, rated_corpus):
        _, _, _, stimuli, records = rated_corpus
        report = reports.full_report(records, stimuli)
        assert report["schema_version"] == 1
        assert -1.0 <= report["krippendorff_alpha"] <= 1.0
        assert -1.0 <= report["icc_2_1"] <= 1.0
        assert report["kruskal_wallis"]["H"] > 0
        assert len(report["mos_table"]) == 6
        assert len(report["tukey"]) == 10  # 5 bins -> C(5,2) pairs

    def test_rating_matrix_cells_are_means(self, rated_corpus):
        _, _, _, stimuli, records = rated_corpus
        matrix = reports.rating_matrix(records, stimuli, "system")
        assert matrix.cells.shape == (6, 6)
        assert not np.any(np.isnan(matrix.cells))  # every rater rated every system
        r0_sys0 = [r.score for r in records if r.session_id == "rater0"
                   and r.stimulus_id in {s.stimulus_id for s in stimuli if s.system_id == "sys0"}]
        assert matrix.cells[0, 0] == pytest.approx(np.mean(r0_sys0))

    def test_augmented_systems_reported_separately(self):
        stimuli = [
            make_stimulus(0, "spk0", "sysA"),
            make_stimulus(1, "spk0-gl", "sysA", augmentation="gl", source_stimulus_id="s00000"),
        ]
        records = [
            RatingRecord("r1", "s00000", 5, 1, 4000, 0, "2025-01-01T00:00:00Z"),
            RatingRecord("r1", "s00001", 1, 1, 4000, 0, "2025-01-01T00:01:00Z"),
        ]
        scores = reports.group_scores(records, stimuli, "system")
        assert set(scores) == {"sysA", "sysA-gl"}


class TestStatsCommand:
    def test_report_contains_all_tables(self, rated_corpus):
        tmp_path, manifest_path, ratings_path, _, _ = rated_corpus
        out = tmp_path / "report.json"
        plot = tmp_path / "plot.csv"
        code = main([
            "stats", "--ratings", str(ratings_path), "--manifest", str(manifest_path),
            "--out", str(out), "--plot-csv", str(plot),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        for key in ("krippendorff_alpha", "icc_2_1", "kruskal_wallis", "tukey", "mos_table"):
            assert key in report
        lines = plot.read_text().strip().splitlines()
        assert lines[0] == "group,mean,sd,n,bin"
        assert len(lines) == 7  # header + 6 groups

    def test_idempotent_rerun(self, rated_corpus):
        tmp_path, manifest_path, ratings_path, _, _ = rated_corpus
        out = tmp_path / "report.json"
        argv = ["stats", "--ratings", str(ratings_path), "--manifest", str(manifest_path),
                "--out", str(out)]
        main(argv)
        first = out.read_bytes()
        main(argv)
        assert out.read_bytes() == first


class TestUsageErrors:
    def test_unknown_flag_exits_2(self, rated_corpus):
        with pytest.raises(SystemExit) as exc:
            main(["stats", "--bogus-flag", "x"])
        assert exc.value.code == 2

    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_runtime_error_exits_1(self, tmp_path):
        code = main(["corpus-stats", "--manifest", str(tmp_path / "missing.jsonl"),
                     "--out", str(tmp_path / "o.json")])
        assert code == 1


class TestCorpusStatsCommand:
    def test_basic(self, rated_corpus):
        tmp_path, manifest_path, ratings_path, _, _ = rated_corpus
        out = tmp_path / "cs.json"
        code = main(["corpus-stats", "--manifest", str(manifest_path),
                     "--ratings", str(ratings_path), "--out", str(out)])
        assert code == 0
        cs = json.loads(out.read_text())
        assert cs["n_stimuli"] == 24
        assert cs["n_ratings"] == 144
        assert cs["duration_mean_s"] == pytest.approx(3.0)
        assert cs["words_mean"] == pytest.approx(5.0)


class TestSplitCommand:
    def test_split_and_idempotency(self, rated_corpus):
        tmp_path, manifest_path, _, _, _ = rated_corpus
        out = tmp_path / "split.jsonl"
        argv = ["split", "--manifest", str(manifest_path), "--ratios", "0.7,0.15,0.15",
                "--seed", "3", "--out", str(out)]
        assert main(argv) == 0
        first = out.read_bytes()
        assert main(argv) == 0
        assert out.read_bytes() == first
        report = json.loads((tmp_path / "split.jsonl.report.json").read_text())
        assert report["counts"]["train"] > 0


class TestFilterCommand:
    def test_filter_writes_valid_and_report(self, rated_corpus):
        tmp_path, manifest_path, _, stimuli, records = rated_corpus
        # Add one too-fast rating that the timing rule must drop.
        fast = RatingRecord("rater9", "s00000", 3, 100.0, 100.0, 0, "2025-06-02T00:00:00+00:00")
        ratings_path = tmp_path / "with_fast.jsonl"
        save_ratings(ratings_path, records + [fast])
        out = tmp_path / "valid.jsonl"
        report_path = tmp_path / "filter_report.json"
        code = main([
            "filter-ratings", "--ratings", str(ratings_path), "--manifest", str(manifest_path),
            "--out", str(out), "--report", str(report_path),
        ])
        assert code == 0
        assert len(load_ratings(out)) == len(records)
        report = json.loads(report_path.read_text())
        assert report["by_rule"] == {"timing": 1}
        assert report["excluded"][0]["session_id"] == "rater9"


def write_synthetic_embeddings(tmp_path, stimuli, labels, seed=0):
    """Embeddings carrying a linear trace of the label, plus noise."""
    rng = np.random.default_rng(seed)
    emb_dir = tmp_path / "emb"
    emb_dir.mkdir(exist_ok=True)
    direction = rng.normal(0, 1.0, (13, 768))
    for s in stimuli:
        label = labels[s.stimulus_id]
        emb = rng.normal(0, 0.5, (13, 768)) + direction * (label - 3.0) / 2.0
        densemos.write_embedding(emb_dir / f"{s.stimulus_id}.emb1", emb)
    return emb_dir


@pytest.fixture
def trainable_corpus(tmp_path):
    """Five single-speaker systems so the split has five packable groups."""
    rng = np.random.default_rng(7)
    stimuli = []
    i = 0
    for k in range(5):
        for _ in range(6):
            stimuli.append(make_stimulus(i, f"spk{k}", f"sys{k}"))
            i += 1
    manifest_path = tmp_path / "manifest.jsonl"
    corpus.save_manifest(manifest_path, stimuli)
    records = []
    for s in stimuli:
        # Wide noise keeps per-stimulus labels varied within every system,
        # so any single-system test split still has a defined PCC.
        mos = float(np.clip(1.0 + int(s.system_id[-1]) + rng.normal(0, 1.2), 1, 5))
        records.append(
            RatingRecord("r1", s.stimulus_id, int(np.clip(round(mos), 1, 5)),
                         3000.0, 4000.0, 0, "2025-06-01T00:00:00+00:00")
        )
    ratings_path = tmp_path / "ratings.jsonl"
    save_ratings(ratings_path, records)
    labels = {r.stimulus_id: float(r.score) for r in records}
    emb_dir = write_synthetic_embeddings(tmp_path, stimuli, labels)
    split_path = tmp_path / "split.jsonl"
    main(["split", "--manifest", str(manifest_path), "--ratios", "0.6,0.2,0.2",
          "--seed", "1", "--out", str(split_path)])
    return tmp_path, manifest_path, ratings_path, split_path, emb_dir


class TestTrainEvaluateCommands:
    def train_argv(self, paths, out, seed=7):
        tmp_path, manifest_path, ratings_path, split_path, emb_dir = paths
        return [
            "train", "--manifest", str(manifest_path), "--ratings", str(ratings_path),
            "--split", str(split_path), "--embeddings", str(emb_dir), "--out", str(out),
            "--seed", str(seed), "--max-epochs", "15", "--patience", "15",
            "--batch-size", "8",
        ]

    def test_train_deterministic_digests(self, trainable_corpus):
        tmp_path = trainable_corpus[0]
        out_a = tmp_path / "a.dmos"
        out_b = tmp_path / "b.dmos"
        assert main(self.train_argv(trainable_corpus, out_a)) == 0
        assert main(self.train_argv(trainable_corpus, out_b)) == 0
        assert hashlib.sha256(out_a.read_bytes()).hexdigest() == \
            hashlib.sha256(out_b.read_bytes()).hexdigest()
        report = json.loads((tmp_path / "a.dmos.report.json").read_text())
        assert report["epochs_run"] >= 1
        assert report["best_val_loss"] < 1.0

    def test_evaluate_writes_predictions(self, trainable_corpus):
        tmp_path, manifest_path, ratings_path, split_path, emb_dir = trainable_corpus
        model_path = tmp_path / "m.dmos"
        assert main(self.train_argv(trainable_corpus, model_path)) == 0
        preds_path = tmp_path / "preds.jsonl"
        code = main([
            "evaluate", "--checkpoint", str(model_path), "--manifest", str(manifest_path),
            "--ratings", str(ratings_path), "--split", str(split_path),
            "--embeddings", str(emb_dir), "--split-name", "test",
            "--out", str(preds_path), "--n-boot", "200",
        ])
        assert code == 0
        split = corpus.load_split(split_path)
        assert len(preds_path.read_text().strip().splitlines()) == len(split.ids_for("test"))
        report = json.loads((tmp_path / "preds.jsonl.report.json").read_text())
        assert "mae" in report and "pcc" in report

    def test_missing_embeddings_fail(self, trainable_corpus):
        tmp_path, manifest_path, ratings_path, split_path, _ = trainable_corpus
        empty = tmp_path / "empty_emb"
        empty.mkdir()
        argv = [
            "train", "--manifest", str(manifest_path), "--ratings", str(ratings_path),
            "--split", str(split_path), "--embeddings", str(empty),
            "--out", str(tmp_path / "x.dmos"), "--max-epochs", "2",
        ]
        assert main(argv) == 1


class TestAugmentCommand:
    def test_plan_only(self, tmp_path):
        stimuli = []
        i = 0
        for sp in range(5):
            for _ in range(100):
                stimuli.append(make_stimulus(i, f"tts{sp}", f"sys{sp}"))
                i += 1
        for _ in range(100):
            stimuli.append(make_stimulus(i, "hum0", "human"))
            i += 1
        manifest_path = tmp_path / "m.jsonl"
        corpus.save_manifest(manifest_path, stimuli)
        jobs_path = tmp_path / "jobs.jsonl"
        code = main([
            "augment", "--manifest", str(manifest_path), "--audio-root", str(tmp_path),
            "--out-manifest", str(tmp_path / "out.jsonl"), "--jobs-out", str(jobs_path),
            "--seed", "2", "--plan-only",
        ])
        assert code == 0
        jobs = corpus.load_jobs(jobs_path)
        assert len(jobs) == 600
        report = json.loads((tmp_path / "jobs.jsonl.report.json").read_text())
        assert report["planned_jobs"] == 600 and report["executed"] is False
