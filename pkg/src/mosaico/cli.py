"""Command-line entry point.

Subcommands cover the whole pipeline: corpus augmentation, speaker-disjoint
splitting, the rating service, validity filtering, the statistics report,
model training, and evaluation.  Every batch run writes a machine-readable
JSON report next to its outputs; logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import corpus, densemos, ratings, reports
from .service import ValidationRules, filter_ratings

logger = logging.getLogger("mosaico")

SCHEMA_VERSION = 1


def _write_report(path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")
    logger.info("report written to %s", path)


def _report_path(args, default_anchor: str) -> Path:
    if args.report:
        return Path(args.report)
    return Path(str(default_anchor) + ".report.json")


def cmd_augment(args) -> int:
    stimuli = corpus.load_manifest(args.manifest)
    jobs = corpus.plan_augmentation(stimuli, seed=args.seed)
    if args.jobs_out:
        corpus.save_jobs(args.jobs_out, jobs)
    if args.plan_only:
        _write_report(
            _report_path(args, args.jobs_out or args.out_manifest),
            {"command": "augment", "planned_jobs": len(jobs), "executed": False},
        )
        return 0
    new_entries = corpus.run_augmentation(jobs, stimuli, args.audio_root)
    corpus.save_manifest(args.out_manifest, stimuli + new_entries)
    logger.info("executed %d augmentation jobs", len(jobs))
    _write_report(
        _report_path(args, args.out_manifest),
        {
            "command": "augment",
            "planned_jobs": len(jobs),
            "executed": True,
            "new_stimuli": len(new_entries),
            "out_manifest": str(args.out_manifest),
        },
    )
    return 0


def cmd_split(args) -> int:
    stimuli = corpus.load_manifest(args.manifest)
    ratios = tuple(float(x) for x in args.ratios.split(","))
    if len(ratios) != 3:
        raise ValueError("--ratios must be three comma-separated numbers")
    assignment = corpus.split_by_speaker(stimuli, ratios, seed=args.seed)
    corpus.save_split(args.out, assignment)
    counts = {sp: len(assignment.ids_for(sp)) for sp in corpus.SPLITS}
    logger.info("split sizes: %s", counts)
    _write_report(
        _report_path(args, args.out),
        {"command": "split", "ratios": list(ratios), "seed": args.seed, "counts": counts},
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    stimuli = corpus.load_manifest(args.manifest)
    pilot = None
    if args.pilot:
        pilot_ratings = ratings.load_ratings(args.pilot)
        pilot = ratings.mos_labels(pilot_ratings)
    tiers = None
    if pilot is not None:
        from .service import assign_quality_tiers

        tiers = assign_quality_tiers(stimuli, pilot_scores=pilot)
    app = create_app(
        stimuli,
        args.audio_root,
        tiers=tiers,
        seed=args.seed,
        persist_path=args.persist,
        ui_dir=args.ui_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_filter_ratings(args) -> int:
    stimuli = corpus.load_manifest(args.manifest)
    all_ratings = ratings.load_ratings(args.ratings)
    rules = ValidationRules(
        min_response_fraction=args.min_response_fraction,
        timing_rule_enabled=not args.no_timing_rule,
        exclude_human_eq_augmented=not args.no_participant_rule,
        human_comparison=args.comparison,
    )
    valid, report = filter_ratings(all_ratings, stimuli, rules)
    ratings.save_ratings(args.out, valid)
    logger.info(
        "kept %d of %d ratings (%s)", report.n_valid, report.n_input, report.count_by_rule()
    )
    _write_report(
        _report_path(args, args.out),
        {
            "command": "filter-ratings",
            "rules": asdict(rules),
            "n_input": report.n_input,
            "n_valid": report.n_valid,
            "excluded": [asdict(e) for e in report.excluded],
            "by_rule": report.count_by_rule(),
        },
    )
    return 0


def cmd_stats(args) -> int:
    stimuli = corpus.load_manifest(args.manifest)
    all_ratings = ratings.load_ratings(args.ratings)
    report = reports.full_report(
        all_ratings,
        stimuli,
        group_by=args.group_by,
        kw_group_by=args.kw_group_by,
        n_bins=args.bins,
        alpha_metric=args.alpha_metric,
    )
    report["command"] = "stats"
    Path(args.out).write_text(json.dumps(report, indent=2, ensure_ascii=False), encoding="utf-8")
    logger.info("stats report written to %s", args.out)
    if args.plot_csv:
        reports.write_plot_data(args.plot_csv, report)
        logger.info("plot data written to %s", args.plot_csv)
    return 0


def cmd_corpus_stats(args) -> int:
    stimuli = corpus.load_manifest(args.manifest)
    rating_list = ratings.load_ratings(args.ratings) if args.ratings else None
    cs = corpus.corpus_stats(stimuli, rating_list)
    payload = {"command": "corpus-stats", **asdict(cs)}
    _write_report(args.out, payload)
    return 0


def _build_dataset(manifest, labels, split_ids, emb_dir):
    ids = sorted(sid for sid in split_ids if sid in labels)
    missing = [sid for sid in ids if not (Path(emb_dir) / f"{sid}.emb1").exists()]
    if missing:
        raise FileNotFoundError(
            f"missing embeddings for {len(missing)} stimuli (first: {missing[0]!r})"
        )
    embs = densemos.load_embedding_set(emb_dir, ids)
    y = np.array([labels[sid] for sid in ids])
    return ids, embs, y


def cmd_train(args) -> int:
    stimuli = corpus.load_manifest(args.manifest)
    all_ratings = ratings.load_ratings(args.ratings)
    labels = ratings.mos_labels(all_ratings)
    split = corpus.load_split(args.split)
    known = {s.stimulus_id for s in stimuli}
    config = densemos.TrainConfig(
        lr_alpha=args.lr_alpha,
        lr_mlp=args.lr_mlp,
        dropout_p=args.dropout,
        patience=args.patience,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        seed=args.seed,
    )
    train_ids, train_embs, train_y = _build_dataset(
        stimuli, labels, [s for s in split.ids_for("train") if s in known], args.embeddings
    )
    val_ids, val_embs, val_y = _build_dataset(
        stimuli, labels, [s for s in split.ids_for("val") if s in known], args.embeddings
    )
    logger.info("training on %d stimuli, validating on %d", len(train_ids), len(val_ids))
    checkpoint = densemos.train(train_embs, train_y, val_embs, val_y, config)
    densemos.save_checkpoint(args.out, checkpoint)
    logger.info("checkpoint written to %s", args.out)
    _write_report(
        _report_path(args, args.out),
        {
            "command": "train",
            "config": asdict(config),
            "n_train": len(train_ids),
            "n_val": len(val_ids),
            "epochs_run": len(checkpoint.history),
            "best_val_loss": checkpoint.best_val_loss,
            "checkpoint": str(args.out),
        },
    )
    return 0


def cmd_evaluate(args) -> int:
    stimuli = corpus.load_manifest(args.manifest)
    all_ratings = ratings.load_ratings(args.ratings)
    labels = ratings.mos_labels(all_ratings)
    split = corpus.load_split(args.split)
    known = {s.stimulus_id for s in stimuli}
    checkpoint = densemos.load_checkpoint(args.checkpoint)
    ids, embs, y = _build_dataset(
        stimuli, labels, [s for s in split.ids_for(args.split_name) if s in known],
        args.embeddings,
    )
    metrics, preds = densemos.evaluate(checkpoint, embs, y, n_boot=args.n_boot, seed=args.seed)
    densemos.write_predictions(args.out, ids, preds, y)
    logger.info(
        "%s split: PCC %.3f, MAE %.3f, RMSE %.3f", args.split_name, metrics.pcc, metrics.mae,
        metrics.rmse,
    )
    _write_report(
        _report_path(args, args.out),
        {
            "command": "evaluate",
            "split": args.split_name,
            "n_stimuli": len(ids),
            "pcc": metrics.pcc,
            "mae": metrics.mae,
            "rmse": metrics.rmse,
            "pcc_ci": list(metrics.pcc_ci) if metrics.pcc_ci else None,
            "mae_ci": list(metrics.mae_ci) if metrics.mae_ci else None,
            "rmse_ci": list(metrics.rmse_ci) if metrics.rmse_ci else None,
            "predictions": str(args.out),
        },
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mosaico", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="plan and run corpus augmentation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-root", required=True)
    p.add_argument("--out-manifest", required=True)
    p.add_argument("--jobs-out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plan-only", action="store_true")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("split", help="speaker-disjoint train/val/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("serve", help="run the listening-test service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-root", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--persist", default=None, help="append ratings to this JSONL file")
    p.add_argument("--pilot", default=None, help="pilot ratings JSONL for quality tiers")
    p.add_argument("--ui-dir", default=None, help="serve this directory as the web UI")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("filter-ratings", help="apply validity rules to ratings")
    p.add_argument("--ratings", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-response-fraction", type=float, default=0.5)
    p.add_argument("--no-timing-rule", action="store_true")
    p.add_argument("--no-participant-rule", action="store_true")
    p.add_argument("--comparison", choices=["le", "eq"], default="le")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_filter_ratings)

    p = sub.add_parser("stats", help="agreement and significance report")
    p.add_argument("--ratings", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot-csv", default=None)
    p.add_argument("--group-by", choices=["system", "speaker"], default="system")
    p.add_argument("--kw-group-by", choices=["system", "speaker"], default="speaker")
    p.add_argument("--bins", type=int, default=5)
    p.add_argument("--alpha-metric", choices=["interval", "ordinal"], default="interval")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("corpus-stats", help="descriptive corpus statistics")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratings", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corpus_stats)

    p = sub.add_parser("train", help="train the MOS predictor")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratings", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=40)
    p.add_argument("--lr-alpha", type=float, default=0.001)
    p.add_argument("--lr-mlp", type=float, default=0.0001)
    p.add_argument("--dropout", type=float, default=0.6)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratings", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--split-name", choices=list(corpus.SPLITS), default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # runtime failures map to exit 1, usage is 2
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
