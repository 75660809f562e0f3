"""Command-line entry point: synth, preprocess, train-eval, grad-check, report.

Exit codes: 0 ok, 2 config error, 3 data error, 4 training error. Every run
writes ``run_manifest.json`` (resolved config + versions, no timestamps) into
its output directory; identical manifests produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, acti, ecg, evalx, fusion, hrv, ingest, seqnet, synth
from .config import load_config, require
from .errors import (
    AlignmentError,
    ConfigError,
    DataError,
    EmptyDatasetError,
    FatigueKitError,
    InputError,
    ParseError,
    QualityError,
    SchemaError,
    SpecError,
    TrainingError,
)

DATA_ERRORS = (ParseError, DataError, SpecError, InputError, QualityError,
               AlignmentError, SchemaError, EmptyDatasetError)

PIPELINE_CHOICES = ("linear-fs", "lstm", "lstm-sa", "lstm-csa")


def _write_manifest(outdir, command, cfg):
    manifest = {
        "command": command,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "versions": {"fatiguekit": __version__, "numpy": np.__version__},
    }
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "run_manifest.json"), "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")


def cmd_synth(cfg):
    require(cfg, "seed", "paths.output_dir")
    spec = synth.SynthCohortSpec(
        n_subjects=int(cfg["synth.n_subjects"]),
        days=int(cfg["synth.days"]),
        label_rule=cfg["synth.label_rule"],
        hr_coef=float(cfg["synth.hr_coef"]),
        act_coef=float(cfg["synth.act_coef"]),
        intercept=float(cfg["synth.intercept"]),
        noise_std=float(cfg["synth.noise_std"]),
        seed=int(cfg["seed"]),
        sample_rate_hz=int(cfg["synth.sample_rate_hz"]),
        coverage_min=int(cfg["synth.coverage_min"]),
    )
    outdir = cfg["paths.output_dir"]
    labels = synth.gen_cohort(spec, outdir)
    _write_manifest(outdir, "synth", cfg)
    print(f"wrote {len(labels)} labelled segments under {outdir}")
    return 0


def _ecg_segment_features(record, cfg):
    """{SegmentKey: {window_start: 30-vector}} for one record's valid windows."""
    tz = cfg["timezone_offsets"].get(record.subject_id, 0)
    out = {}
    invalid = 0
    for day, period in ingest.segments_overlapping(record.start_time_ms, record.end_time_ms, tz):
        key = ingest.SegmentKey(record.subject_id, day, period)
        lo, hi = ingest.segment_bounds_utc(key, tz)
        windows = ecg.window_ecg(
            record, lo, hi,
            min_coverage_s=float(cfg["ecg.min_coverage_s"]),
            max_corrected_fraction=float(cfg["ecg.max_corrected_fraction"]),
            min_nni_count=int(cfg["ecg.min_nni_count"]),
        )
        for w in windows:
            if not w.valid:
                invalid += 1
                continue
            out.setdefault(key, {})[w.window_start_ms] = hrv.hrv_features(w)
    return out, invalid


def _acti_segment_features(record, cfg):
    tz = cfg["timezone_offsets"].get(record.subject_id, 0)
    wear = acti.detect_nonwear(
        record,
        min_duration_min=int(cfg["acti.nonwear_min_duration_min"]),
        spike_tolerance_min=int(cfg["acti.nonwear_spike_tolerance_min"]),
        spike_max_per_min=int(cfg["acti.nonwear_spike_max_per_min"]),
    )
    end = int(record.epoch_start_times[-1]) + ingest.EPOCH_MS
    out = {}
    invalid = 0
    for day, period in ingest.segments_overlapping(int(record.epoch_start_times[0]), end, tz):
        key = ingest.SegmentKey(record.subject_id, day, period)
        lo, hi = ingest.segment_bounds_utc(key, tz)
        for w in acti.window_counts(record, wear, lo, hi):
            if not w.wear:
                invalid += 1
                continue
            out.setdefault(key, {})[w.window_start_ms] = w.features
    return out, invalid


def _merge(maps):
    merged = {}
    for m in maps:
        for key, windows in m.items():
            merged.setdefault(key, {}).update(windows)
    return merged


def cmd_preprocess(cfg):
    require(cfg, "seed", "paths.labels_file", "paths.output_dir")
    modality = cfg["modality"]
    if modality not in fusion.MODALITY_DIMS:
        raise ConfigError(f"unknown modality {modality!r}")
    jobs = max(1, int(cfg["jobs"]))
    labels = ingest.read_labels_csv(cfg["paths.labels_file"])

    counts = {"ecg_windows_invalid": 0, "acti_windows_invalid": 0}
    ecg_feats, acti_feats = {}, {}
    if modality in ("ecg", "both"):
        require(cfg, "paths.ecg_dir")
        files = sorted(glob.glob(os.path.join(cfg["paths.ecg_dir"], "*.csv")))
        records = [ingest.read_ecg_csv(p) for p in files]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda r: _ecg_segment_features(r, cfg), records))
        ecg_feats = _merge(r[0] for r in results)
        counts["ecg_windows_invalid"] = sum(r[1] for r in results)
        counts["ecg_windows_valid"] = sum(len(v) for v in ecg_feats.values())
    if modality in ("acti", "both"):
        require(cfg, "paths.counts_dir")
        files = sorted(glob.glob(os.path.join(cfg["paths.counts_dir"], "*.csv")))
        records = [ingest.read_counts_csv(p) for p in files]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda r: _acti_segment_features(r, cfg), records))
        acti_feats = _merge(r[0] for r in results)
        counts["acti_windows_invalid"] = sum(r[1] for r in results)
        counts["acti_windows_valid"] = sum(len(v) for v in acti_feats.values())

    dataset = fusion.build_sequences(ecg_feats, acti_feats, labels, modality,
                                     tz_offsets=cfg["timezone_offsets"])
    if not dataset.samples:
        raise EmptyDatasetError("preprocessing produced no valid segments")

    outdir = cfg["paths.output_dir"]
    fusion.save_dataset(dataset, outdir)
    provenance = {
        "modality": modality,
        "n_samples": len(dataset.samples),
        "n_labels": len(labels),
        "drops": {**dataset.drop_counts, **counts},
    }
    with open(os.path.join(outdir, "provenance.json"), "w", encoding="utf-8", newline="\n") as f:
        json.dump(provenance, f, sort_keys=True, indent=2)
        f.write("\n")
    _write_manifest(outdir, "preprocess", cfg)
    print(f"wrote {len(dataset.samples)} sequences under {outdir}")
    return 0


def build_pipeline(cfg):
    name = cfg["pipeline"].replace("-", "_")
    if name == "linear_fs":
        k_max = cfg["featselect.k_max"]
        return evalx.LinearFsPipeline(
            threshold=float(cfg["featselect.threshold"]),
            k_max=None if k_max is None else int(k_max),
        )
    if name in seqnet.VARIANTS:
        return evalx.SeqPipeline(seqnet.TrainConfig(
            variant=name,
            hidden_size=int(cfg["seqnet.hidden_size"]),
            attn_size=int(cfg["seqnet.attn_size"]),
            lambda_csa=float(cfg["seqnet.lambda_csa"]),
            lr=float(cfg["seqnet.lr"]),
            epochs=int(cfg["seqnet.epochs"]),
            patience=int(cfg["seqnet.patience"]),
            clip_norm=float(cfg["seqnet.clip_norm"]),
        ))
    raise ConfigError(f"unknown pipeline {cfg['pipeline']!r}")


def cmd_train_eval(cfg, dataset_dir):
    require(cfg, "seed", "paths.output_dir")
    dataset = fusion.load_dataset(dataset_dir)
    pipeline = build_pipeline(cfg)
    report = evalx.run_cv(
        dataset, pipeline,
        splitter=cfg["cv.splitter"], k=int(cfg["cv.k"]), seed=int(cfg["seed"]),
    )
    outdir = cfg["paths.output_dir"]
    evalx.write_report_files(report, outdir)
    _write_manifest(outdir, "train-eval", cfg)
    a = report.aggregate
    if a["mae_mean"] is None:
        errors = {f["error"] for f in report.folds if f["error"]}
        raise TrainingError(f"every fold failed: {sorted(errors)}")
    print(f"{pipeline.name} {cfg['cv.splitter']}: "
          f"MAE {a['mae_mean']:.3f}+/-{a['mae_std']:.3f} "
          f"RMSE {a['rmse_mean']:.3f}+/-{a['rmse_std']:.3f} "
          f"pooled r {report.pooled['pearson_r']}")
    if report.partial:
        print("WARNING: some folds failed; report marked partial")
    return 0


GRAD_CHECK_LIMITS = {"lstm": 1e-5, "lstm_sa": 1e-5, "lstm_csa": 1e-4}


def cmd_grad_check(cfg):
    require(cfg, "seed")
    worst_ok = True
    for variant, limit in GRAD_CHECK_LIMITS.items():
        err = seqnet.grad_check_random(variant, seed=int(cfg["seed"]))
        status = "ok" if err < limit else "FAIL"
        print(f"{variant}: max relative error {err:.3e} (limit {limit:.0e}) {status}")
        worst_ok = worst_ok and err < limit
    if not worst_ok:
        raise TrainingError("gradient check failed")
    return 0


def cmd_report(report_path):
    with open(report_path, "r", encoding="utf-8") as f:
        rep = json.load(f)
    a = rep["aggregate"]
    print(f"pipeline: {rep['pipeline'].get('pipeline')}  splitter: {rep['splitter']}  "
          f"samples: {rep['n_samples']}  folds: {len(rep['folds'])}")
    print(f"MAE  {a['mae_mean']:.3f} +/- {a['mae_std']:.3f}")
    print(f"RMSE {a['rmse_mean']:.3f} +/- {a['rmse_std']:.3f}")
    print(f"pooled Pearson r: {rep['pooled']['pearson_r']} (n={rep['pooled']['n']})")
    if rep["importance"]:
        print("top features:")
        for row in rep["importance"][:10]:
            print(f"  {row['name']}: freq {row['frequency']:.2f}, "
                  f"mean |w| {row['mean_abs_weight']:.4f}")
    if rep["partial"]:
        print("WARNING: report is partial; some folds failed")
    return 0


def _parse_set(values):
    out = {}
    for item in values or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file with flat dotted keys")
    common.add_argument("--seed", type=int, help="run seed (mandatory, here or in config)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config key; repeatable")

    p = argparse.ArgumentParser(prog="fatiguekit", parents=[common],
                                description="Fatigue-score prediction from ECG and actigraphy")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic cohort", parents=[common])
    sp.add_argument("--out", required=True, help="cohort output directory")

    pp = sub.add_parser("preprocess", help="raw CSVs -> sequence dataset", parents=[common])
    pp.add_argument("--ecg-dir")
    pp.add_argument("--counts-dir")
    pp.add_argument("--labels", required=True)
    pp.add_argument("--out", required=True)
    pp.add_argument("--modality", choices=sorted(fusion.MODALITY_DIMS))
    pp.add_argument("--jobs", type=int)

    te = sub.add_parser("train-eval", help="cross-validated fit + report", parents=[common])
    te.add_argument("--dataset", required=True, help="preprocess output directory")
    te.add_argument("--out", required=True)
    te.add_argument("--pipeline", choices=PIPELINE_CHOICES)
    te.add_argument("--splitter", choices=("kfold", "loso"))
    te.add_argument("--k", type=int)
    te.add_argument("--k-max", type=int, help="cap on selected features (linear-fs)")

    sub.add_parser("grad-check", parents=[common],
                   help="verify BPTT gradients against finite differences")

    rp = sub.add_parser("report", help="summarize a report.json", parents=[common])
    rp.add_argument("--report", required=True)
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        overrides = _parse_set(args.set)
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.command == "synth":
            overrides["paths.output_dir"] = args.out
            cfg = load_config(args.config, overrides)
            return cmd_synth(cfg)
        if args.command == "preprocess":
            for key, val in (("paths.ecg_dir", args.ecg_dir),
                             ("paths.counts_dir", args.counts_dir),
                             ("paths.labels_file", args.labels),
                             ("paths.output_dir", args.out),
                             ("modality", args.modality),
                             ("jobs", args.jobs)):
                if val is not None:
                    overrides[key] = val
            cfg = load_config(args.config, overrides)
            return cmd_preprocess(cfg)
        if args.command == "train-eval":
            for key, val in (("paths.output_dir", args.out),
                             ("pipeline", args.pipeline),
                             ("cv.splitter", args.splitter),
                             ("cv.k", args.k),
                             ("featselect.k_max", args.k_max)):
                if val is not None:
                    overrides[key] = val
            cfg = load_config(args.config, overrides)
            return cmd_train_eval(cfg, args.dataset)
        if args.command == "grad-check":
            cfg = load_config(args.config, overrides)
            return cmd_grad_check(cfg)
        if args.command == "report":
            return cmd_report(args.report)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (*DATA_ERRORS, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except TrainingError as e:
        print(f"training error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
