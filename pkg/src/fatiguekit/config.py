"""Run configuration: flat dotted keys from a JSON file, overridable by CLI
flags (flags win). The fully resolved mapping goes into every run manifest so
identical manifests imply identical outputs."""

from __future__ import annotations

import json

from .errors import ConfigError

DEFAULTS = {
    "seed": None,  # mandatory: every command needs an explicit seed
    "modality": "both",
    "pipeline": "linear_fs",
    "jobs": 1,
    "timezone_offsets": {},  # subject_id -> minutes east of UTC
    "paths.ecg_dir": None,
    "paths.counts_dir": None,
    "paths.labels_file": None,
    "paths.output_dir": None,
    "ecg.min_coverage_s": 240.0,
    "ecg.max_corrected_fraction": 0.2,
    "ecg.min_nni_count": 100,
    "acti.nonwear_min_duration_min": 60,
    "acti.nonwear_spike_tolerance_min": 2,
    "acti.nonwear_spike_max_per_min": 100,
    "featselect.threshold": 0.8,
    "featselect.k_max": None,
    "seqnet.hidden_size": 128,
    "seqnet.attn_size": 128,
    "seqnet.lambda_csa": 0.1,
    "seqnet.lr": 1e-3,
    "seqnet.epochs": 100,
    "seqnet.patience": 10,
    "seqnet.clip_norm": 5.0,
    "cv.splitter": "kfold",
    "cv.k": 5,
    "synth.n_subjects": 9,
    "synth.days": 7,
    "synth.label_rule": "linear_hr",
    "synth.hr_coef": 0.2,
    "synth.act_coef": 0.0,
    "synth.intercept": -9.0,
    "synth.noise_std": 0.5,
    "synth.sample_rate_hz": 100,
    "synth.coverage_min": 105,
}


def load_config(path=None, overrides=None):
    """DEFAULTS <- config file <- overrides, left to right."""
    cfg = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        for key, value in data.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            cfg[key] = value
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        if value is not None:
            cfg[key] = value
    return cfg


def require(cfg, *keys):
    for key in keys:
        if cfg.get(key) is None:
            raise ConfigError(f"config key {key!r} is required for this command")
    return cfg
