import json
import subprocess
import sys

import pytest

from fatiguekit import cli


def run_cli(*args):
    return cli.main(list(args))


@pytest.fixture(scope="module")
def cohort(tmp_path_factory):
    out = tmp_path_factory.mktemp("cohort")
    rc = run_cli("synth", "--seed", "21", "--out", str(out),
                 "--set", "synth.n_subjects=2", "--set", "synth.days=1",
                 "--set", "synth.noise_std=0.25")
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def dataset(cohort, tmp_path_factory):
    out = tmp_path_factory.mktemp("dataset")
    rc = run_cli("preprocess", "--seed", "21",
                 "--ecg-dir", str(cohort / "ecg"),
                 "--counts-dir", str(cohort / "counts"),
                 "--labels", str(cohort / "labels.csv"),
                 "--out", str(out), "--modality", "both")
    assert rc == 0
    return out


class TestExitCodes:
    def test_missing_seed_is_config_error(self, tmp_path):
        assert run_cli("synth", "--out", str(tmp_path / "x")) == 2

    def test_unknown_config_key_is_config_error(self, tmp_path):
        assert run_cli("synth", "--seed", "1", "--out", str(tmp_path / "x"),
                       "--set", "no.such.key=1") == 2

    def test_missing_data_file_is_data_error(self, tmp_path):
        assert run_cli("preprocess", "--seed", "1",
                       "--ecg-dir", str(tmp_path), "--labels", str(tmp_path / "nope.csv"),
                       "--out", str(tmp_path / "o"), "--modality", "ecg") == 3

    def test_empty_dataset_is_data_error(self, tmp_path):
        (tmp_path / "labels.csv").write_text("subject_id,date,period,score\n")
        (tmp_path / "ecg").mkdir()
        assert run_cli("preprocess", "--seed", "1",
                       "--ecg-dir", str(tmp_path / "ecg"),
                       "--labels", str(tmp_path / "labels.csv"),
                       "--out", str(tmp_path / "o"), "--modality", "ecg") == 3

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_is_training_error(self, dataset, tmp_path):
        rc = run_cli("train-eval", "--seed", "21", "--dataset", str(dataset),
                     "--out", str(tmp_path / "r"), "--pipeline", "lstm",
                     "--set", "seqnet.lr=1e200", "--set", "seqnet.clip_norm=0",
                     "--set", "seqnet.epochs=2", "--set", "seqnet.hidden_size=4",
                     "--set", "seqnet.attn_size=4")
        assert rc == 4

    def test_grad_check_ok(self, capsys):
        assert run_cli("grad-check", "--seed", "0") == 0
        out = capsys.readouterr().out
        assert out.count("ok") == 3


class TestSynthCommand:
    def test_outputs_and_manifest(self, cohort):
        assert (cohort / "labels.csv").exists()
        assert (cohort / "ground_truth.csv").exists()
        manifest = json.loads((cohort / "run_manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["config"]["seed"] == 21

    def test_console_entry_point_runs(self):
        r = subprocess.run([sys.executable, "-m", "fatiguekit.cli", "--help"],
                           capture_output=True, text=True)
        assert r.returncode == 0
        assert "train-eval" in r.stdout


class TestPreprocessCommand:
    def test_provenance_lists_drop_counts(self, dataset):
        prov = json.loads((dataset / "provenance.json").read_text())
        for key in ("no_label", "too_few_windows", "ecg_windows_invalid", "acti_windows_invalid"):
            assert key in prov["drops"]
        assert prov["n_samples"] >= 1

    def test_rerun_is_byte_identical(self, cohort, tmp_path):
        args = ("preprocess", "--seed", "21",
                "--ecg-dir", str(cohort / "ecg"), "--counts-dir", str(cohort / "counts"),
                "--labels", str(cohort / "labels.csv"), "--modality", "both")
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli(*args, "--out", str(a)) == 0
        assert run_cli(*args, "--out", str(b)) == 0
        files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            if rel.name == "run_manifest.json":
                continue  # differs only in the output path itself
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
        ma = json.loads((a / "run_manifest.json").read_text())
        mb = json.loads((b / "run_manifest.json").read_text())
        ma["config"].pop("paths.output_dir")
        mb["config"].pop("paths.output_dir")
        assert ma == mb

    def test_ecg_modality_needs_no_counts_dir(self, cohort, tmp_path):
        rc = run_cli("preprocess", "--seed", "21",
                     "--ecg-dir", str(cohort / "ecg"),
                     "--labels", str(cohort / "labels.csv"),
                     "--out", str(tmp_path / "ds"), "--modality", "ecg")
        assert rc == 0

    def test_parallel_jobs_match_sequential(self, cohort, dataset, tmp_path):
        rc = run_cli("preprocess", "--seed", "21",
                     "--ecg-dir", str(cohort / "ecg"), "--counts-dir", str(cohort / "counts"),
                     "--labels", str(cohort / "labels.csv"),
                     "--out", str(tmp_path / "ds2"), "--modality", "both", "--jobs", "4")
        assert rc == 0
        for sample_dir in sorted((tmp_path / "ds2").glob("sample_*")):
            ref = dataset / sample_dir.name
            assert (sample_dir / "X.csv").read_bytes() == (ref / "X.csv").read_bytes()
            assert (sample_dir / "meta.csv").read_bytes() == (ref / "meta.csv").read_bytes()


class TestTrainEvalCommand:
    def test_linear_pipeline_outputs(self, dataset, tmp_path):
        out = tmp_path / "rep"
        rc = run_cli("train-eval", "--seed", "21", "--dataset", str(dataset),
                     "--out", str(out), "--pipeline", "linear-fs",
                     "--splitter", "kfold", "--k", "4", "--k-max", "15")
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["folds"]) == 4
        for fold in report["folds"]:
            assert fold["selected_features"] is not None
            assert len(fold["selected_features"]) <= 15
        assert (out / "scatter.csv").exists()
        assert (out / "importance.csv").exists()
        assert (out / "run_manifest.json").exists()

    def test_loso_gives_one_fold_per_subject(self, dataset, tmp_path):
        out = tmp_path / "rep"
        rc = run_cli("train-eval", "--seed", "21", "--dataset", str(dataset),
                     "--out", str(out), "--pipeline", "linear-fs", "--splitter", "loso")
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["folds"]) == 2  # two subjects in the fixture cohort

    def test_report_command_summarizes(self, dataset, tmp_path, capsys):
        out = tmp_path / "rep"
        assert run_cli("train-eval", "--seed", "21", "--dataset", str(dataset),
                       "--out", str(out), "--pipeline", "linear-fs",
                       "--splitter", "kfold", "--k", "4") == 0
        capsys.readouterr()
        assert run_cli("report", "--report", str(out / "report.json")) == 0
        text = capsys.readouterr().out
        assert "MAE" in text and "pipeline: linear_fs" in text

    def test_config_file_with_flag_override(self, dataset, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 5, "featselect.k_max": 3}))
        out = tmp_path / "rep"
        rc = run_cli("train-eval", "--config", str(cfg), "--seed", "21",
                     "--dataset", str(dataset), "--out", str(out),
                     "--pipeline", "linear-fs", "--splitter", "kfold", "--k", "4")
        assert rc == 0
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["config"]["seed"] == 21  # flag wins over file
        assert manifest["config"]["featselect.k_max"] == 3
