import csv
import json

import numpy as np
import pytest

from almix.cli import main as cli_main
from almix.experiment import (
    CmamConfig,
    ConfigError,
    DatasetConfig,
    ExperimentConfig,
    ImbalanceConfig,
    LoopConfig,
    ModelConfig,
    emit_reports,
    load_config,
    parse_config,
    resolve_dataset,
    run_experiment,
    run_trial,
)
from almix.model import TrainConfig


def small_config(sampler="rankedms", cmam_enabled=True, seeds=(7,), cycles=3):
    return ExperimentConfig(
        dataset=DatasetConfig(
            generator="blobs",
            params={"n_per_class": 40, "num_classes": 2, "dim": 2, "spread": 1.0},
        ),
        model=ModelConfig(hidden_widths=(8,), mix_point=1),
        trainer=TrainConfig(epochs=10, batch_size=8, learning_rate=0.05),
        cmam=CmamConfig(enabled=cmam_enabled, alpha=0.4),
        sampler=sampler,
        loop=LoopConfig(initial_budget=6, budget_per_cycle=4, cycles=cycles),
        seeds=seeds,
    )


CONFIG_DOC = {
    "dataset": {"generator": "blobs", "n_per_class": 40, "num_classes": 2, "dim": 2, "spread": 1.0},
    "model": {"hidden_widths": [8], "mix_point": 1},
    "trainer": {"epochs": 10, "batch_size": 8, "learning_rate": 0.05},
    "cmam": {"enabled": True, "alpha": 0.4},
    "sampler": "rankedms",
    "loop": {"initial_budget": 6, "budget_per_cycle": 4, "cycles": 3},
    "seeds": [7],
}


class TestConfigParsing:
    def test_parses_nested_document(self):
        config = parse_config(CONFIG_DOC)
        assert config.sampler == "rankedms"
        assert config.loop.final_labeled == 14
        assert config.dataset.params["n_per_class"] == 40

    def test_unknown_top_level_key_is_error(self):
        doc = dict(CONFIG_DOC, typo_section={})
        with pytest.raises(ConfigError, match="typo_section"):
            parse_config(doc)

    def test_unknown_nested_key_is_error(self):
        doc = dict(CONFIG_DOC, trainer=dict(CONFIG_DOC["trainer"], lr=0.1))
        with pytest.raises(ConfigError, match="lr"):
            parse_config(doc)

    def test_missing_section_is_error(self):
        doc = {k: v for k, v in CONFIG_DOC.items() if k != "loop"}
        with pytest.raises(ConfigError, match="loop"):
            parse_config(doc)

    def test_unknown_sampler_is_error(self):
        with pytest.raises(ConfigError, match="sampler"):
            parse_config(dict(CONFIG_DOC, sampler="coreset"))

    def test_generator_param_mismatch_is_error(self):
        doc = dict(CONFIG_DOC, dataset=dict(CONFIG_DOC["dataset"], noise=0.1))
        with pytest.raises(ConfigError):
            parse_config(doc)

    def test_generator_params_rejected_for_file_dataset(self, tmp_path):
        doc = dict(
            CONFIG_DOC,
            dataset={"path": str(tmp_path / "d.csv"), "num_classes": 2, "n": 100},
        )
        with pytest.raises(ConfigError, match="do not apply"):
            parse_config(doc)

    def test_wrong_value_type_is_config_error(self):
        doc = dict(CONFIG_DOC, trainer=dict(CONFIG_DOC["trainer"], epochs=0))
        with pytest.raises(ConfigError):
            parse_config(doc)

    def test_json_and_yaml_files(self, tmp_path):
        jpath = tmp_path / "c.json"
        jpath.write_text(json.dumps(CONFIG_DOC))
        assert load_config(jpath).loop.cycles == 3
        import yaml

        ypath = tmp_path / "c.yaml"
        ypath.write_text(yaml.safe_dump(CONFIG_DOC))
        assert load_config(ypath).loop.cycles == 3

    def test_budget_exhaustion_rejected_before_running(self):
        config = small_config()
        bad = ExperimentConfig(
            dataset=config.dataset,
            model=config.model,
            trainer=config.trainer,
            cmam=config.cmam,
            sampler=config.sampler,
            loop=LoopConfig(initial_budget=60, budget_per_cycle=20, cycles=3),
            seeds=(7,),
        )
        with pytest.raises(ConfigError, match="budget"):
            run_trial(bad, 7)


class TestResolveDataset:
    def test_train_and_test_disjoint_streams(self):
        train, test = resolve_dataset(small_config().dataset, 5)
        assert train.n == 80
        assert test.n == 20  # 25% of n_per_class per class
        assert not np.array_equal(train.features[: test.n], test.features)

    def test_imbalance_applied_to_train_only(self):
        cfg = DatasetConfig(
            generator="blobs",
            params={"n_per_class": 50, "num_classes": 2, "dim": 2, "spread": 1.0},
            imbalance=ImbalanceConfig(minority_classes=(0,), ratio=10),
        )
        train, test = resolve_dataset(cfg, 3)
        assert sum(1 for y in train.labels if y == 0) == 5
        assert sum(1 for y in test.labels if y == 0) > 5

    def test_file_dataset_holdout_split(self, tmp_path):
        from almix.core import RngStream
        from almix.data import gen_blobs, save_csv

        full = gen_blobs(40, 2, 2, 1.0, RngStream(0, "data-gen"))
        path = tmp_path / "full.csv"
        save_csv(full, path)
        cfg = DatasetConfig(path=str(path), label_column=-1, num_classes=2, test_fraction=0.25)
        train, test = resolve_dataset(cfg, 9)
        assert train.n + test.n == full.n
        assert test.n == 20


class TestRunTrial:
    def test_single_cycle_never_invokes_sampler(self):
        reports = run_trial(small_config(cycles=1), 7)
        assert len(reports) == 1
        assert reports[0].labeled_count == 6

    def test_labeled_counts_follow_budget_schedule(self):
        reports = run_trial(small_config(cycles=3), 7)
        assert [r.labeled_count for r in reports] == [6, 10, 14]

    def test_deterministic_modulo_wall_clock(self):
        a = run_trial(small_config(), 7)
        b = run_trial(small_config(), 7)
        strip = lambda rs: [
            (r.cycle, r.seed, r.labeled_count, r.test_accuracy, r.oe, r.ece) for r in rs
        ]
        assert strip(a) == strip(b)

    def test_every_sampler_runs(self):
        for sampler in ("rankedms", "entropy", "margin", "least_confidence", "random"):
            reports = run_trial(small_config(sampler=sampler, cycles=2), 3)
            assert [r.labeled_count for r in reports] == [6, 10]

    def test_shared_first_cycle_pool_across_samplers(self):
        a = run_trial(small_config(sampler="rankedms"), 11)
        b = run_trial(small_config(sampler="random"), 11)
        assert a[0].test_accuracy == b[0].test_accuracy

    def test_record_sink_sees_every_cycle(self):
        seen = {}
        run_trial(small_config(cycles=2), 7, record_sink=lambda c, recs: seen.setdefault(c, len(recs)))
        assert sorted(seen) == [1, 2]
        assert all(count == 20 for count in seen.values())


class TestRunExperiment:
    def test_single_seed_reports_zero_std(self):
        _, summary = run_experiment(small_config(seeds=(7,)))
        assert all(row["accuracy"]["std"] == 0.0 for row in summary["cycles"])

    def test_duplicate_seeds_report_zero_std(self):
        _, summary = run_experiment(small_config(seeds=(7, 7)))
        assert all(row["accuracy"]["std"] == 0.0 for row in summary["cycles"])

    def test_summary_row_count_equals_cycles(self):
        reports, summary = run_experiment(small_config(seeds=(1, 2, 3)))
        assert len(summary["cycles"]) == 3
        assert len(reports) == 9

    def test_failing_trial_names_seed(self):
        config = small_config(seeds=(1,))
        bad = ExperimentConfig(
            dataset=DatasetConfig(path="/nonexistent/file.csv", label_column=-1, num_classes=2),
            model=config.model,
            trainer=config.trainer,
            cmam=config.cmam,
            sampler=config.sampler,
            loop=config.loop,
            seeds=(123,),
        )
        with pytest.raises(RuntimeError, match="123"):
            run_experiment(bad)

    def test_seed_order_does_not_change_each_trials_rows(self):
        ra, _ = run_experiment(small_config(seeds=(1, 2)))
        rb, _ = run_experiment(small_config(seeds=(2, 1)))
        strip = lambda rs: {
            (r.seed, r.cycle): (r.labeled_count, r.test_accuracy, r.oe, r.ece) for r in rs
        }
        assert strip(ra) == strip(rb)


class TestEmitReports:
    def test_files_and_roundtrip(self, tmp_path):
        config = small_config(seeds=(1, 2))
        reports, summary = run_experiment(config)
        out = tmp_path / "out"
        emit_reports(reports, summary, out)
        with open(out / "cycles.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["cycle", "seed", "labeled", "accuracy", "oe", "ece", "train_seconds"]
        assert len(rows) == len(reports) + 1
        for row, rep in zip(rows[1:], reports):
            assert int(row[0]) == rep.cycle
            assert int(row[1]) == rep.seed
            assert int(row[2]) == rep.labeled_count
            assert float(row[3]) == rep.test_accuracy
            assert float(row[4]) == rep.oe
            assert float(row[5]) == rep.ece
        loaded = json.loads((out / "summary.json").read_text())
        assert loaded["config"]["sampler"] == "rankedms"
        assert loaded["config"]["loop"]["cycles"] == 3
        assert len(loaded["cycles"]) == 3

    def test_sample_dumps_land_in_seed_dirs(self, tmp_path):
        config = small_config(seeds=(1,), cycles=2)
        dumps = {}
        reports, summary = run_experiment(
            config, record_sink=lambda seed, cycle, recs: dumps.__setitem__((seed, cycle), recs)
        )
        out = tmp_path / "out"
        emit_reports(reports, summary, out, sample_dumps=dumps)
        assert (out / "seed_1" / "samples_cycle_1.csv").exists()
        assert (out / "seed_1" / "samples_cycle_2.csv").exists()

    def test_empty_reports_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_reports([], {}, tmp_path)


class TestCli:
    def test_gen_data_then_score_roundtrip(self, tmp_path):
        data_path = tmp_path / "moons.csv"
        assert cli_main([
            "gen-data", "--generator", "two_moons", "--n", "50", "--noise", "0.1",
            "--seed", "3", "--out", str(data_path),
        ]) == 0
        assert data_path.exists()

        probs_path = tmp_path / "probs.csv"
        probs_path.write_text("0.1,0.1,0.7,0.1\n0.3,0.23,0.23,0.24\n0.5,0.45,0.05,0.0\n")
        out_path = tmp_path / "scores.csv"
        assert cli_main([
            "score", "--method", "rankedms", "--probs", str(probs_path), "--out", str(out_path),
        ]) == 0
        with open(out_path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["row", "score"]
        scores = [float(r[1]) for r in rows[1:]]
        assert abs(scores[0] - 0.6) < 1e-12
        assert abs(scores[1] - 0.065) < 1e-12

    def test_run_command_writes_reports(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(CONFIG_DOC))
        out_dir = tmp_path / "results"
        assert cli_main([
            "run", "--config", str(config_path), "--out", str(out_dir), "--dump-samples",
        ]) == 0
        assert (out_dir / "cycles.csv").exists()
        assert (out_dir / "summary.json").exists()
        assert (out_dir / "seed_7" / "samples_cycle_1.csv").exists()

    def test_seed_override(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(CONFIG_DOC))
        out_dir = tmp_path / "results"
        assert cli_main([
            "run", "--config", str(config_path), "--out", str(out_dir),
            "--seed-override", "41,42",
        ]) == 0
        with open(out_dir / "cycles.csv", newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        assert sorted({int(r[1]) for r in rows}) == [41, 42]

    def test_config_output_dir_fallback(self, tmp_path):
        out_dir = tmp_path / "from_config"
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(dict(CONFIG_DOC, output_dir=str(out_dir))))
        assert cli_main(["run", "--config", str(config_path)]) == 0
        assert (out_dir / "cycles.csv").exists()

    def test_missing_output_dir_is_error(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(CONFIG_DOC))
        assert cli_main(["run", "--config", str(config_path)]) == 2

    def test_bad_config_returns_error_code(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(dict(CONFIG_DOC, sampler="bogus")))
        assert cli_main(["run", "--config", str(config_path), "--out", str(tmp_path / "o")]) == 2
