import math

import numpy as np
import pytest

from aha.aggregates import StatisticRequest
from aha.bench import (
    BenchConfig,
    CostRates,
    FeatureQuery,
    SolutionCost,
    ZipfConfig,
    calibrate_sampling,
    cost_model,
    generate_zipf,
    normalize_costs,
    observed_cohorts,
    run_baseline,
    run_experiments,
    score_accuracy,
    unique_leaf_ratio,
)
from aha.detectors import DetectorConfig
from aha.errors import SchemaError


def small_config(**kw) -> ZipfConfig:
    defaults = dict(
        attributes=3,
        values_per_attribute=4,
        alpha=1.1,
        sessions_per_epoch=400,
        epochs=3,
        anomaly_probability=0.05,
        anomaly_magnitude=50.0,
        seed=5,
    )
    defaults.update(kw)
    return ZipfConfig(**defaults)


MEAN = FeatureQuery(StatisticRequest("mean", "m0"))
SUM = FeatureQuery(StatisticRequest("sum", "m0"))
COUNT = FeatureQuery(StatisticRequest("count", "m0"))


class TestZipfGenerator:
    def test_same_seed_identical(self):
        a = generate_zipf(small_config())
        b = generate_zipf(small_config())
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa.codes, fb.codes)
            assert np.array_equal(fa.values, fb.values)
        assert a.anomalies == b.anomalies

    def test_different_seed_differs(self):
        a = generate_zipf(small_config(seed=1))
        b = generate_zipf(small_config(seed=2))
        assert not np.array_equal(a.frames[0].codes, b.frames[0].codes)

    def test_alpha_zero_is_uniform(self):
        config = ZipfConfig(
            attributes=1, values_per_attribute=5, alpha=0.0,
            sessions_per_epoch=100_000, epochs=1, seed=3,
        )
        codes = generate_zipf(config).frames[0].codes[:, 0]
        counts = np.bincount(codes, minlength=5)
        expected = len(codes) / 5
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        assert chi2 < 20.0  # 4 dof; this is a loose sanity bound

    def test_alpha_one_top_mass_matches_hand_normalization(self):
        # k^-1 over {1,2,3} normalizes to 6/11 for the top code
        config = ZipfConfig(
            attributes=1, values_per_attribute=3, alpha=1.0,
            sessions_per_epoch=100_000, epochs=1, seed=4,
        )
        expected_p = (1.0) / (1.0 + 0.5 + 1.0 / 3.0)
        assert expected_p == pytest.approx(6.0 / 11.0)
        codes = generate_zipf(config).frames[0].codes[:, 0]
        observed = float(np.mean(codes == 0))
        sigma = math.sqrt(expected_p * (1 - expected_p) / len(codes))
        assert abs(observed - expected_p) <= 3 * sigma

    def test_values_are_quantized_and_bounded(self):
        dataset = generate_zipf(small_config())
        values = dataset.frames[0].values
        assert np.array_equal(values, np.round(values * 256) / 256)
        assert np.all(np.abs(values) < 800)

    def test_anomaly_labels_refer_to_observed_leaves(self):
        dataset = generate_zipf(small_config(anomaly_probability=0.3))
        assert dataset.anomalies, "expected some injected anomalies"
        for leaf, epoch in dataset.anomalies:
            frame = dataset.frames[epoch]
            assert any(tuple(row) == leaf for row in frame.codes)

    def test_unique_leaf_ratio_decreases_with_samples(self):
        ratios = []
        for n in (1_000, 10_000, 100_000):
            config = ZipfConfig(
                attributes=3, values_per_attribute=20, alpha=1.2,
                sessions_per_epoch=n, epochs=1, seed=9,
            )
            ratios.append(unique_leaf_ratio(generate_zipf(config).frames[0]))
        assert ratios[0] > ratios[1] > ratios[2]


class TestBaselines:
    def test_sampling_rate_one_equals_store_raw(self):
        dataset = generate_zipf(small_config())
        patterns = observed_cohorts(dataset)
        queries = [MEAN, SUM, COUNT]
        oracle = run_baseline("store_raw", dataset, patterns, queries)
        full = run_baseline("sampling", dataset, patterns, queries, rate=1.0)
        for stat in oracle.answers:
            a, b = oracle.answers[stat], full.answers[stat]
            assert np.array_equal(a.present, b.present)
            assert np.array_equal(
                np.nan_to_num(a.values), np.nan_to_num(b.values)
            )

    def test_inverse_probability_scaling(self):
        # unit-level: sampled cohort sum 10 at rate 0.5 estimates 20
        from aha.bench.baselines import _scaled_stat

        assert _scaled_stat(np.array([4.0, 6.0]), "sum", 0.5) == 20.0
        assert _scaled_stat(np.array([4.0, 6.0]), "count", 0.5) == 4.0
        assert _scaled_stat(np.array([4.0, 6.0]), "mean", 0.5) == 5.0  # ratio: unscaled
        assert _scaled_stat(np.array([4.0, 6.0]), "max", 0.5) == 6.0

    def test_strong_solutions_agree_exactly(self):
        dataset = generate_zipf(small_config(seed=21))
        patterns = observed_cohorts(dataset)
        queries = [MEAN, SUM, COUNT]
        oracle = run_baseline("store_raw", dataset, patterns, queries)
        for kind in ("aha", "key_value_store"):
            result = run_baseline(kind, dataset, patterns, queries)
            for stat in oracle.answers:
                a, b = oracle.answers[stat], result.answers[stat]
                assert np.array_equal(a.present, b.present)
                ok = np.isclose(
                    np.nan_to_num(a.values), np.nan_to_num(b.values),
                    rtol=0.0, atol=0.0, equal_nan=False,
                )
                assert ok.all(), f"{kind} diverged from the raw oracle on {stat.render()}"

    def test_sampling_misses_small_cohorts(self):
        dataset = generate_zipf(small_config(sessions_per_epoch=2000, seed=2))
        patterns = observed_cohorts(dataset)
        queries = [MEAN]
        sampled = run_baseline("sampling", dataset, patterns, queries, rate=0.05)
        oracle = run_baseline("store_raw", dataset, patterns, queries)
        stat = MEAN.stat
        missing = oracle.answers[stat].present & ~sampled.answers[stat].present
        assert missing.any(), "a 5% sample should leave some cohort-epochs empty"

    def test_quantile_queries_rejected(self):
        with pytest.raises(SchemaError):
            FeatureQuery(StatisticRequest("quantile", "m0", 0.5))

    def test_unknown_kind(self):
        dataset = generate_zipf(small_config())
        with pytest.raises(SchemaError):
            run_baseline("parquet", dataset, [], [])


class TestScoring:
    def test_identical_answers_score_perfect(self):
        dataset = generate_zipf(small_config())
        patterns = observed_cohorts(dataset)
        queries = [MEAN, COUNT]
        oracle = run_baseline("store_raw", dataset, patterns, queries)
        configs = [
            DetectorConfig(kind="three_sigma", feature=MEAN.stat, window=2, min_history=1)
        ]
        report = score_accuracy(oracle, oracle, configs)
        assert report.metric_mean == 1.0 and report.metric_p10 == 1.0
        assert report.task_mean == 1.0 and report.task_p10 == 1.0

    def test_aha_scores_perfect_against_oracle(self):
        dataset = generate_zipf(small_config(seed=31))
        patterns = observed_cohorts(dataset)
        queries = [MEAN, SUM, COUNT]
        oracle = run_baseline("store_raw", dataset, patterns, queries)
        result = run_baseline("aha", dataset, patterns, queries)
        configs = [
            DetectorConfig(kind="three_sigma", feature=MEAN.stat, window=2, min_history=1),
            DetectorConfig(kind="knn", feature=MEAN.stat, window=2, knn_k=1, knn_tau=10.0, min_history=1),
        ]
        report = score_accuracy(result, oracle, configs)
        assert report.metric_mean == 1.0
        assert report.task_mean == 1.0

    def test_sampling_scores_below_perfect(self):
        dataset = generate_zipf(small_config(sessions_per_epoch=3000, epochs=5, seed=13))
        patterns = observed_cohorts(dataset)
        queries = [MEAN]
        oracle = run_baseline("store_raw", dataset, patterns, queries)
        sampled = run_baseline("sampling", dataset, patterns, queries, rate=0.1)
        configs = [
            DetectorConfig(kind="three_sigma", feature=MEAN.stat, window=3, min_history=2)
        ]
        report = score_accuracy(sampled, oracle, configs)
        assert report.metric_mean < 1.0
        assert report.task_mean < 1.0
        assert report.task_p10 < report.task_mean

    def test_mismatched_query_sets_rejected(self):
        dataset = generate_zipf(small_config())
        patterns = observed_cohorts(dataset)
        a = run_baseline("store_raw", dataset, patterns, [MEAN])
        b = run_baseline("store_raw", dataset, patterns, [COUNT])
        with pytest.raises(SchemaError):
            score_accuracy(a, b)


class TestCostModel:
    def test_paper_constants(self):
        assert cost_model(1.0, 0.0) == 0.96
        assert cost_model(0.0, 1.0) == 0.15

    def test_zero_is_free(self):
        assert cost_model(0.0, 0.0) == 0.0

    def test_linear_combination(self):
        assert cost_model(2.0, 10.0) == pytest.approx(3.42)

    def test_linear_and_monotone(self):
        base = cost_model(2.0, 3.0)
        assert cost_model(4.0, 6.0) == pytest.approx(2 * base)
        assert cost_model(2.5, 3.0) > base
        assert cost_model(2.0, 3.5) > base

    def test_negative_rejected(self):
        with pytest.raises(SchemaError):
            cost_model(-1.0, 0.0)

    def test_custom_rates(self):
        rates = CostRates(compute_dollars_per_hour=2.0, storage_dollars_per_gb_month=1.0)
        assert cost_model(1.0, 1.0, rates) == 3.0

    def test_normalization_reference_is_one(self):
        costs = {
            "store_raw": SolutionCost("store_raw", 100.0, 10**9),
            "aha": SolutionCost("aha", 10.0, 10**7),
        }
        normalized = normalize_costs(costs)
        assert normalized["store_raw"] == 1.0
        assert normalized["aha"] < 1.0


@pytest.fixture(scope="module")
def calibration_setup():
    dataset = generate_zipf(small_config(sessions_per_epoch=1500, epochs=4, seed=17))
    patterns = observed_cohorts(dataset)
    queries = [MEAN]
    oracle = run_baseline("store_raw", dataset, patterns, queries)
    return dataset, patterns, queries, oracle


class TestCalibrateSampling:

    def test_infinite_epsilon_picks_cheapest(self, calibration_setup):
        dataset, patterns, queries, oracle = calibration_setup
        assert calibrate_sampling(dataset, patterns, queries, 0.95, math.inf, oracle=oracle) == 0.01

    def test_zero_epsilon_needs_full_rate(self, calibration_setup):
        dataset, patterns, queries, oracle = calibration_setup
        assert calibrate_sampling(dataset, patterns, queries, 1.0, 0.0, oracle=oracle) == 1.0

    def test_monotone_in_epsilon(self, calibration_setup):
        dataset, patterns, queries, oracle = calibration_setup
        rates = [
            calibrate_sampling(dataset, patterns, queries, 0.95, eps, oracle=oracle)
            for eps in (0.0, 0.01, 0.05, 0.2, math.inf)
        ]
        assert rates == sorted(rates, reverse=True)
        assert rates[0] == 1.0 and rates[-1] == 0.01


class TestExperiments:
    def test_sparsity_suite(self, tmp_path):
        config = BenchConfig(
            sparsity=ZipfConfig(
                attributes=3, values_per_attribute=12, alpha=1.2,
                sessions_per_epoch=0, epochs=1, seed=0,
            ),
            sparsity_sizes=(500, 5_000, 50_000),
            sparsity_seeds=2,
        )
        summary = run_experiments("sparsity", config, tmp_path)
        assert not summary["partial"]
        means = summary["mean_ratio_by_size"]
        sizes = sorted(means)
        assert means[sizes[0]] > means[sizes[1]] > means[sizes[2]]
        assert (tmp_path / "sparsity.csv").exists()

    def test_accuracy_cost_suite_smoke(self, tmp_path):
        config = BenchConfig(
            workload=ZipfConfig(
                attributes=3, values_per_attribute=4, alpha=1.1,
                sessions_per_epoch=800, epochs=3,
                anomaly_probability=0.05, anomaly_magnitude=50.0, seed=3,
            ),
            max_patterns=400,
            detector_window=2,
        )
        summary = run_experiments("accuracy_cost", config, tmp_path)
        solutions = summary["solutions"]
        assert solutions["store_raw"]["normalized_cost"] == 1.0
        assert solutions["aha"]["metric_accuracy_mean"] == 1.0
        assert solutions["aha"]["task_accuracy_mean"] == 1.0
        assert (tmp_path / "accuracy_cost.csv").exists()

    def test_attribute_scaling_trend(self, tmp_path):
        config = BenchConfig(
            workload=ZipfConfig(
                attributes=3, values_per_attribute=5, alpha=1.1,
                sessions_per_epoch=2500, epochs=4,
                anomaly_probability=0.05, anomaly_magnitude=50.0, seed=3,
            ),
            attribute_counts=(2, 3, 4, 5),
            scaling_sessions=2500,
            scaling_epochs=4,
            max_patterns=800,
            detector_window=2,
            sampling_rate=0.1,
        )
        summary = run_experiments("attribute_scaling", config, tmp_path)
        aha = [c for c in summary["cells"] if c["solution"] == "aha"]
        sampling = [c for c in summary["cells"] if c["solution"] == "sampling"]
        assert all(c["task_accuracy_mean"] == 1.0 for c in aha)
        assert all(c["metric_accuracy_mean"] == 1.0 for c in aha)
        task = [c["task_accuracy_mean"] for c in sampling]
        assert all(b <= a for a, b in zip(task, task[1:])), task
        assert (tmp_path / "attribute_scaling.csv").exists()

    def test_workload_scaling_is_roughly_additive(self, tmp_path):
        config = BenchConfig(
            workload=ZipfConfig(
                attributes=3, values_per_attribute=4, alpha=1.1,
                sessions_per_epoch=4000, epochs=4, seed=3,
            ),
            pipeline_counts=(1, 4),
            max_patterns=500,
        )
        summary = run_experiments("workload_scaling", config, tmp_path)
        cells = {c["pipelines"]: c["dollars"] for c in summary["cells"]}
        # independent pipelines compose additively; allow per-seed noise
        assert cells[4] <= 4 * cells[1] * 1.5

    def test_budget_flagging(self, tmp_path):
        config = BenchConfig(max_seconds=0.0, sparsity_sizes=(500,), sparsity_seeds=1)
        summary = run_experiments("sparsity", config, tmp_path)
        assert summary["partial"]
        assert (tmp_path / "sparsity.PARTIAL").exists()

    def test_unknown_suite(self, tmp_path):
        with pytest.raises(SchemaError):
            run_experiments("nope", BenchConfig(), tmp_path)

    def test_config_from_toml(self, tmp_path):
        doc = """
[workload]
attributes = 2
values_per_attribute = 3
alpha = 0.5
sessions_per_epoch = 100
epochs = 2
seed = 1

[suite]
sampling_rate = 0.2
max_seconds = 30
attribute_counts = [2, 3]

[sparsity]
attributes = 2
values_per_attribute = 9
alpha = 1.0
seeds = 3
sample_sizes = [100, 1000]
"""
        path = tmp_path / "bench.toml"
        path.write_text(doc)
        config = BenchConfig.from_toml(path)
        assert config.workload.attributes == 2
        assert config.sampling_rate == 0.2
        assert config.attribute_counts == (2, 3)
        assert config.sparsity.values_per_attribute == 9
        assert config.sparsity_sizes == (100, 1000)
        assert config.sparsity_seeds == 3
