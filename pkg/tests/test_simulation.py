import json
import math

import numpy as np
import pytest

from guarantee_pi.distributions import Laplace, Normal
from guarantee_pi.empirical import RngStream
from guarantee_pi.exceptions import DataError
from guarantee_pi.simulation import (
    EXPERIMENT_BETA,
    EXPERIMENT_XF,
    SimConfig,
    conditional_coverage,
    coverage_quantiles,
    experiment_model_config,
    generate_experiment_design,
    replicate,
    run_experiment,
)

LAPLACE = Laplace(1 / math.sqrt(2))


def small_config(**kwargs):
    base = dict(replications=12, b_roots=200, b_adjust=200, b_mc=200, master_seed=42)
    base.update(kwargs)
    return experiment_model_config(60, **base)


class TestConditionalCoverage:
    def test_zero_half_width(self):
        assert conditional_coverage(Normal(), 0.4, 0.0) == 0.0

    def test_symmetric_normal(self):
        assert conditional_coverage(Normal(), 0.0, 1.96) == pytest.approx(0.9500, abs=1e-4)

    def test_laplace_against_sampling(self):
        g = RngStream(8).generator
        hits = 0
        total = 10_000_000
        for _ in range(10):
            eps = g.laplace(0.0, LAPLACE.scale, total // 10)
            hits += np.count_nonzero(np.abs(eps - 0.3) <= 2.0)
        p_hat = hits / total
        se = math.sqrt(p_hat * (1 - p_hat) / total)
        assert abs(conditional_coverage(LAPLACE, 0.3, 2.0) - p_hat) < 3 * se

    def test_negative_half_width(self):
        with pytest.raises(ValueError):
            conditional_coverage(Normal(), 0.0, -1.0)


class TestDesign:
    def test_deterministic(self):
        a = generate_experiment_design(15, 100, seed=3)
        b = generate_experiment_design(15, 100, seed=3)
        assert a.tobytes() == b.tobytes()

    def test_column_means(self):
        X = generate_experiment_design(15, 1600, seed=1)
        assert np.all(np.abs(X.mean(axis=0)) < 0.1)

    def test_intercept_override(self):
        X = generate_experiment_design(15, 100, seed=3, intercept_column=True)
        assert np.all(X[:, 0] == 1.0)
        assert np.array_equal(X[:, 1:], generate_experiment_design(15, 100, seed=3)[:, 1:])

    def test_experiment_model_constants(self):
        assert len(EXPERIMENT_BETA) == 15
        assert EXPERIMENT_BETA[:5] == (1.0, 0.5, -1.0, -0.5, 0.0)
        assert all(b == 0 for b in EXPERIMENT_BETA[4:])
        assert EXPERIMENT_XF[0] == 0.0 and EXPERIMENT_XF[14] == pytest.approx(1.4)
        assert np.allclose(EXPERIMENT_XF, 0.1 * np.arange(15))


class TestCoverageQuantiles:
    def test_first_order_statistic(self):
        assert coverage_quantiles([0.9, 0.92, 0.94, 0.96], [0.25]).tolist() == [0.9]

    def test_max(self):
        assert coverage_quantiles([0.9, 0.96, 0.92], [1.0]).tolist() == [0.96]

    def test_uniform(self):
        u = RngStream(4).generator.uniform(size=10_000)
        assert abs(coverage_quantiles(u, [0.45])[0] - 0.45) < 0.02


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            experiment_model_config(10)
        with pytest.raises(ValueError):
            experiment_model_config(60, coverage_quantile_probs=(0.5, 0.4))
        with pytest.raises(ValueError):
            experiment_model_config(60, methods=("XYZ",))

    def test_from_dict_defaults(self):
        cfg = SimConfig.from_dict({"n": 100, "error": {"kind": "laplace"}})
        assert cfg.dist == LAPLACE
        assert cfg.methods == ("RB", "MFMB", "RBUG", "PRBUG")
        assert cfg.coverage_quantile_probs == (0.25, 0.45, 0.65, 0.85)
        assert cfg.xf == EXPERIMENT_XF

    def test_round_trip(self):
        cfg = small_config(dist=LAPLACE)
        assert SimConfig.from_dict(cfg.to_dict()) == cfg

    @pytest.mark.parametrize(
        "doc",
        [
            {"n": 100},
            {"n": 100, "error": {"kind": "cauchy"}},
            {"n": 100, "error": {"kind": "normal"}, "alpha": 1.5},
            {"n": 100, "error": {"kind": "normal"}, "bootstrap": {"b_roots": 10}},
            {"n": 100, "error": {"kind": "normal"}, "extra": 1},
            {"n": 100, "error": {"kind": "normal"}, "design": {"kind": "file"}},
        ],
    )
    def test_schema_violations(self, doc):
        with pytest.raises(DataError):
            SimConfig.from_dict(doc)


class TestRunExperiment:
    def test_single_replication(self):
        rep = run_experiment(small_config(replications=1))
        for m, res in rep.results.items():
            assert res.coverages.shape == (1,)
            assert res.guarantee_level in (0.0, 1.0)

    def test_aggregates(self):
        cfg = small_config()
        rep = run_experiment(cfg)
        assert set(rep.results) == {"RB", "MFMB", "RBUG", "PRBUG"}
        for res in rep.results.values():
            brute = sum(1 for c in res.coverages if c >= 0.95) / cfg.replications
            assert res.guarantee_level == brute
            perm = RngStream(1).generator.permutation(res.coverages)
            assert np.count_nonzero(perm >= 0.95) / perm.size == res.guarantee_level
            assert np.all((res.coverages >= 0) & (res.coverages <= 1))
            assert res.coverage_quantiles.tolist() == coverage_quantiles(
                res.coverages, cfg.coverage_quantile_probs
            ).tolist()

    def test_rbug_dominates_rb(self):
        rep = run_experiment(small_config(replications=20))
        rb, ug = rep.results["RB"], rep.results["RBUG"]
        nonneg = ug.d_hats >= 0
        assert nonneg.any()
        assert np.all(ug.coverages[nonneg] >= rb.coverages[nonneg])
        assert np.all(ug.half_widths[nonneg] >= rb.half_widths[nonneg])

    def test_replication_matches_interval_api(self):
        from guarantee_pi.intervals import rbug_interval
        from guarantee_pi.model_core import Dataset, fit_ols

        cfg = small_config(methods=("RBUG",))
        X = cfg.design_matrix()
        row = replicate(cfg, X, 3)
        rng = RngStream(cfg.master_seed, (1, 3))
        eps = cfg.dist.sample(rng.substream(0), cfg.n)
        model = fit_ols(Dataset(X, X @ np.array(cfg.beta) + eps))
        pi = rbug_interval(model, cfg.xf, cfg.bootstrap_config(), rng.substream(1, 0))
        assert row["RBUG"][1] == pi.half_width
        assert row["RBUG"][2] == pi.d_hat

    def test_parallel_identical(self):
        cfg = small_config(replications=9)
        a = run_experiment(cfg, threads=1)
        b = run_experiment(cfg, threads=3)
        assert a.to_csv() == b.to_csv()
        da, db = a.to_dict(), b.to_dict()
        da["metadata"].pop("wall_time_seconds")
        db["metadata"].pop("wall_time_seconds")
        assert da == db

    def test_method_failure_recorded(self, tmp_path):
        # a dummy-coded single row has leverage one, so leave-one-out residuals fail
        g = np.random.default_rng(0)
        n = 30
        X = np.column_stack([np.ones(n), g.standard_normal(n), np.eye(n)[0]])
        path = tmp_path / "design.csv"
        np.savetxt(path, X, delimiter=",", header="x0,x1,x2", comments="")
        cfg = SimConfig.from_dict(
            {
                "n": n,
                "beta": [1.0, 1.0, 0.0],
                "xf": [1.0, 0.5, 0.0],
                "error": {"kind": "normal"},
                "design": {"kind": "file", "path": str(path)},
                "replications": 3,
                "bootstrap": {"b_roots": 100, "b_adjust": 100, "b_mc": 100},
            }
        )
        rep = run_experiment(cfg)
        assert set(rep.results) == {"RB", "RBUG"}
        assert "LeverageOne" in rep.failures["MFMB"] and "LeverageOne" in rep.failures["PRBUG"]
        assert "FAILED" in rep.summary_table()


@pytest.fixture(scope="module")
def report():
    return run_experiment(small_config(replications=7))


class TestReportFormats:
    def test_json_round_trip(self, report):
        text = report.to_json()
        assert json.dumps(json.loads(text), sort_keys=True, indent=2) == text
        doc = json.loads(text)
        assert doc["metadata"]["generator"].startswith("numpy.random.PCG64DXSM")
        assert len(doc["methods"]["RB"]["coverages"]) == 7
        assert SimConfig.from_dict(doc["config"]) == report.config

    def test_csv(self, report):
        lines = report.to_csv().splitlines()
        assert lines[0] == "method,metric,value"
        assert "RB,guarantee_level," + repr(report.results["RB"].guarantee_level) in lines

    def test_histogram(self, report):
        rows = report.histogram("RBUG")
        assert len(rows) == 400
        assert sum(c for _, _, c in rows) == 7
        assert rows[0][0] == 0.0 and rows[-1][1] == pytest.approx(1.0)
        for lo, hi, c in rows:
            inside = np.count_nonzero((report.results["RBUG"].coverages >= lo) & (report.results["RBUG"].coverages < hi))
            if hi < 1.0:
                assert inside == c

    def test_write(self, report, tmp_path):
        paths = report.write(tmp_path / "out")
        names = sorted(p.name for p in paths)
        assert "report.json" in names and "report.csv" in names
        assert "histogram_PRBUG.csv" in names
        assert (tmp_path / "out" / "histogram_RB.csv").read_text().startswith("bin_low,bin_high,count\n")

    def test_summary(self, report):
        text = report.summary_table()
        assert "Guarantee" in text and "RBUG" in text
        assert f"{100 * report.results['RB'].guarantee_level:.4f}%" in text
