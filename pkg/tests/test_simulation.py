from __future__ import annotations

import numpy as np
import pytest

from quantcorr.errors import NonStationary, ValidationError
from quantcorr.simulation import (
    ExperimentReport,
    _esd_se,
    check_stationary,
    gen_ar,
    gen_random_coef_qar1,
    gen_trivariate_normal,
    random_coefficient,
    rng_stream,
    run_experiment,
)


@pytest.fixture(scope="module")
def small_report():
    return run_experiment(1, n_list=(60,), tau_list=(0.5,), reps=20, rules=("hs", "b"), seed=3)


class TestStreams:
    def test_deterministic(self):
        a = rng_stream(5, 100, 7).standard_normal(10)
        b = rng_stream(5, 100, 7).standard_normal(10)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams(self):
        base = rng_stream(5, 100, 7).standard_normal(10)
        for other in (rng_stream(6, 100, 7), rng_stream(5, 101, 7), rng_stream(5, 100, 8), rng_stream(5, 100, 7, 0)):
            assert not np.array_equal(base, other.standard_normal(10))


class TestGenerators:
    def test_trivariate_covariance(self):
        x, y, z = gen_trivariate_normal(100_000, rng_stream(1, 0))
        cov = np.cov(np.vstack([x, y, z]))
        np.testing.assert_allclose(cov, [[1, 0.5, 0.5], [0.5, 1, 0.5], [0.5, 0.5, 1]], atol=0.02)

    def test_random_coefficient(self):
        np.testing.assert_allclose(random_coefficient([0.0, 0.25, 0.5, 0.9]), [0.8, 0.4, 0.0, 0.0])

    def test_random_coefficient_path_is_stable(self):
        y = gen_random_coef_qar1(20_000, rng_stream(2, 0))
        assert np.all(np.isfinite(y))
        # the two halves of a stationary path share their spread
        assert np.std(y[:10_000]) == pytest.approx(np.std(y[10_000:]), rel=0.1)

    def test_ar1_moments(self):
        y = gen_ar(200_000, 0.1, [0.5], rng_stream(3, 0))
        assert y.mean() == pytest.approx(0.2, abs=0.02)
        assert y.var() == pytest.approx(4.0 / 3.0, abs=0.03)
        assert np.corrcoef(y[1:], y[:-1])[0, 1] == pytest.approx(0.5, abs=0.01)

    def test_nonstationary(self):
        with pytest.raises(NonStationary):
            check_stationary([0.5, 0.6])
        with pytest.raises(NonStationary):
            gen_ar(10, 0.0, [1.0], rng_stream(0))
        check_stationary([0.5, 0.4])
        check_stationary([])

    def test_invalid_length(self):
        with pytest.raises(ValidationError):
            gen_ar(0, 0.0, [0.5], rng_stream(0))


class TestReport:
    def test_cells(self, small_report):
        assert isinstance(small_report, ExperimentReport)
        cell = small_report.get(60, 0.5, "qcor", "BIAS")
        assert cell.mc_se > 0
        measures = {c.measure for c in small_report.cells}
        assert measures == {"BIAS", "ESD", "ASD_hs", "ASD_b"}
        assert len(small_report.rows()) == len(small_report.cells)
        with pytest.raises(KeyError):
            small_report.get(60, 0.5, "qcor", "REJECT")

    def test_text_layout(self, small_report):
        text = small_report.to_text()
        lines = text.splitlines()
        assert lines[0] == "# experiment: 1"
        assert any(line.startswith("# seed: 3") for line in lines)
        table = [line for line in lines if not line.startswith("#")]
        assert table[0].split() == ["n", "tau", "setting", "statistic", "BIAS", "ESD", "ASD_hs", "ASD_b"]
        assert len(table) == 3
        bias = small_report.get(60, 0.5, "qcor", "BIAS").value
        assert f"{bias:.4f}" in table[1]

    def test_reproducible_across_workers(self):
        kwargs = dict(n_list=(50,), tau_list=(0.5,), reps=6, rules=("hs",), seed=11)
        serial = run_experiment(3, workers=1, **kwargs)
        parallel = run_experiment(3, workers=2, **kwargs)
        assert serial.cells == parallel.cells

    def test_seed_changes_results(self):
        kwargs = dict(n_list=(50,), tau_list=(0.5,), reps=5, rules=("hs",))
        assert run_experiment(3, seed=1, **kwargs).cells != run_experiment(3, seed=2, **kwargs).cells

    def test_experiment5_rates(self):
        rep = run_experiment(5, n_list=(100,), tau_list=(0.5,), reps=10, rules=("hs",), seed=0, phis=(0.0,))
        cell = rep.get(100, 0.5, "Q_BP(6)", "REJECT", "phi=0")
        assert 0.0 <= cell.value <= 1.0
        assert cell.mc_se == pytest.approx(np.sqrt(cell.value * (1 - cell.value) / 10))

    def test_figure1_measures(self):
        rep = run_experiment("figure1", n_list=(100,), tau_list=(0.2,), reps=4, rules=("hs",), seed=0, max_lag=3)
        assert {c.measure for c in rep.cells} == {"MEAN", "FLAG_RATE"}
        assert {c.statistic for c in rep.cells} == {"phi_11", "phi_22", "phi_33"}

    @pytest.mark.parametrize("kwargs", [dict(experiment=9), dict(experiment=1, reps=0),
                                        dict(experiment=1, workers=0), dict(experiment=1, rules=()),
                                        dict(experiment=1, bogus=1)])
    def test_validation(self, kwargs):
        with pytest.raises(ValidationError):
            run_experiment(n_list=(50,), **kwargs)


class TestMonteCarloErrors:
    def test_esd_se_normal_limit(self):
        # for normal data the standard error of s is s / sqrt(2R)
        x = rng_stream(4, 0).standard_normal(200_000)
        assert _esd_se(x) == pytest.approx(1.0 / np.sqrt(2 * x.size), rel=0.02)

    def test_esd_se_matches_replication_spread(self):
        sds = [np.std(rng_stream(5, r).standard_normal(400), ddof=1) for r in range(2000)]
        assert np.std(sds) == pytest.approx(_esd_se(rng_stream(6, 0).standard_normal(400)), rel=0.15)
