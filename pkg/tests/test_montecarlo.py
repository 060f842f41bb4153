import numpy as np
import pytest
from statsmodels.stats.proportion import proportion_confint

from hermit.channel import realize
from hermit.equalizer import Constellation
from hermit.errors import ConfigurationError
from hermit.montecarlo import (
    BerCurve,
    ExperimentConfig,
    aggregate,
    build_pipelines,
    channel_geometry,
    paired_difference,
    run_trial,
    run_trials,
    sweep,
    wilson_interval,
)

SMALL = ExperimentConfig(
    B=16, U=2, S=4, q=4, AC=16, rho_db=25.0, snr_grid_db=(0.0, 10.0),
    trials_per_point=20, channels_per_point=3, seed=7,
)


@pytest.fixture(scope="module")
def small_result():
    return sweep(SMALL)


class TestConfig:
    @pytest.mark.parametrize(
        "changes",
        [
            dict(trials_per_point=0),
            dict(channels_per_point=0),
            dict(S=5),
            dict(snr_grid_db=()),
            dict(q=0),
            dict(q=17),
            dict(AC=8),
            dict(methods=("JL", "foo")),
            dict(methods=()),
            dict(propagation="rayleigh"),
            dict(U=200),
        ],
    )
    def test_rejects(self, changes):
        with pytest.raises(ConfigurationError):
            SMALL.replace(**changes)

    def test_phase_only_allows_any_cardinality(self):
        cfg = SMALL.replace(methods=("DEq", "HERMIT-PQ"), AC=8)
        assert cfg.AC == 8

    def test_bits_per_trial(self):
        assert SMALL.bits_per_trial == 8


class TestTrials:
    def test_noiseless_digital_is_error_free(self):
        H, h_J, az = channel_geometry(SMALL, 0)
        ch = realize(H, h_J, 60.0, -np.inf, az)
        pipes = build_pipelines(ch, SMALL.replace(q=12, methods=("DEq", "JL")))
        errors = run_trials(ch, pipes, np.random.default_rng(0), 200)
        assert all(e.sum() == 0 for e in errors.values())

    def test_run_trial_is_deterministic(self):
        H, h_J, az = channel_geometry(SMALL, 1)
        ch = realize(H, h_J, 5.0, 25.0, az)
        pipes = build_pipelines(ch, SMALL)
        assert run_trial(ch, pipes, 3) == run_trial(ch, pipes, 3)
        assert set(run_trial(ch, pipes, 3)) == set(SMALL.methods)

    def test_shared_inputs_across_methods(self):
        # two copies of the same method must produce identical errors on each trial
        H, h_J, az = channel_geometry(SMALL, 0)
        ch = realize(H, h_J, 5.0, 25.0, az)
        cfg = SMALL.replace(methods=("DEq",))
        pipes = build_pipelines(ch, cfg)
        pipes["copy"] = pipes["DEq"]
        errors = run_trials(ch, pipes, 11, 50)
        np.testing.assert_array_equal(errors["DEq"], errors["copy"])


class TestSweep:
    def test_shape_and_determinism(self, small_result):
        assert small_result.errors.shape == (5, 2, 3, 20)
        again = sweep(SMALL)
        np.testing.assert_array_equal(small_result.errors, again.errors)

    def test_jobs_do_not_change_results(self, small_result):
        np.testing.assert_array_equal(sweep(SMALL, jobs=2).errors, small_result.errors)

    def test_snr_point_independent_of_grid(self, small_result):
        single = sweep(SMALL.replace(snr_grid_db=(10.0,)))
        np.testing.assert_array_equal(single.errors[:, 0], small_result.errors[:, 1])

    def test_seed_changes_results(self, small_result):
        assert not np.array_equal(sweep(SMALL.replace(seed=8)).errors, small_result.errors)

    def test_hermit_beats_digital(self, small_result):
        uq = small_result.curve("HERMIT-UQ").bit_errors.sum()
        deq = small_result.curve("DEq").bit_errors.sum()
        assert uq <= deq

    def test_jammerless_improves_with_snr(self):
        cfg = SMALL.replace(methods=("JL",), snr_grid_db=(-5.0, 0.0, 5.0), trials_per_point=50)
        ber = sweep(cfg).curve("JL").ber
        assert np.all(np.diff(ber) < 0)

    def test_records_aggregate_to_curves(self, small_result):
        curves = aggregate(small_result.records())
        for a, b in zip(curves, small_result.curves):
            assert a.method == b.method
            np.testing.assert_array_equal(a.bit_errors, b.bit_errors)
            np.testing.assert_array_equal(a.bits_total, b.bits_total)
            np.testing.assert_array_equal(a.snr_db, b.snr_db)

    def test_trial_errors_view(self, small_result):
        e = small_result.trial_errors("DEq", 10.0)
        assert e.shape == (3, 20)
        assert e.sum() == small_result.curve("DEq").bit_errors[1]


class TestStatistics:
    @pytest.mark.parametrize("k,n", [(0, 100), (1, 100), (37, 1000), (999, 1000), (1000, 1000), (5, 10**6)])
    def test_wilson_matches_statsmodels(self, k, n):
        low, high = wilson_interval(k, n)
        ref = proportion_confint(k, n, alpha=0.05, method="wilson")
        assert low == pytest.approx(ref[0], abs=1e-12)
        assert high == pytest.approx(ref[1], abs=1e-12)

    def test_merge(self):
        snr = np.array([0.0, 5.0])
        a = BerCurve("DEq", snr, np.array([3, 1]), np.array([100, 100]))
        b = BerCurve("DEq", snr, np.array([1, 0]), np.array([100, 100]))
        m = a.merge(b)
        np.testing.assert_array_equal(m.bit_errors, [4, 1])
        np.testing.assert_allclose(m.ber, [0.02, 0.005])
        assert m.at(5.0) == 0.005
        with pytest.raises(ValueError):
            a.merge(BerCurve("JL", snr, a.bit_errors, a.bits_total))

    def test_aggregate_empty(self):
        with pytest.raises(ValueError):
            aggregate([])

    def test_paired_difference(self):
        rng = np.random.default_rng(0)
        base = rng.poisson(5, 4000)
        diff, half = paired_difference(base + 1, base, 128)
        assert diff == pytest.approx(1 / 128)
        assert half == pytest.approx(0.0, abs=1e-15)
        diff, half = paired_difference(base + rng.integers(0, 3, 4000), base, 128)
        assert abs(diff - 1 / 128) < half
