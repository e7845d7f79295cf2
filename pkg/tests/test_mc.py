"""Monte Carlo oracle: estimates, buckets, comparison contract."""
import math

import pytest

from claimflow import (
    ConfigurationError,
    ConstantIntensity,
    DelayLaw,
    DeterministicDeflator,
    DevelopmentLaw,
    ExponentialDelay,
    InsufficientDataError,
    LogOUIntensity,
    MarkLaw,
    MartingaleDeflator,
    McConfig,
    McEstimate,
    PortfolioState,
    ReserveResult,
    compare,
    mc_conditional_reserve,
    mc_reserve,
    reserve,
)


def _config(**overrides):
    base = dict(
        n_policies=4,
        t=0.0,
        T=1.0,
        intensity=ConstantIntensity(1.0),
        delay=DelayLaw(alpha0=0.2, density=ExponentialDelay(2.0)),
        first_mark=MarkLaw(mean=1.0, kind="exponential"),
        development=DevelopmentLaw(rate=1.0, mark=MarkLaw(mean=0.5, kind="exponential")),
        market=DeterministicDeflator(1.0),
        n_paths=4000,
        seed=1,
    )
    base.update(overrides)
    return McConfig(**base)


def test_zero_policies_give_zero():
    estimate = mc_reserve(_config(n_policies=0))
    assert estimate.mean == 0.0
    assert estimate.std_error == 0.0


def test_degenerate_scenario_has_zero_std_error():
    # Near-certain immediate accident, instant report, fixed payment of 2.0:
    # every path pays exactly the same amount.
    config = _config(
        n_policies=1,
        intensity=ConstantIntensity(1000.0),
        delay=DelayLaw(alpha0=1.0),
        first_mark=MarkLaw(mean=2.0),
        development=DevelopmentLaw(rate=0.0, mark=MarkLaw(mean=1.0)),
        n_paths=500,
    )
    estimate = mc_reserve(config)
    assert estimate.mean == 2.0
    assert estimate.std_error == 0.0


def test_std_error_scaling_with_path_count():
    small = mc_reserve(_config(n_paths=4000, seed=21))
    large = mc_reserve(_config(n_paths=16000, seed=22))
    ratio = small.std_error / large.std_error
    assert 2.0 * 0.8 <= ratio <= 2.0 * 1.2


def test_thread_count_does_not_change_results():
    config = _config(n_paths=10_000, market=MartingaleDeflator(init=1.0, vol=0.2))
    one = mc_reserve(config, threads=1)
    three = mc_reserve(config, threads=3)
    assert one.mean == three.mean
    assert one.std_error == three.std_error


def test_reproducible_across_calls():
    config = _config(n_paths=5000)
    assert mc_reserve(config) == mc_reserve(config)


def test_antithetic_matches_analytic_and_halves_effective_count():
    config = _config(n_paths=40_000, market=MartingaleDeflator(init=1.0, vol=0.3),
                     antithetic=True, seed=8)
    estimate = mc_reserve(config)
    assert estimate.n_effective == 20_000
    state = PortfolioState.from_counts(0.0, 4, 0)
    analytic = reserve(state, config.intensity, config.delay, config.first_mark,
                       config.development, config.T, market=config.market)
    assert abs(analytic.total - estimate.mean) <= 3.0 * estimate.std_error


def test_ci_is_mean_plus_minus_1_96_se():
    estimate = mc_reserve(_config(n_paths=2000))
    lo, hi = estimate.ci95
    assert lo == pytest.approx(estimate.mean - 1.96 * estimate.std_error)
    assert hi == pytest.approx(estimate.mean + 1.96 * estimate.std_error)


# ---------------------------------------------------------------------------
# Config validation
# ---------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigurationError):
        _config(n_paths=50)
    with pytest.raises(ConfigurationError):
        _config(t=0.5)  # unconditional valuation away from zero
    with pytest.raises(ConfigurationError):
        _config(t=0.5, T=0.4, conditioning=0)
    with pytest.raises(ConfigurationError):
        _config(antithetic=True)  # deterministic deflator has no noise to mirror
    with pytest.raises(ConfigurationError):
        _config(market=MartingaleDeflator(init=1.0, vol=0.1, corr_with_intensity=0.5))


def test_conditional_regime_validation():
    stochastic = LogOUIntensity(mean_rev=2.0, long_run_log_level=0.0, vol=0.5, init=1.0)
    with pytest.raises(ConfigurationError):
        _config(t=0.5, conditioning=1, intensity=stochastic)
    with pytest.raises(ConfigurationError):
        _config(t=0.5, conditioning=1, market=MartingaleDeflator(init=1.0, vol=0.2))
    with pytest.raises(ConfigurationError):
        _config(t=0.5, conditioning=5)  # more reported than policies


def test_conditional_insufficient_data():
    # With a tiny hazard the all-reported bucket is essentially unreachable.
    config = _config(t=0.5, T=1.0, conditioning=4,
                     intensity=ConstantIntensity(0.01), n_paths=2000, seed=3)
    with pytest.raises(InsufficientDataError):
        mc_conditional_reserve(config)


def test_conditional_bucket_matches_reported_only_value():
    # All policies reported by t: the bucket mean is the pure development
    # accrual rate * mean * n * (T - t).
    config = _config(
        n_policies=2, t=0.5, T=1.5,
        intensity=ConstantIntensity(30.0),
        delay=DelayLaw(alpha0=1.0),
        development=DevelopmentLaw(rate=2.0, mark=MarkLaw(mean=0.5, kind="exponential")),
        n_paths=30_000, conditioning=2, seed=5,
    )
    estimate = mc_conditional_reserve(config)
    expected = 2.0 * 0.5 * 2 * 1.0
    assert abs(estimate.mean - expected) <= 3.0 * estimate.std_error


def test_conditional_bucket_none_reported_matches_ratio_formula():
    # Zero delay, no development: each unreported policy is worth
    # E[X1] * (reporting mass in (t, T]) / (surviving mass at t).
    mu, t, T = 1.0, 0.5, 1.5
    config = _config(
        n_policies=2, t=t, T=T,
        intensity=ConstantIntensity(mu),
        delay=DelayLaw(alpha0=1.0),
        first_mark=MarkLaw(mean=2.0),
        development=DevelopmentLaw(rate=0.0, mark=MarkLaw(mean=1.0)),
        n_paths=50_000, conditioning=0, seed=6,
    )
    estimate = mc_conditional_reserve(config)
    expected = 2 * 2.0 * (math.exp(-mu * t) - math.exp(-mu * T)) / math.exp(-mu * t)
    assert abs(estimate.mean - expected) <= 3.0 * estimate.std_error


def test_mc_reserve_rejects_conditioned_config():
    config = _config(t=0.5, conditioning=1)
    with pytest.raises(ConfigurationError):
        mc_reserve(config)
    with pytest.raises(ConfigurationError):
        mc_conditional_reserve(_config())


# ---------------------------------------------------------------------------
# Comparison contract
# ---------------------------------------------------------------------------

def _analytic(total):
    return ReserveResult(as_of=0.0, horizon=1.0, reported_component=total,
                         unreported_component=0.0, total=total, diagnostics={})


def _mc(mean, se):
    return McEstimate(mean=mean, std_error=se, n_effective=1000,
                      ci95=(mean - 1.96 * se, mean + 1.96 * se))


def test_compare_passes_small_z():
    report = compare(_analytic(20.0), _mc(20.01, 0.02))
    assert report.z == pytest.approx(-0.5)
    assert report.passed


def test_compare_fails_large_z():
    report = compare(_analytic(20.0), _mc(21.0, 0.1))
    assert report.z == pytest.approx(-10.0)
    assert not report.passed


def test_compare_exact_degenerate_match():
    report = compare(_analytic(0.0), _mc(0.0, 0.0))
    assert report.passed
    assert report.z == 0.0


def test_compare_degenerate_mismatch_hard_fails():
    report = compare(_analytic(1.0), _mc(0.0, 0.0))
    assert not report.passed
    assert math.isinf(report.z)
