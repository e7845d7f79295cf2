"""Portfolio simulation: sampling laws, records, observable state."""
import math

import numpy as np
import pytest
from scipy import stats

from claimflow import (
    ClaimRecord,
    ConfigurationError,
    ConstantIntensity,
    DelayLaw,
    DevelopmentLaw,
    ExponentialDelay,
    GammaDelay,
    MarkLaw,
    PortfolioState,
    TimeGrid,
    invert_hazard,
    observed_state,
    sample_accident_time,
    sample_delay,
    sample_development,
    simulate_intensity_path,
    simulate_portfolio,
)
from claimflow.claims import STREAM_ACCIDENT
from claimflow._rng import substream


def _unit_path(t_end=2.0):
    return simulate_intensity_path(ConstantIntensity(1.0), TimeGrid.regular(t_end))


# ---------------------------------------------------------------------------
# Accident times
# ---------------------------------------------------------------------------

def test_invert_hazard_identity_for_unit_rate():
    path = _unit_path()
    assert invert_hazard(path, math.log(2.0)) == pytest.approx(math.log(2.0), abs=1e-12)
    assert invert_hazard(path, 0.25) == pytest.approx(0.25, abs=1e-12)


def test_invert_hazard_never_reaches_threshold():
    path = _unit_path()  # total hazard 2.0
    assert invert_hazard(path, 5.0) == math.inf


def test_accident_times_follow_exponential_law():
    # Kolmogorov-Smirnov against the exact law 1 - exp(-t) for unit rate.
    path = simulate_intensity_path(ConstantIntensity(1.0), TimeGrid.regular(30.0))
    rng = np.random.default_rng(5)
    n = 100_000
    draws = np.array([sample_accident_time(path, rng) for _ in range(n)])
    assert np.all(np.isfinite(draws))
    result = stats.kstest(draws, lambda t: 1.0 - np.exp(-t))
    assert result.statistic < 1.36 / math.sqrt(n)


# ---------------------------------------------------------------------------
# Delay law
# ---------------------------------------------------------------------------

def test_delay_all_mass_at_zero():
    law = DelayLaw(alpha0=1.0)
    assert all(sample_delay(law, seed) == 0.0 for seed in range(50))
    assert law.cdf(0.0) == 1.0
    assert law.cdf(-0.5) == 0.0


def test_delay_exponential_mean():
    law = DelayLaw(alpha0=0.0, density=ExponentialDelay(2.0))
    rng = np.random.default_rng(11)
    n = 100_000
    draws = law.sample_many(rng, n)
    assert abs(draws.mean() - 0.5) <= 3.0 * 0.5 / math.sqrt(n)


def test_delay_atom_fraction():
    law = DelayLaw(alpha0=0.3, density=ExponentialDelay(2.0))
    rng = np.random.default_rng(13)
    n = 100_000
    draws = law.sample_many(rng, n)
    frac = float(np.mean(draws == 0.0))
    assert abs(frac - 0.3) <= 0.0045


def test_delay_law_validation():
    with pytest.raises(ConfigurationError):
        DelayLaw(alpha0=1.2, density=None)
    with pytest.raises(ConfigurationError):
        DelayLaw(alpha0=1.0, density=ExponentialDelay(1.0))
    with pytest.raises(ConfigurationError):
        DelayLaw(alpha0=0.5, density=None)
    with pytest.raises(ConfigurationError):
        GammaDelay(shape=0.5, rate=1.0)


def test_delay_cdf_is_proper():
    law = DelayLaw(alpha0=0.25, density=GammaDelay(shape=2.0, rate=3.0))
    xs = np.linspace(0.0, 20.0, 200)
    values = law.cdf(xs)
    assert values[0] == pytest.approx(0.25)
    assert np.all(np.diff(values) >= -1e-15)
    assert values[-1] == pytest.approx(1.0, abs=1e-6)


# ---------------------------------------------------------------------------
# Development process
# ---------------------------------------------------------------------------

def test_development_zero_rate_is_empty():
    law = DevelopmentLaw(rate=0.0, mark=MarkLaw(mean=1.0))
    assert sample_development(law, 3.0, seed=1) == ()


def test_development_event_count_mean():
    law = DevelopmentLaw(rate=2.0, mark=MarkLaw(mean=0.5))
    rng = np.random.default_rng(17)
    n = 100_000
    counts = [len(sample_development(law, 3.0, rng)) for _ in range(n)]
    mean = float(np.mean(counts))
    assert abs(mean - 6.0) <= 3.0 * math.sqrt(6.0) / math.sqrt(n)


def test_development_total_mark_mean():
    # Expected cumulative payment over the horizon is rate * mean * horizon.
    law = DevelopmentLaw(rate=2.0, mark=MarkLaw(mean=0.5, kind="exponential"))
    rng = np.random.default_rng(19)
    n = 50_000
    totals = np.array([sum(x for _, x in sample_development(law, 3.0, rng)) for _ in range(n)])
    se = totals.std(ddof=1) / math.sqrt(n)
    assert abs(totals.mean() - 3.0) <= 3.0 * se


def test_development_offsets_strictly_increasing_within_horizon():
    law = DevelopmentLaw(rate=5.0, mark=MarkLaw(mean=1.0, kind="lognormal", sigma_ln=0.4))
    rng = np.random.default_rng(23)
    for _ in range(200):
        events = sample_development(law, 2.0, rng)
        offsets = [o for o, _ in events]
        assert all(0.0 < o <= 2.0 for o in offsets)
        assert all(b > a for a, b in zip(offsets, offsets[1:]))
        assert all(x >= 0.0 for _, x in events)


# ---------------------------------------------------------------------------
# Portfolio simulation
# ---------------------------------------------------------------------------

def _laws():
    delay = DelayLaw(alpha0=0.3, density=ExponentialDelay(2.0))
    fm = MarkLaw(mean=1.5, kind="exponential")
    dev = DevelopmentLaw(rate=2.0, mark=MarkLaw(mean=0.5, kind="exponential"))
    return delay, fm, dev


def test_portfolio_deterministic_given_seed():
    path = _unit_path()
    delay, fm, dev = _laws()
    a = simulate_portfolio(3, path, delay, fm, dev, horizon=2.0, seed=42)
    b = simulate_portfolio(3, path, delay, fm, dev, horizon=2.0, seed=42)
    assert a == b
    c = simulate_portfolio(3, path, delay, fm, dev, horizon=2.0, seed=43)
    assert a != c


def test_portfolio_record_invariants():
    path = _unit_path()
    delay, fm, dev = _laws()
    claims = simulate_portfolio(200, path, delay, fm, dev, horizon=2.0, seed=3)
    assert len(claims) == 200
    for claim in claims:
        if not claim.occurred:
            assert claim.delay is None and claim.first_mark is None
            assert claim.developments == ()
            continue
        assert claim.report_time == claim.accident_time + claim.delay
        assert claim.first_mark >= 0.0
        times = [when for when, _ in claim.payment_events()]
        assert all(b > a for a, b in zip(times, times[1:]))
        # reported after the horizon means no development window at all
        if claim.report_time > 2.0:
            assert claim.developments == ()


def test_substream_isolation_of_delays():
    # Drawing the policy's delay from its dedicated substream reproduces the
    # accident times bit for bit no matter how the delay law behaves.
    path = _unit_path()
    fm = MarkLaw(mean=1.0)
    dev = DevelopmentLaw(rate=0.0, mark=MarkLaw(mean=1.0))
    heavy = DelayLaw(alpha0=0.0, density=GammaDelay(shape=3.0, rate=0.5))
    light = DelayLaw(alpha0=0.9, density=ExponentialDelay(4.0))
    a = simulate_portfolio(50, path, heavy, fm, dev, horizon=2.0, seed=9)
    b = simulate_portfolio(50, path, light, fm, dev, horizon=2.0, seed=9)
    for x, y in zip(a, b):
        assert x.accident_time == y.accident_time


def test_accident_substream_matches_direct_sampler():
    path = _unit_path()
    delay, fm, dev = _laws()
    claims = simulate_portfolio(5, path, delay, fm, dev, horizon=2.0, seed=77)
    for i, claim in enumerate(claims):
        direct = sample_accident_time(path, substream(77, STREAM_ACCIDENT, i))
        assert claim.accident_time == direct or (math.isinf(claim.accident_time) and math.isinf(direct))


def test_claim_record_validation():
    with pytest.raises(ConfigurationError):
        ClaimRecord(accident_time=math.inf, delay=0.1)
    with pytest.raises(ConfigurationError):
        ClaimRecord(accident_time=1.0, delay=0.5, report_time=1.4, first_mark=1.0)
    with pytest.raises(ConfigurationError):
        ClaimRecord(accident_time=1.0, delay=0.5, report_time=1.5, first_mark=1.0,
                    developments=((0.3, 1.0), (0.3, 2.0)))


# ---------------------------------------------------------------------------
# Observable state
# ---------------------------------------------------------------------------

def _sample_claim():
    return ClaimRecord(accident_time=0.6, delay=0.4, report_time=1.0, first_mark=2.0,
                       developments=((0.5, 1.0), (1.5, 0.25)))


def test_observed_state_hides_unreported():
    late = ClaimRecord(accident_time=2.0, delay=0.5, report_time=2.5, first_mark=1.0)
    state = observed_state([late], 2.0)
    assert state.reported_count == 0
    assert state.visible == ()


def test_observed_state_truncates_developments():
    state = observed_state([_sample_claim()], 2.0)
    assert state.reported_count == 1
    seen = state.visible[0]
    assert seen.report_time == 1.0
    assert seen.developments == ((0.5, 1.0),)  # the offset-1.5 event is at 2.5


def test_observed_state_counts_everyone_when_all_reported():
    claims = [_sample_claim() for _ in range(4)]
    state = observed_state(claims, 5.0)
    assert state.reported_count == 4
    assert state.n_policies == 4


def test_observed_state_monotone_in_time():
    path = _unit_path()
    delay, fm, dev = _laws()
    claims = simulate_portfolio(100, path, delay, fm, dev, horizon=2.0, seed=31)

    def event_set(state):
        out = set()
        for v in state.visible:
            out.add((v.report_time, v.first_mark))
            out.update((v.report_time + o, x) for o, x in v.developments)
        return out

    previous = set()
    for t in np.linspace(0.25, 2.0, 8):
        current = event_set(observed_state(claims, float(t)))
        assert previous <= current
        previous = current


def test_state_from_counts_bounds():
    state = PortfolioState.from_counts(1.0, 10, 4)
    assert state.reported_count == 4
    with pytest.raises(ConfigurationError):
        PortfolioState.from_counts(1.0, 10, 11)
