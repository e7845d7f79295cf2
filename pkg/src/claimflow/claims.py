"""Portfolio simulation: accident times, reporting delays, developments.

A portfolio of n homogeneous policies is simulated as a family of marked
point processes.  Accident times are conditionally independent given one
shared intensity path and are drawn by inverse-hazard sampling: with
E ~ Exp(1), the accident happens at the first time Gamma crosses E, or
never if the path's total hazard stays below E.  The first report lags the
accident by a mixed delay (an atom at zero plus a density), and subsequent
payments follow a compound Poisson development process started at the
first report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .errors import ConfigurationError
from .intensity import IntensityPath
from ._rng import Seed, coerce_rng, substream

# Substream purposes; part of the reproducibility contract.
STREAM_ACCIDENT = 0
STREAM_DELAY = 1
STREAM_FIRST_MARK = 2
STREAM_DEVELOPMENT = 3


# ---------------------------------------------------------------------------
# Delay laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentialDelay:
    """Exponential reporting delay with the given rate (1/years)."""

    rate: float

    def __post_init__(self) -> None:
        if self.rate <= 0.0:
            raise ConfigurationError(f"delay rate must be > 0, got {self.rate}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.exponential(1.0 / self.rate, size=size)


@dataclass(frozen=True)
class GammaDelay:
    """Gamma reporting delay; shape >= 1 keeps the density bounded at zero."""

    shape: float
    rate: float

    def __post_init__(self) -> None:
        if self.shape < 1.0:
            raise ConfigurationError(f"gamma delay shape must be >= 1, got {self.shape}")
        if self.rate <= 0.0:
            raise ConfigurationError(f"delay rate must be > 0, got {self.rate}")

    def _dist(self):
        return stats.gamma(a=self.shape, scale=1.0 / self.rate)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, self._dist().cdf(np.maximum(x, 0.0)), 0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, self._dist().pdf(np.maximum(x, 0.0)), 0.0)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size=size)


DelayDensity = Union[ExponentialDelay, GammaDelay]


@dataclass(frozen=True)
class DelayLaw:
    """Mixed distribution of the report lag: mass ``alpha0`` at zero plus a density.

    The cumulative function is G(x) = alpha0 + (1 - alpha0) * density_cdf(x)
    for x >= 0 and 0 for x < 0.  ``alpha0 = 1`` (no density) reduces the model
    to instantaneous reporting, the life-insurance special case.
    """

    alpha0: float
    density: Optional[DelayDensity] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha0 <= 1.0:
            raise ConfigurationError(f"alpha0 must be in [0, 1], got {self.alpha0}")
        if self.alpha0 == 1.0 and self.density is not None:
            raise ConfigurationError("alpha0 = 1 leaves no mass for a delay density")
        if self.alpha0 < 1.0 and self.density is None:
            raise ConfigurationError("alpha0 < 1 requires a delay density")

    def cdf(self, x):
        """G(x); 0 for x < 0, alpha0 at 0, continuous beyond."""
        x = np.asarray(x, dtype=float)
        atom = np.where(x >= 0.0, self.alpha0, 0.0)
        if self.density is None:
            return atom
        return atom + (1.0 - self.alpha0) * self.density.cdf(x)

    def pdf(self, x):
        """Density part g(x), already weighted by 1 - alpha0."""
        if self.density is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        return (1.0 - self.alpha0) * self.density.pdf(x)

    def sample(self, rng: np.random.Generator) -> float:
        if rng.random() < self.alpha0:
            return 0.0
        assert self.density is not None
        return float(self.density.sample(rng))

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Vector version with a fixed draw layout (uniforms, then magnitudes)."""
        zero = rng.random(size) < self.alpha0
        if self.density is None:
            return np.zeros(size)
        values = self.density.sample(rng, size=size)
        return np.where(zero, 0.0, values)


# ---------------------------------------------------------------------------
# Payment-size laws
# ---------------------------------------------------------------------------

MARK_KINDS = ("deterministic", "exponential", "lognormal")


@dataclass(frozen=True)
class MarkLaw:
    """Nonnegative payment size with a prescribed mean.

    The lognormal variant takes the log-space standard deviation and fixes
    the log-space mean so that the expectation is exactly ``mean``.
    """

    mean: float
    kind: str = "deterministic"
    sigma_ln: float = 0.0

    def __post_init__(self) -> None:
        if self.mean <= 0.0:
            raise ConfigurationError(f"mark mean must be > 0, got {self.mean}")
        if self.kind not in MARK_KINDS:
            raise ConfigurationError(f"unknown mark kind {self.kind!r}, expected one of {MARK_KINDS}")
        if self.kind == "lognormal" and self.sigma_ln < 0.0:
            raise ConfigurationError(f"sigma_ln must be >= 0, got {self.sigma_ln}")

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "deterministic":
            return self.mean if size is None else np.full(size, self.mean)
        if self.kind == "exponential":
            return rng.exponential(self.mean, size=size)
        mu_ln = math.log(self.mean) - 0.5 * self.sigma_ln ** 2
        return rng.lognormal(mu_ln, self.sigma_ln, size=size)


#: First payment at the report time; same parametrization as any mark.
FirstMarkLaw = MarkLaw


@dataclass(frozen=True)
class DevelopmentLaw:
    """Compound Poisson development after the first report.

    Events arrive at ``rate`` per year with i.i.d. marks; the expected
    cumulative payment over a window of length t is rate * mark.mean * t.
    """

    rate: float
    mark: MarkLaw

    def __post_init__(self) -> None:
        if self.rate < 0.0:
            raise ConfigurationError(f"development rate must be >= 0, got {self.rate}")

    @property
    def mark_mean(self) -> float:
        return self.mark.mean


# ---------------------------------------------------------------------------
# Claim records and observable state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClaimRecord:
    """One policy's realized history.

    ``accident_time`` is ``inf`` for a policy whose accident never happens
    within the simulated horizon; all other fields are then ``None``/empty.
    Development entries are (offset from the report, amount) with strictly
    increasing offsets.
    """

    accident_time: float
    delay: Optional[float] = None
    report_time: float = math.inf
    first_mark: Optional[float] = None
    developments: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if math.isinf(self.accident_time):
            if self.delay is not None or self.first_mark is not None or self.developments:
                raise ConfigurationError("an accident that never happens has no further fields")
            return
        if self.delay is None or self.delay < 0.0:
            raise ConfigurationError("occurred claims need a nonnegative delay")
        if self.report_time != self.accident_time + self.delay:
            raise ConfigurationError("report time must equal accident time plus delay")
        if self.first_mark is None or self.first_mark < 0.0:
            raise ConfigurationError("occurred claims need a nonnegative first mark")
        offsets = [o for o, _ in self.developments]
        if any(o <= 0.0 for o in offsets) or any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ConfigurationError("development offsets must be strictly increasing and > 0")
        if any(x < 0.0 for _, x in self.developments):
            raise ConfigurationError("development marks must be >= 0")

    @property
    def occurred(self) -> bool:
        return math.isfinite(self.accident_time)

    def payment_events(self) -> Iterator[tuple[float, float]]:
        """(absolute time, amount) pairs: the first mark, then developments."""
        if not self.occurred:
            return
        yield self.report_time, float(self.first_mark)
        for offset, amount in self.developments:
            yield self.report_time + offset, amount


@dataclass(frozen=True)
class VisibleClaim:
    """A reported claim as seen at the observation time.

    Reporting reveals the accident time, the delay and the first payment;
    only developments that have already happened are included.
    """

    accident_time: float
    delay: float
    report_time: float
    first_mark: float
    developments: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class PortfolioState:
    """Information available to the insurer at ``as_of``."""

    as_of: float
    n_policies: int
    visible: tuple[VisibleClaim, ...] = ()

    def __post_init__(self) -> None:
        if self.n_policies < 0:
            raise ConfigurationError("portfolio size must be >= 0")
        if len(self.visible) > self.n_policies:
            raise ConfigurationError("more reported claims than policies")
        for claim in self.visible:
            if claim.report_time > self.as_of:
                raise ConfigurationError("visible claims must be reported by the observation time")

    @property
    def reported_count(self) -> int:
        return len(self.visible)

    @classmethod
    def from_counts(cls, as_of: float, n_policies: int, reported_count: int) -> "PortfolioState":
        """State carrying only the reported count.

        By exchangeability of the homogeneous portfolio the reserve depends
        on the reported histories only through this count, so a bare-count
        state prices identically to a full one.
        """
        if not 0 <= reported_count <= n_policies:
            raise ConfigurationError(
                f"reported count {reported_count} outside [0, {n_policies}]")
        placeholder = tuple(
            VisibleClaim(accident_time=as_of, delay=0.0, report_time=as_of, first_mark=0.0)
            for _ in range(reported_count)
        )
        return cls(as_of=as_of, n_policies=n_policies, visible=placeholder)


# ---------------------------------------------------------------------------
# Sampling operations
# ---------------------------------------------------------------------------

def invert_hazard(path: IntensityPath, threshold: float) -> float:
    """First time the cumulative hazard reaches ``threshold``, or inf.

    Linear interpolation between grid nodes; this is the exact inverse of
    the law implied by the discretized hazard.
    """
    gamma = path.gamma
    if threshold > gamma[-1]:
        return math.inf
    if threshold <= 0.0:
        return float(path.grid.points[0])
    idx = int(np.searchsorted(gamma, threshold, side="left"))
    lo, hi = gamma[idx - 1], gamma[idx]
    t_lo, t_hi = path.grid.points[idx - 1], path.grid.points[idx]
    return float(t_lo + (threshold - lo) / (hi - lo) * (t_hi - t_lo))


def sample_accident_time(path: IntensityPath, seed: Seed) -> float:
    """Inverse-hazard draw: conditional on the path, P(tau > t) = exp(-Gamma_t)."""
    rng = coerce_rng(seed)
    return invert_hazard(path, rng.exponential())


def sample_delay(law: DelayLaw, seed: Seed) -> float:
    """One report lag: zero with probability alpha0, else a density draw."""
    return law.sample(coerce_rng(seed))


def sample_development(law: DevelopmentLaw, horizon: float, seed: Seed) -> tuple[tuple[float, float], ...]:
    """Compound Poisson events on (0, horizon]: sorted (offset, mark) pairs."""
    if horizon < 0.0:
        raise ConfigurationError(f"development horizon must be >= 0, got {horizon}")
    rng = coerce_rng(seed)
    return _draw_developments(law, horizon, rng)


def _draw_developments(law: DevelopmentLaw, horizon: float, rng: np.random.Generator) -> tuple[tuple[float, float], ...]:
    if horizon == 0.0 or law.rate == 0.0:
        return ()
    count = rng.poisson(law.rate * horizon)
    if count == 0:
        return ()
    # (1 - U) * horizon lands in (0, horizon]; order statistics of uniforms
    # are exactly the arrival times of a Poisson process given its count.
    offsets = np.sort((1.0 - rng.random(count)) * horizon)
    marks = np.atleast_1d(law.mark.sample(rng, size=count))
    return tuple((float(o), float(x)) for o, x in zip(offsets, marks))


def simulate_portfolio(
    n: int,
    intensity: IntensityPath,
    delay: DelayLaw,
    first_mark: MarkLaw,
    dev: DevelopmentLaw,
    horizon: float,
    seed: Seed,
) -> list[ClaimRecord]:
    """Simulate ``n`` policies sharing one intensity path.

    Accident times are conditionally i.i.d. given the path; delays, first
    marks and developments come from substreams keyed by (purpose, policy),
    so each ingredient can be perturbed without touching any other.
    Developments are simulated on (0, horizon - report_time] and a claim
    reported after the horizon simply has none.
    """
    if n < 1:
        raise ConfigurationError(f"portfolio size must be >= 1, got {n}")
    intensity.grid.require_inside(horizon)
    records: list[ClaimRecord] = []
    for i in range(n):
        accident = sample_accident_time(intensity, substream(seed, STREAM_ACCIDENT, i))
        if math.isinf(accident):
            records.append(ClaimRecord(accident_time=math.inf))
            continue
        theta = 0.0 if delay.alpha0 == 1.0 else delay.sample(substream(seed, STREAM_DELAY, i))
        report = accident + theta
        mark = (first_mark.mean if first_mark.kind == "deterministic"
                else float(first_mark.sample(substream(seed, STREAM_FIRST_MARK, i))))
        devs: tuple[tuple[float, float], ...] = ()
        if dev.rate > 0.0 and report < horizon:
            devs = _draw_developments(dev, horizon - report, substream(seed, STREAM_DEVELOPMENT, i))
        records.append(ClaimRecord(accident_time=accident, delay=theta, report_time=report,
                                   first_mark=mark, developments=devs))
    return records


def observed_state(claims: Sequence[ClaimRecord], t: float) -> PortfolioState:
    """Snapshot of what the insurer can see at ``t``.

    A claim enters the snapshot once its report time is <= t; its
    developments are truncated to those that happened by t.  Unreported
    claims contribute nothing, not even their existence.
    """
    visible = []
    for claim in claims:
        if not claim.occurred or claim.report_time > t:
            continue
        devs = tuple((o, x) for o, x in claim.developments if claim.report_time + o <= t)
        visible.append(VisibleClaim(
            accident_time=claim.accident_time,
            delay=float(claim.delay),
            report_time=claim.report_time,
            first_mark=float(claim.first_mark),
            developments=devs,
        ))
    return PortfolioState(as_of=t, n_policies=len(claims), visible=tuple(visible))
