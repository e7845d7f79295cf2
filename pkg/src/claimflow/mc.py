"""Monte Carlo oracle for the reserve: full-scenario brute force.

Each path simulates the intensity, the market and every policy's claim
history, then accumulates the deflated payments falling in the valuation
window.  Paths are generated in fixed-size blocks with one RNG substream
per block, so the estimate is bitwise identical for any thread count, and
the draw layout inside a block is fixed by the configuration alone.

The conditional variant buckets paths by the realized reported count at
the valuation time; under a deterministic intensity and deflator the
bucket mean is an unbiased estimate of the reserve given that count, by
exchangeability of the homogeneous portfolio.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .claims import DelayLaw, DevelopmentLaw, MarkLaw
from .errors import ConfigurationError, InsufficientDataError
from .grids import DEFAULT_STEP, TimeGrid
from .intensity import IntensityModel, LogOUIntensity, is_deterministic, simulate_intensity_path, trapezoid_hazard
from .market import DeterministicDeflator, MarketModel, MartingaleDeflator
from .pricing import ReserveResult
from ._rng import substream

#: Paths per RNG block; part of the reproducibility contract.
BLOCK_SIZE = 4096

_STREAM_MC_BLOCK = 0xB10C


@dataclass(frozen=True)
class McConfig:
    """Everything a Monte Carlo run needs, models included."""

    n_policies: int
    t: float
    T: float
    intensity: IntensityModel
    delay: DelayLaw
    first_mark: MarkLaw
    development: DevelopmentLaw
    market: MarketModel
    n_paths: int = 100_000
    seed: int = 0
    grid_step: float = DEFAULT_STEP
    conditioning: Optional[int] = None
    antithetic: bool = False

    def __post_init__(self) -> None:
        if self.n_policies < 0:
            raise ConfigurationError("portfolio size must be >= 0")
        if self.n_paths < 100:
            raise ConfigurationError(f"need at least 100 paths, got {self.n_paths}")
        if not 0.0 <= self.t <= self.T:
            raise ConfigurationError(f"need 0 <= t <= T, got t={self.t}, T={self.T}")
        if self.conditioning is None:
            if self.t != 0.0:
                raise ConfigurationError("unconditional valuation is supported at t = 0 only")
        else:
            if not 0 <= self.conditioning <= self.n_policies:
                raise ConfigurationError(
                    f"target reported count {self.conditioning} outside [0, {self.n_policies}]")
            if not is_deterministic(self.intensity):
                raise ConfigurationError("conditioning on the reported count needs a deterministic intensity")
            if not (isinstance(self.market, DeterministicDeflator) and self.market.is_constant) \
                    and not (isinstance(self.market, MartingaleDeflator) and self.market.vol == 0.0):
                raise ConfigurationError("conditioning on the reported count needs a deterministic deflator")
        if isinstance(self.market, MartingaleDeflator) and self.market.corr_with_intensity != 0.0:
            if is_deterministic(self.intensity):
                raise ConfigurationError("deflator correlation requires a stochastic intensity")
        if self.antithetic:
            if not (isinstance(self.market, MartingaleDeflator) and self.market.vol > 0.0):
                raise ConfigurationError("antithetic variates act on deflator draws; "
                                         "the deflator must be stochastic")
            if self.n_paths % 2 != 0:
                raise ConfigurationError("antithetic pairing needs an even path count")

    def grid(self) -> TimeGrid:
        return TimeGrid.regular(self.T, step=self.grid_step)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_effective: int
    ci95: tuple[float, float]


@dataclass(frozen=True)
class ComparisonReport:
    """Z-score agreement check between the analytic reserve and the oracle."""

    analytic_total: float
    mc_mean: float
    mc_std_error: float
    z: float
    passed: bool


def _interp_on_paths(times: np.ndarray, row: np.ndarray, grid: TimeGrid, paths: np.ndarray) -> np.ndarray:
    """Linear interpolation of per-path grid values at arbitrary times."""
    k = np.floor((times - grid.t0) / grid.step).astype(int)
    k = np.clip(k, 0, grid.n_cells - 1)
    frac = (times - grid.points[k]) / grid.step
    frac = np.clip(frac, 0.0, 1.0)
    return paths[row, k] * (1.0 - frac) + paths[row, k + 1] * frac


def _invert_gamma_rows(gamma: np.ndarray, points: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Vectorized first-crossing times of per-row hazards, inf if never.

    ``gamma`` is (paths, nodes); ``e`` is (paths, policies).
    """
    n_paths, n_policies = e.shape
    out = np.full(e.shape, np.inf)
    step_times = points
    for j in range(n_policies):
        ej = e[:, j]
        idx = np.sum(gamma < ej[:, None], axis=1)
        alive = idx <= gamma.shape[1] - 1
        idx_c = np.clip(idx, 1, gamma.shape[1] - 1)
        lo = np.take_along_axis(gamma, (idx_c - 1)[:, None], axis=1)[:, 0]
        hi = np.take_along_axis(gamma, idx_c[:, None], axis=1)[:, 0]
        den = hi - lo
        frac = np.where(den > 0.0, (ej - lo) / np.where(den > 0.0, den, 1.0), 0.0)
        tau = step_times[idx_c - 1] + frac * (step_times[idx_c] - step_times[idx_c - 1])
        out[:, j] = np.where(alive, tau, np.inf)
    return out


def _block_paths(config: McConfig, grid: TimeGrid, block: int,
                 det_gamma: np.ndarray | None,
                 det_deflator: np.ndarray | None) -> tuple[np.ndarray, np.ndarray | None]:
    """Simulate one block; returns (payoffs, reported counts or None).

    The draw order is fixed: intensity normals, accident thresholds, delay
    uniforms and magnitudes, first marks, development counts, offsets and
    marks, then deflator normals.
    """
    start = block * BLOCK_SIZE
    n_block = min(BLOCK_SIZE, config.n_paths - start)
    rng = substream(config.seed, _STREAM_MC_BLOCK, block)
    n = config.n_policies
    t, T = config.t, config.T
    points = grid.points

    z_mu = None
    if det_gamma is not None:
        gamma = det_gamma[None, :]
    else:
        assert isinstance(config.intensity, LogOUIntensity)
        z_mu = rng.standard_normal((n_block, grid.n_cells))
        mu = np.exp(config.intensity.log_level_paths(grid, z_mu))
        gamma = trapezoid_hazard(grid, mu)

    e = rng.exponential(size=(n_block, n))
    if det_gamma is not None:
        tau0 = np.interp(e, det_gamma, points)
        tau0 = np.where(e > det_gamma[-1], np.inf, tau0)
    else:
        tau0 = _invert_gamma_rows(gamma, points, e)

    if config.delay.alpha0 == 1.0:
        theta = np.zeros((n_block, n))
    elif config.delay.alpha0 == 0.0:
        theta = np.asarray(config.delay.density.sample(rng, size=(n_block, n)))
    else:
        at_zero = rng.random((n_block, n)) < config.delay.alpha0
        magnitude = np.asarray(config.delay.density.sample(rng, size=(n_block, n)))
        theta = np.where(at_zero, 0.0, magnitude)
    tau1 = tau0 + theta

    x1 = np.asarray(config.first_mark.sample(rng, size=(n_block, n)))

    dev = config.development
    dev_times = dev_marks = dev_rows = None
    if dev.rate > 0.0 and n > 0:
        horizon = np.clip(T - tau1, 0.0, None)
        horizon = np.where(np.isfinite(horizon), horizon, 0.0)
        counts = rng.poisson(dev.rate * horizon)
        total = int(counts.sum())
        if total > 0:
            flat = counts.ravel()
            cell = np.repeat(np.arange(flat.size), flat)
            dev_rows = cell // n
            base_tau1 = tau1.ravel()[cell]
            base_h = horizon.ravel()[cell]
            offsets = (1.0 - rng.random(total)) * base_h
            dev_times = base_tau1 + offsets
            dev_marks = np.asarray(dev.mark.sample(rng, size=total))

    if isinstance(config.market, MartingaleDeflator) and config.market.vol > 0.0:
        if config.antithetic:
            half = rng.standard_normal((n_block // 2, grid.n_cells))
            z_i = np.empty((n_block, grid.n_cells))
            z_i[0::2] = half
            z_i[1::2] = -half
        else:
            z_i = rng.standard_normal((n_block, grid.n_cells))
        rho = config.market.corr_with_intensity
        if rho != 0.0:
            assert z_mu is not None
            z_i = rho * z_mu + math.sqrt(1.0 - rho * rho) * z_i
        deflator_paths = config.market.paths_from_normals(grid, z_i)
        deflator_at_t = np.full(n_block, config.market.init)  # t = 0 in this regime
    else:
        values = det_deflator
        assert values is not None
        deflator_paths = None
        deflator_at_t = np.full(n_block, np.interp(t, points, values))

    payoffs = np.zeros(n_block)
    if n > 0:
        in_window = (tau1 > t) & (tau1 <= T)
        if np.any(in_window):
            times = np.where(in_window, tau1, t)
            if deflator_paths is not None:
                rows = np.broadcast_to(np.arange(n_block)[:, None], (n_block, n))
                defl = _interp_on_paths(times, rows, grid, deflator_paths)
            else:
                defl = np.interp(times, points, values)
            payoffs += np.sum(np.where(in_window, defl * x1, 0.0), axis=1)
        if dev_times is not None:
            keep = dev_times > t
            if np.any(keep):
                kt, km, kr = dev_times[keep], dev_marks[keep], dev_rows[keep]
                if deflator_paths is not None:
                    defl = _interp_on_paths(kt, kr, grid, deflator_paths)
                else:
                    defl = np.interp(kt, points, values)
                payoffs += np.bincount(kr, weights=defl * km, minlength=n_block)

    payoffs = payoffs / deflator_at_t
    reported = None
    if config.conditioning is not None:
        reported = np.sum(tau1 <= t, axis=1).astype(int)
    return payoffs, reported


def _run_blocks(config: McConfig, threads: int) -> tuple[np.ndarray, np.ndarray | None]:
    grid = config.grid()
    det_gamma = None
    if is_deterministic(config.intensity):
        det_gamma = simulate_intensity_path(config.intensity, grid, seed=0).gamma
    det_deflator = None
    if isinstance(config.market, DeterministicDeflator):
        det_deflator = config.market.curve(grid.points)
    elif isinstance(config.market, MartingaleDeflator) and config.market.vol == 0.0:
        det_deflator = np.full(len(grid.points), config.market.init)

    n_blocks = (config.n_paths + BLOCK_SIZE - 1) // BLOCK_SIZE
    if threads <= 1 or n_blocks == 1:
        results = [_block_paths(config, grid, b, det_gamma, det_deflator) for b in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda b: _block_paths(config, grid, b, det_gamma, det_deflator),
                range(n_blocks)))
    payoffs = np.concatenate([r[0] for r in results])
    reported = None
    if config.conditioning is not None:
        reported = np.concatenate([r[1] for r in results])
    return payoffs, reported


def _estimate(samples: np.ndarray) -> McEstimate:
    m = len(samples)
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return McEstimate(mean=mean, std_error=se, n_effective=m,
                      ci95=(mean - 1.96 * se, mean + 1.96 * se))


def mc_reserve(config: McConfig, threads: int = 1) -> McEstimate:
    """Unconditional value at t = 0 of the payments in (0, T], real units.

    Averages the deflated payment sum over full-scenario paths; with the
    antithetic flag, deflator noise is mirrored in consecutive paths and
    the standard error is computed on pair means.
    """
    if config.conditioning is not None:
        raise ConfigurationError("use mc_conditional_reserve for a conditioned run")
    if config.n_policies == 0:
        return McEstimate(mean=0.0, std_error=0.0, n_effective=config.n_paths, ci95=(0.0, 0.0))
    payoffs, _ = _run_blocks(config, threads)
    if config.antithetic:
        even = payoffs[0 : 2 * (len(payoffs) // 2) : 2]
        odd = payoffs[1 : 2 * (len(payoffs) // 2) : 2]
        payoffs = 0.5 * (even + odd)
    return _estimate(payoffs)


def mc_conditional_reserve(config: McConfig, threads: int = 1) -> McEstimate:
    """Reserve at t given the realized reported count equals the target.

    Simulates unconditionally, buckets paths by the reported count at t and
    returns the statistics of the target bucket.  Needs a deterministic
    intensity and deflator so that the bucket mean identifies the
    conditional value.
    """
    if config.conditioning is None:
        raise ConfigurationError("config.conditioning must name the target reported count")
    payoffs, reported = _run_blocks(config, threads)
    mask = reported == config.conditioning
    count = int(np.sum(mask))
    if count < 100:
        raise InsufficientDataError(
            f"only {count} of {config.n_paths} paths realized a reported count of "
            f"{config.conditioning}; need at least 100")
    return _estimate(payoffs[mask])


def compare(analytic: ReserveResult, mc: McEstimate, threshold: float = 3.0) -> ComparisonReport:
    """Agreement report: z = (analytic - mc) / SE, passing iff |z| <= threshold."""
    diff = analytic.total - mc.mean
    if mc.std_error == 0.0:
        if diff == 0.0:
            return ComparisonReport(analytic.total, mc.mean, 0.0, z=0.0, passed=True)
        return ComparisonReport(analytic.total, mc.mean, 0.0,
                                z=math.copysign(math.inf, diff), passed=False)
    z = float(diff / mc.std_error)
    return ComparisonReport(analytic.total, mc.mean, mc.std_error, z=z,
                            passed=bool(abs(z) <= threshold))
