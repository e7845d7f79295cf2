"""Analytic valuation: reporting law along an intensity path and reserves.

Along a realized (or deterministic) intensity path, the probability that a
policy's first report has happened by t is

    p(t) = integral_0^t G(t - s) exp(-Gamma_s) mu_s ds,

where G is the delay distribution.  Its time derivative is

    p'(t) = alpha0 * exp(-Gamma_t) mu_t
            + integral_0^t g(t - u) exp(-Gamma_u) mu_u du,

with g the weighted delay density.  The reserve of a homogeneous book with
R reported claims out of n splits into a reported part, which only accrues
expected development, and an unreported part driven by p':

    reserved   = dev_rate * mark_mean * R * (T - t)
    unreported = (n - R) * integral_t^T (E[X1] + dev_rate * mark_mean * (T-u)) p'(u) du
                 / (1 - p(t))

valid when the deflator's conditional expectation collapses to its current
value (a martingale or constant deflator) and, for a stochastic intensity,
at t = 0 with the outer expectation taken over fresh intensity paths.

Quadrature: integrals against exp(-Gamma) mu ds are computed per grid cell
as the exact exponential mass exp(-Gamma_k) - exp(-Gamma_{k+1}) times a
Simpson average of the smooth factor.  This is exact (up to rounding) when
the factor is constant, so zero-delay reporting reproduces 1 - exp(-Gamma)
to machine precision, and second-order accurate otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .claims import DelayLaw, DevelopmentLaw, MarkLaw, PortfolioState
from .errors import (
    ConfigurationError,
    DegenerateStateError,
    UnsupportedRegimeError,
)
from .grids import TimeGrid
from .intensity import (
    IntensityModel,
    IntensityPath,
    LogOUIntensity,
    is_deterministic,
    simulate_intensity_path,
    trapezoid_hazard,
)
from .market import MarketModel, MartingaleDeflator, collapses_to_spot
from ._rng import Seed, substream

# Guard for conditional denominators; below this the state is degenerate.
_MIN_SURVIVING_MASS = 1e-12

# Test-only multiplicative bias on quadrature cell masses; see
# set_quadrature_perturbation.  Zero in normal operation.
_quad_perturb = 0.0


def set_quadrature_perturbation(eps: float) -> None:
    """Bias every quadrature cell by a relative ``eps``.

    Exists only so the self-test negative control can verify that the
    closed-form checks actually have teeth.  Always reset to 0.0 after use.
    """
    global _quad_perturb
    _quad_perturb = float(eps)


def expected_development(dev: DevelopmentLaw, t: float) -> float:
    """Expected cumulative development paid within ``t`` years of the report.

    Linear in t for a compound Poisson development, zero for t < 0.
    """
    if t <= 0.0:
        return 0.0
    return dev.rate * dev.mark_mean * t


# ---------------------------------------------------------------------------
# Cell masses and Simpson-weighted factors
# ---------------------------------------------------------------------------

def _cell_masses(gamma: np.ndarray) -> np.ndarray:
    """Exact integral of exp(-Gamma_s) dGamma_s over each grid cell."""
    surv = np.exp(-gamma)
    masses = surv[..., :-1] - surv[..., 1:]
    if _quad_perturb != 0.0:
        masses = masses * (1.0 + _quad_perturb)
    return masses


def _partial_state(path: IntensityPath, t: float) -> tuple[int, float, float]:
    """Number of full cells below ``t``, plus (gamma, node time) at the cut."""
    idx, frac = path.grid.locate(t)
    if frac == 1.0:
        idx, frac = idx + 1, 0.0
    gamma_t = path.hazard(t)
    return idx, frac, gamma_t


def _stieltjes(path: IntensityPath, t: float, factor) -> float:
    """integral_0^t factor(s) exp(-Gamma_s) mu_s ds by per-cell Simpson weights."""
    points = path.grid.points
    k, frac, gamma_t = _partial_state(path, t)
    masses = _cell_masses(path.gamma[: k + 1])
    left = points[:k]
    right = points[1 : k + 1]
    weights = (factor(left) + 4.0 * factor(0.5 * (left + right)) + factor(right)) / 6.0
    total = float(np.dot(weights, masses))
    if frac > 0.0:
        mass = math.exp(-path.gamma[k]) - math.exp(-gamma_t)
        if _quad_perturb != 0.0:
            mass *= 1.0 + _quad_perturb
        s_lo = points[k]
        w = (factor(s_lo) + 4.0 * factor(0.5 * (s_lo + t)) + factor(np.asarray(t))) / 6.0
        total += float(w) * mass
    return total


def reporting_cdf(path: IntensityPath, delay: DelayLaw, t: float) -> float:
    """P(first report by t) along the given path; bounded by 1 - exp(-Gamma_t)."""
    path.grid.require_inside(t)
    return _stieltjes(path, t, lambda s: delay.cdf(t - s))


def reporting_density(path: IntensityPath, delay: DelayLaw, t: float) -> float:
    """Time derivative of the reporting probability at ``t`` (rate, 1/years)."""
    path.grid.require_inside(t)
    atom = delay.alpha0 * path.survival(t) * path.rate(t)
    if delay.density is None:
        return atom
    return atom + _stieltjes(path, t, lambda u: delay.pdf(t - u))


def ibnr_probability(path: IntensityPath, delay: DelayLaw, t: float) -> float:
    """P(accident happened by t but is still unreported)."""
    raw = (1.0 - path.survival(t)) - reporting_cdf(path, delay, t)
    return max(raw, 0.0)


# ---------------------------------------------------------------------------
# Whole-grid evaluation
# ---------------------------------------------------------------------------

def _kernel_arrays(fn, grid: TimeGrid) -> np.ndarray:
    """w_j = Simpson average of fn over a lag of j cells, j = 1..n_cells."""
    h = grid.step
    j = np.arange(1, grid.n_cells + 1)
    return (fn(j * h) + 4.0 * fn((j - 0.5) * h) + fn((j - 1.0) * h)) / 6.0


def _convolve_masses(masses: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """out[i] = sum_{k < i} masses[k] * kernel[i - k - 1], out[0] = 0."""
    out = np.zeros(len(masses) + 1)
    out[1:] = np.convolve(masses, kernel)[: len(masses)]
    return out


@dataclass(frozen=True)
class ReportingCurve:
    """Reporting probability and its density on every grid node."""

    grid: TimeGrid
    cdf: np.ndarray = field(repr=False, compare=False)
    density: np.ndarray = field(repr=False, compare=False)
    survival: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self) -> None:
        if np.any(np.diff(self.cdf) < -1e-12):
            raise ConfigurationError("reporting probability must be nondecreasing")

    @property
    def ibnr(self) -> np.ndarray:
        return np.maximum((1.0 - self.survival) - self.cdf, 0.0)


def reporting_curve(path: IntensityPath, delay: DelayLaw) -> ReportingCurve:
    """Evaluate the reporting law on the whole grid in one pass."""
    masses = _cell_masses(path.gamma)
    surv = np.exp(-path.gamma)
    cdf = _convolve_masses(masses, _kernel_arrays(delay.cdf, path.grid))
    density = delay.alpha0 * surv * path.mu
    if delay.density is not None:
        density = density + _convolve_masses(masses, _kernel_arrays(delay.pdf, path.grid))
    return ReportingCurve(grid=path.grid, cdf=cdf, density=density, survival=surv)


# ---------------------------------------------------------------------------
# Reserve
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReserveResult:
    """Reserve split into reported and unreported components (real units)."""

    as_of: float
    horizon: float
    reported_component: float
    unreported_component: float
    total: float
    diagnostics: dict

    def __post_init__(self) -> None:
        if self.reported_component < 0.0 or self.unreported_component < 0.0:
            raise ConfigurationError("reserve components must be >= 0")
        if not math.isclose(self.total, self.reported_component + self.unreported_component,
                            rel_tol=1e-12, abs_tol=1e-12):
            raise ConfigurationError("total must equal the sum of its components")


def _unreported_integrand_weights(grid: TimeGrid, i_t: int, i_T: int,
                                  first_mark: MarkLaw, dev: DevelopmentLaw) -> np.ndarray:
    """Trapezoid weights times (E[X1] + expected development to T) per node."""
    c = np.zeros(grid.n_cells + 1)
    u = grid.points[i_t : i_T + 1]
    psi = first_mark.mean + dev.rate * dev.mark_mean * (grid.points[i_T] - u)
    w = np.full(len(u), grid.step)
    w[0] *= 0.5
    w[-1] *= 0.5
    c[i_t : i_T + 1] = w * psi
    return c


def _refined(path: IntensityPath) -> IntensityPath:
    """The same path at half the step, filling midpoints by interpolation.

    Linear interpolation is the declared between-node behaviour of a
    realized path, so the refined path shares the original's continuum
    limit (and its hazard at the original nodes, exactly).
    """
    grid = path.grid
    n = grid.n_cells
    fine_grid = TimeGrid(t0=grid.t0, t_end=grid.t_end, step=0.5 * grid.step,
                         points=np.linspace(grid.t0, grid.t_end, 2 * n + 1))
    mu = np.empty(2 * n + 1)
    mu[0::2] = path.mu
    mu[1::2] = 0.5 * (path.mu[:-1] + path.mu[1:])
    return IntensityPath(grid=fine_grid, mu=mu, gamma=trapezoid_hazard(fine_grid, mu))


def _payout_integral(path: IntensityPath, delay: DelayLaw, curve: ReportingCurve,
                     first_mark: MarkLaw, dev: DevelopmentLaw, t: float, T: float) -> float:
    """Trapezoid of (E[X1] + expected development to T) * p'(u) over [t, T].

    Endpoints need not sit on grid nodes; partial end cells use pointwise
    density evaluations.
    """
    grid = path.grid

    def psi(u):
        return first_mark.mean + dev.rate * dev.mark_mean * (T - u)

    i_lo = int(math.ceil((t - grid.t0) / grid.step - 1e-12))
    i_hi = int(math.floor((T - grid.t0) / grid.step + 1e-12))
    i_lo = min(max(i_lo, 0), grid.n_cells)
    i_hi = min(max(i_hi, 0), grid.n_cells)
    if i_lo > i_hi:
        # whole window inside one cell
        d_t = reporting_density(path, delay, t)
        d_T = reporting_density(path, delay, T)
        return 0.5 * (psi(t) * d_t + psi(T) * d_T) * (T - t)
    nodes = grid.points[i_lo : i_hi + 1]
    values = psi(nodes) * curve.density[i_lo : i_hi + 1]
    total = float(np.trapezoid(values, dx=grid.step)) if len(values) > 1 else 0.0
    left_gap = nodes[0] - t
    if left_gap > 1e-12 * grid.step:
        d_t = reporting_density(path, delay, t)
        total += 0.5 * (psi(t) * d_t + values[0]) * left_gap
    right_gap = T - nodes[-1]
    if right_gap > 1e-12 * grid.step:
        d_T = reporting_density(path, delay, T)
        total += 0.5 * (values[-1] + psi(T) * d_T) * right_gap
    return total


def _bracket_functional(c: np.ndarray, delay: DelayLaw, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Precompute the linear functional taking a path to its payout integral.

    Returns (q, atom_weights) with

        integral = sum_k masses[k] * q[k]
                   + alpha0 * sum_i atom_weights[i] * surv[i] * mu[i]

    equal to the trapezoid of c_i * density_i over the grid.  Only the atom
    weights depend on nothing but c; q folds the delay kernel in once, so
    evaluating many intensity paths costs two dot products each.
    """
    n = grid.n_cells
    if delay.density is None:
        q = np.zeros(n)
    else:
        kernel = np.concatenate([[0.0], _kernel_arrays(delay.pdf, grid)])
        padded = np.concatenate([c, np.zeros(n)])
        q = np.correlate(padded, kernel, mode="valid")[:n]
    return q, c.copy()


def reserve(
    state: PortfolioState,
    intensity: IntensityPath | IntensityModel,
    delay: DelayLaw,
    first_mark: MarkLaw,
    dev: DevelopmentLaw,
    T: float,
    *,
    market: MarketModel | None = None,
    grid: TimeGrid | None = None,
    intensity_draws: int = 8192,
    seed: Seed = 0,
) -> ReserveResult:
    """Closed-quadrature reserve of the remaining payments in (t, T].

    ``state`` fixes the valuation time t and the reported count R.  The
    deflator cancels out of the result in the supported regime, so
    ``market`` is used for validation only: it must be a martingale
    deflator uncorrelated with the intensity, or a constant deterministic
    one.  ``intensity`` is a realized path or a model; a deterministic
    model is realized on ``grid`` (default: daily up to T).  A stochastic
    model is supported at t = 0 only, where the outer average over
    intensity paths is estimated from ``intensity_draws`` fresh draws and
    its standard error lands in the diagnostics.  Anything else raises
    UnsupportedRegimeError pointing at the Monte Carlo oracle.
    """
    t = state.as_of
    n = state.n_policies
    reported = state.reported_count
    if t > T:
        raise ConfigurationError(f"valuation time {t} exceeds horizon {T}")
    if market is not None:
        if isinstance(market, MartingaleDeflator) and market.corr_with_intensity != 0.0:
            raise UnsupportedRegimeError(
                "deflator correlated with the intensity: the conditional expectation "
                "does not factorize; use the Monte Carlo oracle (mc_reserve / --mc-only)")
        if not collapses_to_spot(market):
            raise UnsupportedRegimeError(
                "time-varying deterministic deflator is not a martingale; "
                "use the Monte Carlo oracle (mc_reserve / --mc-only)")

    stochastic = False
    intensity_model: IntensityModel | None = None
    if isinstance(intensity, IntensityPath):
        path: IntensityPath | None = intensity
        grid = intensity.grid
    else:
        intensity_model = intensity
        if grid is None:
            grid = TimeGrid.regular(T)
        stochastic = not is_deterministic(intensity_model)
        path = None if stochastic else simulate_intensity_path(intensity_model, grid)

    grid.require_inside(t)
    grid.require_inside(T)

    reported_component = dev.rate * dev.mark_mean * reported * (T - t)
    diagnostics = {
        "quadrature_step": grid.step,
        "intensity_draws": 0,
        "outer_std_error": 0.0,
    }

    if not stochastic:
        curve = reporting_curve(path, delay)
        p_t = reporting_cdf(path, delay, t)
        diagnostics["reporting_cdf_at_t"] = p_t
        unreported_count = n - reported
        if unreported_count == 0:
            unreported = 0.0
        else:
            surviving = 1.0 - p_t
            if surviving < _MIN_SURVIVING_MASS:
                raise DegenerateStateError(
                    "reporting is essentially certain by the valuation time; "
                    "no surviving mass to condition on (expected reported count = n)")
            integral = _payout_integral(path, delay, curve, first_mark, dev, t, T)
            unreported = unreported_count * integral / surviving
            # Richardson estimate: with a second-order scheme the half-step
            # value closes three quarters of the gap to the limit.
            fine = _refined(path)
            fine_integral = _payout_integral(
                fine, delay, reporting_curve(fine, delay), first_mark, dev, t, T)
            diagnostics["unreported_error_estimate"] = (
                unreported_count * (4.0 / 3.0) * abs(integral - fine_integral) / surviving)
        total = reported_component + unreported
        return ReserveResult(as_of=t, horizon=T, reported_component=reported_component,
                             unreported_component=unreported, total=total,
                             diagnostics=diagnostics)

    # Stochastic intensity: average the payout integral over fresh paths.
    if t != 0.0:
        raise UnsupportedRegimeError(
            "stochastic intensity is priced at t = 0 only (no conditioning on a "
            "partial intensity history); use the Monte Carlo oracle for t > 0")
    if reported != 0:
        raise ConfigurationError("no claim can already be reported at time zero")
    assert isinstance(intensity_model, LogOUIntensity)
    if intensity_draws < 2:
        raise ConfigurationError("need at least 2 intensity draws")
    i_T = grid.node_index(T, what="horizon")
    c = _unreported_integrand_weights(grid, 0, i_T, first_mark, dev)
    q, atom_w = _bracket_functional(c, delay, grid)
    rng = substream(seed, 0x1A7E)
    normals = rng.standard_normal((intensity_draws, grid.n_cells))
    mu = np.exp(intensity_model.log_level_paths(grid, normals))
    gamma = trapezoid_hazard(grid, mu)
    masses = _cell_masses(gamma)
    brackets = masses @ q
    if delay.alpha0 > 0.0:
        brackets = brackets + delay.alpha0 * ((np.exp(-gamma) * mu) @ atom_w)
    mean_bracket = float(np.mean(brackets))
    se_bracket = float(np.std(brackets, ddof=1) / math.sqrt(intensity_draws))
    unreported = n * mean_bracket
    diagnostics["intensity_draws"] = int(intensity_draws)
    diagnostics["outer_std_error"] = n * se_bracket
    total = reported_component + unreported
    return ReserveResult(as_of=t, horizon=T, reported_component=reported_component,
                         unreported_component=unreported, total=total,
                         diagnostics=diagnostics)
