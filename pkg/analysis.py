"""
Mean Cycle Time Analysis

Bounds and estimates for the mean cycle time γ = lim ‖x(k)‖ / k:
- lower_bound(): ‖E[𝒯_1]‖, the largest mean service time
- upper_bound(): E‖𝒯_1‖, the expected largest service time of a cycle
- gumbel_hartley(): bound on the expected maximum of k i.i.d. variables
- sandwich(): per-cycle bounds on the cycle completion time ‖x(k)‖
- estimate(): γ̂ = ‖x(K)‖ / K, throughput and a convergence series
"""

import itertools
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

import config
from dynamics import CycleTrajectory, upper_envelope
from network import NetworkSpec, build_partial_graphs, validate
from stochastic import Constant, Distribution, Exponential, ScaledErlang, ServiceSampler, moments


logger = logging.getLogger(__name__)


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class UpperBound(NamedTuple):
    value: float
    method: str  # 'analytic' | 'quadrature' | 'monte-carlo'
    ci_halfwidth: Optional[float] = None


@dataclass
class BoundsReport:
    """Bounds on the mean cycle time, optionally with a simulated estimate."""
    lower: float
    upper: float
    upper_method: str
    ci_halfwidth: Optional[float] = None
    gamma_estimate: Optional[float] = None
    throughput: Optional[float] = None
    cycles: Optional[int] = None
    finite_upper: Optional[float] = None
    degenerate: bool = False

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        # inf throughput (γ̂ = 0) has no JSON form
        if record["throughput"] is not None and not math.isfinite(record["throughput"]):
            record["throughput"] = None
        return record


# ==============================================================================
# Expected Maximum of Service Times
# ==============================================================================

def harmonic_number(n: int) -> float:
    """H_n = 1 + 1/2 + ... + 1/n."""
    return math.fsum(1.0 / i for i in range(1, n + 1))


def expected_max_exponentials(means: Sequence[float]) -> float:
    """
    Exact E[max_i τ_i] for independent exponentials, by inclusion-exclusion.

    E[max] = Σ_{S ≠ ∅} (-1)^{|S|+1} / Σ_{i∈S} λ_i with λ_i = 1 / mean_i.
    """
    rates = [1.0 / m for m in means]
    terms = []
    for size in range(1, len(rates) + 1):
        sign = 1.0 if size % 2 == 1 else -1.0
        for subset in itertools.combinations(rates, size):
            terms.append(sign / math.fsum(subset))
    return math.fsum(terms)


def expected_max_quadrature(distributions: Sequence[Distribution]) -> float:
    """
    E[max_i τ_i] for independent nonnegative τ_i as ∫_0^T (1 - Π F_i(t)) dt.

    T is chosen where every survival function is below the configured tail
    cutoff, so the truncated tail is at most n times that cutoff.

    Raises:
        QuadratureError: If scipy reports an integration problem
    """
    settings = config.QUADRATURE
    horizon = max(d.isf(settings["tail_cutoff"]) for d in distributions)
    if horizon <= 0.0:
        return 0.0

    breakpoints = sorted({float(d.value) for d in distributions
                          if isinstance(d, Constant) and 0.0 < d.value < horizon})

    def survival_of_max(t: float) -> float:
        product = 1.0
        for d in distributions:
            product *= d.cdf(t)
        return 1.0 - product

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, error = integrate.quad(
                survival_of_max, 0.0, horizon,
                epsabs=settings["epsabs"], epsrel=settings["epsrel"],
                limit=settings["limit"], points=breakpoints or None,
            )
        except integrate.IntegrationWarning as e:
            raise QuadratureError(str(e))

    logger.debug(f"Quadrature on [0, {horizon:.3f}]: {value:.9f} (error estimate {error:.2e})")
    return value


def monte_carlo_expected_max(spec: NetworkSpec,
                             samples: Optional[int] = None,
                             seed: Optional[int] = None) -> Tuple[float, float]:
    """
    Monte Carlo estimate of E‖𝒯_1‖ = E[max_i τ_i].

    Args:
        spec: Network spec
        samples: Number of service vectors (default from config)
        seed: Master seed (default from config)

    Returns:
        Tuple of (estimate, confidence half-width)
    """
    settings = config.MONTE_CARLO
    samples = samples or settings["default_samples"]
    seed = config.default_seed() if seed is None else seed
    sampler = ServiceSampler(spec, seed)

    total = 0.0
    total_sq = 0.0
    remaining = samples
    while remaining > 0:
        size = min(remaining, settings["chunk_size"])
        maxima = sampler.sample_block(size).max(axis=1)
        total += float(maxima.sum())
        total_sq += float((maxima ** 2).sum())
        remaining -= size

    mean = total / samples
    variance = max(total_sq / samples - mean ** 2, 0.0)
    halfwidth = settings["z_value"] * math.sqrt(variance / samples)
    return mean, halfwidth


def _exponential_means(distributions: Sequence[Distribution]) -> Optional[List[float]]:
    """Means if every model is exponential (ScaledErlang(1) included), else None."""
    means = []
    for d in distributions:
        if isinstance(d, Exponential):
            means.append(d.mean)
        elif isinstance(d, ScaledErlang) and d.shape == 1:
            means.append(1.0)
        else:
            return None
    return means


# ==============================================================================
# Bounds
# ==============================================================================

def lower_bound(spec: NetworkSpec) -> float:
    """‖E[𝒯_1]‖ = max_i E[τ_i1]."""
    return max(mean for mean, _ in moments(validate(spec)))


def upper_bound(spec: NetworkSpec,
                method: str = "auto",
                samples: Optional[int] = None,
                seed: Optional[int] = None) -> UpperBound:
    """
    E‖𝒯_1‖ = E[max_i τ_i1] by the best available method.

    Args:
        spec: Network spec
        method: 'auto', 'quadrature' or 'monte-carlo'
        samples: Monte Carlo sample count
        seed: Monte Carlo seed

    Returns:
        UpperBound(value, method, ci_halfwidth)
    """
    spec = validate(spec)
    if method not in ("auto", "quadrature", "monte-carlo"):
        raise ValueError(f"unknown upper bound method {method!r}")

    if method == "monte-carlo":
        return UpperBound(*_monte_carlo(spec, samples, seed))

    if method == "auto":
        if spec.correlation is not None:
            c, d = spec.correlation.weights(spec.n)
            return UpperBound(c * harmonic_number(spec.n) + d * spec.n, "analytic")

        if all(isinstance(dist, Constant) for dist in spec.services):
            return UpperBound(max(float(dist.value) for dist in spec.services), "analytic")

        means = _exponential_means(spec.services)
        if means is not None and len(means) <= config.QUADRATURE["max_inclusion_exclusion_nodes"]:
            return UpperBound(expected_max_exponentials(means), "analytic")

    if spec.correlation is not None:
        logger.warning("Quadrature applies to independent services only; using Monte Carlo")
        return UpperBound(*_monte_carlo(spec, samples, seed))

    try:
        return UpperBound(expected_max_quadrature(spec.services), "quadrature")
    except QuadratureError as e:
        logger.warning(f"Quadrature did not converge ({e}); falling back to Monte Carlo")
        return UpperBound(*_monte_carlo(spec, samples, seed))


def _monte_carlo(spec: NetworkSpec, samples: Optional[int], seed: Optional[int]) -> Tuple[float, str, float]:
    value, halfwidth = monte_carlo_expected_max(spec, samples, seed)
    return value, "monte-carlo", halfwidth


def bounds(spec: NetworkSpec, method: str = "auto") -> BoundsReport:
    """Lower and upper bounds on γ for a network."""
    upper = upper_bound(spec, method=method)
    return BoundsReport(lower=lower_bound(spec), upper=upper.value,
                        upper_method=upper.method, ci_halfwidth=upper.ci_halfwidth)


def gumbel_hartley(mean: float, variance: float, k: int) -> float:
    """
    Upper bound on E[max of k i.i.d. variables]: mean + (k-1)/√(2k-1)·√variance.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    return mean + (k - 1) / math.sqrt(2 * k - 1) * math.sqrt(variance)


def max_norm_moments(spec: NetworkSpec, seed: Optional[int] = None) -> Tuple[float, float]:
    """
    Mean and variance of ‖𝒯_1‖.

    Independent services use quadrature of the first two moments of the
    maximum; the correlated model uses Monte Carlo.
    """
    spec = validate(spec)
    if spec.correlation is not None:
        sampler = ServiceSampler(spec, config.default_seed() if seed is None else seed)
        maxima = sampler.sample_block(config.MONTE_CARLO["chunk_size"]).max(axis=1)
        return float(maxima.mean()), float(maxima.var())

    distributions = spec.services
    horizon = max(d.isf(config.QUADRATURE["tail_cutoff"]) for d in distributions)
    if horizon <= 0.0:
        return 0.0, 0.0

    def survival_of_max(t: float) -> float:
        product = 1.0
        for d in distributions:
            product *= d.cdf(t)
        return 1.0 - product

    points = sorted({float(d.value) for d in distributions
                     if isinstance(d, Constant) and 0.0 < d.value < horizon}) or None
    first, _ = integrate.quad(survival_of_max, 0.0, horizon, limit=config.QUADRATURE["limit"],
                              points=points)
    second, _ = integrate.quad(lambda t: 2.0 * t * survival_of_max(t), 0.0, horizon,
                               limit=config.QUADRATURE["limit"], points=points)
    return first, max(second - first ** 2, 0.0)


def finite_horizon_upper(spec: NetworkSpec, cycles: int, upper: Optional[float] = None,
                         seed: Optional[int] = None) -> float:
    """
    E‖x(K)‖/K <= E‖𝒯_1‖ + (q/K)·(E‖𝒯_1‖ + (K-1)/√(2K-1)·√D‖𝒯_1‖).

    Args:
        spec: Network spec
        cycles: Horizon K
        upper: E‖𝒯_1‖ if already known
        seed: Monte Carlo seed for correlated services

    Returns:
        Finite-horizon upper bound on the expected running estimate
    """
    q = build_partial_graphs(spec).q
    mean, variance = max_norm_moments(spec, seed)
    upper = mean if upper is None else upper
    return upper + q / cycles * gumbel_hartley(mean, variance, cycles)


# ==============================================================================
# Per-cycle Sandwich
# ==============================================================================

@dataclass
class SandwichReport:
    """Per-cycle bounds lower_k <= ‖x(k)‖ <= upper_k and any violations."""
    lower: np.ndarray
    upper: np.ndarray
    q: int
    violations: int = 0
    violating_cycles: List[int] = field(default_factory=list)

    @property
    def violated(self) -> bool:
        return self.violations > 0


def sandwich(trajectory: CycleTrajectory, q: Optional[int] = None) -> SandwichReport:
    """
    Check ‖𝒯_1 + ... + 𝒯_k‖ <= ‖x(k)‖ <= Σ‖𝒯_i‖ + q·max‖𝒯_i‖ for every cycle.

    A violation means the simulator is wrong;
    it is logged as an error and reported.

    Args:
        trajectory: Run to check
        q: Longest path of G_0 ⊕ ... ⊕ G_M (default: the run's own q)

    Returns:
        SandwichReport with the bound series and violation count
    """
    q = trajectory.q if q is None else q
    upper = trajectory.upper if q == trajectory.q else upper_envelope(trajectory.cycle_max, q)
    lower = trajectory.lower
    norms = trajectory.norms

    slack = config.SIMULATION["sandwich_rtol"] * np.maximum(1.0, np.abs(upper))
    bad = (lower > norms + slack) | (norms > upper + slack)
    violating = [int(k) + 1 for k in np.flatnonzero(bad)]

    if violating:
        logger.error(f"✗ Sandwich bounds violated in {len(violating)} cycle(s), "
                     f"first at k={violating[0]}: this is a simulator bug")
    else:
        logger.debug(f"✓ Sandwich bounds hold for all {trajectory.cycles} cycles")

    return SandwichReport(lower=lower, upper=upper, q=q,
                          violations=len(violating), violating_cycles=violating[:100])


# ==============================================================================
# Estimation
# ==============================================================================

@dataclass
class Estimate:
    """Mean cycle time estimate γ̂ = ‖x(K)‖/K and throughput π = 1/γ̂."""
    gamma_hat: float
    throughput: float
    cycles: int
    series: List[Tuple[int, float]]
    degenerate: bool = False


def convergence_series(trajectory: CycleTrajectory, points: int = 25) -> List[Tuple[int, float]]:
    """γ̂_k at logarithmically spaced k, always ending at K."""
    ks = np.unique(np.geomspace(1, trajectory.cycles, num=points).round().astype(int))
    gamma = trajectory.gamma_hat
    return [(int(k), float(gamma[k - 1])) for k in ks]


def estimate(trajectory: CycleTrajectory, points: int = 25) -> Estimate:
    """
    Single-run estimator of the mean cycle time.

    Returns:
        Estimate; with all-zero services γ̂ = 0, π = inf and `degenerate` set
    """
    gamma_hat = trajectory.final_gamma
    degenerate = gamma_hat == 0.0
    if degenerate:
        logger.warning("γ̂ = 0 (all service times zero); throughput reported as infinite")

    return Estimate(
        gamma_hat=gamma_hat,
        throughput=math.inf if degenerate else 1.0 / gamma_hat,
        cycles=trajectory.cycles,
        series=convergence_series(trajectory, points),
        degenerate=degenerate,
    )
