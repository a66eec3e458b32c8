#!/usr/bin/env python3
"""
Test Suite for Mean Cycle Time Analysis

Tests:
- Lower and upper bounds against the reference table columns
- Inclusion-exclusion, quadrature and Monte Carlo expected maxima
- Gumbel-Hartley bound on expected maxima
- Per-cycle sandwich bounds and violation reporting
- Estimates, throughput and convergence series

Usage:
    pytest tests/test_analysis.py -v
"""

import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from analysis import (
    BoundsReport, CycleTrajectory, bounds, estimate, expected_max_exponentials,
    expected_max_quadrature, finite_horizon_upper, gumbel_hartley, harmonic_number,
    lower_bound, max_norm_moments, monte_carlo_expected_max, sandwich, upper_bound,
)
from dynamics import run, upper_envelope
from network import fig1_network, tandem
from stochastic import Constant, CorrelatedExponential, Exponential, ScaledErlang, ServiceSampler


ANALYTIC_TOL = 5e-7

TABLE1_UPPER = {"1": 2.283333, "1/2": 1.481250, "1/3": 1.213889, "1/4": 1.080208, "1/5": 1.000000}
TABLE2_UPPER = [2.283333, 2.896032, 3.685531, 4.554525, 5.465368,
                6.400835, 7.351985, 8.313731, 9.282968, 10.257692]
TABLE3_UPPER = [2.928968, 2.311479, 2.045538, 1.890824, 1.787242,
                1.711943, 1.654154, 1.608064, 1.570232, 1.538479]


def dominated_fig1(mean_4):
    services = [Exponential(1.0)] * 5
    services[3] = Exponential(mean_4)
    return fig1_network(services=services)


class TestBounds:
    """Test the analytic bound columns."""

    def test_correlated_network_bounds(self):
        for label, printed in TABLE1_UPPER.items():
            spec = fig1_network(correlation=CorrelatedExponential(float(Fraction(label))))
            upper = upper_bound(spec)
            assert lower_bound(spec) == pytest.approx(1.0, abs=1e-12)
            assert upper.method == "analytic"
            assert abs(upper.value - printed) <= ANALYTIC_TOL, label

    def test_correlated_closed_form(self):
        for a in (1.0, 0.5, 1 / 3, 0.25, 0.2):
            spec = fig1_network(correlation=CorrelatedExponential(a))
            c, d = (5 * a - 1) / 4, (1 - a) / 4
            assert upper_bound(spec).value == pytest.approx(c * harmonic_number(5) + 5 * d, abs=1e-12)

    def test_dominating_service_bounds(self):
        for mean_4, printed in zip(range(1, 11), TABLE2_UPPER):
            spec = dominated_fig1(float(mean_4))
            upper = upper_bound(spec)
            assert lower_bound(spec) == float(mean_4)
            assert upper.method == "analytic"
            assert abs(upper.value - printed) <= ANALYTIC_TOL, mean_4

    def test_dominating_service_closed_form(self):
        exact = 2 + 4 - 8 / 3 - 3 + 12 / 5 + 4 / 3 - 8 / 7 - 1 / 4 + 2 / 9
        assert upper_bound(dominated_fig1(2.0)).value == pytest.approx(exact, abs=1e-12)

    def test_quadrature_agrees_with_inclusion_exclusion(self):
        for mean_4 in (1.0, 2.0, 5.0, 10.0):
            spec = dominated_fig1(mean_4)
            exact = expected_max_exponentials([d.mean for d in spec.services])
            assert expected_max_quadrature(spec.services) == pytest.approx(exact, abs=1e-7)
            forced = upper_bound(spec, method="quadrature")
            assert forced.method == "quadrature"
            assert forced.value == pytest.approx(exact, abs=1e-7)

    def test_erlang_tandem_bounds(self):
        for r, printed in zip(range(1, 11), TABLE3_UPPER):
            spec = tandem(10, [ScaledErlang(r)] * 10)
            upper = upper_bound(spec)
            tolerance = ANALYTIC_TOL if r == 1 else 1e-4
            assert upper.method == ("analytic" if r == 1 else "quadrature")
            assert abs(upper.value - printed) <= tolerance, r
            assert lower_bound(spec) == 1.0

    def test_five_node_erlang_tandem_differs_from_printed(self):
        spec = tandem(5, [ScaledErlang(1)] * 5)
        assert upper_bound(spec).value == pytest.approx(harmonic_number(5), abs=1e-12)
        assert abs(upper_bound(spec).value - TABLE3_UPPER[0]) > 0.5

    def test_constant_services(self):
        spec = tandem(3, [Constant(1.0), Constant(4.0), Constant(2.0)])
        report = bounds(spec)
        assert report.lower == 4.0
        assert report.upper == 4.0
        assert report.upper_method == "analytic"

    def test_harmonic_numbers(self):
        assert harmonic_number(1) == 1.0
        assert harmonic_number(5) == pytest.approx(137 / 60, abs=1e-15)
        assert harmonic_number(10) == pytest.approx(2.9289683, abs=1e-7)

    def test_report_dict(self):
        report = bounds(fig1_network())
        assert isinstance(report, BoundsReport)
        record = report.to_dict()
        assert record["lower"] <= record["upper"]
        assert record["gamma_estimate"] is None

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            upper_bound(fig1_network(), method="simpson")


class TestMonteCarlo:
    """Test Monte Carlo estimates and expectation inequalities."""

    def test_matches_analytic_value(self):
        spec = dominated_fig1(3.0)
        value, halfwidth = monte_carlo_expected_max(spec, samples=400_000, seed=1)
        exact = expected_max_exponentials([d.mean for d in spec.services])
        assert halfwidth > 0
        assert abs(value - exact) <= 3 * halfwidth

    def test_correlated_quadrature_request_falls_back(self, caplog):
        spec = fig1_network(correlation=CorrelatedExponential(0.5))
        with caplog.at_level(logging.WARNING):
            upper = upper_bound(spec, method="quadrature", samples=200_000, seed=2)
        assert upper.method == "monte-carlo"
        assert upper.ci_halfwidth is not None
        assert abs(upper.value - 1.48125) <= 3 * upper.ci_halfwidth
        assert "Monte Carlo" in caplog.text

    def test_expected_maximum_exceeds_maximum_of_means(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            means = rng.uniform(0.2, 3.0, size=n)
            spec = tandem(n, [Exponential(float(m)) for m in means])
            block = ServiceSampler(spec, int(rng.integers(0, 1000))).sample_block(20_000)
            maxima = block.max(axis=1)
            stderr = maxima.std() / math.sqrt(len(maxima))
            assert maxima.mean() >= means.max() - 3 * stderr

    def test_expected_norm_exceeds_norm_of_expectation(self):
        rng = np.random.default_rng(37)
        for _ in range(20):
            shape = (int(rng.integers(1, 4)), int(rng.integers(1, 4)))
            means = rng.uniform(-2.0, 2.0, size=shape)
            noise = rng.exponential(1.0, size=(20_000,) + shape) - 1.0
            norms = (means + noise).reshape(20_000, -1).max(axis=1)
            stderr = norms.std() / math.sqrt(len(norms))
            assert norms.mean() >= means.max() - 3 * stderr


class TestGumbelHartley:
    """Test the extreme-value bound."""

    def test_single_variable_is_mean(self):
        assert gumbel_hartley(2.5, 4.0, 1) == 2.5

    def test_bounds_exponential_maxima(self):
        for k in range(1, 51):
            assert gumbel_hartley(1.0, 1.0, k) >= harmonic_number(k)

    def test_zero_variance(self):
        assert gumbel_hartley(3.0, 0.0, 100) == 3.0

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            gumbel_hartley(1.0, 1.0, 0)
        with pytest.raises(ValueError):
            gumbel_hartley(1.0, -0.5, 3)

    def test_norm_moments(self):
        mean, variance = max_norm_moments(tandem(5, [Exponential(1.0)] * 5))
        assert mean == pytest.approx(137 / 60, abs=1e-6)
        assert variance == pytest.approx(sum(1 / i ** 2 for i in range(1, 6)), abs=1e-6)

    def test_finite_horizon_upper(self):
        spec = fig1_network()
        upper = upper_bound(spec).value
        short = finite_horizon_upper(spec, 10)
        long = finite_horizon_upper(spec, 10_000)
        assert short > long > upper
        assert long - upper < 0.1


class TestSandwich:
    """Test per-cycle bounds on the cycle completion time."""

    def test_no_violations_on_simulated_runs(self):
        for spec in (fig1_network(), tandem(10, [ScaledErlang(3)] * 10),
                     fig1_network(correlation=CorrelatedExponential(0.5))):
            report = sandwich(run(spec, ServiceSampler(spec, 6), 2000))
            assert report.violations == 0
            assert not report.violated

    def test_violation_is_reported(self, caplog):
        cycle_max = np.array([1.0, 1.0, 1.0])
        trajectory = CycleTrajectory(
            norms=np.array([1.0, 50.0, 3.0]),
            lower=np.array([1.0, 2.0, 3.0]),
            upper=upper_envelope(cycle_max, 1),
            cycle_max=cycle_max,
            q=1,
        )
        with caplog.at_level(logging.ERROR):
            report = sandwich(trajectory)
        assert report.violations == 1
        assert report.violating_cycles == [2]
        assert "Sandwich bounds violated" in caplog.text

    def test_larger_q_recomputes_envelope(self):
        spec = fig1_network()
        trajectory = run(spec, ServiceSampler(spec, 2), 100)
        report = sandwich(trajectory, q=4)
        assert report.q == 4
        assert np.all(report.upper >= trajectory.upper)


class TestEstimate:
    """Test the single-run estimator."""

    def test_estimate_between_bounds(self):
        spec = fig1_network()
        trajectory = run(spec, ServiceSampler(spec, 10), 20_000)
        result = estimate(trajectory)
        assert result.gamma_hat >= trajectory.lower[-1] / 20_000
        assert lower_bound(spec) - 0.02 <= result.gamma_hat <= upper_bound(spec).value
        assert result.throughput == pytest.approx(1 / result.gamma_hat)
        assert np.all(trajectory.gamma_hat <= trajectory.upper / np.arange(1, 20_001))

    def test_convergence_series_ends_at_horizon(self):
        spec = fig1_network()
        result = estimate(run(spec, ServiceSampler(spec, 10), 1000), points=10)
        ks = [k for k, _ in result.series]
        assert ks[0] == 1
        assert ks[-1] == 1000
        assert ks == sorted(set(ks))

    def test_all_zero_services(self):
        spec = tandem(3, [Constant(0.0)] * 3)
        result = estimate(run(spec, ServiceSampler(spec, 0), 10))
        assert result.gamma_hat == 0.0
        assert result.degenerate
        assert math.isinf(result.throughput)

    @pytest.mark.slow
    def test_fully_mixed_estimate_matches_printed_value(self):
        spec = fig1_network(correlation=CorrelatedExponential(0.2))
        result = estimate(run(spec, ServiceSampler(spec, 20240501), 100_000))
        assert abs(result.gamma_hat - 1.0) <= 0.02
