#!/usr/bin/env python3
"""
Test Suite for Service Time Models and Samplers

Tests:
- Exact moments of every service model, including the correlated mixture
- Parsing of tagged service records
- Stream layout of the seeded sampler (per replica and node)
- Empirical agreement of samples with the model moments

Usage:
    pytest tests/test_stochastic.py -v
"""

import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from network import fig1_network, tandem, validate
from stochastic import (
    Constant, CorrelatedExponential, Exponential, ScaledErlang, ServiceSampler,
    correlation_from_record, distribution_from_record, moments,
)


class TestModels:
    """Test per-node and network-level service models."""

    def test_per_node_moments(self):
        spec = tandem(3, [Constant(2.5), Exponential(2.0), ScaledErlang(4)])
        assert moments(spec) == [(2.5, 0.0), (2.0, 4.0), (1.0, 0.25)]

    def test_correlated_moments(self):
        spec = fig1_network(correlation=CorrelatedExponential(0.5))
        for mean, variance in moments(spec):
            assert mean == pytest.approx(1.0)
            assert variance == pytest.approx(0.3125)

    def test_weights(self):
        c, d = CorrelatedExponential(1.0).weights(5)
        assert (c, d) == (1.0, 0.0)
        c, d = CorrelatedExponential(0.2).weights(5)
        assert c == 0.0
        assert d == 0.2

    def test_mixing_matrix_rows_sum_to_one(self):
        for a in (1.0, 0.5, 1 / 3, 0.25, 0.2):
            weights = CorrelatedExponential(a).mixing_matrix(5)
            assert np.allclose(weights.sum(axis=1), 1.0)
            assert np.allclose(np.diag(weights), a)

    def test_cdf_and_tail(self):
        assert Exponential(1.0).cdf(1.0) == pytest.approx(1 - math.exp(-1))
        assert Exponential(2.0).cdf(-1.0) == 0.0
        assert ScaledErlang(1).cdf(0.7) == pytest.approx(Exponential(1.0).cdf(0.7))
        assert ScaledErlang(3).cdf(1.0) == pytest.approx(1 - math.exp(-3) * (1 + 3 + 4.5))
        assert Exponential(1.0).isf(1e-12) == pytest.approx(-math.log(1e-12))
        assert Constant(3.0).cdf(2.9) == 0.0
        assert Constant(3.0).cdf(3.0) == 1.0


class TestRecords:
    """Test parsing of tagged service records."""

    def test_round_trip(self):
        for dist in (Constant(1.5), Exponential(2.0), ScaledErlang(3)):
            assert distribution_from_record(dist.to_record()) == dist
        corr = CorrelatedExponential(0.5)
        assert correlation_from_record(corr.to_record()) == corr

    def test_integral_float_shape_accepted(self):
        assert distribution_from_record({"type": "scaled-erlang", "shape": 3.0}) == ScaledErlang(3)

    def test_unknown_type(self):
        with pytest.raises(ValueError, match="unknown service type"):
            distribution_from_record({"type": "weibull", "shape": 2})

    def test_unknown_and_missing_keys(self):
        with pytest.raises(ValueError, match="unknown keys"):
            distribution_from_record({"type": "exponential", "mean": 1.0, "rate": 1.0})
        with pytest.raises(ValueError, match="missing keys"):
            distribution_from_record({"type": "exponential"})

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            distribution_from_record({"type": "exponential", "mean": 0.0})
        with pytest.raises(ValueError):
            distribution_from_record({"type": "constant", "value": True})
        with pytest.raises(ValueError):
            distribution_from_record({"type": "scaled-erlang", "shape": 2.5})
        with pytest.raises(ValueError):
            correlation_from_record({"type": "exponential", "a": 0.5})


class TestSampler:
    """Test stream layout and reproducibility of the sampler."""

    def test_cycles_must_be_sequential(self):
        sampler = ServiceSampler(fig1_network(), 1)
        sampler.sample_cycle(1)
        with pytest.raises(ValueError, match="in order"):
            sampler.sample_cycle(3)

    def test_negative_seed_rejected(self):
        with pytest.raises(ValueError):
            ServiceSampler(fig1_network(), -1)

    def test_block_size_does_not_change_values(self):
        spec = tandem(3, [Exponential(1.0), ScaledErlang(3), Constant(0.5)])
        small = ServiceSampler(spec, 9, block_size=3)
        large = ServiceSampler(spec, 9, block_size=100)
        for k in range(1, 21):
            assert small.sample_cycle(k) == large.sample_cycle(k)

    def test_block_matches_cycles(self):
        spec = fig1_network()
        block = ServiceSampler(spec, 4).sample_block(25)
        sampler = ServiceSampler(spec, 4)
        for k in range(1, 26):
            assert sampler.sample_cycle(k) == block[k - 1].tolist()

    def test_adding_nodes_keeps_existing_streams(self):
        small = ServiceSampler(tandem(3, [Exponential(1.0)] * 3), 17).sample_block(50)
        large = ServiceSampler(tandem(5, [Exponential(1.0)] * 5), 17).sample_block(50)
        assert np.array_equal(small, large[:, :3])

    def test_replicas_are_independent_streams(self):
        sampler = ServiceSampler(fig1_network(), 17)
        first = sampler.sample_block(10)
        other = sampler.with_replica(1).sample_block(10)
        assert not np.array_equal(first, other)

    def test_fully_mixed_services_are_equal(self):
        spec = fig1_network(correlation=CorrelatedExponential(0.2))
        block = ServiceSampler(spec, 3).sample_block(100)
        assert np.all(block == block[:, :1])

    @pytest.mark.parametrize("n", range(2, 13))
    def test_fully_mixed_tandem_services_are_equal(self, n):
        correlation = CorrelatedExponential(1.0 / n)
        assert correlation.weights(n)[0] == 0.0
        spec = validate(replace(tandem(n, [Exponential(1.0)] * n), services=(),
                                correlation=correlation))
        block = ServiceSampler(spec, 5).sample_block(100)
        assert np.all(block == block[:, :1])

    def test_empirical_moments(self):
        spec = tandem(3, [Exponential(2.0), ScaledErlang(4), Constant(1.0)])
        block = ServiceSampler(spec, 123).sample_block(200_000)
        assert block[:, 0].mean() == pytest.approx(2.0, abs=0.03)
        assert block[:, 1].mean() == pytest.approx(1.0, abs=0.01)
        assert block[:, 1].var() == pytest.approx(0.25, abs=0.01)
        assert np.all(block[:, 2] == 1.0)
        assert np.all(block >= 0.0)

    def test_correlated_empirical_moments(self):
        spec = fig1_network(correlation=CorrelatedExponential(0.5))
        block = ServiceSampler(spec, 8).sample_block(200_000)
        assert np.allclose(block.mean(axis=0), 1.0, atol=0.02)
        assert np.allclose(block.var(axis=0), 0.3125, atol=0.02)
