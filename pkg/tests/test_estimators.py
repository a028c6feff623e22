import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from edgelab.core import GeneralizedParams, PointConfiguration, SaoParams, sao_eta
from edgelab.estimators import (BETA_BRACKET, EstimatorSettings,
                                F_beta, FunctionalResult, beta_from_energy,
                                digamma, energy_statistic, estimator_T,
                                estimator_T_from_trace, exp_trace,
                                hamiltonian_energy, log_Z_gbe, rigidity_count,
                                sao_trace_constant, trace_constant_formula,
                                trace_leading_coefficient)

from conftest import SQRT_2_OVER_PI, synthetic_rigidity_config


class TestEstimatorSettings:
    def test_default_ladder(self):
        s = EstimatorSettings()
        np.testing.assert_array_equal(s.block_ends(),
                                      [1, 3, 6, 8, 12, 15, 19, 23, 27])
        assert s.n_terms == 27
        ts = s.times()
        assert ts.shape == (27,)
        assert ts[0] == pytest.approx(math.exp(-0.05))
        assert np.all(np.diff(ts) < 0)

    def test_validation(self):
        with pytest.raises(ValueError):
            EstimatorSettings(c1=0.0)
        with pytest.raises(ValueError):
            EstimatorSettings(c2=-1.0)
        with pytest.raises(ValueError):
            EstimatorSettings(M=0)


class TestExpTrace:
    def test_hand_value_and_tail(self):
        config = PointConfiguration(points=np.array([1.0, 2.0, 3.0]),
                                    source="test")
        tv = exp_trace(config, 2.0)
        assert tv.value == pytest.approx(
            math.exp(-1.0) + math.exp(-2.0) + math.exp(-3.0), rel=1e-15)
        # last gap 1: bound exp(-3) * (1 + 2 / (2 * 1))
        assert tv.tail_bound == pytest.approx(2.0 * math.exp(-3.0), rel=1e-15)
        assert not tv.flagged

    def test_flagging_follows_policy(self):
        config = PointConfiguration(points=np.array([0.0, 0.001]),
                                    source="test")
        assert exp_trace(config, 1.0, tail_policy=10.0).flagged
        assert not exp_trace(config, 1.0, tail_policy=1e9).flagged

    def test_empty_and_bad_t(self):
        empty = PointConfiguration(points=np.array([]), source="test")
        assert exp_trace(empty, 1.0) == (0.0, 0.0, False)
        config = PointConfiguration(points=np.array([1.0]), source="test")
        with pytest.raises(ValueError):
            exp_trace(config, 0.0)


class TestRecoveryFunctional:
    def test_constant_deviation_is_recovered_exactly(self):
        # trace = leading + c makes every deviation c, so the functional
        # returns 1/2 + 2c for any ladder
        for c in (0.0, 0.75, -1.25):
            got = estimator_T_from_trace(
                lambda t, c=c: SQRT_2_OVER_PI * t ** -1.5 + c,
                EstimatorSettings())
            assert got == pytest.approx(0.5 + 2.0 * c, abs=1e-12)

    def test_nearest_integer_rounds_half_up(self):
        def result(v):
            return FunctionalResult(value=v, block_averages=np.array([v]),
                                    last_increment=0.0, diverged=False)
        assert result(1.49).nearest_integer == 1
        assert result(1.5).nearest_integer == 2
        assert result(-0.6).nearest_integer == -1

    def test_empty_spectrum_diverges(self):
        empty = PointConfiguration(points=np.array([]), source="test")
        res = estimator_T(empty, EstimatorSettings())
        assert res.diverged
        assert res.last_increment > 0

    def test_tail_flag_propagates(self):
        config = PointConfiguration(points=np.array([0.0, 0.001]),
                                    source="test")
        res = estimator_T(config, EstimatorSettings(), tail_policy=10.0)
        assert res.flagged


class TestTraceConstants:
    def test_edge_canonical_reduction(self):
        for theta in (SaoParams(1, 2.0, (math.inf,)),
                      SaoParams(2, 1.0, (0.0, math.inf)),
                      SaoParams(3, 4.0, (1.5, math.inf, 0.0))):
            assert trace_constant_formula(theta, sao_eta(theta)) == pytest.approx(
                sao_trace_constant(theta), abs=1e-13)

    def test_hand_values(self):
        theta = SaoParams(1, 2.0, (math.inf,))
        assert sao_trace_constant(theta) == pytest.approx(0.0 + 0.5 / 2 - 0.25)
        eta = GeneralizedParams(kappa=2.0, sigma=1.0, upsilon=0.5)
        theta2 = SaoParams(2, 2.0, (0.0, 0.0))
        # (2*2 - 2 + 2*1/2 + 2*1*0.25/2) / 4
        assert trace_constant_formula(theta2, eta) == pytest.approx(3.25 / 4)

    def test_leading_coefficient(self):
        assert trace_leading_coefficient(1, 1.0) == pytest.approx(
            1.0 / math.sqrt(2.0 * math.pi))
        assert trace_leading_coefficient(4, 2.0) == pytest.approx(
            2.0 / math.sqrt(2.0 * math.pi))


class TestRigidityCount:
    def test_synthetic_removals_are_exact(self):
        settings = EstimatorSettings(c1=4.0, c2=0.5, M=1)
        for j in (0, 3, 5):
            config = synthetic_rigidity_config(j, settings)
            res = rigidity_count(config, (0.0, 1.0), (0, 2.0), settings)
            assert res.value == pytest.approx(j, abs=1e-10)
            assert res.nearest_integer == j

    def test_rejects_points_inside_window(self):
        config = PointConfiguration(points=np.array([0.5, 2.0]), source="test")
        with pytest.raises(ValueError, match="inside the window"):
            rigidity_count(config, (0.0, 1.0), (1, 2.0), EstimatorSettings())

    def test_rejects_empty_window(self):
        config = PointConfiguration(points=np.array([2.0]), source="test")
        with pytest.raises(ValueError, match="window"):
            rigidity_count(config, (1.0, 1.0), (1, 2.0), EstimatorSettings())


class TestLogGasEnergy:
    def test_hand_value(self):
        # (1/4)(1 + 1) - (1/2) log 2
        got = hamiltonian_energy([-1.0, 1.0], 2)
        assert got == pytest.approx(0.5 - 0.5 * math.log(2.0), rel=1e-15)

    def test_validation(self):
        with pytest.raises(ValueError):
            hamiltonian_energy([1.0, 2.0, 3.0], 2)
        with pytest.raises(ValueError):
            hamiltonian_energy([1.0, 1.0], 2)
        with pytest.raises(ValueError):
            hamiltonian_energy([1.0], 1)


class TestDigamma:
    def test_matches_mpmath(self):
        for x in (0.05, 0.37, 1.0, 1.5, 2.0, 7.3, 12.0, 150.0):
            want = float(mpmath.digamma(x))
            assert digamma(x) == pytest.approx(want, rel=1e-14, abs=1e-14)

    def test_rejects_nonpositive(self):
        for x in (0.0, -1.0, math.nan):
            with pytest.raises(ValueError):
                digamma(x)


class TestBetaRecoveryMap:
    def test_F_is_increasing_and_negative(self):
        grid = np.geomspace(BETA_BRACKET[0], BETA_BRACKET[1], 60)
        vals = [F_beta(b) for b in grid]
        assert np.all(np.diff(vals) > 0)
        assert vals[-1] < 0

    def test_known_value_at_beta_2(self):
        # log(1) - 2 psi(2) = -2 (1 - gamma)
        want = -2.0 * (1.0 - 0.5772156649015329)
        assert F_beta(2.0) == pytest.approx(want, rel=1e-14)

    def test_roundtrip_through_energy(self):
        n = 50
        for beta in (0.5, 1.0, 2.0, 4.0, 17.0):
            # invert the statistic's affine map by hand to fabricate an
            # energy whose statistic lands exactly on F(beta)
            energy = 0.375 * n - 0.5 * math.log(n) - (F_beta(beta) + 1.0) / 4.0
            got = beta_from_energy(energy, n)
            assert got == pytest.approx(beta, rel=1e-8)

    def test_out_of_range_energy_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            beta_from_energy(1e9, 100)


class TestPartitionFunction:
    def test_matches_quadrature_n2(self):
        n, beta = 2, 1.7
        c = 0.25 * n * beta

        def integrand(y, x):
            return abs(x - y) ** beta * math.exp(-c * (x * x + y * y))

        z, err = integrate.dblquad(integrand, -8.0, 8.0, -8.0, 8.0,
                                   epsabs=1e-12, epsrel=1e-12)
        assert log_Z_gbe(n, beta) == pytest.approx(math.log(z), abs=1e-8)

    def test_validation(self):
        with pytest.raises(ValueError):
            log_Z_gbe(0, 2.0)
        with pytest.raises(ValueError):
            log_Z_gbe(3, 0.0)
