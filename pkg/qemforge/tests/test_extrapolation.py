"""
Test Richardson coefficients, node combination and boosted-run planning
"""
import math

import numpy as np
from django.test import SimpleTestCase

from qemforge.benchmarks import depolarizing, lowfreq
from qemforge.exceptions import ExtrapolationError
from qemforge.extrapolation import (
    ExtrapolationNodes,
    extrapolate,
    plan_boosted_runs,
    richardson_coefficients,
    truncation_bound,
)
from qemforge.lindblad import (
    DensityState,
    EvolutionConfig,
    HamiltonianSpec,
    LindbladTerm,
    NoiseModel,
    TimeProfile,
    evolve_ideal,
    evolve_rescaled,
)
from qemforge.pauli import PAULI_MATRICES, PauliString
from qemforge.stochastic import EstimatorResult


class TestRichardsonCoefficients(SimpleTestCase):
    """Test closed-form extrapolation coefficients."""

    def test_two_nodes(self):
        nodes = richardson_coefficients([1, 2])
        self.assertEqual(nodes.beta, (2.0, -1.0))
        self.assertEqual(nodes.gamma, 3.0)
        self.assertEqual(nodes.order, 1)

    def test_default_nodes(self):
        nodes = richardson_coefficients([1.0, 1.8])
        self.assertAlmostEqual(nodes.beta[0], 2.25)
        self.assertAlmostEqual(nodes.beta[1], -1.25)

    def test_single_node_is_identity(self):
        self.assertEqual(richardson_coefficients([1]).beta, (1.0,))

    def test_moment_conditions(self):
        for r in ([1, 1.5], [1, 1.5, 2], [1, 1.3, 1.7, 2.2, 3]):
            nodes = richardson_coefficients(r)
            np.testing.assert_allclose(nodes.residuals(), 0.0, atol=1e-9)

    def test_polynomial_is_exact(self):
        nodes = richardson_coefficients([1, 1.5, 2])
        values = [0.3 - 0.2 * r + 0.05 * r * r for r in nodes.r]
        self.assertAlmostEqual(nodes.combine(values), 0.3)

    def test_decay_error_shrinks_with_order(self):
        def decay(r):
            return math.exp(-0.05 * r)

        errors = []
        for r in ([1], [1, 1.5], [1, 1.5, 2]):
            nodes = richardson_coefficients(r)
            errors.append(abs(nodes.combine([decay(x) for x in r]) - 1.0))
        self.assertLess(errors[1], errors[0])
        self.assertLess(errors[2], errors[1])
        self.assertLess(errors[2], 2e-4)

    def test_combine_arrays(self):
        nodes = richardson_coefficients([1, 2])
        combined = nodes.combine([np.array([1.0, 2.0]), np.array([1.5, 3.0])])
        np.testing.assert_allclose(combined, [0.5, 1.0])

    def test_combine_wrong_length(self):
        with self.assertRaises(ExtrapolationError):
            richardson_coefficients([1, 2]).combine([1.0])

    def test_invalid_nodes(self):
        for r in ([], [2, 3], [1, 1], [1, 0.5], [1, 2, 3, 4, 5, 6]):
            with self.subTest(r=r), self.assertRaises(ExtrapolationError):
                richardson_coefficients(r)


class TestMitigatedExtrapolation(SimpleTestCase):
    """Test Richardson extrapolation of a residual rate mismatch."""

    def extrapolated_error(self, rate):
        h = HamiltonianSpec((PauliString("Y", 0.6),), 1)
        dephasing = [NoiseModel((LindbladTerm(PAULI_MATRICES[3], (0,), r),)) for r in (1.2 * rate, rate)]
        residual = dephasing[0].difference(dephasing[1])
        start = DensityState.product("+", 1)
        cfg = EvolutionConfig(1.0)
        nodes = richardson_coefficients([1.0, 2.0])
        boosted = [evolve_rescaled(start, h, residual, r, cfg).matrix for r in nodes.r]
        return np.linalg.norm(nodes.combine(boosted) - evolve_ideal(start, h, cfg).matrix)

    def test_halving_rate_quarters_error(self):
        ratio = self.extrapolated_error(0.2) / self.extrapolated_error(0.1)
        self.assertGreater(ratio, 4 * 0.8)
        self.assertLess(ratio, 4 * 1.2)


class TestExtrapolate(SimpleTestCase):
    """Test combining node estimates."""

    def test_errors_add_in_quadrature(self):
        estimates = [EstimatorResult(0.9, 0.01, 100, 1.2, 0.12), EstimatorResult(0.85, 0.02, 200, 1.5, 0.1)]
        result = extrapolate(estimates, [1, 2])
        self.assertAlmostEqual(result.mean, 0.95)
        self.assertAlmostEqual(result.stderr, math.sqrt(0.02**2 + 0.02**2))
        self.assertEqual(result.n_samples, 300)
        self.assertAlmostEqual(result.C, 2 * 1.2 + 1.5)

    def test_accepts_prebuilt_nodes(self):
        nodes = ExtrapolationNodes((1.0, 2.0), (2.0, -1.0))
        result = extrapolate([EstimatorResult(1.0, 0, 1, 1, 0)] * 2, nodes)
        self.assertAlmostEqual(result.mean, 1.0)

    def test_count_mismatch(self):
        with self.assertRaises(ExtrapolationError):
            extrapolate([EstimatorResult(1.0, 0, 1, 1, 0)], [1, 2])


class TestBoostedRuns(SimpleTestCase):
    """Test rescaled run planning."""

    def test_constant_noise_boost(self):
        plan = plan_boosted_runs(2.0, [1, 1.5], [depolarizing(1, 0.1)])
        self.assertEqual(plan.exponent, 1)
        self.assertEqual([run.duration for run in plan.runs], [2.0, 3.0])
        self.assertEqual(plan.effective_nodes, (1.0, 1.5))

    def test_linear_noise_boost(self):
        plan = plan_boosted_runs(2.0, [1, 1.5], [lowfreq(1, 0.1)])
        self.assertEqual(plan.exponent, 2)
        self.assertEqual(plan.effective_nodes, (1.0, 2.25))
        self.assertAlmostEqual(plan.coefficients().beta[0], 2.25 / 1.25)

    def test_no_noise_defaults_to_constant(self):
        self.assertEqual(plan_boosted_runs(1.0, [1, 2]).exponent, 1)

    def test_mixed_profiles_rejected(self):
        with self.assertRaises(ExtrapolationError):
            plan_boosted_runs(1.0, [1, 2], [TimeProfile.constant(), TimeProfile.linear(1.0)])

    def test_piecewise_rejected(self):
        profile = TimeProfile("piecewise", 1.0, (0.0, 1.0), (1.0,))
        with self.assertRaises(ExtrapolationError):
            plan_boosted_runs(1.0, [1, 2], [profile])

    def test_shrinking_rejected(self):
        with self.assertRaises(ExtrapolationError):
            plan_boosted_runs(1.0, [1, 0.5])

    def test_unsupported_item(self):
        with self.assertRaises(ExtrapolationError):
            plan_boosted_runs(1.0, [1, 2], ["dephasing"])


class TestTruncationBound(SimpleTestCase):
    """Test the residual error bound."""

    def test_value(self):
        bound = truncation_bound(1, 2.0, 0.1, 1.0, 1.0, 1.0, 100, 1.0, 1.5)
        self.assertAlmostEqual(bound, 3 * (0.6 + 0.02))

    def test_zero_order(self):
        bound = truncation_bound(0, 1.0, 0.1, 1.0, 1.0, 1.0, 100, 1.0, 1.0)
        self.assertAlmostEqual(bound, 0.1 + 0.1)

    def test_without_samples(self):
        self.assertEqual(truncation_bound(1, 2.0, 0.1, 1.0, 1.0, 1.0, 0, 1.0, 1.0), math.inf)

    def test_negative_input(self):
        with self.assertRaises(ValueError):
            truncation_bound(1, 2.0, -0.1, 1.0, 1.0, 1.0, 100, 1.0, 1.0)
