"""
Test jump schedules, trajectories and the signed estimator
"""
import math

import numpy as np
import pytest
from django.test import SimpleTestCase, override_settings
from scipy import stats

from qemforge.benchmarks import dephasing, depolarizing, inhomogeneous_pauli, relax_dephase
from qemforge.decomposition import decompose_noise, invert_pauli_channel
from qemforge.exceptions import EstimatorError, ScheduleError
from qemforge.lindblad import (
    DensityState,
    EvolutionConfig,
    HamiltonianSpec,
    LindbladTerm,
    NoiseModel,
    Segment,
    Timeline,
    TimeProfile,
    evolve_ideal,
    evolve_noisy,
    trace_distance,
)
from qemforge.pauli import PAULI_MATRICES, KrausMap, PauliString
from qemforge.stochastic import (
    GateCorrection,
    JumpSchedule,
    RecoveryPlan,
    TrajectoryProblem,
    TrajectoryResult,
    continuous_reference,
    continuous_reference_states,
    effective_state_and_fidelity,
    estimate,
    estimate_series,
    run_trajectory,
    sample_jump_schedule,
    sample_schedules,
    simulate_trajectories,
    state_fidelity,
    trajectory_rng,
)
from qemforge.tasks import dispatch

I, X, Y, Z = PAULI_MATRICES


class ScriptedRng:
    """Stands in for a numpy Generator with a fixed sequence of uniforms."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


def x_field(w, n_qubits=1):
    return HamiltonianSpec(tuple(PauliString.from_sparse({q: "X"}, n_qubits, w) for q in range(n_qubits)), n_qubits)


class TestJumpSchedules(SimpleTestCase):
    """Test pre-sampling of recovery insertions."""

    def test_no_noise_no_jumps(self):
        schedule = sample_jump_schedule([], 2.0, 7)
        self.assertEqual(schedule.events, ())
        self.assertEqual(schedule.alpha, 1)

    def test_survival_inversion(self):
        decomps = decompose_noise(dephasing(1, 0.04))
        rng = ScriptedRng([1 - math.exp(-1), 0.5, 1 - 1e-6])
        schedule = sample_jump_schedule(decomps, 30.0, rng)
        [event] = schedule.events
        self.assertAlmostEqual(event.time, 25.0, places=10)
        self.assertEqual(decomps[0].basis[event.basis_index].name, "Z")
        self.assertEqual(schedule.alpha, -1)

    def test_linear_profile_inversion(self):
        slope = 0.3
        noise = NoiseModel((LindbladTerm(Z, (0,), slope, TimeProfile.linear(1.0)),))
        plan = RecoveryPlan.single(decompose_noise(noise), 100.0)
        time, window = plan.next_jump(0.0, 0.7, 100.0)
        self.assertEqual(window, 0)
        self.assertAlmostEqual(time, math.sqrt(2 * 0.7 / slope), places=10)

    def test_piecewise_windows(self):
        decomps = decompose_noise(dephasing(1, 0.5))
        plan = RecoveryPlan([(0.0, 1.0, []), (1.0, 3.0, decomps)])
        self.assertAlmostEqual(plan.hazard(0.0, 3.0), 1.0)
        time, window = plan.next_jump(0.0, 0.25, 3.0)
        self.assertEqual(window, 1)
        self.assertAlmostEqual(time, 1.5)
        self.assertIsNone(plan.next_jump(0.0, 2.0, 3.0))

    def test_mean_jump_count(self):
        decomps = decompose_noise(relax_dephase(2, 0.2, 0.3))
        T = 2.0
        expected = sum(d.gamma for d in decomps) * T
        counts = np.array([s.n_jumps for s in sample_schedules(RecoveryPlan.single(decomps, T), T, 11, 4000)])
        stderr = math.sqrt(expected / len(counts))
        self.assertLess(abs(counts.mean() - expected), 4 * stderr)

    def test_inter_jump_times_are_exponential(self):
        decomps = decompose_noise(depolarizing(1, 1.0))
        gamma = decomps[0].gamma
        intervals = []
        for index in range(200):
            # the first ten gaps of a Poisson process are iid; 60 us leaves ~45 events
            times = [e.time for e in sample_jump_schedule(decomps, 60.0, 3, index).events][:10]
            intervals.extend(np.diff([0.0, *times]))
        result = stats.kstest(intervals, "expon", args=(0, 1 / gamma))
        self.assertGreater(result.pvalue, 1e-3)

    def test_schedules_are_reproducible(self):
        decomps = decompose_noise(depolarizing(2, 0.5))
        first = sample_jump_schedule(decomps, 3.0, 2021, 17)
        second = sample_jump_schedule(decomps, 3.0, 2021, 17)
        self.assertEqual(first, second)
        self.assertNotEqual(first.key, sample_jump_schedule(decomps, 3.0, 2021, 18).key)
        self.assertEqual(trajectory_rng(1, 2).random(), trajectory_rng(1, 2).random())

    def test_parity_is_product_of_events(self):
        decomps = decompose_noise(depolarizing(1, 2.0))
        for index in range(20):
            schedule = sample_jump_schedule(decomps, 2.0, 5, index)
            self.assertEqual(schedule.alpha, (-1) ** schedule.n_jumps)

    def test_schedule_validation(self):
        with self.assertRaises(ScheduleError):
            JumpSchedule(((0.5, 0, 3, -1), (0.5, 0, 3, -1)))
        with self.assertRaises(ScheduleError):
            JumpSchedule(((0.5, 0, 3, 2),))
        with self.assertRaises(ScheduleError):
            sample_jump_schedule([], -1.0, 0)

    def test_prefix_alpha(self):
        schedule = JumpSchedule(((0.2, 0, 3, -1), (0.6, 0, 3, -1)))
        self.assertEqual([schedule.prefix_alpha(t) for t in (0.1, 0.2, 0.5, 1.0)], [1, -1, -1, 1])


class TestTrajectories(SimpleTestCase):
    """Test recovery-inserted trajectories."""

    def setUp(self):
        self.decomps = decompose_noise(dephasing(1, 0.1))

    def test_empty_schedule_is_noisy_evolution(self):
        h = x_field(0.7)
        noise = dephasing(1, 0.1)
        start = DensityState.product("0", 1)
        result = run_trajectory(JumpSchedule(), start, h, noise, Z, self.decomps, 1.0)
        expected = evolve_noisy(start, h, noise, EvolutionConfig(1.0)).expectation(Z)
        self.assertAlmostEqual(result.O_m, expected, places=8)
        self.assertAlmostEqual(result.weight, math.exp(0.2))

    def test_single_z_event_flips_x(self):
        schedule = JumpSchedule(((0.5, 0, 3, -1),))
        result = run_trajectory(
            schedule, DensityState.product("+", 1), HamiltonianSpec.zero(1), NoiseModel.empty(), X, self.decomps, 1.0
        )
        self.assertAlmostEqual(result.O_m, -1.0)
        self.assertEqual(result.alpha, -1)
        self.assertAlmostEqual(result.weight, -math.exp(0.2))

    def test_projector_halves_trace(self):
        pi_x = next(index for index, op in enumerate(self.decomps[0].basis) if op.name == "pi_x")
        schedule = JumpSchedule(((0.5, 0, pi_x, 1),))
        mixed = DensityState(np.eye(2) / 2)
        result = run_trajectory(schedule, mixed, HamiltonianSpec.zero(1), NoiseModel.empty(), Z, self.decomps, 1.0)
        self.assertAlmostEqual(result.trace, 0.5)

    def test_trace_preserving_recovery_keeps_trace(self):
        h = x_field(0.4, 2)
        noise = depolarizing(2, 0.6)
        decomps = decompose_noise(noise)
        plan = RecoveryPlan.single(decomps, 1.0)
        problem = TrajectoryProblem(
            Timeline.single(h, noise, 1.0), plan, DensityState.product("+", 2), np.kron(Z, Z), (0.5, 1.0), EvolutionConfig(1.0)
        )
        for schedule in sample_schedules(plan, 1.0, 9, 30):
            np.testing.assert_allclose(problem.run(schedule).traces, 1.0, atol=1e-8)

    def test_schedule_outside_plan(self):
        schedule = JumpSchedule(((0.5, 3, 3, -1),))
        with self.assertRaises(ScheduleError):
            run_trajectory(schedule, DensityState.product("+", 1), HamiltonianSpec.zero(1), NoiseModel.empty(), X, self.decomps, 1.0)

    def test_checkpoints_validated(self):
        plan = RecoveryPlan.single(self.decomps, 1.0)
        timeline = Timeline.single(HamiltonianSpec.zero(1), NoiseModel.empty(), 1.0)
        with self.assertRaises(ScheduleError):
            TrajectoryProblem(timeline, plan, DensityState.product("+", 1), X, (0.5, 2.0), EvolutionConfig(1.0))

    def test_recovery_error_follows_each_operation(self):
        from qemforge.benchmarks import inhomogeneous_pauli

        plan = RecoveryPlan.single(self.decomps, 1.0)
        timeline = Timeline.single(HamiltonianSpec.zero(1), NoiseModel.empty(), 1.0)
        problem = TrajectoryProblem(
            timeline, plan, DensityState.product("+", 1), X, (1.0,), EvolutionConfig(1.0), inhomogeneous_pauli(1, 0.0, 0.0, 0.1)
        )
        result = problem.run(JumpSchedule(((0.5, 0, 3, -1),)))
        # Z then a 10% Z error: <X> = -(1 - 2 * 0.1)
        self.assertAlmostEqual(result.O_m, -0.8)


class TestGateCorrections(SimpleTestCase):
    """Test sampled cancellation of the error after circuit gates."""

    ERROR = (0.1, 0.1, 0.2)

    def timeline(self):
        flip = KrausMap((X,), (0,))
        return Timeline(
            (
                Segment(0.5, HamiltonianSpec.zero(1), after=(flip,)),
                Segment(0.5, HamiltonianSpec.zero(1), before=(flip,)),
            ),
            1,
        )

    def test_corrections_count_once_applied(self):
        correction = GateCorrection(self.timeline(), invert_pauli_channel(*self.ERROR))
        self.assertEqual(correction.slots, ((0, "after", 1, 0), (1, "before", 1, 0)))
        self.assertEqual(correction.applied(0.25).tolist(), [False, False])
        self.assertEqual(correction.applied(0.5).tolist(), [True, False])
        self.assertEqual(correction.applied(0.75).tolist(), [True, True])
        self.assertAlmostEqual(correction.log_overhead(1.0), 2 * math.log(correction.gamma))

    def test_schedules_carry_one_pauli_per_gate_error(self):
        clean = self.timeline()
        correction = GateCorrection(clean, invert_pauli_channel(*self.ERROR))
        plan = RecoveryPlan.for_timeline(clean, [[], []], correction)
        for schedule in sample_schedules(plan, 1.0, 4, 20):
            self.assertEqual(len(schedule.corrections), 2)
            self.assertTrue(all(0 <= choice < 4 for choice in schedule.corrections))
        self.assertAlmostEqual(plan.log_overhead(1.0), 2 * math.log(correction.gamma))

    def test_sampled_corrections_undo_gate_errors(self):
        clean = self.timeline()
        error = inhomogeneous_pauli(1, *self.ERROR)
        plan = RecoveryPlan.for_timeline(clean, [[], []], GateCorrection(clean, invert_pauli_channel(*self.ERROR)))
        problem = TrajectoryProblem(
            clean.with_gate_error(error), plan, DensityState.product("0", 1), Z, (0.5, 1.0), EvolutionConfig(1.0)
        )
        results = simulate_trajectories(problem, 4000, 11, workers=1)
        first, final = estimate_series(results)
        self.assertLess(abs(first.mean + 1.0), 5 * first.stderr)
        self.assertLess(abs(final.mean - 1.0), 5 * final.stderr)


class TestEstimator(SimpleTestCase):
    """Test aggregation of trajectory outcomes."""

    def result(self, value, alpha=1, weight=1.0):
        return TrajectoryResult(np.array([value]), np.array([weight * alpha]), np.array([alpha]), np.array([1.0]))

    def test_identical_outcomes(self):
        est = estimate([self.result(0.3) for _ in range(5)], C=1.0)
        self.assertAlmostEqual(est.mean, 0.3)
        self.assertEqual(est.stderr, 0.0)
        self.assertEqual(est.n_samples, 5)
        self.assertAlmostEqual(est.predicted_error, 1 / math.sqrt(5))

    def test_signed_weights(self):
        results = [self.result(1.0, 1, 2.0), self.result(1.0, -1, 2.0), self.result(0.5, 1, 2.0)]
        est = estimate(results)
        self.assertAlmostEqual(est.mean, (2.0 - 2.0 + 1.0) / 3)
        self.assertAlmostEqual(est.C, 2.0)

    def test_empty(self):
        with self.assertRaises(EstimatorError):
            estimate([])

    def test_non_finite(self):
        with self.assertRaises(EstimatorError):
            estimate([self.result(float("nan"))], C=1.0)

    def test_overlaps_need_references(self):
        with self.assertRaises(EstimatorError):
            estimate([self.result(1.0)], quantity="overlaps")

    def test_exact_model_is_unbiased(self):
        h = x_field(0.9)
        noise = dephasing(1, 0.2)
        T = 1.0
        start = DensityState.product("0", 1)
        plan = RecoveryPlan.single(decompose_noise(noise), T)
        problem = TrajectoryProblem(Timeline.single(h, noise, T), plan, start, Z, (0.5, T), EvolutionConfig(T))
        results = simulate_trajectories(problem, 20000, 2021, workers=1)
        ideal = [evolve_ideal(start, h, EvolutionConfig(t)).expectation(Z) for t in (0.5, T)]
        for est, target in zip(estimate_series(results), ideal):
            self.assertLess(abs(est.mean - target), 5 * est.stderr)

    @override_settings(QEMFORGE_BATCH_SIZE=7)
    def test_worker_count_does_not_change_results(self):
        noise = depolarizing(1, 1.0)
        plan = RecoveryPlan.single(decompose_noise(noise), 1.0)
        problem = TrajectoryProblem(
            Timeline.single(x_field(0.5), noise, 1.0), plan, DensityState.product("0", 1), Z, (1.0,), EvolutionConfig(1.0)
        )
        schedules = sample_schedules(plan, 1.0, 4, 60)
        serial = dispatch(problem, schedules, workers=1)
        parallel = dispatch(problem, schedules, workers=2)
        self.assertEqual(estimate(serial), estimate(parallel))

    def test_simulate_needs_trajectories(self):
        plan = RecoveryPlan.single([], 1.0)
        problem = TrajectoryProblem(
            Timeline.single(HamiltonianSpec.zero(1), NoiseModel.empty(), 1.0), plan, DensityState.product("0", 1), Z, (1.0,),
            EvolutionConfig(1.0),
        )
        with self.assertRaises(EstimatorError):
            simulate_trajectories(problem, 0, 1)


class TestContinuousReference(SimpleTestCase):
    """Test the deterministic first-order mitigation reference."""

    def test_noiseless_equals_ideal(self):
        h = x_field(1.0)
        start = DensityState.product("0", 1)
        value = continuous_reference(start, h, NoiseModel.empty(), NoiseModel.empty(), 0.1, 1.0, Z)
        self.assertAlmostEqual(value, evolve_ideal(start, h, EvolutionConfig(1.0)).expectation(Z), places=8)

    def test_first_order_convergence(self):
        h = x_field(1.0)
        noise = dephasing(1, 0.1)
        start = DensityState.product("0", 1)
        ideal = evolve_ideal(start, h, EvolutionConfig(1.0))
        errors = []
        for dt in (1 / 64, 1 / 128):
            (rho,) = continuous_reference_states(start, h, noise, noise, dt, [1.0])
            errors.append(trace_distance(rho, ideal))
        self.assertGreater(errors[0] / errors[1], 1.7)
        self.assertLess(errors[0] / errors[1], 2.3)

    def test_states_at_several_times(self):
        noise = dephasing(1, 0.1)
        states = continuous_reference_states(DensityState.product("+", 1), HamiltonianSpec.zero(1), noise, noise, 0.25, [0.5, 1.0])
        self.assertEqual(len(states), 2)

    def test_invalid_step(self):
        start = DensityState.product("0", 1)
        with self.assertRaises(ScheduleError):
            continuous_reference(start, x_field(1.0), NoiseModel.empty(), NoiseModel.empty(), 0.0, 1.0, Z)
        with self.assertRaises(ScheduleError):
            continuous_reference(start, x_field(1.0), NoiseModel.empty(), NoiseModel.empty(), 0.3, 1.0, Z)

    @pytest.mark.slow
    def test_agrees_with_stochastic_estimate(self):
        h = x_field(0.8)
        noise = dephasing(1, 0.3)
        T = 1.0
        start = DensityState.product("0", 1)
        reference = continuous_reference(start, h, noise, noise, T / 2048, T, Z)
        plan = RecoveryPlan.single(decompose_noise(noise), T)
        problem = TrajectoryProblem(Timeline.single(h, noise, T), plan, start, Z, (T,), EvolutionConfig(T))
        est = estimate(simulate_trajectories(problem, 100_000, 7, workers=1))
        self.assertLess(abs(est.mean - reference), 3 * est.stderr + 1e-3)


class TestFidelity(SimpleTestCase):
    """Test effective states and fidelities."""

    def test_pure_state(self):
        psi = np.array([1, 1]) / np.sqrt(2)
        rho = np.outer(psi, psi.conj())
        self.assertAlmostEqual(state_fidelity(rho, psi), 1.0)

    def test_maximally_mixed(self):
        psi = np.zeros(4)
        psi[0] = 1
        self.assertAlmostEqual(state_fidelity(np.eye(4) / 4, psi), 0.5)

    def test_mixed_reference_rejected(self):
        with self.assertRaises(EstimatorError):
            state_fidelity(np.eye(2) / 2, np.eye(2) / 2)

    def test_signed_average(self):
        plus = DensityState.product("+", 1)
        minus = DensityState.product("-", 1)
        rho, fidelity = effective_state_and_fidelity([plus, plus, minus], 3.0, plus.matrix, alphas=[1, 1, -1])
        np.testing.assert_allclose(rho, (2 * plus.matrix - minus.matrix), atol=1e-12)
        # overlap 2 clips to 1
        self.assertEqual(fidelity, 1.0)

    def test_clipping_below_zero(self):
        plus = DensityState.product("+", 1)
        minus = DensityState.product("-", 1)
        _, fidelity = effective_state_and_fidelity([minus], 1.0, plus.matrix, alphas=[-1])
        self.assertAlmostEqual(fidelity, 0.0)
