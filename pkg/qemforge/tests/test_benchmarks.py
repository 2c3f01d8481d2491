"""
Test benchmark models, observables, noise presets and the CNOT circuit
"""
import math

import numpy as np
from django.test import SimpleTestCase

from qemforge.benchmarks import (
    LatticeSpec,
    build_cr_circuit,
    build_heisenberg2d,
    build_j1j2,
    build_tfim,
    cnot_pairs,
    cr_unitary,
    inhomogeneous_pauli,
    model_presets,
    noise_presets,
    observable_nn_correlation,
    rotation,
)
from qemforge.exceptions import NegativeRateError, UnknownPresetError
from qemforge.lindblad import DensityState, EvolutionConfig, evolve_timeline, trace_distance
from qemforge.pauli import PauliString


def labels(hamiltonian):
    return {term.labels: term.coefficient for term in hamiltonian.terms}


class TestLattice(SimpleTestCase):
    """Test lattice geometry."""

    def test_square_pairs(self):
        lattice = LatticeSpec(2, 2)
        self.assertEqual(lattice.nn_pairs, ((0, 1), (0, 2), (1, 3), (2, 3)))
        self.assertEqual(lattice.nnn_pairs, ((0, 3), (1, 2)))

    def test_chain_pairs(self):
        chain = LatticeSpec.chain(4)
        self.assertTrue(chain.is_chain)
        self.assertEqual(chain.nn_pairs, ((0, 1), (1, 2), (2, 3)))
        self.assertEqual(chain.nnn_pairs, ((0, 2), (1, 3)))

    def test_single_site_rejected(self):
        with self.assertRaises(ValueError):
            LatticeSpec(1, 1)


class TestHamiltonians(SimpleTestCase):
    """Test benchmark Hamiltonian coefficients."""

    def test_heisenberg_terms(self):
        h = build_heisenberg2d(1.0, 2.0, 0.5, LatticeSpec(1, 2))
        self.assertEqual(labels(h), {"XX": 1.5, "YY": 0.5, "ZZ": 1.0, "YI": -1.0, "IY": -1.0})

    def test_heisenberg_without_field(self):
        h = build_heisenberg2d(1.0, 2.0, 0.0, LatticeSpec(2, 2))
        self.assertEqual(len(h.terms), 12)
        self.assertNotIn("YIII", labels(h))

    def test_tfim(self):
        h = build_tfim(1.0, 0.5, 3)
        self.assertEqual(labels(h), {"ZZI": 1.0, "IZZ": 1.0, "XII": 0.5, "IXI": 0.5, "IIX": 0.5})
        with self.assertRaises(ValueError):
            build_tfim(1.0, 0.5, 1)

    def test_j1j2(self):
        h = build_j1j2(1.0, 0.25, 0.5, LatticeSpec(2, 2))
        self.assertEqual(labels(h)["ZIIZ"], 0.25)
        self.assertEqual(labels(h)["ZZII"], 1.0)
        self.assertEqual(labels(h)["XIII"], -0.5)

    def test_j1j2_without_second_neighbours(self):
        with self.assertRaises(ValueError):
            build_j1j2(1.0, 0.25, 0.0, LatticeSpec.chain(2))

    def test_correlation_observable(self):
        observable = observable_nn_correlation(LatticeSpec(2, 2))
        self.assertAlmostEqual(observable.entries[PauliString("XXII").index], 0.25)
        self.assertAlmostEqual(float(np.sum(observable.entries)), 1.0)
        # all spins along +x
        plus = DensityState.product("+", 4)
        self.assertAlmostEqual(plus.expectation(observable.to_matrix()), 1.0)


class TestCrCircuit(SimpleTestCase):
    """Test the cross-resonance CNOT circuit."""

    def test_cr_unitary_builds_cnot(self):
        frame = np.kron(rotation("Z", math.pi / 2), rotation("X", math.pi / 2))
        cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
        u = frame @ cr_unitary()
        phase = u[0, 0] / abs(u[0, 0])
        np.testing.assert_allclose(u / phase, cnot, atol=1e-12)

    def test_brickwork(self):
        self.assertEqual(cnot_pairs(0, 4), ((0, 1), (2, 3)))
        self.assertEqual(cnot_pairs(1, 4), ((1, 2),))

    def test_seeded_circuit_is_reproducible(self):
        first, _ = build_cr_circuit(3, 7, 1.0, 0.0)
        second, _ = build_cr_circuit(3, 7, 1.0, 0.0)
        self.assertEqual(first.rotations, second.rotations)
        self.assertAlmostEqual(first.duration, 3 * math.pi / 4)

    def test_timeline_matches_unitary(self):
        """Test that the noiseless drive timeline reproduces the ideal circuit."""
        spec, timeline = build_cr_circuit(3, 11, 2.0, 0.0, n_qubits=3)
        start = DensityState.product("0", 3)
        [state] = evolve_timeline(start, timeline, EvolutionConfig(timeline.duration), [timeline.duration])
        u = spec.unitary()
        expected = u @ start.matrix @ u.conj().T
        self.assertLess(trace_distance(state.matrix, expected), 1e-6)

    def test_crosstalk_is_segment_noise(self):
        _, timeline = build_cr_circuit(2, 1, 1.0, 0.1)
        coherent = timeline.segments[0].noise.coherent_error
        self.assertEqual(labels(coherent), {"IXII": 0.1, "IIIX": 0.1})

    def test_invalid_circuit(self):
        with self.assertRaises(ValueError):
            build_cr_circuit(0, 1, 1.0, 0.0)
        with self.assertRaises(ValueError):
            build_cr_circuit(1, 1, 0.0, 0.0)


class TestPresets(SimpleTestCase):
    """Test preset lookup by name."""

    def test_relax_dephase(self):
        noise = noise_presets("relax_dephase", {"lambda1": 0.01, "lambda2": 0.02}, 2)
        self.assertEqual(len(noise.terms), 4)
        self.assertAlmostEqual(noise.total_rate, 0.06)

    def test_zero_rates_drop_terms(self):
        self.assertTrue(noise_presets("dephasing", {"rate": 0.0}, 2).is_empty)

    def test_depolarizing_splits_rate(self):
        noise = noise_presets("depolarizing", {"rate": 0.04}, 1)
        self.assertEqual(len(noise.terms), 3)
        for term in noise.terms:
            self.assertAlmostEqual(term.rate, 0.01)

    def test_lowfreq_is_linear(self):
        noise = noise_presets("lowfreq", {"lambda_prime": 0.1}, 1)
        self.assertEqual(noise.terms[0].time_profile.kind, "linear")

    def test_negative_rate(self):
        with self.assertRaises(NegativeRateError):
            noise_presets("relax_dephase", {"lambda1": -0.01, "lambda2": 0.0}, 1)

    def test_bad_parameters(self):
        with self.assertRaises(ValueError):
            noise_presets("dephasing", {"gamma": 0.1}, 1)
        with self.assertRaises(ValueError):
            model_presets("tfim", {"J": 1.0})

    def test_unknown_preset(self):
        with self.assertRaises(UnknownPresetError):
            noise_presets("thermal", {}, 1)

    def test_model_preset(self):
        benchmark = model_presets("heisenberg2d", {"J": 1.0, "h": 1.0, "anisotropy": 0.5, "T": 2.0})
        self.assertEqual(benchmark.n_qubits, 4)
        self.assertAlmostEqual(benchmark.duration, 2.0)
        self.assertIsNone(benchmark.checkpoints)

    def test_cr_circuit_preset_checkpoints(self):
        benchmark = model_presets("cr_circuit", {"depth": 2, "seed": 3, "omega": 1.0, "crosstalk": 0.0})
        self.assertEqual(len(benchmark.checkpoints), 2)
        self.assertAlmostEqual(benchmark.checkpoints[-1], math.pi / 2)

    def test_inhomogeneous_pauli_is_channel(self):
        channel = inhomogeneous_pauli(1, 0.01, 0.02, 0.03)
        self.assertTrue(channel.trace_preserving)
        self.assertEqual(len(channel.operators), 4)
        with self.assertRaises(ValueError):
            inhomogeneous_pauli(1, 0.5, 0.5, 0.5)
