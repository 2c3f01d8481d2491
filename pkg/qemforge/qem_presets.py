"""
Built-in presets, registered when the app is ready.

Model builders take the physical parameters plus ``T`` (us) and return a
:class:`~qemforge.benchmarks.Benchmark`; noise builders take the qubit count
followed by their rates.
"""

from .benchmarks import (
    Benchmark,
    LatticeSpec,
    amplitude_damping,
    build_cr_circuit,
    build_heisenberg2d,
    build_j1j2,
    build_tfim,
    correlation_observable,
    depolarizing,
    dephasing,
    inhomogeneous_pauli,
    lowfreq,
    observable_nn_correlation,
    observable_nnn_correlation,
    relax_dephase,
    spin_benchmark,
    stark_shift,
)
from .lindblad import DensityState, HamiltonianSpec
from .pauli import PauliString, observable_vector
from .registry import preset_register


def _lattice_observable(lattice, observable, normalization):
    if observable == "nn":
        return observable_nn_correlation(lattice, normalization)
    if observable == "nnn":
        return observable_nnn_correlation(lattice, normalization)
    msg = f"Unknown correlation observable {observable!r}; expected 'nn' or 'nnn'"
    raise ValueError(msg)


@preset_register("model", "heisenberg2d")
def heisenberg2d(J, h, anisotropy, T, rows=2, cols=2, observable="nn", normalization=None):
    lattice = LatticeSpec(rows, cols)
    hamiltonian = build_heisenberg2d(J, h, anisotropy, lattice)
    return spin_benchmark("heisenberg2d", hamiltonian, _lattice_observable(lattice, observable, normalization), T, lattice)


@preset_register("model", "tfim")
def tfim(J, h, n, T, observable="nn", normalization=None):
    lattice = LatticeSpec.chain(n)
    hamiltonian = build_tfim(J, h, n)
    return spin_benchmark("tfim", hamiltonian, _lattice_observable(lattice, observable, normalization), T, lattice)


@preset_register("model", "j1j2")
def j1j2(J1, J2, h, T, rows=2, cols=2, observable="nn", normalization=None):
    lattice = LatticeSpec(rows, cols)
    hamiltonian = build_j1j2(J1, J2, h, lattice)
    return spin_benchmark("j1j2", hamiltonian, _lattice_observable(lattice, observable, normalization), T, lattice)


@preset_register("model", "ising_lowfreq")
def ising_lowfreq(J, h, T, n=2):
    """``J Z_1 Z_2 - h sum Z_j`` measured through the nearest-neighbour X correlation."""
    lattice = LatticeSpec.chain(n)
    hamiltonian = build_j1j2(J, 0.0, 0.0, lattice)
    fields = tuple(PauliString.from_sparse({q: "Z"}, n, -h) for q in range(n)) if h else ()
    hamiltonian = HamiltonianSpec(hamiltonian.terms + fields, n)
    return spin_benchmark("ising_lowfreq", hamiltonian, correlation_observable(lattice.nn_pairs, n), T, lattice)


@preset_register("model", "cr_circuit")
def cr_circuit(depth, seed, omega, crosstalk, n_qubits=4, T=None):
    """Circuit checkpoints sit at every layer end; ``T`` is implied by the depth."""
    spec, timeline = build_cr_circuit(depth, seed, omega, crosstalk, n_qubits)
    observable = observable_vector([PauliString.from_sparse({0: "Z"}, n_qubits)], n_qubits)
    return Benchmark(
        "cr_circuit",
        timeline,
        observable,
        DensityState.product("0", n_qubits),
        checkpoints=timeline.ends,
        circuit=spec,
    )


preset_register("noise", "relax_dephase")(relax_dephase)
preset_register("noise", "dephasing")(dephasing)
preset_register("noise", "amplitude_damping")(amplitude_damping)
preset_register("noise", "depolarizing")(depolarizing)
preset_register("noise", "lowfreq")(lowfreq)
preset_register("noise", "stark_shift")(stark_shift)
preset_register("noise", "inhomogeneous_pauli")(inhomogeneous_pauli)
