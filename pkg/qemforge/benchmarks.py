"""
Benchmark Hamiltonians, observables, noise presets and the cross-resonance circuit.

Coefficients are angular frequencies (rad/us), rates are 1/us.
"""

from __future__ import annotations

import inspect
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import NegativeRateError, ScheduleError
from .lindblad import (
    CONSTANT,
    DensityState,
    HamiltonianSpec,
    LindbladTerm,
    NoiseModel,
    Segment,
    TimeProfile,
    Timeline,
)
from .pauli import PAULI_LABELS, PAULI_MATRICES, KrausMap, PauliString, observable_vector
from .registry import preset_registry

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)


@dataclass(frozen=True)
class LatticeSpec:
    """Open-boundary ``rows x cols`` lattice; qubit ``r * cols + c`` sits at (r, c)."""

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.rows * self.cols < 2:
            msg = f"Invalid lattice {self.rows}x{self.cols}: at least two sites are required"
            raise ValueError(msg)

    @classmethod
    def chain(cls, n_qubits):
        return cls(1, n_qubits)

    @property
    def n_qubits(self):
        return self.rows * self.cols

    @property
    def is_chain(self):
        return self.rows == 1 or self.cols == 1

    def site(self, r, c):
        return r * self.cols + c

    @property
    def nn_pairs(self):
        pairs = []
        for r in range(self.rows):
            for c in range(self.cols):
                if c + 1 < self.cols:
                    pairs.append((self.site(r, c), self.site(r, c + 1)))
                if r + 1 < self.rows:
                    pairs.append((self.site(r, c), self.site(r + 1, c)))
        return tuple(sorted(pairs))

    @property
    def nnn_pairs(self):
        """Second neighbours: two steps along a chain, diagonals on a 2D lattice."""
        if self.is_chain:
            n = self.n_qubits
            return tuple((i, i + 2) for i in range(n - 2))
        pairs = []
        for r in range(self.rows - 1):
            for c in range(self.cols - 1):
                pairs.append((self.site(r, c), self.site(r + 1, c + 1)))
                pairs.append((self.site(r, c + 1), self.site(r + 1, c)))
        return tuple(sorted(pairs))


def _two_body(label, pair, n_qubits, coefficient):
    return PauliString.from_sparse({pair[0]: label, pair[1]: label}, n_qubits, coefficient)


def _one_body(label, qubit, n_qubits, coefficient):
    return PauliString.from_sparse({qubit: label}, n_qubits, coefficient)


def build_heisenberg2d(J, h, anisotropy, lattice):
    """``J sum_<ij> [(1+g) XX + (1-g) YY + ZZ] - g h sum_i Y_i``."""
    n = lattice.n_qubits
    terms = []
    for pair in lattice.nn_pairs:
        terms.append(_two_body("X", pair, n, J * (1 + anisotropy)))
        terms.append(_two_body("Y", pair, n, J * (1 - anisotropy)))
        terms.append(_two_body("Z", pair, n, J))
    if anisotropy * h:
        terms.extend(_one_body("Y", q, n, -anisotropy * h) for q in range(n))
    return HamiltonianSpec(tuple(terms), n)


def build_tfim(J, h, n):
    """Open chain ``J sum Z_i Z_{i+1} + h sum X_i``."""
    if n < 2:
        msg = f"A transverse-field Ising chain needs at least 2 qubits, got {n}"
        raise ValueError(msg)
    lattice = LatticeSpec.chain(n)
    terms = [_two_body("Z", pair, n, J) for pair in lattice.nn_pairs]
    if h:
        terms.extend(_one_body("X", q, n, h) for q in range(n))
    return HamiltonianSpec(tuple(terms), n)


def build_j1j2(J1, J2, h, lattice):
    """``J1 sum_<ij> ZZ + J2 sum_<<ij>> ZZ - h sum X``."""
    n = lattice.n_qubits
    if J2 and not lattice.nnn_pairs:
        msg = f"Lattice {lattice.rows}x{lattice.cols} has no next-nearest neighbours for J2"
        raise ValueError(msg)
    terms = [_two_body("Z", pair, n, J1) for pair in lattice.nn_pairs]
    if J2:
        terms.extend(_two_body("Z", pair, n, J2) for pair in lattice.nnn_pairs)
    if h:
        terms.extend(_one_body("X", q, n, -h) for q in range(n))
    return HamiltonianSpec(tuple(terms), n)


def correlation_observable(pairs, n_qubits, normalization=None, label="X"):
    """``sum_pairs P_i P_j / normalization``; normalization defaults to the pair count."""
    pairs = tuple(pairs)
    if not pairs:
        msg = "A correlation observable needs at least one pair"
        raise ValueError(msg)
    normalization = len(pairs) if normalization is None else normalization
    if not normalization:
        msg = "Normalization must be nonzero"
        raise ValueError(msg)
    return observable_vector([_two_body(label, pair, n_qubits, 1.0 / normalization) for pair in pairs], n_qubits)


def observable_nn_correlation(lattice, normalization=None):
    return correlation_observable(lattice.nn_pairs, lattice.n_qubits, normalization)


def observable_nnn_correlation(lattice, normalization=None):
    return correlation_observable(lattice.nnn_pairs, lattice.n_qubits, normalization)


def rotation(axis, theta):
    """``R_axis(theta) = exp(-i theta sigma_axis / 2)``."""
    sigma = PAULI_MATRICES[PAULI_LABELS.index(axis.upper())]
    return math.cos(theta / 2) * np.eye(2) - 1j * math.sin(theta / 2) * sigma


def cr_unitary():
    """``exp(i pi Z (x) X / 4)``."""
    return scipy.linalg.expm(0.25j * np.pi * np.kron(PAULI_MATRICES[3], PAULI_MATRICES[1]))


def cnot_pairs(layer, n_qubits):
    """Brickwork placement: pairs (0,1),(2,3),.. on even layers, (1,2),(3,4),.. on odd ones."""
    first = layer % 2
    return tuple((q, q + 1) for q in range(first, n_qubits - 1, 2))


@dataclass(frozen=True)
class CircuitSpec:
    """
    Layered circuit: random single-qubit rotations, then CNOTs realized by
    cross-resonance drives followed by frame rotations.
    """

    depth: int
    n_qubits: int
    rotations: tuple
    cnots: tuple
    omega: float
    crosstalk: float

    @property
    def segment_time(self):
        return math.pi / (4 * self.omega)

    @property
    def duration(self):
        return self.depth * self.segment_time

    def unitary(self):
        """Ideal circuit unitary (CNOTs exact), for reference checks."""
        n = self.n_qubits
        total = np.eye(2**n, dtype=complex)
        cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
        for layer_rotations, pairs in zip(self.rotations, self.cnots):
            layer = np.ones((1, 1), dtype=complex)
            for axis, theta in layer_rotations:
                layer = np.kron(layer, rotation(axis, theta))
            total = layer @ total
            for control, target in pairs:
                total = _embed_pair(cnot, control, target, n) @ total
        return total


def _embed_pair(op, control, target, n_qubits):
    rest = [q for q in range(n_qubits) if q not in (control, target)]
    full = np.kron(op, np.eye(2 ** len(rest)))
    perm = np.argsort([control, target, *rest])
    tensor = full.reshape([2] * (2 * n_qubits)).transpose([*perm, *(n_qubits + p for p in perm)])
    return tensor.reshape(2**n_qubits, 2**n_qubits)


def build_cr_circuit(d, seed, omega, crosstalk, n_qubits=4):
    """
    Random depth-``d`` circuit and its piecewise timeline.

    Each layer is one segment: rotations act at its start, the drive
    ``-omega Z_c X_t`` runs for ``pi / (4 omega)`` with coherent crosstalk
    ``crosstalk * omega * X_t`` as segment noise, and the frame rotations
    ``Rz(pi/2)_c Rx(pi/2)_t`` complete each CNOT at its end.
    """
    if d < 1:
        msg = f"Circuit depth must be at least 1, got {d}"
        raise ValueError(msg)
    if n_qubits < 2:
        msg = f"A CNOT circuit needs at least 2 qubits, got {n_qubits}"
        raise ValueError(msg)
    if omega <= 0:
        msg = f"Drive strength must be positive, got {omega}"
        raise ValueError(msg)
    rng = np.random.default_rng(seed)
    rotations = []
    cnots = []
    for layer in range(d):
        axes = rng.integers(0, 3, size=n_qubits)
        angles = rng.uniform(0.0, 2 * math.pi, size=n_qubits)
        rotations.append(tuple(("XYZ"[a], float(theta)) for a, theta in zip(axes, angles)))
        cnots.append(cnot_pairs(layer, n_qubits))
    spec = CircuitSpec(d, n_qubits, tuple(rotations), tuple(cnots), float(omega), float(crosstalk))

    segments = []
    for layer, (layer_rotations, pairs) in enumerate(zip(spec.rotations, spec.cnots)):
        drive = [PauliString.from_sparse({c: "Z", t: "X"}, n_qubits, -omega) for c, t in pairs]
        before = tuple(KrausMap((rotation(axis, theta),), (q,), True) for q, (axis, theta) in enumerate(layer_rotations))
        after = []
        for c, t in pairs:
            after.append(KrausMap((rotation("Z", math.pi / 2),), (c,), True))
            after.append(KrausMap((rotation("X", math.pi / 2),), (t,), True))
        coherent = None
        if crosstalk:
            coherent = HamiltonianSpec(
                tuple(PauliString.from_sparse({t: "X"}, n_qubits, crosstalk * omega) for _, t in pairs), n_qubits
            )
        segments.append(
            Segment(
                spec.segment_time,
                HamiltonianSpec(tuple(drive), n_qubits),
                NoiseModel(coherent_error=coherent),
                before,
                tuple(after),
                label=f"layer{layer}",
            )
        )
    return spec, Timeline(tuple(segments), n_qubits)


@dataclass(frozen=True, eq=False)
class Benchmark:
    """
    A model ready to run: timeline with model-intrinsic noise, observable and initial state.

    ``checkpoints`` is fixed for circuits (layer ends) and ``None`` for spin
    models, whose output grid comes from the experiment configuration.
    """

    name: str
    base: Timeline
    observable: object
    initial: DensityState
    checkpoints: tuple | None = None
    circuit: CircuitSpec | None = None
    lattice: LatticeSpec | None = None

    @property
    def n_qubits(self):
        return self.base.n_qubits

    @property
    def duration(self):
        return self.base.duration

    def timeline(self, noise=None):
        """Base timeline with ``noise`` added to every segment."""
        if noise is None or noise.is_empty:
            return self.base
        return self.base.map_noise(lambda intrinsic: intrinsic + noise)

    def ideal_timeline(self):
        return self.base.ideal()


def spin_benchmark(name, hamiltonian, observable, T, lattice=None):
    if T <= 0:
        msg = f"Evolution time must be positive, got {T}"
        raise ScheduleError(msg)
    n = hamiltonian.n_qubits
    return Benchmark(name, Timeline.single(hamiltonian, None, T), observable, DensityState.product("+", n), lattice=lattice)


def _check_rates(**rates):
    for name, value in rates.items():
        if value < 0:
            msg = f"Negative rate {name}={value}"
            raise NegativeRateError(msg)


def relax_dephase(n_qubits, lambda1, lambda2, profile=CONSTANT):
    """Energy relaxation ``L = sigma_-`` at ``lambda1`` and dephasing ``L = Z`` at ``lambda2`` on every qubit."""
    _check_rates(lambda1=lambda1, lambda2=lambda2)
    terms = []
    for q in range(n_qubits):
        if lambda1:
            terms.append(LindbladTerm(SIGMA_MINUS, (q,), lambda1, profile, name="relax"))
        if lambda2:
            terms.append(LindbladTerm(PAULI_MATRICES[3], (q,), lambda2, profile, name="dephase"))
    return NoiseModel(tuple(terms))


def dephasing(n_qubits, rate):
    return relax_dephase(n_qubits, 0.0, rate)


def amplitude_damping(n_qubits, rate):
    return relax_dephase(n_qubits, rate, 0.0)


def depolarizing(n_qubits, rate):
    """X, Y and Z jumps at ``rate / 4`` each on every qubit."""
    _check_rates(rate=rate)
    if not rate:
        return NoiseModel()
    terms = [
        LindbladTerm(PAULI_MATRICES[k], (q,), rate / 4, name=f"depolarize_{PAULI_LABELS[k]}")
        for q in range(n_qubits)
        for k in (1, 2, 3)
    ]
    return NoiseModel(tuple(terms))


def lowfreq(n_qubits, lambda_prime):
    """Low-frequency noise averaged to dephasing with rate ``2 lambda'^2 t``."""
    strength = 2.0 * lambda_prime**2
    if not strength:
        return NoiseModel()
    terms = [
        LindbladTerm(PAULI_MATRICES[3], (q,), strength, TimeProfile.linear(1.0), name="lowfreq") for q in range(n_qubits)
    ]
    return NoiseModel(tuple(terms))


def stark_shift(n_qubits, mu, qubit=0):
    """Coherent error ``mu Z`` on ``qubit``."""
    return NoiseModel(coherent_error=HamiltonianSpec((_one_body("Z", qubit, n_qubits, mu),), n_qubits))


def inhomogeneous_pauli(n_qubits, p_x, p_y, p_z):
    """
    Single-qubit channel ``(1 - p) I + p_x X + p_y Y + p_z Z``.

    This is the recovery-operation error, not a Lindblad term, so it comes back
    as a :class:`KrausMap`; ``n_qubits`` is accepted for a uniform preset signature.
    """
    _check_rates(p_x=p_x, p_y=p_y, p_z=p_z)
    total = p_x + p_y + p_z
    if total > 1:
        msg = f"Pauli error probabilities sum to {total} > 1"
        raise ValueError(msg)
    weights = (1 - total, p_x, p_y, p_z)
    operators = tuple(math.sqrt(w) * PAULI_MATRICES[k] for k, w in enumerate(weights) if w)
    return KrausMap(operators, (0,), trace_preserving=True)


def noise_presets(name, rates, n_qubits=1):
    """
    Build the noise preset registered as ``name`` for ``n_qubits`` qubits.

    ``rates`` maps the preset's keyword arguments (e.g. ``lambda1``) to values.
    """
    builder = preset_registry.get("noise", name)
    try:
        inspect.signature(builder).bind(n_qubits, **rates)
    except TypeError as e:
        msg = f"Invalid parameters for noise preset {name!r}: {e}"
        raise ValueError(msg) from e
    return builder(n_qubits, **rates)


def model_presets(name, params):
    """Build the benchmark registered as ``name``."""
    builder = preset_registry.get("model", name)
    try:
        inspect.signature(builder).bind(**params)
    except TypeError as e:
        msg = f"Invalid parameters for model preset {name!r}: {e}"
        raise ValueError(msg) from e
    return builder(**params)
