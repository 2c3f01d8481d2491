"""
Pauli-string algebra and the Pauli-transfer-matrix (PTM) representation.

Conventions used everywhere in qemforge:

* single-qubit Pauli order is I=0, X=1, Y=2, Z=3;
* multi-qubit strings are indexed base-4 with qubit 0 as the most significant digit;
* qubit 0 is the leftmost tensor factor of every matrix;
* a map's PTM is ``E[k, j] = Tr(P_k E(P_j)) / 2**m``.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatchError, NonHermitianError, NonPhysicalMapError, SupportError

PAULI_LABELS = "IXYZ"

PAULI_MATRICES = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

HERMITIAN_TOL = 1e-10
TRACE_PRESERVING_TOL = 1e-12

# T[k, 2r + c] = P_k[c, r], so contracting a (row, column) pair gives Tr(P_k M)
_TO_PAULI = PAULI_MATRICES.transpose(0, 2, 1).reshape(4, 4)
# F[2r + c, k] = P_k[r, c]
_FROM_PAULI = PAULI_MATRICES.reshape(4, 4).T


def _n_qubits_for_dim(dim):
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        msg = f"Dimension {dim} is not a power of two"
        raise DimensionMismatchError(msg)
    return n


def _n_qubits_for_length(length):
    n = _n_qubits_for_dim(int(round(np.sqrt(length))))
    if 4**n != length:
        msg = f"Pauli vector of length {length} is not 4**n"
        raise DimensionMismatchError(msg)
    return n


def _interleave_axes(n):
    # (r0..r_{n-1}, c0..c_{n-1}) -> (r0, c0, r1, c1, ...)
    return [axis for q in range(n) for axis in (q, n + q)]


def pauli_components(matrix):
    """Return ``Tr(P_k M)`` for every n-qubit Pauli string, in base-4 order (complex array)."""
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        msg = f"Expected a square matrix, got shape {matrix.shape}"
        raise DimensionMismatchError(msg)
    n = _n_qubits_for_dim(matrix.shape[0])
    if n == 0:
        return matrix.reshape(1).copy()
    tensor = matrix.reshape([2] * (2 * n)).transpose(_interleave_axes(n)).reshape([4] * n)
    for q in range(n):
        tensor = np.moveaxis(np.tensordot(_TO_PAULI, tensor, axes=([1], [q])), 0, q)
    return tensor.reshape(4**n)


def matrix_from_components(components):
    """Inverse of :func:`pauli_components`: ``M = sum_k c_k P_k / 2**n``."""
    components = np.asarray(components, dtype=complex)
    n = _n_qubits_for_length(components.size)
    if n == 0:
        return components.reshape(1, 1).copy()
    tensor = components.reshape([4] * n)
    for q in range(n):
        tensor = np.moveaxis(np.tensordot(_FROM_PAULI, tensor, axes=([1], [q])), 0, q)
    inverse = np.argsort(_interleave_axes(n))
    return tensor.reshape([2] * (2 * n)).transpose(inverse).reshape(2**n, 2**n) / 2**n


@dataclass(frozen=True)
class PauliString:
    """A weighted tensor product of single-qubit Paulis, e.g. ``PauliString("XZ", 0.5)``."""

    labels: str
    coefficient: float = 1.0

    def __post_init__(self):
        labels = self.labels.upper()
        if not labels or any(label not in PAULI_LABELS for label in labels):
            msg = f"Invalid Pauli labels {self.labels!r}"
            raise ValueError(msg)
        if not np.isfinite(self.coefficient):
            msg = f"Non-finite Pauli coefficient {self.coefficient!r}"
            raise ValueError(msg)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @classmethod
    def from_sparse(cls, ops, n_qubits, coefficient=1.0):
        """Build from ``{qubit: label}``; unnamed qubits carry the identity."""
        labels = ["I"] * n_qubits
        for qubit, label in ops.items():
            if not 0 <= qubit < n_qubits:
                msg = f"Qubit {qubit} outside a {n_qubits}-qubit system"
                raise SupportError(msg)
            labels[qubit] = label
        return cls("".join(labels), coefficient)

    @classmethod
    def from_index(cls, index, n_qubits, coefficient=1.0):
        digits = np.base_repr(index, base=4).rjust(n_qubits, "0")
        return cls("".join(PAULI_LABELS[int(d)] for d in digits), coefficient)

    @property
    def n_qubits(self):
        return len(self.labels)

    @property
    def index(self):
        value = 0
        for label in self.labels:
            value = 4 * value + PAULI_LABELS.index(label)
        return value

    @property
    def support(self):
        return tuple(q for q, label in enumerate(self.labels) if label != "I")

    def matrix(self):
        result = np.ones((1, 1), dtype=complex)
        for label in self.labels:
            result = np.kron(result, PAULI_MATRICES[PAULI_LABELS.index(label)])
        return self.coefficient * result

    def __str__(self):
        return f"{self.coefficient:+g}*{self.labels}"


@functools.lru_cache(maxsize=8)
def pauli_basis(n_qubits):
    """Stack of all 4**n Pauli matrices in base-4 order (read-only)."""
    basis = np.ones((1, 1, 1), dtype=complex)
    for _ in range(n_qubits):
        basis = np.einsum("aij,bkl->abikjl", basis, PAULI_MATRICES).reshape(
            basis.shape[0] * 4, basis.shape[1] * 2, basis.shape[2] * 2
        )
    basis.setflags(write=False)
    return basis


@dataclass(frozen=True, eq=False)
class PauliVector:
    """
    A state column ``rho_k = Tr(P_k rho)`` or observable row ``Q_k = Tr(Q P_k) / 2**n``.

    ``observable @ state`` is ``Tr(Q rho)``.
    """

    entries: np.ndarray
    kind: str = "state"

    def __post_init__(self):
        if self.kind not in {"state", "observable"}:
            msg = f"Unknown PauliVector kind {self.kind!r}"
            raise ValueError(msg)
        entries = np.array(self.entries, dtype=float)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        _n_qubits_for_length(entries.size)

    @property
    def n_qubits(self):
        return _n_qubits_for_length(self.entries.size)

    def __len__(self):
        return self.entries.size

    def __matmul__(self, other):
        if isinstance(other, PauliVector):
            if self.entries.size != other.entries.size:
                msg = f"PauliVector lengths differ: {self.entries.size} vs {other.entries.size}"
                raise DimensionMismatchError(msg)
            return float(self.entries @ other.entries)
        return NotImplemented

    def to_matrix(self):
        """Reconstruct the Hermitian matrix this vector represents."""
        if self.kind == "state":
            return matrix_from_components(self.entries)
        return matrix_from_components(self.entries * np.sqrt(self.entries.size))


def pauli_vectorize(matrix, kind="state"):
    """
    Map a Hermitian matrix to its real Pauli vector.

    Raises:
        NonHermitianError: any Pauli component carries an imaginary part.

    """
    components = pauli_components(matrix)
    scale = np.max(np.abs(components)) if components.size else 0.0
    if np.max(np.abs(components.imag), initial=0.0) > HERMITIAN_TOL * max(1.0, scale):
        msg = "Input matrix is not Hermitian"
        raise NonHermitianError(msg)
    entries = components.real
    if kind == "observable":
        entries = entries / np.sqrt(components.size)
    return PauliVector(entries, kind)


def observable_vector(terms, n_qubits):
    """Observable PauliVector of a Pauli sum without forming its matrix."""
    entries = np.zeros(4**n_qubits)
    for term in terms:
        if term.n_qubits != n_qubits:
            msg = f"Pauli term {term} does not act on {n_qubits} qubits"
            raise DimensionMismatchError(msg)
        entries[term.index] += term.coefficient
    return PauliVector(entries, "observable")


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Real ``4**m x 4**m`` PTM of an m-qubit map. ``a @ b`` applies ``b`` first."""

    entries: np.ndarray
    arity: int = field(default=None)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            msg = f"Transfer matrix must be square, got shape {entries.shape}"
            raise DimensionMismatchError(msg)
        arity = _n_qubits_for_dim(int(round(np.sqrt(entries.shape[0]))))
        if 4**arity != entries.shape[0]:
            msg = f"Transfer matrix size {entries.shape[0]} is not 4**m"
            raise DimensionMismatchError(msg)
        if self.arity is not None and self.arity != arity:
            msg = f"Transfer matrix of size {entries.shape[0]} cannot have arity {self.arity}"
            raise DimensionMismatchError(msg)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "arity", arity)

    @classmethod
    def identity(cls, arity=1):
        return cls(np.eye(4**arity))

    @property
    def is_trace_preserving(self):
        first_row = np.zeros(self.entries.shape[0])
        first_row[0] = 1.0
        return bool(np.allclose(self.entries[0], first_row, atol=TRACE_PRESERVING_TOL, rtol=0))

    def __matmul__(self, other):
        if isinstance(other, TransferMatrix):
            if other.arity != self.arity:
                msg = f"Cannot compose arity {self.arity} with arity {other.arity}"
                raise DimensionMismatchError(msg)
            return TransferMatrix(self.entries @ other.entries)
        if isinstance(other, PauliVector):
            if other.entries.size != self.entries.shape[1]:
                msg = "PauliVector length does not match the transfer matrix"
                raise DimensionMismatchError(msg)
            return PauliVector(self.entries @ other.entries, other.kind)
        return NotImplemented

    def tensor(self, other):
        return TransferMatrix(np.kron(self.entries, other.entries))


def _validate_support(support, system_size=None):
    support = tuple(int(q) for q in support)
    if len(set(support)) != len(support):
        msg = f"Duplicate qubit indices in support {support}"
        raise SupportError(msg)
    if any(q < 0 for q in support) or (system_size is not None and any(q >= system_size for q in support)):
        msg = f"Support {support} outside a {system_size}-qubit system"
        raise SupportError(msg)
    return support


@dataclass(frozen=True, eq=False)
class KrausMap:
    """``E(rho) = sum_A A rho A^dagger`` acting on ``support``."""

    operators: tuple
    support: tuple = (0,)
    trace_preserving: bool = False

    def __post_init__(self):
        support = _validate_support(self.support)
        dim = 2 ** len(support)
        operators = []
        for op in self.operators:
            arr = np.array(op, dtype=complex)
            if arr.shape != (dim, dim):
                msg = f"Kraus operator of shape {arr.shape} does not act on {len(support)} qubit(s)"
                raise DimensionMismatchError(msg)
            arr.setflags(write=False)
            operators.append(arr)
        if not operators:
            msg = "A Kraus map needs at least one operator"
            raise DimensionMismatchError(msg)
        object.__setattr__(self, "operators", tuple(operators))
        object.__setattr__(self, "support", support)
        if self.trace_preserving:
            total = sum(op.conj().T @ op for op in operators)
            if not np.allclose(total, np.eye(dim), atol=TRACE_PRESERVING_TOL, rtol=0):
                msg = "Kraus map flagged trace-preserving but sum A^dagger A != I"
                raise NonPhysicalMapError(msg)

    @property
    def arity(self):
        return len(self.support)

    def on(self, support):
        """Same operators on another support."""
        return KrausMap(self.operators, support, self.trace_preserving)

    def apply(self, matrix):
        return sum(op @ matrix @ op.conj().T for op in self.operators)

    def ptm(self):
        return ptm_from_kraus(self)


def ptm_from_kraus(kraus_map):
    """PTM of a Kraus map, ``E[k, j] = Tr(P_k sum_A A P_j A^dagger) / 2**m``."""
    if not isinstance(kraus_map, KrausMap):
        operators = tuple(kraus_map)
        kraus_map = KrausMap(operators, tuple(range(_n_qubits_for_dim(np.shape(operators[0])[0]))))
    paulis = pauli_basis(kraus_map.arity)
    ops = np.stack(kraus_map.operators)
    entries = np.einsum("kab,xbc,jcd,xad->kj", paulis, ops, paulis, ops.conj(), optimize=True)
    return TransferMatrix(entries.real / 2**kraus_map.arity)


def ptm_from_linear_map(func, arity):
    """PTM of an arbitrary Hermiticity-preserving linear map given as a callable on matrices."""
    paulis = pauli_basis(arity)
    columns = [pauli_components(func(p)).real for p in paulis]
    return TransferMatrix(np.array(columns).T / 2**arity)


def ptm_expectation(observable, channel, state):
    """``<<Q| E |rho>> = Tr(Q E(rho))``."""
    if not (len(observable) == channel.entries.shape[0] == len(state)):
        msg = (
            f"Mismatched dimensions: observable {len(observable)}, "
            f"channel {channel.entries.shape[0]}, state {len(state)}"
        )
        raise DimensionMismatchError(msg)
    return float(observable.entries @ channel.entries @ state.entries)


class LocalMap:
    """
    A map on ``support`` applied to full-system matrices by tensor contraction.

    Works for any matrix, Hermitian or not, so it can also act on operator
    bases when a superoperator is assembled column by column.
    """

    def __init__(self, local, system_size, support=None):
        if isinstance(local, KrausMap):
            support = local.support if support is None else support
            self._kraus = np.stack(local.operators)
            self._ptm = None
        elif isinstance(local, TransferMatrix):
            support = tuple(range(local.arity)) if support is None else support
            self._kraus = None
            self._ptm = local.entries
        else:
            msg = f"Cannot embed {type(local).__name__}"
            raise TypeError(msg)
        self.support = _validate_support(support, system_size)
        self.system_size = system_size
        arity = len(self.support)
        if self._ptm is not None and self._ptm.shape[0] != 4**arity:
            msg = f"Transfer matrix arity does not match support {self.support}"
            raise DimensionMismatchError(msg)
        rest = [q for q in range(system_size) if q not in self.support]
        n = system_size
        self._perm = [*self.support, *rest, *(n + q for q in self.support), *(n + q for q in rest)]
        self._inverse = np.argsort(self._perm)
        self._shape = (2**arity, 2 ** (n - arity), 2**arity, 2 ** (n - arity))

    def _to_local(self, matrix):
        n = self.system_size
        return matrix.reshape([2] * (2 * n)).transpose(self._perm).reshape(self._shape)

    def _from_local(self, tensor):
        n = self.system_size
        dim = 2**n
        return tensor.reshape([2] * (2 * n)).transpose(self._inverse).reshape(dim, dim)

    def apply(self, matrix):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (2**self.system_size, 2**self.system_size):
            msg = f"Matrix of shape {matrix.shape} is not a {self.system_size}-qubit operator"
            raise DimensionMismatchError(msg)
        rho4 = self._to_local(matrix)
        if self._kraus is not None:
            out = np.einsum("xas,srtq,xbt->arbq", self._kraus, rho4, self._kraus.conj(), optimize=True)
        else:
            paulis = pauli_basis(len(self.support))
            components = np.einsum("jts,srtq->jrq", paulis, rho4, optimize=True)
            components = np.tensordot(self._ptm, components, axes=([1], [0]))
            out = np.einsum("kst,krq->srtq", paulis, components, optimize=True) / self._shape[0]
        return self._from_local(out)

    __call__ = apply


def embed_local(local, system_size, support=None):
    """Return an applicator for ``local (x) identity`` on an n-qubit system."""
    return LocalMap(local, system_size, support)


# Single-qubit operators of the 16-element basis catalog, by id
_I, _X, _Y, _Z = PAULI_MATRICES
_SQ2 = np.sqrt(2.0)
_BASIS16_KRAUS = {
    1: ("I", _I),
    2: ("X", _X),
    3: ("Y", _Y),
    4: ("Z", _Z),
    5: ("R_x", (_I + 1j * _X) / _SQ2),
    6: ("R_y", (_I + 1j * _Y) / _SQ2),
    7: ("R_z", (_I + 1j * _Z) / _SQ2),
    8: ("R_yz", (_Y + _Z) / _SQ2),
    9: ("R_zx", (_Z + _X) / _SQ2),
    10: ("R_xy", (_X + _Y) / _SQ2),
    11: ("pi_x", (_I + _X) / 2),
    12: ("pi_y", (_I + _Y) / 2),
    13: ("pi_z", (_I + _Z) / 2),
    14: ("pi_yz", (_Y + 1j * _Z) / 2),
    15: ("pi_zx", (_Z + 1j * _X) / 2),
    16: ("pi_xy", (_X + 1j * _Y) / 2),
}


@dataclass(frozen=True, eq=False)
class BasisOperation:
    """One implementable operation of a recovery basis."""

    id: int
    name: str
    kraus: KrausMap
    ptm: TransferMatrix
    trace_preserving: bool

    @property
    def arity(self):
        return self.kraus.arity


@functools.lru_cache(maxsize=1)
def _basis16():
    table = []
    for basis_id, (name, op) in _BASIS16_KRAUS.items():
        trace_preserving = basis_id <= 10
        kraus = KrausMap((op,), (0,), trace_preserving)
        table.append(BasisOperation(basis_id, name, kraus, ptm_from_kraus(kraus), trace_preserving))
    return tuple(table)


def basis16_table():
    """The 16 single-qubit basis operations, ids 1..16 (1-4 Paulis, 5-10 rotations, 11-16 projective)."""
    return list(_basis16())


@functools.lru_cache(maxsize=2)
def _basis_for_arity(arity):
    if arity == 1:
        return _basis16()
    if arity != 2:
        msg = f"Recovery bases are defined for one or two qubits, not {arity}"
        raise SupportError(msg)
    single = _basis16()
    table = []
    for first, second in itertools.product(single, single):
        basis_id = 16 * (first.id - 1) + second.id
        op = np.kron(first.kraus.operators[0], second.kraus.operators[0])
        trace_preserving = first.trace_preserving and second.trace_preserving
        kraus = KrausMap((op,), (0, 1), trace_preserving)
        table.append(
            BasisOperation(basis_id, f"{first.name}.{second.name}", kraus, first.ptm.tensor(second.ptm), trace_preserving)
        )
    return tuple(table)


def basis_table(arity):
    """Tensor-product basis on ``arity`` qubits; id 1 is always the identity."""
    return list(_basis_for_arity(arity))


def basis_operation(arity, basis_id):
    return _basis_for_arity(arity)[basis_id - 1]


def basis_matrix(operations):
    """Columns are the flattened PTMs of ``operations``."""
    return np.column_stack([op.ptm.entries.ravel() for op in operations])


def expand_in_basis(ptm, operations):
    """Least-squares coefficients of ``ptm`` over the PTMs of ``operations``, plus the residual norm."""
    matrix = basis_matrix(operations)
    target = ptm.entries.ravel() if isinstance(ptm, TransferMatrix) else np.asarray(ptm).ravel()
    coefficients, *_ = np.linalg.lstsq(matrix, target, rcond=None)
    residual = float(np.linalg.norm(matrix @ coefficients - target))
    return coefficients, residual


def single_qubit_operator(label, qubit, n_qubits):
    """Full-system matrix of one Pauli or basis Kraus operator on ``qubit``."""
    op = PAULI_MATRICES[PAULI_LABELS.index(label)] if label in PAULI_LABELS else _basis_op_by_name(label)
    left = np.eye(2**qubit)
    right = np.eye(2 ** (n_qubits - qubit - 1))
    return np.kron(np.kron(left, op), right)


def _basis_op_by_name(name):
    for op_name, op in _BASIS16_KRAUS.values():
        if op_name == name:
            return op
    msg = f"Unknown operator {name!r}"
    raise KeyError(msg)
