"""
Recovery generators and their quasi-probability decompositions.

For a noise step ``I + E_N dt`` the recovery map is ``I + G dt`` with
``G = -(dissipator PTM) - (coherent-error commutator PTM)``. Writing
``G = sum_j q_j B_j`` over implementable basis operations (``B_0`` is the
identity) gives ``C1 = q_0 + sum_{j>0} |q_j|`` and the overhead
``C(T) = exp(int C1 dt)``.
"""

from __future__ import annotations

import functools
import math
from collections import namedtuple
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .cache import cached_table
from .exceptions import DecompositionError, NonLocalTermError
from .lindblad import CONSTANT, NoiseModel, PTMTerm
from .pauli import (
    PAULI_LABELS,
    PAULI_MATRICES,
    BasisOperation,
    KrausMap,
    TransferMatrix,
    basis_matrix,
    basis_table,
    ptm_from_kraus,
    ptm_from_linear_map,
)
from .settings import generic_message, get_setting
from .simplex import OPTIMAL, linprog_simplex

RECONSTRUCTION_TOL = 1e-10
# relative size below which a coefficient is treated as exactly zero
ZERO_COEFFICIENT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class RecoveryBlock:
    """Recovery generator ``g(t) * G`` on one subsystem."""

    support: tuple
    generator: TransferMatrix
    time_profile: object = CONSTANT

    @property
    def arity(self):
        return len(self.support)


@dataclass(frozen=True, eq=False)
class RecoveryGenerator:
    blocks: tuple
    source: str = "from_noise_model"

    def __iter__(self):
        return iter(self.blocks)

    def __len__(self):
        return len(self.blocks)


def _local_pauli(labels, support):
    op = np.ones((1, 1), dtype=complex)
    for q in support:
        op = np.kron(op, PAULI_MATRICES[PAULI_LABELS.index(labels[q])])
    return op


def _coherent_pieces(hamiltonian):
    """Split a Pauli-sum Hamiltonian into local matrices keyed by support."""
    pieces = {}
    for term in hamiltonian.terms:
        support = term.support
        if not support or not term.coefficient:
            continue
        if len(support) > 2:
            msg = f"Coherent error term {term} acts on {len(support)} qubits; at most 2 are supported"
            raise NonLocalTermError(msg)
        local = term.coefficient * _local_pauli(term.labels, support)
        pieces[support] = pieces.get(support, 0) + local
    return pieces


def recovery_generator(noise, lindblad_convention="gksl"):
    """
    One recovery block per (support, time profile) of the estimated noise model.

    Raises:
        NonLocalTermError: a term or coherent-error piece spans more than two qubits.

    """
    factor = 2.0 if lindblad_convention == "doubled" else 1.0
    groups = {}
    for term in noise.terms:
        if not term.rate:
            continue
        groups.setdefault((term.support, term.time_profile), []).append(term)
    coherent = {}
    if noise.coherent_error is not None:
        profile = noise.coherent_error.time_profile
        for support, local in _coherent_pieces(noise.coherent_error).items():
            coherent[support, profile] = local
            groups.setdefault((support, profile), [])

    blocks = []
    for (support, profile), terms in groups.items():
        arity = len(support)
        local_h = coherent.get((support, profile))

        def _generator(matrix, terms=terms, local_h=local_h):
            out = np.zeros_like(matrix)
            for term in terms:
                out -= factor * term.rate * term.dissipator(matrix)
            if local_h is not None:
                out -= -1j * (local_h @ matrix - matrix @ local_h)
            return out

        blocks.append(RecoveryBlock(support, ptm_from_linear_map(_generator, arity), profile))
    return RecoveryGenerator(tuple(blocks))


SamplingTables = namedtuple("SamplingTables", ["gamma", "s", "alpha", "basis_ids", "c"])


@dataclass(frozen=True, eq=False)
class QuasiDecomposition:
    """
    Coefficients ``q`` of a recovery generator over ``basis``.

    ``basis[0]`` is the identity; its coefficient ``q0`` is never sampled.
    ``discrete`` decompositions describe a whole map rather than a generator,
    and their cost is the plain one-norm.
    """

    support: tuple
    basis: tuple
    q: np.ndarray
    time_profile: object = CONSTANT
    discrete: bool = False
    method: str = "minimal"
    _cum: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.shape != (len(self.basis),):
            msg = f"{q.size} coefficients for a basis of {len(self.basis)} operations"
            raise ValueError(msg)
        scale = np.max(np.abs(q), initial=0.0)
        q[np.abs(q) <= ZERO_COEFFICIENT_TOL * scale] = 0.0
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "basis", tuple(self.basis))
        p_tilde = np.abs(q[1:])
        cum = np.cumsum(p_tilde)
        object.__setattr__(self, "_cum", cum)

    @property
    def q0(self):
        return float(self.q[0])

    @property
    def one_norm(self):
        return float(np.sum(np.abs(self.q)))

    @property
    def c1(self):
        """``q0 + sum_{j>=1} |q_j|`` (1/us); for discrete maps the one-norm."""
        if self.discrete:
            return self.one_norm
        return self.q0 + float(np.sum(np.abs(self.q[1:])))

    @property
    def p_tilde(self):
        return np.abs(self.q[1:])

    @property
    def alpha(self):
        return np.where(self.q[1:] < 0, -1, 1)

    @property
    def gamma(self):
        return float(self._cum[-1]) if self._cum.size else 0.0

    @property
    def s(self):
        gamma = self.gamma
        if gamma == 0:
            return np.zeros(0)
        s = self._cum / gamma
        s[-1] = 1.0
        return s

    @property
    def basis_ids(self):
        return tuple(op.id for op in self.basis)

    def coefficient(self, name):
        for op, value in zip(self.basis, self.q):
            if op.name == name:
                return float(value)
        msg = f"No basis operation named {name!r}"
        raise KeyError(msg)

    def as_dict(self, include_zero=False):
        return {op.name: float(v) for op, v in zip(self.basis, self.q) if include_zero or v}

    def reconstruct(self):
        """``sum_j q_j B_j`` as a transfer matrix."""
        entries = sum(value * op.ptm.entries for op, value in zip(self.basis, self.q) if value)
        if isinstance(entries, int):
            size = self.basis[0].ptm.entries.shape[0]
            entries = np.zeros((size, size))
        return TransferMatrix(entries)

    def select(self, u):
        """Basis index (into ``basis``) of the bin ``[s_{j-1}, s_j)`` containing ``u``; ``u = 1`` maps to the last bin."""
        s = self.s
        if not s.size:
            msg = "Cannot select a basis operation from a decomposition without jumps"
            raise DecompositionError(msg)
        index = int(np.searchsorted(s, u, side="right"))
        if index >= s.size:
            index = int(np.flatnonzero(self.p_tilde)[-1])
        return index + 1

    def scaled(self, factor):
        return replace(self, q=self.q * factor)


def _residual(decomp, target):
    return float(np.max(np.abs(decomp.reconstruct().entries - target.entries), initial=0.0))


def decompose_minimal(gen):
    """
    Exact linear solve over the tensor-product basis (16 or 256 operations).

    Accepts a single :class:`RecoveryBlock` or a whole :class:`RecoveryGenerator`
    (then returns one decomposition per block).
    """
    if isinstance(gen, RecoveryGenerator):
        return [decompose_minimal(block) for block in gen]
    basis = basis_table(gen.arity)
    matrix = _basis_matrix_for(gen.arity)
    try:
        q = np.linalg.solve(matrix, gen.generator.entries.ravel())
    except np.linalg.LinAlgError as e:
        msg = f"Recovery basis on {gen.arity} qubit(s) is singular"
        raise DecompositionError(msg) from e
    decomp = QuasiDecomposition(gen.support, basis, q, gen.time_profile)
    if _residual(decomp, gen.generator) > RECONSTRUCTION_TOL * max(1.0, np.max(np.abs(q), initial=0.0)):
        msg = "Minimal decomposition does not reconstruct the recovery generator"
        raise DecompositionError(msg)
    return decomp


@functools.lru_cache(maxsize=2)
def _basis_matrix_for(arity):
    return basis_matrix(basis_table(arity))


def _axis_rotation(axis, theta):
    n_sigma = sum(a * p for a, p in zip(axis, PAULI_MATRICES[1:]))
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * n_sigma


def overcomplete_basis(seed=None, n_axes=8, angles=(np.pi / 3, 2 * np.pi / 3)):
    """
    Extra single-qubit operations for the LP: rotations ``exp(-i theta n.sigma / 2)``
    and projectors ``(I + n.sigma) / 2`` about low-discrepancy axes.

    Ids continue after the 16 catalog operations.
    """
    if seed is None:
        seed = get_setting("QEMFORGE_LP_SEED", 2021)

    def _build():
        points = qmc.Sobol(d=2, scramble=True, seed=seed).random(n_axes)
        operations = []
        next_id = 17
        for index, (u, v) in enumerate(points):
            z = 1.0 - 2.0 * u
            rho = math.sqrt(max(0.0, 1.0 - z * z))
            phi = 2.0 * math.pi * v
            axis = (rho * math.cos(phi), rho * math.sin(phi), z)
            for theta in angles:
                kraus = KrausMap((_axis_rotation(axis, theta),), (0,), trace_preserving=True)
                name = f"rot{index}_{theta:.4f}"
                operations.append(BasisOperation(next_id, name, kraus, ptm_from_kraus(kraus), True))
                next_id += 1
        for index, (u, v) in enumerate(points):
            z = 1.0 - 2.0 * u
            rho = math.sqrt(max(0.0, 1.0 - z * z))
            phi = 2.0 * math.pi * v
            n_sigma = rho * math.cos(phi) * PAULI_MATRICES[1] + rho * math.sin(phi) * PAULI_MATRICES[2] + z * PAULI_MATRICES[3]
            kraus = KrausMap(((np.eye(2) + n_sigma) / 2,), (0,))
            operations.append(BasisOperation(next_id, f"proj{index}", kraus, ptm_from_kraus(kraus), False))
            next_id += 1
        return tuple(operations)

    return list(cached_table("overcomplete", ("overcomplete", seed, n_axes, tuple(angles)), _build))


def _lift_extra(extra, arity):
    """Embed single-qubit extras on each qubit of a two-qubit block."""
    if arity == 1:
        return list(extra)
    identity = basis_table(1)[0]
    lifted = []
    next_id = 257
    for op in extra:
        if op.arity != 1:
            lifted.append(op)
            continue
        for position, name in ((0, f"{op.name}.I"), (1, f"I.{op.name}")):
            first, second = (op, identity) if position == 0 else (identity, op)
            matrix = np.kron(first.kraus.operators[0], second.kraus.operators[0])
            kraus = KrausMap((matrix,), (0, 1), op.trace_preserving)
            lifted.append(BasisOperation(next_id, name, kraus, first.ptm.tensor(second.ptm), op.trace_preserving))
            next_id += 1
    return lifted


def decompose_lp(gen, extra_basis=None):
    """
    Minimize ``C1`` over Table-I plus ``extra_basis`` by linear programming.

    ``extra_basis=None`` uses :func:`overcomplete_basis`; pass ``[]`` for the
    catalog alone.
    """
    if isinstance(gen, RecoveryGenerator):
        return [decompose_lp(block, extra_basis) for block in gen]
    if extra_basis is None:
        extra_basis = overcomplete_basis()
    basis = basis_table(gen.arity) + _lift_extra(extra_basis, gen.arity)
    target = gen.generator.entries.ravel()
    scale = float(np.max(np.abs(target), initial=0.0))
    if scale == 0:
        return QuasiDecomposition(gen.support, basis, np.zeros(len(basis)), gen.time_profile, method="lp")

    columns = basis_matrix(basis)

    def _solve():
        # q0 = x0+ - x0-, q_i = x_i+ - x_i-
        a_eq = np.hstack([columns[:, :1], -columns[:, :1], columns[:, 1:], -columns[:, 1:]])
        k = len(basis) - 1
        cost = np.concatenate([[1.0, -1.0], np.ones(2 * k)])
        result = linprog_simplex(cost, a_eq, target / scale)
        if result.status != OPTIMAL:
            msg = f"LP decomposition is {result.status}"
            raise DecompositionError(msg)
        x = result.x
        return np.concatenate([[x[0] - x[1]], x[2 : 2 + k] - x[2 + k :]]) * scale

    q = cached_table("lp", (target, columns), _solve)
    decomp = QuasiDecomposition(gen.support, basis, q, gen.time_profile, method="lp")
    if _residual(decomp, gen.generator) > RECONSTRUCTION_TOL * max(1.0, scale):
        msg = "LP decomposition does not reconstruct the recovery generator"
        raise DecompositionError(msg)
    generic_message(f"LP decomposition on {gen.support}: C1={decomp.c1:.6g} over {len(basis)} operations")
    return decomp


@dataclass(frozen=True)
class CostReport:
    c1_total: float
    C: float
    C2: float
    Lambda: float
    mean_jumps: float
    T: float


def integrated_c1(decomps, t0, t1):
    """``sum_S int_{t0}^{t1} C1_S g_S(t) dt``."""
    return math.fsum(d.c1 * d.time_profile.integral(t0, t1) for d in decomps)


def integrated_gamma(decomps, t0, t1):
    return math.fsum(d.gamma * d.time_profile.integral(t0, t1) for d in decomps)


def cost_overhead(decomps, T, n_qubits, rate_sum=0.0):
    """
    Overhead of mitigating for ``T`` us.

    Args:
        decomps: decompositions of every recovery block.
        T: evolution time (us).
        n_qubits: system size N.
        rate_sum: summed physical per-qubit rates (1/us), e.g. lambda_1 + lambda_2.

    """
    if T < 0:
        msg = f"Evolution time must be nonnegative, got {T}"
        raise ValueError(msg)
    log_c = integrated_c1(decomps, 0.0, T)
    c1_total = log_c / T if T > 0 else math.fsum(d.c1 * d.time_profile(0.0) for d in decomps)
    return CostReport(
        c1_total=c1_total,
        C=math.exp(log_c),
        C2=math.exp(2 * log_c),
        Lambda=n_qubits * T * rate_sum,
        mean_jumps=integrated_gamma(decomps, 0.0, T),
        T=T,
    )


def timeline_cost(segment_decomps, starts, ends, t):
    """``log C`` and mean jumps up to ``t`` for piecewise decompositions."""
    log_c = 0.0
    jumps = 0.0
    for decomps, start, end in zip(segment_decomps, starts, ends):
        hi = min(end, t)
        if hi <= start:
            break
        log_c += integrated_c1(decomps, start, hi)
        jumps += integrated_gamma(decomps, start, hi)
    return log_c, jumps


def depolarizing_ptm(p):
    """PTM of ``rho -> (1 - p) rho + p I / 2``."""
    return TransferMatrix(np.diag([1.0, 1.0 - p, 1.0 - p, 1.0 - p]))


def invert_depolarizing(p):
    """
    Signed Pauli mixture inverting the depolarizing channel of strength ``p``.

    ``C = (p + 2) / (2 - 2p)``; the mixture is ``C (p1 I - p2 (X + Y + Z))``
    with ``p1 = (4 - p) / (2p + 4)`` and ``p2 = p / (2p + 4)``.
    """
    if not 0 <= p < 1:
        msg = f"Depolarizing strength must lie in [0, 1), got {p}"
        raise ValueError(msg)
    cost = (p + 2) / (2 - 2 * p)
    p1 = (4 - p) / (2 * p + 4)
    p2 = p / (2 * p + 4)
    q = np.zeros(16)
    q[0] = cost * p1
    q[1:4] = -cost * p2
    return QuasiDecomposition((0,), basis_table(1), q, discrete=True, method="analytic")


# rows are I, X, Y, Z; +1 where the two Paulis commute
_PAULI_COMMUTATION = np.array([[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]])


def invert_pauli_channel(p_x, p_y, p_z):
    """
    Signed Pauli mixture inverting ``(1 - p) I + p_x X + p_y Y + p_z Z``.

    The channel scales ``X`` by ``1 - 2 (p_y + p_z)`` (and cyclically); the
    inverse takes the reciprocal factors.
    """
    factors = np.array([1.0, 1 - 2 * (p_y + p_z), 1 - 2 * (p_x + p_z), 1 - 2 * (p_x + p_y)])
    if min(p_x, p_y, p_z) < 0 or np.any(factors <= 0):
        msg = f"Pauli channel ({p_x}, {p_y}, {p_z}) is not invertible by a Pauli mixture"
        raise ValueError(msg)
    basis = basis_table(1)
    q = np.zeros(len(basis))
    q[:4] = _PAULI_COMMUTATION @ (1.0 / factors) / 4
    return QuasiDecomposition((0,), basis, q, discrete=True, method="analytic")


def sampling_tables(decomp):
    """``(Gamma, s, alpha, basis_ids, c)`` with ``c(dt) = 1 + C1 dt``."""
    c1 = decomp.c1
    return SamplingTables(
        gamma=decomp.gamma,
        s=decomp.s,
        alpha=decomp.alpha,
        basis_ids=decomp.basis_ids[1:],
        c=lambda dt: 1.0 + c1 * dt,
    )


def recovery_error_terms(decomps, error_channel):
    """
    Effective-generator pieces ``sum_{j>=1} q_j (E o B_j - B_j)`` of imperfect recovery.

    ``error_channel`` is a single-qubit :class:`KrausMap` applied after every basis
    operation on each qubit of its support.
    """
    if error_channel is None:
        return []
    error_ptm = error_channel.ptm().entries
    terms = []
    for decomp in decomps:
        if not decomp.gamma:
            continue
        full_error = error_ptm
        for _ in range(len(decomp.support) - 1):
            full_error = np.kron(full_error, error_ptm)
        correction = sum(
            value * (full_error @ op.ptm.entries - op.ptm.entries)
            for op, value in zip(decomp.basis[1:], decomp.q[1:])
            if value
        )
        terms.append(PTMTerm(TransferMatrix(correction), decomp.support, decomp.time_profile))
    return terms


def decompose_noise(noise, method="minimal", extra_basis=None, lindblad_convention="gksl"):
    """Recovery generator of ``noise`` decomposed by ``minimal`` or ``lp``."""
    if noise is None:
        noise = NoiseModel.empty()
    gen = recovery_generator(noise, lindblad_convention)
    if method == "minimal":
        return decompose_minimal(gen)
    if method == "lp":
        return decompose_lp(gen, extra_basis)
    msg = f"Unknown decomposition method {method!r}"
    raise ValueError(msg)
