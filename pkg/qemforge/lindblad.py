"""
Lindblad engine: ideal, noisy, rescaled and effective (post-mitigation) evolution.

Units are microseconds for time, 1/us for rates and rad/us for Hamiltonian
coefficients. The canonical dissipator is GKSL,
``rate * g(t) * (L rho L^dagger - {L^dagger L, rho} / 2)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .cache import cached_table
from .exceptions import (
    DimensionMismatchError,
    IntegrationError,
    NegativeRateError,
    NonHermitianError,
    NonLocalTermError,
)
from .pauli import KrausMap, LocalMap, PauliString, TransferMatrix, _validate_support
from .settings import get_setting, integration_log

# Eigenbasis condition number above which the spectral propagator falls back to expm
SPECTRAL_CONDITION_LIMIT = 1e8
# Floors for the physicality checks on noisy and ideal outputs
TRACE_TOLERANCE_FLOOR = 1e-9
EIGENVALUE_FLOOR = -1e-9


@dataclass(frozen=True)
class TimeProfile:
    """
    Dimensionless multiplier ``g(t)`` of a rate or Hamiltonian.

    kinds: ``constant`` (g = scale), ``linear`` (g = scale * t) and
    ``piecewise`` (g = values[i] on [breakpoints[i], breakpoints[i+1])).
    """

    kind: str = "constant"
    scale: float = 1.0
    breakpoints: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in {"constant", "linear", "piecewise"}:
            msg = f"Unknown time profile {self.kind!r}"
            raise ValueError(msg)
        if self.kind == "piecewise" and len(self.breakpoints) != len(self.values) + 1:
            msg = "Piecewise profile needs one more breakpoint than values"
            raise ValueError(msg)
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def constant(cls, scale=1.0):
        return cls("constant", scale)

    @classmethod
    def linear(cls, slope):
        return cls("linear", slope)

    @property
    def is_constant(self):
        return self.kind == "constant"

    def __call__(self, t):
        if self.kind == "constant":
            return self.scale
        if self.kind == "linear":
            return self.scale * t
        index = np.searchsorted(self.breakpoints, t, side="right") - 1
        if 0 <= index < len(self.values):
            return self.values[index]
        return 0.0

    def integral(self, t0, t1):
        """``int_{t0}^{t1} g(t) dt``."""
        if self.kind == "constant":
            return self.scale * (t1 - t0)
        if self.kind == "linear":
            return 0.5 * self.scale * (t1 * t1 - t0 * t0)
        total = 0.0
        for (a, b), value in zip(zip(self.breakpoints[:-1], self.breakpoints[1:]), self.values):
            lo, hi = max(a, t0), min(b, t1)
            if hi > lo:
                total += value * (hi - lo)
        return total

    def is_nonnegative(self):
        if self.kind == "piecewise":
            return all(v >= 0 for v in self.values)
        return self.scale >= 0


CONSTANT = TimeProfile.constant()


@dataclass(frozen=True)
class HamiltonianSpec:
    """
    Pauli-sum Hamiltonian ``H(t) = g(t) * sum_k c_k P_k``.

    ``rescale`` r implements ``H -> H(t / r) / r``.
    """

    terms: tuple
    n_qubits: int
    time_profile: TimeProfile = CONSTANT
    rescale: float = 1.0

    def __post_init__(self):
        terms = tuple(self.terms)
        for term in terms:
            if not isinstance(term, PauliString):
                msg = f"Hamiltonian terms must be PauliString instances, got {type(term).__name__}"
                raise TypeError(msg)
            if term.n_qubits != self.n_qubits:
                msg = f"Term {term} does not act on {self.n_qubits} qubits"
                raise DimensionMismatchError(msg)
        if not self.rescale > 0:
            msg = f"Rescale factor must be positive, got {self.rescale}"
            raise ValueError(msg)
        object.__setattr__(self, "terms", terms)

    @classmethod
    def zero(cls, n_qubits):
        return cls((), n_qubits)

    @functools.cached_property
    def matrix(self):
        """Static part ``sum_k c_k P_k`` as a dense matrix."""
        dim = 2**self.n_qubits
        result = np.zeros((dim, dim), dtype=complex)
        for term in self.terms:
            result += term.matrix()
        result.setflags(write=False)
        return result

    @property
    def is_zero(self):
        return not any(term.coefficient for term in self.terms)

    @property
    def is_time_independent(self):
        return self.time_profile.is_constant

    def weight(self, t):
        """Multiplier of the static matrix at (rescaled) time ``t``."""
        return self.time_profile(t / self.rescale) / self.rescale

    def matrix_at(self, t):
        return self.weight(t) * self.matrix

    def rescaled(self, r):
        return replace(self, rescale=self.rescale * r)

    def scaled(self, factor):
        return replace(self, terms=tuple(PauliString(t.labels, factor * t.coefficient) for t in self.terms))

    def __add__(self, other):
        if other is None:
            return self
        if other.time_profile != self.time_profile or other.rescale != self.rescale:
            msg = "Only Hamiltonians sharing a time profile can be added"
            raise ValueError(msg)
        return replace(self, terms=self.terms + other.terms)


@dataclass(frozen=True, eq=False)
class LindbladTerm:
    """One local jump operator with rate (1/us) and time profile."""

    operator: np.ndarray
    support: tuple
    rate: float
    time_profile: TimeProfile = CONSTANT
    name: str = ""
    signed: bool = False

    def __post_init__(self):
        support = _validate_support(self.support)
        if len(support) > 2:
            msg = f"Lindblad term {self.name or '?'} acts on {len(support)} qubits; at most 2 are supported"
            raise NonLocalTermError(msg)
        operator = np.array(self.operator, dtype=complex)
        if operator.shape != (2 ** len(support),) * 2:
            msg = f"Jump operator of shape {operator.shape} does not match support {support}"
            raise DimensionMismatchError(msg)
        operator.setflags(write=False)
        if not np.isfinite(self.rate):
            msg = f"Non-finite rate for {self.name or 'term'}"
            raise ValueError(msg)
        if not self.signed and (self.rate < 0 or not self.time_profile.is_nonnegative()):
            msg = f"Negative rate {self.rate} for {self.name or 'term'} on {support}"
            raise NegativeRateError(msg)
        object.__setattr__(self, "operator", operator)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "rate", float(self.rate))

    def on(self, support):
        return replace(self, support=tuple(support))

    def scaled(self, factor, signed=None):
        return replace(self, rate=self.rate * factor, signed=self.signed if signed is None else signed)

    def dissipator(self, matrix):
        """``L rho L^dagger - {L^dagger L, rho} / 2`` on the local support."""
        op = self.operator
        op_dag = op.conj().T
        return op @ matrix @ op_dag - 0.5 * (op_dag @ op @ matrix + matrix @ op_dag @ op)


@dataclass(frozen=True, eq=False)
class PTMTerm:
    """A generator piece given directly as a local transfer matrix, ``g(t) * G`` on ``support``."""

    ptm: TransferMatrix
    support: tuple
    time_profile: TimeProfile = CONSTANT

    def __post_init__(self):
        object.__setattr__(self, "support", _validate_support(self.support))


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """
    Local Lindblad terms plus an optional coherent error Hamiltonian.

    ``signed`` models are differences of models (effective evolution only).
    """

    terms: tuple = ()
    coherent_error: HamiltonianSpec | None = None
    signed: bool = False

    def __post_init__(self):
        terms = tuple(self.terms)
        for term in terms:
            if term.signed and not self.signed:
                msg = "Signed Lindblad terms only belong in a signed (difference) noise model"
                raise NegativeRateError(msg)
        object.__setattr__(self, "terms", terms)

    @classmethod
    def empty(cls):
        return cls()

    @property
    def is_empty(self):
        no_coherent = self.coherent_error is None or self.coherent_error.is_zero
        return no_coherent and not any(term.rate for term in self.terms)

    @property
    def is_time_independent(self):
        coherent = self.coherent_error is None or self.coherent_error.is_time_independent
        return coherent and all(term.time_profile.is_constant for term in self.terms)

    @property
    def total_rate(self):
        return sum(term.rate for term in self.terms)

    def scaled(self, factor):
        coherent = self.coherent_error.scaled(factor) if self.coherent_error is not None else None
        signed = self.signed or factor < 0
        return NoiseModel(tuple(t.scaled(factor, signed=signed) for t in self.terms), coherent, signed)

    def difference(self, other):
        """Signed model ``self - other``."""
        negated = other.scaled(-1.0)
        terms = tuple(replace(t, signed=True) for t in self.terms) + negated.terms
        coherent = self.coherent_error
        if negated.coherent_error is not None:
            coherent = negated.coherent_error if coherent is None else coherent + negated.coherent_error
        return NoiseModel(terms, coherent, signed=True)

    def __add__(self, other):
        coherent = self.coherent_error
        if other.coherent_error is not None:
            coherent = other.coherent_error if coherent is None else coherent + other.coherent_error
        return NoiseModel(self.terms + other.terms, coherent, self.signed or other.signed)


@dataclass(frozen=True, eq=False)
class DensityState:
    """Density matrix at ``time`` (us). Traces below one are allowed, negative ones are not."""

    matrix: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            msg = f"Density matrix must be square, got shape {matrix.shape}"
            raise DimensionMismatchError(msg)
        n = matrix.shape[0].bit_length() - 1
        if 2**n != matrix.shape[0]:
            msg = f"Density matrix dimension {matrix.shape[0]} is not a power of two"
            raise DimensionMismatchError(msg)
        if not np.allclose(matrix, matrix.conj().T, atol=1e-10, rtol=0):
            msg = "Density matrix is not Hermitian"
            raise NonHermitianError(msg)
        if np.trace(matrix).real < -1e-12:
            msg = "Density matrix has negative trace"
            raise ValueError(msg)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def from_vector(cls, psi, time=0.0):
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()), time)

    @classmethod
    def product(cls, label, n_qubits):
        """``|0>``, ``|1>``, ``|+>`` or ``|->`` on every qubit."""
        return cls.from_vector(product_vector(label, n_qubits))

    @property
    def n_qubits(self):
        return self.matrix.shape[0].bit_length() - 1

    @property
    def trace(self):
        return float(np.trace(self.matrix).real)

    def expectation(self, observable):
        return expectation(self.matrix, observable)


_SINGLE_STATES = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
}


def product_vector(label, n_qubits):
    """State vector of a product state; ``label`` is one symbol or one per qubit."""
    labels = label * n_qubits if len(label) == 1 else label
    if len(labels) != n_qubits:
        msg = f"Product-state label {label!r} does not cover {n_qubits} qubits"
        raise DimensionMismatchError(msg)
    psi = np.ones(1, dtype=complex)
    for symbol in labels:
        psi = np.kron(psi, _SINGLE_STATES[symbol])
    return psi


def expectation(matrix, observable):
    """``Re Tr(O rho)`` for a dense observable matrix."""
    return float(np.real(np.sum(np.asarray(observable).T * matrix)))


@dataclass(frozen=True)
class EvolutionConfig:
    """Integrator controls; ``method`` is ``auto``, ``rk45`` or ``spectral``."""

    t_end: float
    tolerance: float = 1e-10
    max_step: float = np.inf
    lindblad_convention: str = "gksl"
    method: str = "auto"

    def __post_init__(self):
        if self.t_end < 0:
            msg = f"t_end must be nonnegative, got {self.t_end}"
            raise ValueError(msg)
        if not self.tolerance > 0:
            msg = f"Integrator tolerance must be positive, got {self.tolerance}"
            raise ValueError(msg)
        if self.lindblad_convention not in {"gksl", "doubled"}:
            msg = f"Unknown Lindblad convention {self.lindblad_convention!r}"
            raise ValueError(msg)
        if self.method not in {"auto", "rk45", "spectral"}:
            msg = f"Unknown integration method {self.method!r}"
            raise ValueError(msg)

    @property
    def dissipator_factor(self):
        return 2.0 if self.lindblad_convention == "doubled" else 1.0

    def until(self, t_end):
        return replace(self, t_end=float(t_end))


def _kron_on(op, support, n_qubits):
    """Dense full-system matrix of a local operator."""
    support = list(support)
    rest = [q for q in range(n_qubits) if q not in support]
    base = np.kron(op, np.eye(2 ** len(rest)))
    perm = np.argsort([*support, *rest])
    tensor = base.reshape([2] * (2 * n_qubits)).transpose([*perm, *(n_qubits + p for p in perm)])
    return tensor.reshape(2**n_qubits, 2**n_qubits)


@dataclass(eq=False)
class Generator:
    """
    Compiled right-hand side ``d rho / dt`` of a (possibly signed) Lindblad equation.

    The coherent part and the anticommutator are folded into non-Hermitian
    matrices ``K`` with ``d rho = K rho + rho K^dagger + jumps``; jump terms and
    transfer-matrix terms act locally.
    """

    n_qubits: int
    hamiltonian: HamiltonianSpec | None = None
    noise: NoiseModel | None = None
    extra_terms: tuple = ()
    dissipator_factor: float = 1.0
    _effective: list = field(init=False, default_factory=list)
    _jumps: list = field(init=False, default_factory=list)
    _ptms: list = field(init=False, default_factory=list)

    def __post_init__(self):
        n = self.n_qubits
        dim = 2**n
        for h in (self.hamiltonian, self.noise.coherent_error if self.noise is not None else None):
            if h is None or h.is_zero:
                continue
            if h.n_qubits != n:
                msg = f"Hamiltonian on {h.n_qubits} qubits does not fit a {n}-qubit generator"
                raise DimensionMismatchError(msg)
            self._effective.append((h.weight, -1j * h.matrix, h.is_time_independent))
        anticommutators = {}
        for term in self.noise.terms if self.noise is not None else ():
            if not term.rate:
                continue
            if max(term.support) >= n:
                msg = f"Noise term support {term.support} outside a {n}-qubit system"
                raise DimensionMismatchError(msg)
            rate = term.rate * self.dissipator_factor
            op = term.operator
            jump = LocalMap(KrausMap((op,), tuple(range(len(term.support)))), n, term.support)
            self._jumps.append((term.time_profile, rate, jump))
            full = _kron_on(op.conj().T @ op, term.support, n)
            profile = term.time_profile
            anticommutators[profile] = anticommutators.get(profile, np.zeros((dim, dim), dtype=complex)) - 0.5 * rate * full
        for profile, matrix in anticommutators.items():
            self._effective.append((profile, matrix, profile.is_constant))
        for term in self.extra_terms:
            self._ptms.append((term.time_profile, LocalMap(term.ptm, n, term.support)))

    @property
    def is_time_independent(self):
        return (
            all(constant for _, _, constant in self._effective)
            and all(profile.is_constant for profile, _, _ in self._jumps)
            and all(profile.is_constant for profile, _ in self._ptms)
        )

    def effective_matrix(self, t):
        dim = 2**self.n_qubits
        total = np.zeros((dim, dim), dtype=complex)
        for weight, matrix, _ in self._effective:
            total += weight(t) * matrix
        return total

    def __call__(self, t, rho):
        k = self.effective_matrix(t)
        out = k @ rho + rho @ k.conj().T
        for profile, rate, jump in self._jumps:
            g = profile(t)
            if g:
                out += (rate * g) * jump.apply(rho)
        for profile, local in self._ptms:
            g = profile(t)
            if g:
                out += g * local.apply(rho)
        return out

    def superoperator(self, t=0.0):
        """Dense ``4**n x 4**n`` matrix acting on row-major ``rho.ravel()``."""
        dim = 2**self.n_qubits
        columns = np.empty((dim * dim, dim * dim), dtype=complex)
        unit = np.zeros((dim, dim), dtype=complex)
        for index in range(dim * dim):
            unit.flat[index] = 1.0
            columns[:, index] = self(t, unit).ravel()
            unit.flat[index] = 0.0
        return columns


def generator_apply(state, h, noise, t=None, lindblad_convention="gksl"):
    """Instantaneous right-hand side of the master equation at ``t`` (defaults to ``state.time``)."""
    matrix = state.matrix if isinstance(state, DensityState) else np.asarray(state, dtype=complex)
    time = state.time if t is None and isinstance(state, DensityState) else (t or 0.0)
    n = matrix.shape[0].bit_length() - 1
    factor = 2.0 if lindblad_convention == "doubled" else 1.0
    return Generator(n, h, noise, dissipator_factor=factor)(time, matrix)


class SpectralPropagator:
    """``exp(S t)`` for a time-independent superoperator via its eigendecomposition."""

    def __init__(self, superop):
        self.dim = int(round(np.sqrt(superop.shape[0])))
        eig = cached_table("spectral", superop, lambda: _spectral_decomposition(superop))
        self._values, self._vectors, self._inverse, self._superop = eig

    def propagate(self, rho, dt):
        vec = np.asarray(rho, dtype=complex).ravel()
        if dt == 0:
            return vec.reshape(self.dim, self.dim).copy()
        if self._vectors is None:
            out = scipy.linalg.expm(self._superop * dt) @ vec
        else:
            out = self._vectors @ (np.exp(self._values * dt) * (self._inverse @ vec))
        return out.reshape(self.dim, self.dim)

    def matrix(self, dt):
        """Full propagator for a fixed step."""
        if self._vectors is None:
            return scipy.linalg.expm(self._superop * dt)
        return (self._vectors * np.exp(self._values * dt)) @ self._inverse


def _spectral_decomposition(superop):
    values, vectors = np.linalg.eig(superop)
    if np.linalg.cond(vectors) > SPECTRAL_CONDITION_LIMIT:
        # defective generator, keep the matrix for expm
        return values, None, None, superop
    return values, vectors, np.linalg.inv(vectors), None


class Propagator:
    """
    Evolves matrices under one generator between arbitrary times.

    Time-independent generators on at most QEMFORGE_DENSE_MAX_QUBITS qubits use
    the spectral propagator; everything else goes through adaptive RK45.
    """

    def __init__(self, generator, cfg):
        self.generator = generator
        self.cfg = cfg
        dense_limit = get_setting("QEMFORGE_DENSE_MAX_QUBITS", 4)
        use_spectral = cfg.method == "spectral" or (
            cfg.method == "auto" and generator.is_time_independent and generator.n_qubits <= dense_limit
        )
        if use_spectral and not generator.is_time_independent:
            msg = "Spectral propagation requires a time-independent generator"
            raise IntegrationError(msg)
        self.spectral = SpectralPropagator(generator.superoperator()) if use_spectral else None

    @property
    def kind(self):
        return "spectral" if self.spectral is not None else "rk45"

    def evolve(self, rho, t0, t1):
        if t1 < t0:
            msg = f"Cannot evolve backwards from {t0} to {t1}"
            raise IntegrationError(msg)
        if t1 == t0:
            return np.array(rho, dtype=complex)
        if self.spectral is not None:
            return self.spectral.propagate(rho, t1 - t0)
        return self._integrate(rho, t0, t1, None)[-1]

    def series(self, rho, t0, times):
        """States at each of ``times`` (sorted, all >= t0)."""
        times = np.asarray(times, dtype=float)
        if times.size == 0:
            return []
        if np.any(np.diff(times) < 0) or times[0] < t0:
            msg = "Output times must be sorted and not before the start time"
            raise IntegrationError(msg)
        if self.spectral is not None:
            return [self.spectral.propagate(rho, t - t0) for t in times]
        return self._integrate(rho, t0, times[-1], times)

    def _integrate(self, rho, t0, t1, t_eval):
        dim = 2**self.generator.n_qubits
        shape = (dim, dim)
        rhs = self.generator

        def _rhs(t, y):
            return rhs(t, y.reshape(shape)).ravel()

        if t_eval is not None and t1 == t0:
            return [np.array(rho, dtype=complex) for _ in t_eval]
        solution = solve_ivp(
            _rhs,
            (t0, t1),
            np.asarray(rho, dtype=complex).ravel(),
            method="RK45",
            t_eval=t_eval,
            rtol=self.cfg.tolerance,
            atol=self.cfg.tolerance,
            max_step=self.cfg.max_step,
        )
        if not solution.success:
            msg = f"Integration failed between t={t0} and t={t1}: {solution.message}"
            raise IntegrationError(msg)
        if not np.all(np.isfinite(solution.y)):
            msg = f"Integration diverged between t={t0} and t={t1}"
            raise IntegrationError(msg)
        if t_eval is None:
            return [solution.y[:, -1].reshape(shape)]
        return [solution.y[:, i].reshape(shape) for i in range(solution.y.shape[1])]


def _check_state(state, n_qubits):
    if state.n_qubits != n_qubits:
        msg = f"State on {state.n_qubits} qubits does not match a {n_qubits}-qubit model"
        raise DimensionMismatchError(msg)


def _check_physical(rho, t, reference_trace, cfg):
    trace_slack = max(cfg.tolerance, TRACE_TOLERANCE_FLOOR)
    drift = abs(np.trace(rho).real - reference_trace)
    if drift > trace_slack:
        msg = f"Trace drifted by {drift:.3g} at t={t:g} (allowed {trace_slack:.3g})"
        raise IntegrationError(msg)
    lowest = np.linalg.eigvalsh(rho)[0]
    if lowest < EIGENVALUE_FLOOR:
        msg = f"State lost positivity at t={t:g}: smallest eigenvalue {lowest:.3g}"
        raise IntegrationError(msg)


def _run(state, h, noise, cfg, extra_terms=(), kind="noisy", physical=True):
    _check_state(state, h.n_qubits)
    generator = Generator(h.n_qubits, h, noise, tuple(extra_terms), cfg.dissipator_factor)
    propagator = Propagator(generator, cfg)
    rho = _hermitize(propagator.evolve(state.matrix, state.time, cfg.t_end))
    integration_log(f"{kind} ({propagator.kind})", cfg.t_end, h.n_qubits)
    if physical:
        _check_physical(rho, cfg.t_end, np.trace(state.matrix).real, cfg)
    return DensityState(rho, cfg.t_end)


def _run_series(state, h, noise, cfg, times, extra_terms=(), kind="noisy", physical=True):
    _check_state(state, h.n_qubits)
    generator = Generator(h.n_qubits, h, noise, tuple(extra_terms), cfg.dissipator_factor)
    propagator = Propagator(generator, cfg)
    rhos = [_hermitize(rho) for rho in propagator.series(state.matrix, state.time, times)]
    integration_log(f"{kind} series ({propagator.kind})", times[-1] if len(times) else state.time, h.n_qubits)
    if physical:
        initial_trace = np.trace(state.matrix).real
        for rho, t in zip(rhos, times):
            _check_physical(rho, t, initial_trace, cfg)
    return [DensityState(rho, t) for rho, t in zip(rhos, times)]


def _hermitize(rho):
    return 0.5 * (rho + rho.conj().T)


def evolve_ideal(state, h, cfg):
    """Integrate ``d rho / dt = -i [H(t), rho]`` from ``state.time`` to ``cfg.t_end``."""
    return _run(state, h, None, cfg, kind="ideal")


def evolve_noisy(state, h, noise, cfg):
    """Integrate the noisy master equation with ``H + dH`` and the model's dissipators."""
    if noise.signed:
        msg = "Noisy evolution needs a physical (unsigned) noise model"
        raise NegativeRateError(msg)
    return _run(state, h, noise, cfg, kind="noisy")


def evolve_effective(state, h, delta_noise, cfg, extra_terms=()):
    """
    Post-mitigation dynamics ``-i[H, rho] + Delta L[rho]`` for a signed model difference.

    ``extra_terms`` are additional :class:`PTMTerm` pieces (imperfect recovery).
    """
    return _run(state, h, delta_noise, cfg, extra_terms, kind="effective", physical=False)


def evolve_rescaled(state, h, noise, r, cfg, extra_terms=()):
    """
    Evolve under ``H(t / r) / r`` for ``r`` times as long with unchanged noise.

    The returned state carries the stretched time ``r * cfg.t_end``.
    """
    if r < 1:
        msg = f"Rescale factor must be at least 1, got {r}"
        raise ValueError(msg)
    stretched = DensityState(state.matrix, state.time * r)
    physical = not extra_terms and not (noise is not None and noise.signed)
    return _run(
        stretched, h.rescaled(r), noise, cfg.until(cfg.t_end * r), extra_terms, f"rescaled r={r:g}", physical
    )


def evolve_ideal_series(state, h, cfg, times):
    return _run_series(state, h, None, cfg, times, kind="ideal")


def evolve_noisy_series(state, h, noise, cfg, times):
    if noise.signed:
        msg = "Noisy evolution needs a physical (unsigned) noise model"
        raise NegativeRateError(msg)
    return _run_series(state, h, noise, cfg, times, kind="noisy")


def evolve_effective_series(state, h, delta_noise, cfg, times, extra_terms=()):
    return _run_series(state, h, delta_noise, cfg, times, extra_terms, kind="effective", physical=False)


def evolve_rescaled_series(state, h, noise, r, cfg, times, extra_terms=()):
    """Rescaled evolution sampled at ``r * t`` for each logical time ``t``."""
    if r < 1:
        msg = f"Rescale factor must be at least 1, got {r}"
        raise ValueError(msg)
    stretched = DensityState(state.matrix, state.time * r)
    stretched_times = [t * r for t in times]
    physical = not extra_terms and not (noise is not None and noise.signed)
    return _run_series(
        stretched, h.rescaled(r), noise, cfg, stretched_times, extra_terms, f"rescaled r={r:g}", physical
    )


def trace_distance(rho, sigma):
    """``||rho - sigma||_1 / 2``."""
    a = rho.matrix if isinstance(rho, DensityState) else np.asarray(rho)
    b = sigma.matrix if isinstance(sigma, DensityState) else np.asarray(sigma)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(_hermitize(a - b)))))


@dataclass(frozen=True, eq=False)
class Segment:
    """
    A stretch of continuous evolution with instantaneous gates at its edges.

    ``before`` gates act at the segment start, ``after`` gates at its end; both
    are :class:`KrausMap` instances on full-system qubit indices.
    """

    duration: float
    hamiltonian: HamiltonianSpec
    noise: NoiseModel = field(default_factory=NoiseModel)
    before: tuple = ()
    after: tuple = ()
    label: str = ""

    def __post_init__(self):
        if self.duration < 0:
            msg = f"Segment duration must be nonnegative, got {self.duration}"
            raise ValueError(msg)


@dataclass(frozen=True, eq=False)
class Timeline:
    """Ordered segments starting at t = 0."""

    segments: tuple
    n_qubits: int

    def __post_init__(self):
        segments = tuple(self.segments)
        if not segments:
            msg = "A timeline needs at least one segment"
            raise ValueError(msg)
        for segment in segments:
            if segment.hamiltonian.n_qubits != self.n_qubits:
                msg = f"Segment {segment.label or '?'} does not act on {self.n_qubits} qubits"
                raise DimensionMismatchError(msg)
            for gate in (*segment.before, *segment.after):
                _validate_support(gate.support, self.n_qubits)
        object.__setattr__(self, "segments", segments)

    @classmethod
    def single(cls, hamiltonian, noise, duration):
        return cls((Segment(duration, hamiltonian, noise or NoiseModel.empty()),), hamiltonian.n_qubits)

    @property
    def ends(self):
        return tuple(np.cumsum([s.duration for s in self.segments]).tolist())

    @property
    def starts(self):
        return (0.0, *self.ends[:-1])

    @property
    def duration(self):
        return self.ends[-1]

    def with_noise(self, noises):
        """Same evolution with one replacement noise model per segment."""
        noises = tuple(noises)
        if len(noises) != len(self.segments):
            msg = "One noise model per segment is required"
            raise ValueError(msg)
        return replace(self, segments=tuple(replace(s, noise=n) for s, n in zip(self.segments, noises)))

    def map_noise(self, func):
        return self.with_noise(func(segment.noise) for segment in self.segments)

    def ideal(self):
        return self.map_noise(lambda _: NoiseModel.empty())

    def with_gate_error(self, channel):
        """Follow every gate with the single-qubit ``channel`` on each qubit the gate touches."""
        if channel is None:
            return self

        def noisy(gates):
            return tuple(op for gate in gates for op in (gate, *(channel.on((q,)) for q in gate.support)))

        return replace(
            self,
            segments=tuple(replace(s, before=noisy(s.before), after=noisy(s.after)) for s in self.segments),
        )

    def gate_error_slots(self):
        """``(segment, phase, position, qubit)`` of every error :meth:`with_gate_error` places, in order."""
        slots = []
        for index, segment in enumerate(self.segments):
            for phase in ("before", "after"):
                position = 0
                for gate in getattr(segment, phase):
                    for q in gate.support:
                        position += 1
                        slots.append((index, phase, position, q))
                    position += 1
        return tuple(slots)

    def rescaled(self, r):
        """Stretch every segment by ``r`` with ``H -> H(t / r) / r``; noise is untouched."""
        return replace(
            self,
            segments=tuple(
                replace(s, duration=s.duration * r, hamiltonian=s.hamiltonian.rescaled(r)) for s in self.segments
            ),
        )


class TimelinePropagator:
    """
    Walks a :class:`Timeline`, applying gates, interleaved local maps and
    recording checkpoint states.
    """

    def __init__(self, timeline, cfg, extra_terms=None):
        self.timeline = timeline
        n = timeline.n_qubits
        extra_terms = extra_terms or [()] * len(timeline.segments)
        self.propagators = [
            Propagator(Generator(n, s.hamiltonian, s.noise, tuple(extra), cfg.dissipator_factor), cfg)
            for s, extra in zip(timeline.segments, extra_terms)
        ]
        self.before = [[LocalMap(g, n) for g in s.before] for s in timeline.segments]
        self.after = [[LocalMap(g, n) for g in s.after] for s in timeline.segments]
        self.starts = timeline.starts
        self.ends = timeline.ends

    @property
    def n_qubits(self):
        return self.timeline.n_qubits

    def run(self, rho, checkpoints, jumps=(), inserts=None):
        """
        Evolve ``rho`` from t = 0 and return the states at ``checkpoints``.

        Args:
            rho: initial matrix at t = 0.
            checkpoints: sorted times in [0, duration].
            jumps: sorted ``(time, maps)`` pairs; each map is applied at its time.
            inserts: ``{(segment, phase, position): maps}`` applied right after
                the gate at that position of a segment's ``before``/``after`` list.

        """
        inserts = inserts or {}

        def apply_gates(index, phase, gates, rho):
            for position, gate in enumerate(gates):
                rho = gate.apply(rho)
                for local in inserts.get((index, phase, position), ()):
                    rho = local.apply(rho)
            return rho

        events = sorted(
            [(float(t), 0, maps) for t, maps in jumps] + [(float(t), 1, None) for t in checkpoints],
            key=lambda e: (e[0], e[1]),
        )
        recorded = []
        rho = np.array(rho, dtype=complex)
        t = 0.0
        k = 0

        def handle(event, rho):
            _, kind, maps = event
            if kind == 1:
                recorded.append(rho.copy())
                return rho
            for local in maps:
                rho = local.apply(rho)
            return rho

        while k < len(events) and events[k][0] <= 0.0:
            rho = handle(events[k], rho)
            k += 1
        for index, propagator in enumerate(self.propagators):
            end = self.ends[index]
            rho = apply_gates(index, "before", self.before[index], rho)
            while k < len(events) and events[k][0] < end:
                rho = propagator.evolve(rho, t, events[k][0])
                t = events[k][0]
                rho = handle(events[k], rho)
                k += 1
            rho = propagator.evolve(rho, t, end)
            t = end
            rho = apply_gates(index, "after", self.after[index], rho)
            while k < len(events) and events[k][0] <= end:
                rho = handle(events[k], rho)
                k += 1
        while k < len(events):
            rho = handle(events[k], rho)
            k += 1
        return recorded


def evolve_timeline(state, timeline, cfg, checkpoints, extra_terms=None, inserts=None):
    """Deterministic evolution along a timeline, returning :class:`DensityState` per checkpoint."""
    _check_state(state, timeline.n_qubits)
    propagator = TimelinePropagator(timeline, cfg, extra_terms)
    rhos = propagator.run(state.matrix, checkpoints, inserts=inserts)
    integration_log("timeline", timeline.duration, timeline.n_qubits)
    return [DensityState(_hermitize(rho), t) for rho, t in zip(rhos, checkpoints)]
