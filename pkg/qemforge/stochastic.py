"""
Stochastic error mitigation.

Jump schedules are drawn before any integration: the waiting time to the next
recovery insertion inverts the survival function ``exp(-int Gamma dt)``, and
each jump picks a basis operation with probability ``|q_j| / Gamma``. A
trajectory runs the physical noisy evolution with those operations inserted;
the estimator averages ``C * alpha * O`` over trajectories.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .decomposition import decompose_noise, timeline_cost
from .exceptions import DimensionMismatchError, EstimatorError, ScheduleError
from .lindblad import (
    DensityState,
    EvolutionConfig,
    Generator,
    Propagator,
    Timeline,
    TimelinePropagator,
    _hermitize,
    expectation,
)
from .pauli import LocalMap, PauliString, PauliVector, TransferMatrix
from .settings import get_worker_count, integration_log, schedule_log

# purity below which a reference state no longer counts as pure
PURITY_TOL = 1e-8

JumpEvent = namedtuple("JumpEvent", ["time", "subsystem", "basis_index", "alpha"])


def trajectory_rng(master_seed, index):
    """Counter-based generator for trajectory ``index``; independent of how trajectories are split."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(master_seed, spawn_key=(index,))))


@dataclass(frozen=True)
class JumpSchedule:
    """
    Recovery insertions of one trajectory.

    ``subsystem`` indexes the decompositions of the :class:`RecoveryPlan` the
    schedule was drawn from, ``basis_index`` the operation inside it.
    ``corrections`` holds the Pauli drawn for each gate-error slot, if any.
    """

    events: tuple = ()
    trajectory_seed: int = 0
    corrections: tuple = ()

    def __post_init__(self):
        events = tuple(JumpEvent(*event) for event in self.events)
        times = [event.time for event in events]
        if any(b <= a for a, b in zip(times, times[1:])):
            msg = "Jump times must be strictly increasing"
            raise ScheduleError(msg)
        if any(event.alpha not in (-1, 1) for event in events):
            msg = "Jump parities must be +1 or -1"
            raise ScheduleError(msg)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "corrections", tuple(int(choice) for choice in self.corrections))

    @property
    def alpha(self):
        return int(np.prod([event.alpha for event in self.events], dtype=int))

    @property
    def n_jumps(self):
        return len(self.events)

    @property
    def key(self):
        """Identity of the schedule up to its seed; trajectories sharing a key give identical results."""
        return (tuple((event.time, event.subsystem, event.basis_index) for event in self.events), self.corrections)

    def prefix_alpha(self, t):
        """Parity of the events at or before ``t``."""
        alpha = 1
        for event in self.events:
            if event.time > t:
                break
            alpha *= event.alpha
        return alpha


class GateCorrection:
    """
    Signed Pauli corrections undoing the error that follows every circuit gate.

    Each slot of :meth:`Timeline.gate_error_slots` gets one Pauli per trajectory,
    drawn with probability ``|q_a| / gamma``; a correction counts towards the
    weight once the propagator has applied it.

    Args:
        timeline (Timeline): gate-error-free timeline the slots are read from.
        inverse (QuasiDecomposition): discrete inverse of the gate error, over ``I, X, Y, Z``.

    """

    def __init__(self, timeline, inverse):
        self.inverse = inverse
        self.slots = timeline.gate_error_slots()
        starts, ends = timeline.starts, timeline.ends
        # before-gates act after a checkpoint at the segment start, after-gates before one at its end
        self._applied_after = tuple(
            (starts[segment], True) if phase == "before" else (ends[segment], False)
            for segment, phase, _, _ in self.slots
        )
        q = np.asarray(inverse.q[:4])
        self.gamma = float(np.sum(np.abs(q)))
        self.probabilities = np.abs(q) / self.gamma
        self.signs = np.where(q < 0, -1, 1)

    def applied(self, t):
        """Mask of the slots in effect at checkpoint ``t``."""
        return np.array([t > time if strict else t >= time for time, strict in self._applied_after], dtype=bool)

    def log_overhead(self, t):
        return int(np.count_nonzero(self.applied(t))) * math.log(self.gamma)

    def draw(self, rng):
        return tuple(int(a) for a in rng.choice(4, size=len(self.slots), p=self.probabilities))

    def prefix_alpha(self, choices, t):
        if not choices:
            return 1
        signs = self.signs[np.asarray(choices)]
        return int(np.prod(signs[self.applied(t)], dtype=int))

    def inserts(self, choices, n_qubits, recovery_error=None):
        """Propagator inserts for one trajectory's ``choices``; the identity needs none."""
        inserts = {}
        for (segment, phase, position, qubit), choice in zip(self.slots, choices):
            if choice:
                maps = [LocalMap(self.inverse.basis[choice].kraus, n_qubits, (qubit,))]
                if recovery_error is not None:
                    maps.append(LocalMap(recovery_error, n_qubits, (qubit,)))
                inserts[(segment, phase, position)] = tuple(maps)
        return inserts

    def mean_inserts(self, n_qubits, recovery_error=None):
        """The averaged correction ``sum_a q_a E o P_a`` at every slot, for deterministic runs."""
        error = recovery_error.ptm().entries if recovery_error is not None else np.eye(4)
        entries = self.inverse.q[0] * np.eye(4) + sum(
            self.inverse.q[a] * (error @ self.inverse.basis[a].ptm.entries) for a in range(1, 4)
        )
        local = TransferMatrix(entries)
        return {(s, phase, position): (LocalMap(local, n_qubits, (q,)),) for s, phase, position, q in self.slots}


class RecoveryPlan:
    """
    Recovery decompositions laid out over consecutive time windows.

    A spin-model run has a single window; a circuit has one per segment, since
    the recovered crosstalk follows the active gate. A circuit with gate errors
    also carries the :class:`GateCorrection` that cancels them.
    """

    def __init__(self, windows, gate_correction=None):
        self.gate_correction = gate_correction
        self.subsystems = []
        self._windows = []
        for start, end, decomps in windows:
            if end < start:
                msg = f"Window [{start}, {end}] ends before it starts"
                raise ScheduleError(msg)
            members = []
            for decomp in decomps:
                members.append(len(self.subsystems))
                self.subsystems.append(decomp)
            self._windows.append((float(start), float(end), tuple(members)))

    @classmethod
    def single(cls, decomps, T):
        return cls([(0.0, T, decomps)])

    @classmethod
    def for_timeline(cls, timeline, segment_decomps, gate_correction=None):
        """One window per timeline segment."""
        segment_decomps = list(segment_decomps)
        if len(segment_decomps) != len(timeline.segments):
            msg = "One decomposition list per timeline segment is required"
            raise ScheduleError(msg)
        return cls(zip(timeline.starts, timeline.ends, segment_decomps), gate_correction)

    @property
    def duration(self):
        return self._windows[-1][1] if self._windows else 0.0

    @property
    def segment_decomps(self):
        return [[self.subsystems[i] for i in members] for _, _, members in self._windows]

    def _members(self, window):
        return [self.subsystems[i] for i in self._windows[window][2]]

    def _hazard(self, window, t0, t1):
        return math.fsum(d.gamma * d.time_profile.integral(t0, t1) for d in self._members(window))

    def hazard(self, t0, t1):
        """``int_{t0}^{t1} Gamma(t) dt`` over all windows."""
        return math.fsum(
            self._hazard(index, max(start, t0), min(end, t1))
            for index, (start, end, _) in enumerate(self._windows)
            if min(end, t1) > max(start, t0)
        )

    def log_overhead(self, t):
        """``log C(t)``, the integrated ``C1`` up to ``t`` plus the gate corrections applied by then."""
        starts = [w[0] for w in self._windows]
        ends = [w[1] for w in self._windows]
        log_c = timeline_cost(self.segment_decomps, starts, ends, t)[0]
        if self.gate_correction is not None:
            log_c += self.gate_correction.log_overhead(t)
        return log_c

    def mean_jumps(self, t):
        return self.hazard(0.0, t)

    def next_jump(self, t, exposure, t_max):
        """
        Time at which the hazard accumulated after ``t`` reaches ``exposure``.

        Returns ``(time, window)`` or ``None`` when no jump happens before ``t_max``.
        """
        for index, (start, end, _) in enumerate(self._windows):
            end = min(end, t_max)
            if end <= t or end <= start:
                continue
            lo = max(start, t)
            available = self._hazard(index, lo, end)
            if available >= exposure:
                return self._invert(index, lo, end, exposure), index
            exposure -= available
        return None

    def _invert(self, window, lo, hi, exposure):
        if exposure <= 0:
            return lo
        members = self._members(window)
        if any(d.time_profile.kind == "piecewise" for d in members if d.gamma):
            return brentq(lambda x: self._hazard(window, lo, x) - exposure, lo, hi, xtol=1e-15, rtol=1e-14)
        rate = math.fsum(d.gamma * d.time_profile.scale for d in members if d.time_profile.kind == "constant")
        slope = math.fsum(d.gamma * d.time_profile.scale for d in members if d.time_profile.kind == "linear")
        if slope == 0:
            t = lo + exposure / rate
        else:
            # 0.5 * slope * (t^2 - lo^2) + rate * (t - lo) = exposure
            disc = rate * rate + 2.0 * slope * (exposure + rate * lo + 0.5 * slope * lo * lo)
            t = (-rate + math.sqrt(disc)) / slope
        return min(max(t, lo), hi)

    def select(self, window, t, u):
        """Subsystem and basis index of the jump at ``t`` for the uniform draw ``u``."""
        members = self._windows[window][2]
        weights = np.array([self.subsystems[i].gamma * self.subsystems[i].time_profile(t) for i in members])
        total = weights.sum()
        if total <= 0:
            msg = f"No recovery jumps are possible at t={t}"
            raise ScheduleError(msg)
        cum = np.cumsum(weights) / total
        cum[-1] = 1.0
        pos = int(np.searchsorted(cum, u, side="right"))
        if pos >= len(members):
            pos = int(np.flatnonzero(weights)[-1])
        lower = cum[pos - 1] if pos else 0.0
        local = min(max((u - lower) / (weights[pos] / total), 0.0), 1.0)
        decomp = self.subsystems[members[pos]]
        return members[pos], decomp.select(local)


def _as_plan(decomps, T):
    if isinstance(decomps, RecoveryPlan):
        return decomps
    return RecoveryPlan.single(list(decomps), T)


def sample_jump_schedule(decomps, T, rng_seed, index=0):
    """
    Draw the recovery insertions of one trajectory up to ``T``.

    Args:
        decomps: list of :class:`QuasiDecomposition` (one window ``[0, T]``) or a :class:`RecoveryPlan`.
        T (float): final time (us).
        rng_seed: master seed (int) combined with ``index``, or a ready generator.
        index (int): trajectory index.

    """
    if T < 0:
        msg = f"Final time must be nonnegative, got {T}"
        raise ScheduleError(msg)
    plan = _as_plan(decomps, T)
    rng = rng_seed if hasattr(rng_seed, "random") else trajectory_rng(rng_seed, index)
    events = []
    t = 0.0
    while True:
        q = 1.0 - rng.random()
        found = plan.next_jump(t, -math.log(q), T)
        if found is None:
            break
        t, window = found
        subsystem, basis_index = plan.select(window, t, rng.random())
        alpha = int(plan.subsystems[subsystem].alpha[basis_index - 1])
        events.append(JumpEvent(t, subsystem, basis_index, alpha))
    corrections = plan.gate_correction.draw(rng) if plan.gate_correction is not None else ()
    return JumpSchedule(tuple(events), index, corrections)


def sample_schedules(plan, T, master_seed, n_samples):
    schedules = [sample_jump_schedule(plan, T, master_seed, index) for index in range(n_samples)]
    if schedules:
        schedule_log(len(schedules), sum(s.n_jumps for s in schedules) / len(schedules))
    return schedules


@dataclass(frozen=True, eq=False)
class TrajectoryResult:
    """
    Outcomes of one trajectory at every checkpoint.

    ``values`` are raw ``O_m``, ``weights`` are ``C(t_k) * alpha_k``; states are
    subnormalized when projective basis operations fired.
    """

    values: np.ndarray
    weights: np.ndarray
    alphas: np.ndarray
    traces: np.ndarray
    overlaps: np.ndarray | None = None
    n_jumps: int = 0

    @property
    def O_m(self):  # noqa: N802
        return float(self.values[-1])

    @property
    def weight(self):
        return float(self.weights[-1])

    @property
    def alpha(self):
        return int(self.alphas[-1])

    @property
    def trace(self):
        return float(self.traces[-1])


def dense_observable(observable, n_qubits):
    if isinstance(observable, PauliVector):
        matrix = observable.to_matrix()
    elif isinstance(observable, PauliString):
        matrix = observable.matrix()
    else:
        matrix = np.asarray(observable, dtype=complex)
    if matrix.shape != (2**n_qubits, 2**n_qubits):
        msg = f"Observable of shape {matrix.shape} does not act on {n_qubits} qubits"
        raise DimensionMismatchError(msg)
    return matrix


class TrajectoryProblem:
    """
    Everything a worker needs to run recovery-inserted trajectories.

    The noisy propagators are compiled once; jump maps are built on first use.

    Args:
        timeline (Timeline): physical noisy evolution.
        plan (RecoveryPlan): recovery decompositions the schedules were drawn from.
        initial (DensityState): state at t = 0.
        observable: measured observable (dense matrix, PauliVector or PauliString).
        checkpoints: sorted output times (us).
        cfg (EvolutionConfig): integrator controls.
        recovery_error (KrausMap): optional single-qubit channel applied after each basis operation.
        references: optional pure ideal states (matrices), one per checkpoint, for fidelities.

    """

    def __init__(self, timeline, plan, initial, observable, checkpoints, cfg, recovery_error=None, references=None):
        n = timeline.n_qubits
        if initial.n_qubits != n:
            msg = f"State on {initial.n_qubits} qubits does not match a {n}-qubit timeline"
            raise DimensionMismatchError(msg)
        self.checkpoints = tuple(float(t) for t in checkpoints)
        if not self.checkpoints or any(b < a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            msg = "Checkpoints must be a non-empty sorted sequence"
            raise ScheduleError(msg)
        if self.checkpoints[0] < 0 or self.checkpoints[-1] > timeline.duration * (1 + 1e-12):
            msg = f"Checkpoints must lie within [0, {timeline.duration}]"
            raise ScheduleError(msg)
        if references is not None and len(references) != len(self.checkpoints):
            msg = "One reference state per checkpoint is required"
            raise DimensionMismatchError(msg)
        self.timeline = timeline
        self.plan = plan
        self.n_qubits = n
        self.initial = np.array(initial.matrix, dtype=complex)
        self.observable = dense_observable(observable, n)
        self.references = None if references is None else [np.asarray(r, dtype=complex) for r in references]
        self.recovery_error = recovery_error
        self.propagator = TimelinePropagator(timeline, cfg)
        self.overheads = np.array([math.exp(plan.log_overhead(t)) for t in self.checkpoints])
        self._maps = {}

    def jump_maps(self, subsystem, basis_index):
        key = (subsystem, basis_index)
        if key not in self._maps:
            if not 0 <= subsystem < len(self.plan.subsystems):
                msg = f"Schedule refers to subsystem {subsystem}, the plan has {len(self.plan.subsystems)}"
                raise ScheduleError(msg)
            decomp = self.plan.subsystems[subsystem]
            if not 1 <= basis_index < len(decomp.basis):
                msg = f"Basis index {basis_index} outside the decomposition of {decomp.support}"
                raise ScheduleError(msg)
            op = decomp.basis[basis_index]
            maps = [LocalMap(op.kraus, self.n_qubits, decomp.support)]
            if self.recovery_error is not None:
                maps.extend(LocalMap(self.recovery_error, self.n_qubits, (q,)) for q in decomp.support)
            self._maps[key] = tuple(maps)
        return self._maps[key]

    def run(self, schedule):
        if schedule.events and schedule.events[-1].time > self.timeline.duration * (1 + 1e-12):
            msg = f"Schedule runs past the final time {self.timeline.duration}"
            raise ScheduleError(msg)
        jumps = [(event.time, self.jump_maps(event.subsystem, event.basis_index)) for event in schedule.events]
        correction = self.plan.gate_correction
        inserts = None
        if correction is not None and schedule.corrections:
            if len(schedule.corrections) != len(correction.slots):
                msg = f"{len(schedule.corrections)} gate corrections for {len(correction.slots)} gate errors"
                raise ScheduleError(msg)
            inserts = correction.inserts(schedule.corrections, self.n_qubits, self.recovery_error)
        states = self.propagator.run(self.initial, self.checkpoints, jumps, inserts)
        alphas = np.array([schedule.prefix_alpha(t) for t in self.checkpoints], dtype=int)
        if inserts is not None:
            alphas *= np.array([correction.prefix_alpha(schedule.corrections, t) for t in self.checkpoints], dtype=int)
        overlaps = None
        if self.references is not None:
            overlaps = np.array([expectation(rho, ref) for rho, ref in zip(states, self.references)])
        return TrajectoryResult(
            values=np.array([expectation(rho, self.observable) for rho in states]),
            weights=self.overheads * alphas,
            alphas=alphas,
            traces=np.array([float(np.trace(rho).real) for rho in states]),
            overlaps=overlaps,
            n_jumps=schedule.n_jumps,
        )


def run_trajectory(schedule, initial, h, noise_exp, observable, decomps, T, recovery_error=None, cfg=None):
    """
    One trajectory of a single-segment run, observed at ``T``.

    ``decomps`` must be the decompositions ``schedule`` was drawn from.
    """
    cfg = cfg or EvolutionConfig(T)
    plan = _as_plan(decomps, T)
    problem = TrajectoryProblem(Timeline.single(h, noise_exp, T), plan, initial, observable, (T,), cfg, recovery_error)
    return problem.run(schedule)


def simulate_trajectories(problem, n_samples, master_seed, workers=None):
    """Sample ``n_samples`` schedules and run them; results come back in trajectory order."""
    from .tasks import dispatch

    if n_samples < 1:
        msg = f"At least one trajectory is required, got {n_samples}"
        raise EstimatorError(msg)
    schedules = sample_schedules(problem.plan, problem.timeline.duration, master_seed, n_samples)
    return dispatch(problem, schedules, get_worker_count(workers))


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    stderr: float
    n_samples: int
    C: float
    predicted_error: float


def _summarize(samples, C):
    n = len(samples)
    if not n:
        msg = "Cannot estimate from zero trajectories"
        raise EstimatorError(msg)
    if not all(math.isfinite(x) for x in samples):
        msg = "Non-finite trajectory outcome"
        raise EstimatorError(msg)
    mean = math.fsum(samples) / n
    variance = math.fsum((x - mean) ** 2 for x in samples) / (n - 1) if n > 1 else 0.0
    return EstimatorResult(mean, math.sqrt(variance / n), n, C, C / math.sqrt(n))


def estimate(trajectories, C=None, checkpoint=-1, quantity="values"):
    """
    Signed estimator ``(C / N) sum_m alpha_m O_m``.

    Args:
        trajectories: :class:`TrajectoryResult` list in trajectory order.
        C (float): overhead; ``None`` uses the weights recorded per checkpoint.
        checkpoint (int): checkpoint position.
        quantity (str): ``values`` for the observable, ``overlaps`` for the ideal-state overlap.

    """
    trajectories = list(trajectories)
    if not trajectories:
        msg = "Cannot estimate from zero trajectories"
        raise EstimatorError(msg)
    if quantity == "overlaps" and trajectories[0].overlaps is None:
        msg = "Trajectories were run without reference states"
        raise EstimatorError(msg)
    samples = []
    for result in trajectories:
        raw = float(getattr(result, quantity)[checkpoint])
        if C is None:
            samples.append(float(result.weights[checkpoint]) * raw)
        else:
            samples.append(C * int(result.alphas[checkpoint]) * raw)
    overhead = float(trajectories[0].weights[checkpoint] * trajectories[0].alphas[checkpoint]) if C is None else C
    return _summarize(samples, overhead)


def estimate_series(trajectories, quantity="values"):
    """One :class:`EstimatorResult` per checkpoint."""
    trajectories = list(trajectories)
    if not trajectories:
        msg = "Cannot estimate from zero trajectories"
        raise EstimatorError(msg)
    return [estimate(trajectories, None, k, quantity) for k in range(len(trajectories[0].values))]


def continuous_reference_states(initial, h, noise_exp, noise_est, dt, times, cfg=None, method="minimal"):
    """
    Deterministic first-order mitigation: each slice applies the noisy step, then ``I + G_Q dt``.

    The signed recovery is applied as a whole linear map, so no sampling is
    involved. Returns the (Hermitized) matrices at ``times``, each a multiple of ``dt``.
    """
    if dt <= 0:
        msg = f"Time step must be positive, got {dt}"
        raise ScheduleError(msg)
    targets = []
    for t in times:
        steps = int(round(t / dt))
        if abs(steps * dt - t) > 1e-9 * max(t, 1.0):
            msg = f"Time step {dt} does not divide t={t}"
            raise ScheduleError(msg)
        targets.append(steps)
    if any(b < a for a, b in zip(targets, targets[1:])):
        msg = "Output times must be sorted"
        raise ScheduleError(msg)
    t_end = targets[-1] * dt if targets else 0.0
    cfg = cfg or EvolutionConfig(t_end)
    n = h.n_qubits
    propagator = Propagator(Generator(n, h, noise_exp, (), cfg.dissipator_factor), cfg)
    decomps = decompose_noise(noise_est, method, lindblad_convention=cfg.lindblad_convention)
    recoveries = [(d.time_profile, LocalMap(d.reconstruct(), n, d.support)) for d in decomps if d.q.any()]
    rho = np.array(initial.matrix, dtype=complex)
    recorded = []
    step = 0
    for target in targets:
        while step < target:
            t0, t1 = step * dt, (step + 1) * dt
            rho = propagator.evolve(rho, t0, t1)
            correction = np.zeros_like(rho)
            for profile, local in recoveries:
                g = profile(t1)
                if g:
                    correction += g * local.apply(rho)
            rho = rho + dt * correction
            step += 1
        recorded.append(_hermitize(rho))
    integration_log(f"continuous reference ({step} slices)", t_end, n)
    return recorded


def continuous_reference(initial, h, noise_exp, noise_est, dt, T, observable, cfg=None, method="minimal"):
    """``Tr(O rho)`` at ``T`` of :func:`continuous_reference_states`; ``dt`` must divide ``T``."""
    (rho,) = continuous_reference_states(initial, h, noise_exp, noise_est, dt, [T], cfg, method)
    return expectation(rho, dense_observable(observable, h.n_qubits))


def _reference_vector(psi):
    if isinstance(psi, DensityState):
        psi = psi.matrix
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim == 1:
        return psi / np.linalg.norm(psi)
    purity = float(np.real(np.trace(psi @ psi)))
    if purity < 1 - PURITY_TOL:
        msg = f"Fidelity needs a pure reference state, got purity {purity:.6g}"
        raise EstimatorError(msg)
    values, vectors = np.linalg.eigh(_hermitize(psi))
    return vectors[:, -1]


def state_fidelity(rho, psi):
    """``sqrt(<psi| rho |psi>)`` clipped to [0, 1]."""
    vector = _reference_vector(psi)
    rho = rho.matrix if isinstance(rho, DensityState) else np.asarray(rho)
    overlap = float(np.real(vector.conj() @ rho @ vector))
    return math.sqrt(min(max(overlap, 0.0), 1.0))


def fidelity_from_overlap(overlap):
    return math.sqrt(min(max(overlap, 0.0), 1.0))


def effective_state_and_fidelity(states, C, psi, alphas=None):
    """
    ``rho_eff = (C / N) sum_m alpha_m rho_m`` and its fidelity with the pure state ``psi``.

    Args:
        states: trajectory final states (matrices or :class:`DensityState`).
        C (float): overhead.
        psi: ideal pure state, as a vector or density matrix.
        alphas: trajectory parities; all +1 when omitted.

    """
    matrices = [s.matrix if isinstance(s, DensityState) else np.asarray(s, dtype=complex) for s in states]
    if not matrices:
        msg = "Cannot build an effective state from zero trajectories"
        raise EstimatorError(msg)
    alphas = [1] * len(matrices) if alphas is None else list(alphas)
    if len(alphas) != len(matrices):
        msg = "One parity per trajectory state is required"
        raise DimensionMismatchError(msg)
    total = np.zeros_like(matrices[0])
    for alpha, matrix in zip(alphas, matrices):
        total += alpha * matrix
    rho_eff = _hermitize(C * total / len(matrices))
    return rho_eff, state_fidelity(rho_eff, psi)
