"""
Experiment orchestration and tabular output.

:class:`ExperimentRunner` turns a validated config into a :class:`ResultTable`
with one row per (time, method). Tables are written as CSV preceded by a
``#`` metadata block; figures are produced elsewhere from these files.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
from collections import namedtuple
from dataclasses import dataclass, field, replace
from pathlib import Path

import django
import numpy as np
import scipy

from . import __version__
from .benchmarks import inhomogeneous_pauli, lowfreq, model_presets, relax_dephase
from .config import BUNDLED_CONFIG_DIR, config_from_dict, config_sha256
from .decomposition import cost_overhead, decompose_noise, invert_pauli_channel, recovery_error_terms
from .exceptions import ConfigError, EstimatorError, ScheduleError, UnknownPresetError
from .extrapolation import extrapolate, plan_boosted_runs
from .lindblad import EvolutionConfig, NoiseModel, evolve_timeline, expectation
from .settings import generic_message
from .stochastic import (
    EstimatorResult,
    GateCorrection,
    RecoveryPlan,
    TrajectoryProblem,
    continuous_reference_states,
    dense_observable,
    estimate_series,
    fidelity_from_overlap,
    simulate_trajectories,
)

CSV_COLUMNS = ("time_us", "method", "mean", "stderr", "fidelity", "mean_jumps", "C1_total", "cost_C2")
TRAJECTORY_COLUMNS = ("index", "n_jumps", "alpha", "O_m", "trace")

ResultRow = namedtuple("ResultRow", CSV_COLUMNS)
_Point = namedtuple("_Point", ["mean", "stderr", "overlap", "mean_jumps", "c1_total", "cost_c2"])


def _format(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def version_metadata():
    return {
        "qemforge": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "django": django.get_version(),
    }


class Table:
    """Rows under a fixed header, with ``# key=value`` metadata and ``# scaled:`` notes."""

    columns = ()

    def __init__(self, rows, metadata=None, notes=(), columns=None):
        if columns is not None:
            self.columns = tuple(columns)
        self.rows = [tuple(row) for row in rows]
        for row in self.rows:
            if len(row) != len(self.columns):
                msg = f"Row {row!r} does not match the columns {self.columns}"
                raise ValueError(msg)
        self.metadata = dict(metadata or {})
        self.notes = tuple(notes)

    def column(self, name):
        index = self.columns.index(name)
        return [row[index] for row in self.rows]

    def to_csv(self):
        buffer = io.StringIO()
        for key, value in self.metadata.items():
            buffer.write(f"# {key}={value}\n")
        for note in self.notes:
            buffer.write(f"# scaled: {note}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_format(value) for value in row])
        return buffer.getvalue()

    def write(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8")
        generic_message(f"Wrote {len(self.rows)} rows to {path}")
        return path


class ResultTable(Table):
    """One row per (time, method); every numeric entry finite."""

    columns = CSV_COLUMNS

    def __init__(self, rows, metadata=None, notes=()):
        rows = [ResultRow(*row) for row in rows]
        seen = set()
        for row in rows:
            key = (row.time_us, row.method)
            if key in seen:
                msg = f"Duplicate row for method {row.method!r} at t={row.time_us}"
                raise EstimatorError(msg)
            seen.add(key)
            if not all(math.isfinite(value) for value in (*row[:1], *row[2:])):
                msg = f"Non-finite entry in row {row!r}"
                raise EstimatorError(msg)
        super().__init__(rows, metadata, notes)

    @property
    def methods(self):
        return list(dict.fromkeys(row.method for row in self.rows))

    def rows_for(self, method):
        return [row for row in self.rows if row.method == method]

    def series(self, method, name):
        rows = self.rows_for(method)
        if not rows:
            msg = f"No rows for method {method!r}"
            raise KeyError(msg)
        return np.array([getattr(row, name) for row in rows], dtype=float)


def read_result_table(source):
    """Parse a result CSV (path or text) back into a :class:`ResultTable`."""
    text = source if "\n" in str(source) else Path(source).read_text(encoding="utf-8")
    metadata = {}
    notes = []
    body = []
    for line in text.splitlines():
        if line.startswith("# scaled: "):
            notes.append(line[len("# scaled: ") :])
        elif line.startswith("# "):
            key, _, value = line[2:].partition("=")
            metadata[key] = value
        elif line.strip():
            body.append(line)
    reader = csv.DictReader(body)
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        msg = f"Expected the columns {', '.join(CSV_COLUMNS)}, got {reader.fieldnames}"
        raise ValueError(msg)
    rows = [
        ResultRow(
            float(record["time_us"]),
            record["method"],
            *(float(record[name]) for name in CSV_COLUMNS[2:]),
        )
        for record in reader
    ]
    return ResultTable(rows, metadata, notes)


class ExperimentRunner:
    """
    Runs every method of a config on one benchmark.

    The physical timeline carries ``noise_exp`` on top of model-intrinsic
    noise (circuit crosstalk); recovery decompositions are built per segment
    from the same timeline with ``noise_est``. A global ``rescale`` stretches
    every run, which is how boosted node tables for ``extrapolate`` are made.
    """

    def __init__(self, cfg, workers=None):
        self.cfg = cfg
        self.workers = workers if workers is not None else cfg.workers
        try:
            self.benchmark = model_presets(cfg.model, cfg.resolved_params())
            n = self.benchmark.n_qubits
            self.noise_exp = cfg.noise_exp.build(n) if cfg.noise_exp else NoiseModel.empty()
            self.noise_est = cfg.noise_est.build(n) if cfg.noise_est else NoiseModel.empty()
            self.recovery_error = inhomogeneous_pauli(n, **cfg.recovery_error) if cfg.recovery_error else None
        except (ValueError, UnknownPresetError) as e:
            raise ConfigError({"preset": [str(e)]}) from e
        self.gate_free_timeline = self.benchmark.timeline(self.noise_exp)
        self.timeline = self.gate_free_timeline.with_gate_error(self.recovery_error)
        self.gate_inverse = None
        if self.recovery_error is not None and self.gate_free_timeline.gate_error_slots():
            try:
                self.gate_inverse = invert_pauli_channel(**cfg.recovery_error)
            except ValueError as e:
                raise ConfigError({"recovery_error": [str(e)]}) from e
        self.est_timeline = self.benchmark.timeline(self.noise_est)
        self.checkpoints = tuple(self.benchmark.checkpoints or cfg.times)
        self.observable = dense_observable(self.benchmark.observable, n)
        self.segment_decomps = [
            decompose_noise(segment.noise, cfg.decomposition, lindblad_convention=cfg.lindblad_convention)
            for segment in self.est_timeline.segments
        ]
        self._references = None

    def _evolution(self, r):
        return EvolutionConfig(
            self.timeline.duration * r,
            self.cfg.tolerance,
            lindblad_convention=self.cfg.lindblad_convention,
        )

    def _checkpoints(self, r):
        return tuple(r * t for t in self.checkpoints)

    @property
    def references(self):
        """Ideal (pure) states at the logical checkpoints."""
        if self._references is None:
            states = evolve_timeline(
                self.benchmark.initial, self.benchmark.ideal_timeline(), self._evolution(1.0), self.checkpoints
            )
            self._references = [state.matrix for state in states]
        return self._references

    def delta_timeline(self):
        """Physical timeline with each segment's noise replaced by ``exp - est``."""
        return self.timeline.with_noise(
            physical.noise.difference(estimated.noise)
            for physical, estimated in zip(self.timeline.segments, self.est_timeline.segments)
        )

    def recovery_terms(self):
        return [recovery_error_terms(decomps, self.recovery_error) for decomps in self.segment_decomps]

    def gate_correction(self, r):
        if self.gate_inverse is None:
            return None
        return GateCorrection(self.gate_free_timeline.rescaled(r), self.gate_inverse)

    def mean_gate_inserts(self, r):
        correction = self.gate_correction(r)
        if correction is None:
            return None
        return correction.mean_inserts(self.timeline.n_qubits, self.recovery_error)

    def plan(self, r):
        return RecoveryPlan.for_timeline(self.timeline.rescaled(r), self.segment_decomps, self.gate_correction(r))

    def _costs(self, plan, r):
        costs = []
        for t in self._checkpoints(r):
            log_c = plan.log_overhead(t)
            costs.append((plan.mean_jumps(t), log_c / t if t > 0 else 0.0, math.exp(2.0 * log_c)))
        return costs

    def _deterministic(self, timeline, r, extra_terms=None, inserts=None):
        states = evolve_timeline(
            self.benchmark.initial,
            timeline.rescaled(r),
            self._evolution(r),
            self._checkpoints(r),
            extra_terms,
            inserts,
        )
        values = [expectation(state.matrix, self.observable) for state in states]
        overlaps = [expectation(state.matrix, ref) for state, ref in zip(states, self.references)]
        return values, overlaps

    def _sampled(self, r, master_seed):
        timeline = self.timeline.rescaled(r)
        problem = TrajectoryProblem(
            timeline,
            self.plan(r),
            self.benchmark.initial,
            self.observable,
            self._checkpoints(r),
            self._evolution(r),
            self.recovery_error,
            self.references,
        )
        return simulate_trajectories(problem, self.cfg.n_samples, master_seed, self.workers)

    def run_ideal(self):
        values = [expectation(ref, self.observable) for ref in self.references]
        return [_Point(value, 0.0, 1.0, 0.0, 0.0, 1.0) for value in values]

    def run_none(self):
        values, overlaps = self._deterministic(self.timeline, self.cfg.rescale)
        return [_Point(v, 0.0, o, 0.0, 0.0, 1.0) for v, o in zip(values, overlaps)]

    def run_infinite_sample(self):
        r = self.cfg.rescale
        values, overlaps = self._deterministic(self.delta_timeline(), r, self.recovery_terms(), self.mean_gate_inserts(r))
        costs = self._costs(self.plan(r), r)
        return [_Point(v, 0.0, o, *cost) for v, o, cost in zip(values, overlaps, costs)]

    def run_stochastic(self):
        r = self.cfg.rescale
        results = self._sampled(r, self.cfg.seed)
        if self.cfg.trajectory_dump:
            self.trajectory_table(results).write(self.cfg.trajectory_dump)
        values = estimate_series(results, "values")
        overlaps = estimate_series(results, "overlaps")
        costs = self._costs(self.plan(r), r)
        return [_Point(v.mean, v.stderr, o.mean, *cost) for v, o, cost in zip(values, overlaps, costs)]

    def run_continuous_reference(self):
        if len(self.timeline.segments) != 1 or self.timeline.segments[0].before or self.timeline.segments[0].after:
            msg = "The continuous reference needs a single gate-free evolution"
            raise ScheduleError(msg)
        r = self.cfg.rescale
        segment = self.timeline.segments[0]
        states = continuous_reference_states(
            self.benchmark.initial,
            segment.hamiltonian.rescaled(r),
            segment.noise,
            self.est_timeline.segments[0].noise,
            self.cfg.continuous_dt,
            self._checkpoints(r),
            self._evolution(r),
            self.cfg.decomposition,
        )
        costs = self._costs(self.plan(r), r)
        return [
            _Point(expectation(rho, self.observable), 0.0, expectation(rho, ref), *cost)
            for rho, ref, cost in zip(states, self.references, costs)
        ]

    def boosted_runs(self):
        return plan_boosted_runs(self.timeline.duration, self.cfg.nodes, [s.noise for s in self.timeline.segments])

    def run_richardson(self):
        """Deterministic noisy runs at every node combined with ``beta``; no recovery is inserted."""
        runs = self.boosted_runs()
        nodes = runs.coefficients()
        per_node = [self._deterministic(self.timeline, r) for r in runs.r]
        points = []
        for k in range(len(self.checkpoints)):
            mean = nodes.combine([values[k] for values, _ in per_node])
            overlap = nodes.combine([overlaps[k] for _, overlaps in per_node])
            points.append(_Point(mean, 0.0, overlap, 0.0, 0.0, nodes.gamma**2))
        return points

    def run_hybrid(self):
        """Stochastic (or infinite-sample) mitigation at every node, then Richardson over the boosts."""
        runs = self.boosted_runs()
        nodes = runs.coefficients()
        delta = self.delta_timeline()
        estimates = []
        overlaps = []
        plans = []
        for index, r in enumerate(runs.r):
            plan = self.plan(r)
            plans.append(plan)
            overheads = [math.exp(plan.log_overhead(t)) for t in self._checkpoints(r)]
            if self.cfg.sampling == "infinite":
                values, node_overlaps = self._deterministic(delta, r, self.recovery_terms(), self.mean_gate_inserts(r))
                estimates.append([EstimatorResult(v, 0.0, 0, c, 0.0) for v, c in zip(values, overheads)])
                overlaps.append(node_overlaps)
            else:
                results = self._sampled(r, (self.cfg.seed, index + 1))
                estimates.append(estimate_series(results, "values"))
                overlaps.append([o.mean for o in estimate_series(results, "overlaps")])
        widest = int(np.argmax(runs.r))
        points = []
        for k, t in enumerate(self.checkpoints):
            combined = extrapolate([node[k] for node in estimates], nodes)
            overlap = nodes.combine([node[k] for node in overlaps])
            log_c0 = plans[0].log_overhead(runs.r[0] * t)
            c1_total = log_c0 / (runs.r[0] * t) if t > 0 else 0.0
            mean_jumps = plans[widest].mean_jumps(runs.r[widest] * t)
            points.append(_Point(combined.mean, combined.stderr, overlap, mean_jumps, c1_total, combined.C**2))
        return points

    def trajectory_table(self, results):
        rows = [
            (index, result.n_jumps, result.alpha, result.O_m, result.trace) for index, result in enumerate(results)
        ]
        return Table(rows, self.metadata(), self.cfg.scaled, columns=TRAJECTORY_COLUMNS)

    def metadata(self):
        return {
            "config_sha256": config_sha256(self.cfg),
            "seed": self.cfg.seed if self.cfg.seed is not None else "none",
            **version_metadata(),
        }

    def run(self):
        rows = []
        for method in self.cfg.methods:
            generic_message(f"Running method '{method}' on {self.benchmark.name}")
            points = getattr(self, f"run_{method}")()
            rows.extend(
                ResultRow(
                    t,
                    method,
                    p.mean,
                    p.stderr,
                    fidelity_from_overlap(p.overlap),
                    p.mean_jumps,
                    p.c1_total,
                    p.cost_c2,
                )
                for t, p in zip(self.checkpoints, points)
            )
        return ResultTable(rows, self.metadata(), self.cfg.scaled)


def run_experiment(cfg, workers=None, write=True):
    """Run ``cfg`` and, when it names an output path and ``write`` is set, write the CSV there."""
    table = ExperimentRunner(cfg, workers).run()
    if write and cfg.output:
        table.write(cfg.output)
    return table


# Reproduction recipes

AcceptanceCheck = namedtuple("AcceptanceCheck", ["name", "passed", "detail"])

FIGURES = ("fig2", "fig2g", "fig3", "fig4", "appE_ising", "appE_j1j2", "appF")
SCALES = ("small", "paper")
SMALL_SAMPLES = 10_000
# sigma band for agreement of a sampled estimate with its infinite-sample limit
AGREEMENT_SIGMAS = 5.0


@dataclass
class ReproduceReport:
    figure: str
    scale: str
    tables: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    def write(self, directory):
        directory = Path(directory)
        return [table.write(directory / f"{self.figure}_{panel}.csv") for panel, table in self.tables.items()]

    def summary_lines(self):
        lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}" for c in self.checks]
        total = sum(c.passed for c in self.checks)
        lines.append(f"{self.figure}: {total}/{len(self.checks)} acceptance checks passed")
        return lines


@dataclass(frozen=True)
class Panel:
    name: str
    overrides: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Recipe:
    """A bundled config, the panels derived from it, its desk-scale reductions and its checks."""

    config: str
    panels: tuple
    small: dict = field(default_factory=dict)
    checks: tuple = ()


def _get_path(data, path):
    for key in path.split("."):
        data = data[key]
    return data


def _set_path(data, path, value):
    *parents, last = path.split(".")
    for key in parents:
        data = data[key]
    data[last] = value


def _errors(table, method, reference="ideal"):
    return np.abs(table.series(method, "mean") - table.series(reference, "mean"))


def agrees_with(panel, method, reference, sigmas=AGREEMENT_SIGMAS):
    """``method`` lies within ``sigmas`` standard errors of ``reference`` at every time."""

    def check(tables):
        table = tables[panel]
        excess = _errors(table, method, reference) - sigmas * table.series(method, "stderr")
        worst = float(np.max(excess))
        return AcceptanceCheck(
            f"{panel}: {method} within {sigmas:g} stderr of {reference}", worst <= 0, f"worst excess {worst:.3g}"
        )

    return check


def suppresses(panel, worse, better, factor, final_only=False):
    """Error of ``better`` times ``factor`` stays at or below the error of ``worse`` (max over time or final)."""

    def check(tables):
        table = tables[panel]
        pick = (lambda e: float(e[-1])) if final_only else (lambda e: float(np.max(e)))
        err_worse = pick(_errors(table, worse))
        err_better = pick(_errors(table, better))
        where = "final" if final_only else "max"
        return AcceptanceCheck(
            f"{panel}: {better} {where} error <= {worse} / {factor:g}",
            err_better * factor <= err_worse,
            f"{better}={err_better:.3g}, {worse}={err_worse:.3g}",
        )

    return check


def suppresses_infidelity(panel, worse, better, factor):
    """Final-time infidelity ``1 - F`` of ``better`` is at most ``1 / factor`` of ``worse``."""

    def check(tables):
        table = tables[panel]
        inf_worse = 1.0 - float(table.series(worse, "fidelity")[-1])
        inf_better = 1.0 - float(table.series(better, "fidelity")[-1])
        return AcceptanceCheck(
            f"{panel}: {better} infidelity <= {worse} / {factor:g}",
            inf_better * factor <= inf_worse,
            f"{better}={inf_better:.3g}, {worse}={inf_worse:.3g}",
        )

    return check


def jump_inversion_check(lambda_prime=math.sqrt(0.05), draws=(0.9, 0.5, 0.1, 1e-3)):
    """Jump times of a linearly growing rate invert as ``sqrt(2 E / slope)``."""

    def check(tables):
        decomps = decompose_noise(lowfreq(1, lambda_prime))
        slope = math.fsum(d.gamma * d.time_profile.scale for d in decomps)
        plan = RecoveryPlan.single(decomps, 1e6)
        worst = 0.0
        for q in draws:
            exposure = -math.log(q)
            t, _ = plan.next_jump(0.0, exposure, math.inf)
            worst = max(worst, abs(t - math.sqrt(2.0 * exposure / slope)))
        return AcceptanceCheck("jump-time inversion for a linear rate", worst <= 1e-10, f"max deviation {worst:.3g}")

    return check


def _spin_recipe(config):
    mismatch = {"noise_exp.scale": 1.1}
    return Recipe(
        config,
        (
            Panel("exact"),
            Panel("mismatch", {**mismatch, "methods": ["ideal", "none", "stochastic", "hybrid"]}),
            Panel(
                "mismatch_infinite",
                {**mismatch, "sampling": "infinite", "methods": ["ideal", "none", "infinite_sample", "hybrid"]},
            ),
        ),
        {"n_samples": SMALL_SAMPLES},
        (
            agrees_with("exact", "stochastic", "infinite_sample"),
            suppresses("exact", "none", "infinite_sample", 1.0),
            suppresses("mismatch_infinite", "infinite_sample", "hybrid", 1.0),
        ),
    )


RECIPES = {
    "fig2": _spin_recipe("fig2"),
    "fig2g": Recipe(
        "fig2g",
        (Panel("infinite"),),
        {"model.params.cols": 3},
        (
            suppresses("infinite", "none", "infinite_sample", 10.0),
            suppresses("infinite", "infinite_sample", "hybrid", 10.0),
        ),
    ),
    "fig3": Recipe(
        "fig3",
        (Panel("depth"),),
        {"n_samples": SMALL_SAMPLES},
        (suppresses_infidelity("depth", "none", "stochastic", 10.0),),
    ),
    "appE_ising": _spin_recipe("appE_ising"),
    "appE_j1j2": _spin_recipe("appE_j1j2"),
    "appF": Recipe(
        "appF",
        (
            Panel("sampled"),
            Panel("infinite", {"sampling": "infinite", "methods": ["ideal", "none", "infinite_sample", "hybrid"]}),
        ),
        {"n_samples": SMALL_SAMPLES},
        (
            suppresses("infinite", "infinite_sample", "hybrid", 1.0, final_only=True),
            jump_inversion_check(),
        ),
    ),
}


def run_recipe(figure, recipe, scale="small", workers=None):
    base = json.loads((BUNDLED_CONFIG_DIR / f"{recipe.config}.json").read_text(encoding="utf-8"))
    notes = []
    if scale == "small":
        for path, value in recipe.small.items():
            old = _get_path(base, path)
            if old != value:
                _set_path(base, path, value)
                notes.append(f"{path} {old} -> {value}")
    report = ReproduceReport(figure, scale)
    for panel in recipe.panels:
        data = copy.deepcopy(base)
        for path, value in panel.overrides.items():
            _set_path(data, path, value)
        data["output"] = None
        data["trajectory_dump"] = None
        cfg = replace(config_from_dict(data), scaled=tuple(notes))
        report.tables[panel.name] = run_experiment(cfg, workers=workers, write=False)
    report.checks = [check(report.tables) for check in recipe.checks]
    return report


# Cost tables

COST_LAMBDA_GRID = tuple(round(0.1 * k, 10) for k in range(21))
COST_QUBITS = (1, 2, 5, 10, 20, 50, 100)
COST_SAMPLES = tuple(10**k for k in range(3, 9))
COST_N_QUBITS = 50
COST_T = 1.0
# (lambda1 + lambda2) T of the qubit-count and sampling-error tables
COST_UNIT_STRENGTH = 0.01
COST_SAMPLING_QUBITS = (50, 100)
REFERENCE_C2_AT_UNIT_LAMBDA = 30.0
PRODUCT_STEPS = 10_000
PRODUCT_CHECK_MAX_LAMBDA = 0.5
LINEARITY_R2 = 0.999

LAMBDA_COLUMNS = ("Lambda", "decomposition", "C1_total", "C", "cost_C2", "product_C", "mean_jumps")
QUBIT_COLUMNS = ("n_qubits", "Lambda", "decomposition", "C1_total", "cost_C2")
EPSILON_COLUMNS = ("n_qubits", "n_samples", "decomposition", "C", "epsilon")


def qubit_cost(n_qubits, T, rate_sum, method):
    """Overhead of ``n_qubits`` identical qubits under relaxation and dephasing at ``rate_sum / 2`` each."""
    decomps = decompose_noise(relax_dephase(1, rate_sum / 2, rate_sum / 2), method)
    return cost_overhead(decomps * n_qubits, T, n_qubits, rate_sum)


def cost_tables(methods=("minimal", "lp")):
    """Overhead against total noise strength, against qubit count, and the sampling error ``C / sqrt(N_s)``."""
    metadata = version_metadata()
    lambda_rows = []
    for Lambda in COST_LAMBDA_GRID:
        rate_sum = Lambda / (COST_N_QUBITS * COST_T)
        for method in methods:
            report = qubit_cost(COST_N_QUBITS, COST_T, rate_sum, method)
            product = math.exp(PRODUCT_STEPS * math.log1p(report.c1_total * COST_T / PRODUCT_STEPS))
            lambda_rows.append((Lambda, method, report.c1_total, report.C, report.C2, product, report.mean_jumps))
    qubit_rows = []
    for n in COST_QUBITS:
        for method in methods:
            report = qubit_cost(n, COST_T, COST_UNIT_STRENGTH / COST_T, method)
            qubit_rows.append((n, report.Lambda, method, report.c1_total, report.C2))
    epsilon_rows = []
    for n in COST_SAMPLING_QUBITS:
        for method in methods:
            report = qubit_cost(n, COST_T, COST_UNIT_STRENGTH / COST_T, method)
            epsilon_rows.extend((n, n_s, method, report.C, report.C / math.sqrt(n_s)) for n_s in COST_SAMPLES)
    return {
        "lambda": Table(
            lambda_rows,
            {**metadata, "reference_C2_at_Lambda_1": REFERENCE_C2_AT_UNIT_LAMBDA},
            columns=LAMBDA_COLUMNS,
        ),
        "qubits": Table(qubit_rows, metadata, columns=QUBIT_COLUMNS),
        "epsilon": Table(epsilon_rows, metadata, columns=EPSILON_COLUMNS),
    }


def _lambda_rows(table, method):
    return [dict(zip(table.columns, row)) for row in table.rows if row[1] == method]


def cost_checks(tables, methods=("minimal", "lp")):
    table = tables["lambda"]
    checks = []
    at_unit = {method: next(r for r in _lambda_rows(table, method) if r["Lambda"] == 1.0) for method in methods}
    if "lp" in at_unit and "minimal" in at_unit:
        lp, minimal = at_unit["lp"]["cost_C2"], at_unit["minimal"]["cost_C2"]
        checks.append(
            AcceptanceCheck(
                "optimized C2 <= unoptimized C2 at Lambda = 1",
                lp <= minimal * (1 + 1e-12),
                f"lp={lp:.6g}, minimal={minimal:.6g}, reference={REFERENCE_C2_AT_UNIT_LAMBDA:g}",
            )
        )
    for method in methods:
        rows = _lambda_rows(table, method)
        x = np.array([r["Lambda"] for r in rows])
        y = np.log([r["cost_C2"] for r in rows])
        slope, intercept = np.polyfit(x, y, 1)
        residual = float(np.sum((y - (slope * x + intercept)) ** 2))
        spread = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - residual / spread if spread else 1.0
        checks.append(AcceptanceCheck(f"{method}: log C2 linear in Lambda", r2 >= LINEARITY_R2, f"R2={r2:.6f}"))
        worst = max(
            abs(r["C"] - r["product_C"]) / r["C"] for r in rows if r["Lambda"] <= PRODUCT_CHECK_MAX_LAMBDA
        )
        checks.append(
            AcceptanceCheck(
                f"{method}: exp(C1 T) matches the stepped product for Lambda <= {PRODUCT_CHECK_MAX_LAMBDA:g}",
                worst <= 1e-4,
                f"max relative deviation {worst:.3g}",
            )
        )
    return checks


def reproduce(figure, scale="small", workers=None):
    """Run the recipe for ``figure`` and evaluate its acceptance checks."""
    if figure not in FIGURES:
        raise ConfigError({"figure": [f"Unknown figure {figure!r}; expected one of {', '.join(FIGURES)}."]})
    if scale not in SCALES:
        raise ConfigError({"scale": [f"Unknown scale {scale!r}; expected one of {', '.join(SCALES)}."]})
    if figure == "fig4":
        report = ReproduceReport(figure, scale, cost_tables())
        report.checks = cost_checks(report.tables)
        return report
    return run_recipe(figure, RECIPES[figure], scale, workers)
