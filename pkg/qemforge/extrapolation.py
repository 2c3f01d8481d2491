"""
Richardson extrapolation over boosted noise.

Running the rescaled Hamiltonian ``H(t / r) / r`` for ``r * T`` leaves the noise
untouched in absolute time, which boosts a constant rate by ``r`` and a rate
growing linearly in time by ``r**2``. Combining node results with the
coefficients ``beta`` cancels the error terms up to order ``n``.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .exceptions import ExtrapolationError
from .lindblad import NoiseModel, TimeProfile
from .stochastic import EstimatorResult

MAX_NODES = 5
# nodes closer than this are treated as duplicates
NODE_SEPARATION_TOL = 1e-9

BoostedRun = namedtuple("BoostedRun", ["r", "duration", "exponent", "boost"])


@dataclass(frozen=True)
class ExtrapolationNodes:
    """Boost factors ``r`` (``r[0] = 1``) and their coefficients ``beta``."""

    r: tuple
    beta: tuple

    @property
    def order(self):
        return len(self.r) - 1

    @property
    def gamma(self):
        """``gamma_n = sum_j |beta_j|``, the amplification of statistical error."""
        return math.fsum(abs(b) for b in self.beta)

    @property
    def r_max(self):
        return max(self.r)

    def residuals(self):
        """``sum beta - 1`` followed by ``sum beta r**k`` for ``k = 1..n``."""
        beta = np.array(self.beta)
        r = np.array(self.r)
        return np.array([math.fsum(beta) - 1.0] + [math.fsum(beta * r**k) for k in range(1, self.order + 1)])

    def combine(self, values):
        """``sum_j beta_j values[j]``; works for scalars and arrays alike."""
        values = list(values)
        if len(values) != len(self.beta):
            msg = f"{len(values)} values for {len(self.beta)} extrapolation nodes"
            raise ExtrapolationError(msg)
        if all(np.isscalar(v) for v in values):
            return math.fsum(b * float(v) for b, v in zip(self.beta, values))
        return sum(b * np.asarray(v) for b, v in zip(self.beta, values))


def richardson_coefficients(r):
    """
    Closed-form ``beta_j = prod_{l != j} r_l / (r_l - r_j)``.

    Raises ExtrapolationError for duplicate nodes, a first node other than 1 or
    more than MAX_NODES nodes.
    """
    r = tuple(float(x) for x in r)
    if not r:
        msg = "At least one extrapolation node is required"
        raise ExtrapolationError(msg)
    if len(r) > MAX_NODES:
        msg = f"At most {MAX_NODES} extrapolation nodes are supported, got {len(r)}"
        raise ExtrapolationError(msg)
    if r[0] != 1.0:
        msg = f"The first extrapolation node must be 1, got {r[0]}"
        raise ExtrapolationError(msg)
    if any(x < 1 for x in r):
        msg = f"Extrapolation nodes must be at least 1, got {r}"
        raise ExtrapolationError(msg)
    ordered = sorted(r)
    if any(b - a <= NODE_SEPARATION_TOL for a, b in zip(ordered, ordered[1:])):
        msg = f"Extrapolation nodes must be distinct, got {r}"
        raise ExtrapolationError(msg)
    beta = tuple(math.prod(r_k / (r_k - r_j) for k, r_k in enumerate(r) if k != j) for j, r_j in enumerate(r))
    return ExtrapolationNodes(r, beta)


def _as_nodes(nodes):
    return nodes if isinstance(nodes, ExtrapolationNodes) else richardson_coefficients(nodes)


def extrapolate(estimates, nodes):
    """
    Zero-noise estimate from one :class:`EstimatorResult` per node.

    Node runs use separate samples, so standard errors add in quadrature.
    """
    nodes = _as_nodes(nodes)
    estimates = list(estimates)
    if len(estimates) != len(nodes.r):
        msg = f"{len(estimates)} estimates for {len(nodes.r)} extrapolation nodes"
        raise ExtrapolationError(msg)
    beta = nodes.beta
    mean = math.fsum(b * e.mean for b, e in zip(beta, estimates))
    stderr = math.sqrt(math.fsum((b * e.stderr) ** 2 for b, e in zip(beta, estimates)))
    predicted = math.sqrt(math.fsum((b * e.predicted_error) ** 2 for b, e in zip(beta, estimates)))
    overhead = math.fsum(abs(b) * e.C for b, e in zip(beta, estimates))
    return EstimatorResult(mean, stderr, sum(e.n_samples for e in estimates), overhead, predicted)


@dataclass(frozen=True)
class BoostedRunPlan:
    """
    Node runs of an extrapolation.

    ``exponent`` is 1 for constant-rate noise and 2 for rates linear in time;
    the effective boost of node ``r`` is ``r**exponent``.
    """

    runs: tuple
    T: float
    exponent: int

    @property
    def r(self):
        return tuple(run.r for run in self.runs)

    @property
    def effective_nodes(self):
        return tuple(run.boost for run in self.runs)

    def coefficients(self):
        """Extrapolation coefficients over the effective boosts."""
        return richardson_coefficients(self.effective_nodes)


def _profiles(noise_profiles):
    profiles = []
    for item in noise_profiles:
        if isinstance(item, NoiseModel):
            profiles.extend(term.time_profile for term in item.terms if term.rate)
            if item.coherent_error is not None and not item.coherent_error.is_zero:
                profiles.append(item.coherent_error.time_profile)
        elif isinstance(item, TimeProfile):
            profiles.append(item)
        else:
            msg = f"Expected a NoiseModel or TimeProfile, got {type(item).__name__}"
            raise ExtrapolationError(msg)
    return profiles


def plan_boosted_runs(T, nodes, noise_profiles=()):
    """
    Durations and effective boosts of the rescaled node runs.

    Args:
        T (float): logical evolution time (us).
        nodes: boost factors or :class:`ExtrapolationNodes`.
        noise_profiles: noise models and/or time profiles of the physical noise.

    """
    r = nodes.r if isinstance(nodes, ExtrapolationNodes) else tuple(float(x) for x in nodes)
    if any(x < 1 for x in r):
        msg = f"Rescale factors must be at least 1, got {r}"
        raise ExtrapolationError(msg)
    kinds = {profile.kind for profile in _profiles(noise_profiles)}
    if kinds - {"constant", "linear"}:
        msg = f"Noise boosting needs constant or linear-in-time profiles, got {sorted(kinds)}"
        raise ExtrapolationError(msg)
    if kinds == {"constant", "linear"}:
        msg = "Constant and linear-in-time noise boost by different powers; extrapolate them separately"
        raise ExtrapolationError(msg)
    exponent = 2 if kinds == {"linear"} else 1
    runs = tuple(BoostedRun(x, x * T, exponent, x**exponent) for x in r)
    return BoostedRunPlan(runs, float(T), exponent)


def truncation_bound(n, r_max, lam, T, delta_norm, obs_norm, n_samples, delta_max, C, gamma_n=None):
    """
    Upper bound on the error left after order-``n`` extrapolation.

    ``gamma_n(C r_max**(n+1) Delta_max / sqrt(N) + ||O|| (r_max lam T ||Delta L||)**(n+1) / (n+1)!)``.
    ``gamma_n`` defaults to the value for ``n + 1`` evenly spaced nodes in ``[1, r_max]``.
    """
    if min(n, r_max, lam, T, delta_norm, obs_norm, n_samples, delta_max, C) < 0:
        msg = "Truncation bound inputs must be nonnegative"
        raise ValueError(msg)
    if gamma_n is None:
        gamma_n = 1.0 if n == 0 else richardson_coefficients(np.linspace(1.0, r_max, n + 1)).gamma
    shot = C * r_max ** (n + 1) * delta_max / math.sqrt(n_samples) if n_samples else math.inf
    deterministic = obs_norm * (r_max * lam * T * delta_norm) ** (n + 1) / math.factorial(n + 1)
    return gamma_n * (shot + deterministic)
