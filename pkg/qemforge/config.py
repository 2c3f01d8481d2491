"""
Experiment configuration documents.

Configs are JSON objects. Every violation found is collected and reported at
once through :class:`~qemforge.exceptions.ConfigError`; unknown keys are
rejected. Hamiltonian coefficients may be given in rad/us or as
``{"mhz": f}`` (``2 pi f`` rad/us); rates are plain 1/us.
"""

from __future__ import annotations

import hashlib
import inspect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import ConfigError, ExtrapolationError
from .registry import preset_registry
from .settings import get_setting

METHODS = ("ideal", "none", "stochastic", "richardson", "hybrid", "continuous_reference", "infinite_sample")
DECOMPOSITIONS = ("minimal", "lp")
SAMPLING_MODES = ("finite", "infinite")
CONVENTIONS = ("gksl", "doubled")
# models whose checkpoints and duration follow from their own parameters
CIRCUIT_MODELS = ("cr_circuit",)

TOP_LEVEL_KEYS = {
    "name",
    "model",
    "noise_exp",
    "noise_est",
    "recovery_error",
    "methods",
    "decomposition",
    "sampling",
    "n_samples",
    "seed",
    "time",
    "nodes",
    "rescale",
    "continuous_dt",
    "lindblad_convention",
    "tolerance",
    "workers",
    "output",
    "trajectory_dump",
}
REQUIRED_KEYS = ("model", "methods")
RECOVERY_ERROR_KEYS = ("p_x", "p_y", "p_z")
BUNDLED_CONFIG_DIR = Path(__file__).resolve().parent / "configs"


def resolve_coefficient(value):
    """A number in rad/us, or ``{"mhz": f}`` meaning ``2 pi f`` rad/us."""
    if isinstance(value, dict):
        return 2.0 * math.pi * float(value["mhz"])
    return value


@dataclass(frozen=True)
class NoiseSpec:
    """Noise preset name, its rates and a multiplier applied to the built model."""

    preset: str
    rates: dict = field(default_factory=dict)
    scale: float = 1.0

    def build(self, n_qubits):
        from .benchmarks import noise_presets

        noise = noise_presets(self.preset, dict(self.rates), n_qubits)
        return noise if self.scale == 1.0 else noise.scaled(self.scale)

    def as_dict(self):
        return {"preset": self.preset, "rates": dict(self.rates), "scale": self.scale}


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A validated experiment.

    ``model_params`` keeps coefficients exactly as written (``{"mhz": f}``
    included) so the document round-trips; :meth:`resolved_params` converts them.
    ``scaled`` lists desk-scale reductions applied by a reproduction recipe.
    """

    model: str
    model_params: dict
    methods: tuple
    name: str = ""
    noise_exp: NoiseSpec | None = None
    noise_est: NoiseSpec | None = None
    recovery_error: dict | None = None
    decomposition: str = "minimal"
    sampling: str = "finite"
    n_samples: int = 10000
    seed: int | None = None
    T: float | None = None
    points: int = 20
    nodes: tuple = (1.0, 1.8)
    rescale: float = 1.0
    continuous_dt: float | None = None
    lindblad_convention: str = "gksl"
    tolerance: float = 1e-10
    workers: int | None = None
    output: str | None = None
    trajectory_dump: str | None = None
    scaled: tuple = ()

    @property
    def is_circuit(self):
        return self.model in CIRCUIT_MODELS

    @property
    def times(self):
        """Output grid ``T k / points`` for ``k = 1..points``; empty for circuits."""
        if self.T is None:
            return ()
        return tuple(self.T * k / self.points for k in range(1, self.points + 1))

    @property
    def samples_required(self):
        return "stochastic" in self.methods or ("hybrid" in self.methods and self.sampling == "finite")

    def resolved_params(self):
        params = {key: resolve_coefficient(value) for key, value in self.model_params.items()}
        if self.T is not None:
            params["T"] = self.T
        return params


class _Errors:
    def __init__(self):
        self.errors = {}

    def add(self, path, message):
        self.errors.setdefault(path, []).append(message)

    def __bool__(self):
        return bool(self.errors)


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _check_params(errors, path, builder, args, params):
    try:
        inspect.signature(builder).bind(*args, **params)
    except TypeError as e:
        errors.add(path, f"Invalid parameters: {e}")


def _parse_noise(errors, path, raw):
    if raw is None:
        return None
    if not isinstance(raw, dict):
        errors.add(path, "Expected an object with 'preset' and 'rates'.")
        return None
    for key in sorted(set(raw) - {"preset", "rates", "scale"}):
        errors.add(f"{path}.{key}", "Unknown key.")
    preset = raw.get("preset")
    if not isinstance(preset, str):
        errors.add(f"{path}.preset", "This field is required.")
        return None
    rates = raw.get("rates", {})
    if not isinstance(rates, dict):
        errors.add(f"{path}.rates", "Expected an object of rate values.")
        rates = {}
    max_rate = get_setting("QEMFORGE_MAX_RATE", 10.0)
    for key, value in rates.items():
        if not _is_number(value):
            errors.add(f"{path}.rates.{key}", "Expected a finite number.")
        elif value < 0:
            errors.add(f"{path}.rates.{key}", f"Rates must be nonnegative, got {value}.")
        elif value > max_rate:
            errors.add(f"{path}.rates.{key}", f"Rate {value} exceeds the declared bound {max_rate}.")
    scale = raw.get("scale", 1.0)
    if not _is_number(scale) or scale < 0:
        errors.add(f"{path}.scale", "Expected a nonnegative number.")
        scale = 1.0
    if not preset_registry.is_registered("noise", preset):
        errors.add(f"{path}.preset", f"Unknown noise preset {preset!r}.")
    else:
        _check_params(errors, f"{path}.rates", preset_registry.get("noise", preset), (1,), rates)
    return NoiseSpec(preset, dict(rates), float(scale))


def _parse_model(errors, raw):
    if not isinstance(raw, dict):
        errors.add("model", "Expected an object with 'preset' and 'params'.")
        return None, {}
    for key in sorted(set(raw) - {"preset", "params"}):
        errors.add(f"model.{key}", "Unknown key.")
    preset = raw.get("preset")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        errors.add("model.params", "Expected an object.")
        params = {}
    if "T" in params:
        errors.add("model.params.T", "The evolution time belongs in time.T.")
    for key, value in params.items():
        if isinstance(value, dict):
            if set(value) != {"mhz"} or not _is_number(value["mhz"]):
                errors.add(f"model.params.{key}", "Coefficient objects must be {\"mhz\": number}.")
        elif value is not None and not isinstance(value, (str, int, float)):
            errors.add(f"model.params.{key}", "Expected a number, string or {\"mhz\": number}.")
    if not isinstance(preset, str):
        errors.add("model.preset", "This field is required.")
        return None, params
    if not preset_registry.is_registered("model", preset):
        errors.add("model.preset", f"Unknown model preset {preset!r}.")
    else:
        sample_params = {key: 0.0 if isinstance(value, dict) else value for key, value in params.items() if key != "T"}
        sample_params["T"] = None
        _check_params(errors, "model.params", preset_registry.get("model", preset), (), sample_params)
    return preset, params


def _parse_recovery_error(errors, raw):
    if raw is None:
        return None
    if not isinstance(raw, dict):
        errors.add("recovery_error", "Expected an object with p_x, p_y and p_z.")
        return None
    for key in sorted(set(raw) - set(RECOVERY_ERROR_KEYS)):
        errors.add(f"recovery_error.{key}", "Unknown key.")
    values = {}
    for key in RECOVERY_ERROR_KEYS:
        value = raw.get(key, 0.0)
        if not _is_number(value) or not 0 <= value <= 1:
            errors.add(f"recovery_error.{key}", "Expected a probability in [0, 1].")
            value = 0.0
        values[key] = float(value)
    if sum(values.values()) > 1:
        errors.add("recovery_error", "Error probabilities sum to more than 1.")
    return values


def _parse_methods(errors, raw):
    if not isinstance(raw, list) or not raw:
        errors.add("methods", "Expected a non-empty list of methods.")
        return ()
    methods = []
    for method in raw:
        if method not in METHODS:
            errors.add("methods", f"Unknown method {method!r}; expected one of {', '.join(METHODS)}.")
        elif method in methods:
            errors.add("methods", f"Duplicate method {method!r}.")
        else:
            methods.append(method)
    return tuple(methods)


def _choice(errors, data, key, choices, default):
    value = data.get(key, default)
    if value not in choices:
        errors.add(key, f"Expected one of {', '.join(choices)}, got {value!r}.")
        return default
    return value


def _optional_str(errors, data, key):
    value = data.get(key)
    if value is not None and not isinstance(value, str):
        errors.add(key, "Expected a string.")
        return None
    return value


def _parse_time(errors, raw, is_circuit):
    if raw is None:
        if not is_circuit:
            errors.add("time.T", "This field is required.")
        return None, 20
    if not isinstance(raw, dict):
        errors.add("time", "Expected an object with 'T' and 'points'.")
        return None, 20
    for key in sorted(set(raw) - {"T", "points"}):
        errors.add(f"time.{key}", "Unknown key.")
    T = raw.get("T")
    points = raw.get("points", 20)
    if T is None:
        if not is_circuit:
            errors.add("time.T", "This field is required.")
    elif not _is_number(T) or T <= 0:
        errors.add("time.T", "Expected a positive time in us.")
        T = None
    elif is_circuit:
        errors.add("time.T", "Circuit durations follow from the circuit depth.")
        T = None
    if not _is_int(points) or points < 1:
        errors.add("time.points", "Expected a positive integer.")
        points = 20
    return (float(T) if T is not None else None), points


def _parse_nodes(errors, raw):
    from .extrapolation import richardson_coefficients

    if not isinstance(raw, list) or not all(_is_number(x) for x in raw):
        errors.add("nodes", "Expected a list of numbers.")
        return (1.0, 1.8)
    try:
        richardson_coefficients(raw)
    except ExtrapolationError as e:
        errors.add("nodes", str(e))
    return tuple(float(x) for x in raw)


def config_from_dict(data):
    """Validate a decoded document; raises ConfigError listing every violation."""
    errors = _Errors()
    if not isinstance(data, dict):
        raise ConfigError({"$": ["Expected a JSON object at the top level."]})
    for key in sorted(set(data) - TOP_LEVEL_KEYS):
        errors.add(key, "Unknown key.")
    for key in REQUIRED_KEYS:
        if key not in data:
            errors.add(key, "This field is required.")

    model, params = _parse_model(errors, data["model"]) if "model" in data else (None, {})
    methods = _parse_methods(errors, data["methods"]) if "methods" in data else ()
    is_circuit = model in CIRCUIT_MODELS
    noise_exp = _parse_noise(errors, "noise_exp", data.get("noise_exp"))
    noise_est = _parse_noise(errors, "noise_est", data.get("noise_est"))
    recovery_error = _parse_recovery_error(errors, data.get("recovery_error"))
    decomposition = _choice(errors, data, "decomposition", DECOMPOSITIONS, "minimal")
    sampling = _choice(errors, data, "sampling", SAMPLING_MODES, "finite")
    convention = _choice(errors, data, "lindblad_convention", CONVENTIONS, "gksl")
    T, points = _parse_time(errors, data.get("time"), is_circuit)
    nodes = _parse_nodes(errors, data.get("nodes", [1.0, 1.8]))

    n_samples = data.get("n_samples", 10000)
    if not _is_int(n_samples) or n_samples < 1:
        errors.add("n_samples", "Expected a positive integer.")
        n_samples = 10000
    seed = data.get("seed")
    if seed is not None and (not _is_int(seed) or seed < 0):
        errors.add("seed", "Expected a nonnegative integer.")
        seed = None
    tolerance = data.get("tolerance", 1e-10)
    if not _is_number(tolerance) or tolerance <= 0:
        errors.add("tolerance", "Expected a positive number.")
        tolerance = 1e-10
    workers = data.get("workers")
    if workers is not None and (not _is_int(workers) or workers < 1):
        errors.add("workers", "Expected a positive integer.")
        workers = None
    rescale = data.get("rescale", 1.0)
    if not _is_number(rescale) or rescale < 1:
        errors.add("rescale", "Expected a number of at least 1.")
        rescale = 1.0
    elif rescale != 1 and {"richardson", "hybrid"} & set(methods):
        errors.add("rescale", "Extrapolating methods choose their own rescale factors.")

    continuous_dt = data.get("continuous_dt")
    if continuous_dt is not None and (not _is_number(continuous_dt) or continuous_dt <= 0):
        errors.add("continuous_dt", "Expected a positive time step in us.")
        continuous_dt = None
    if "continuous_reference" in methods:
        if is_circuit:
            errors.add("methods", "continuous_reference needs a single gate-free evolution.")
        if continuous_dt is None:
            errors.add("continuous_dt", "Required by continuous_reference.")
        elif T is not None:
            steps = round(T * rescale / points / continuous_dt)
            if steps < 1 or abs(steps * continuous_dt - T * rescale / points) > 1e-9 * T:
                errors.add("continuous_dt", "Must divide every output time.")

    samples_required = "stochastic" in methods or ("hybrid" in methods and sampling == "finite")
    if seed is None and "seed" not in errors.errors and samples_required:
        errors.add("seed", "Required by sampling methods.")

    name = data.get("name", "")
    if not isinstance(name, str):
        errors.add("name", "Expected a string.")
        name = ""
    output = _optional_str(errors, data, "output")
    trajectory_dump = _optional_str(errors, data, "trajectory_dump")

    if errors:
        raise ConfigError(errors.errors)
    return ExperimentConfig(
        model=model,
        model_params=dict(params),
        methods=methods,
        name=name,
        noise_exp=noise_exp,
        noise_est=noise_est,
        recovery_error=recovery_error,
        decomposition=decomposition,
        sampling=sampling,
        n_samples=n_samples,
        seed=seed,
        T=T,
        points=points,
        nodes=nodes,
        rescale=float(rescale),
        continuous_dt=float(continuous_dt) if continuous_dt is not None else None,
        lindblad_convention=convention,
        tolerance=float(tolerance),
        workers=workers,
        output=output,
        trajectory_dump=trajectory_dump,
    )


def parse_config(text):
    """Parse a JSON document; an empty document is treated as ``{}``."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    if not text.strip():
        return config_from_dict({})
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError({"$": [f"Invalid JSON: {e}"]}) from e
    return config_from_dict(data)


def config_to_dict(cfg):
    """Inverse of :func:`config_from_dict`; desk-scale notes are not part of the document."""
    data = {
        "name": cfg.name,
        "model": {"preset": cfg.model, "params": dict(cfg.model_params)},
        "methods": list(cfg.methods),
        "decomposition": cfg.decomposition,
        "sampling": cfg.sampling,
        "n_samples": cfg.n_samples,
        "seed": cfg.seed,
        "nodes": list(cfg.nodes),
        "rescale": cfg.rescale,
        "lindblad_convention": cfg.lindblad_convention,
        "tolerance": cfg.tolerance,
        "workers": cfg.workers,
        "output": cfg.output,
        "trajectory_dump": cfg.trajectory_dump,
        "continuous_dt": cfg.continuous_dt,
        "noise_exp": cfg.noise_exp.as_dict() if cfg.noise_exp else None,
        "noise_est": cfg.noise_est.as_dict() if cfg.noise_est else None,
        "recovery_error": dict(cfg.recovery_error) if cfg.recovery_error else None,
    }
    if cfg.T is not None:
        data["time"] = {"T": cfg.T, "points": cfg.points}
    return data


def config_sha256(cfg):
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def bundled_config_names():
    return sorted(path.stem for path in BUNDLED_CONFIG_DIR.glob("*.json"))


def load_config(name_or_path):
    """Load a config file, or a bundled config by name (``fig2``, ``appF``, ...)."""
    path = Path(name_or_path)
    if not path.exists():
        bundled = BUNDLED_CONFIG_DIR / f"{name_or_path}.json"
        if not bundled.exists():
            known = ", ".join(bundled_config_names())
            raise ConfigError({"$": [f"No config file {name_or_path!r} and no bundled config of that name ({known})."]})
        path = bundled
    return parse_config(path.read_text(encoding="utf-8"))
