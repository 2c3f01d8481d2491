"""Shared plumbing of the qemforge management commands."""

import numpy as np
from django.core.management.base import BaseCommand, CommandError

from qemforge.benchmarks import noise_presets
from qemforge.exceptions import ConfigError, QemForgeError, UnknownPresetError

EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_ACCEPTANCE = 4


def parse_rates(text):
    """``lambda1=0.04,lambda2=0.04`` -> ``{"lambda1": 0.04, "lambda2": 0.04}``."""
    rates = {}
    errors = []
    for item in filter(None, (part.strip() for part in (text or "").split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            errors.append(f"Expected name=value, got {item!r}.")
            continue
        try:
            rates[key.strip()] = float(value)
        except ValueError:
            errors.append(f"Rate {key.strip()!r} is not a number: {value!r}.")
    if errors:
        raise ConfigError({"rates": errors})
    return rates


def parse_floats(text, field):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise ConfigError({field: [f"Expected comma-separated numbers, got {text!r}."]}) from e


class QemForgeCommand(BaseCommand):
    """Runs :meth:`run` and maps library failures onto the documented exit codes."""

    def run(self, *args, **options):
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            return self.run(*args, **options)
        except ConfigError as e:
            raise CommandError(str(e), returncode=EXIT_CONFIG) from e
        except (QemForgeError, ArithmeticError, np.linalg.LinAlgError) as e:
            raise CommandError(f"{type(e).__name__}: {e}", returncode=EXIT_RUNTIME) from e


def build_noise(name, rates_text, n_qubits):
    """Noise preset from command-line arguments; bad names or rates are configuration errors."""
    rates = parse_rates(rates_text)
    try:
        return noise_presets(name, rates, n_qubits)
    except UnknownPresetError as e:
        raise ConfigError({"noise": [str(e)]}) from e
    except ValueError as e:
        raise ConfigError({"rates": [str(e)]}) from e
