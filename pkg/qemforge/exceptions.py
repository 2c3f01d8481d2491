from django.core.exceptions import ImproperlyConfigured


class QemForgeError(Exception):
    """Base class for every error raised by qemforge."""


class DimensionMismatchError(QemForgeError, ValueError):
    pass


class NonHermitianError(QemForgeError, ValueError):
    pass


class SupportError(QemForgeError, ValueError):
    """Qubit support out of range or with duplicate indices."""


class NegativeRateError(QemForgeError, ValueError):
    pass


class NonLocalTermError(QemForgeError, ValueError):
    """A noise term acts on more qubits than the recovery basis covers."""


class NonPhysicalMapError(QemForgeError, ValueError):
    """Kraus operators that do not form the trace-preserving map they claim to be."""


class IntegrationError(QemForgeError, RuntimeError):
    pass


class ScheduleError(QemForgeError, ValueError):
    pass


class EstimatorError(QemForgeError, ValueError):
    pass


class ExtrapolationError(QemForgeError, ValueError):
    pass


class DecompositionError(QemForgeError, ArithmeticError):
    """The recovery basis failed to reproduce a generator (singular, infeasible or unbounded)."""


class UnknownPresetError(QemForgeError, KeyError):
    pass


class AcceptanceError(QemForgeError):
    pass


class ConfigError(QemForgeError, ImproperlyConfigured):
    """
    Invalid experiment configuration.

    Args:
        errors (dict): field path -> list of messages, every violation found.

    """

    def __init__(self, errors):
        self.errors = dict(errors)
        lines = [f"{field}: {msg}" for field, messages in sorted(self.errors.items()) for msg in messages]
        super().__init__("Invalid configuration:\n  " + "\n  ".join(lines))
