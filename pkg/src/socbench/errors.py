"""Exception hierarchy shared by all socbench modules.

The CLI maps these onto its documented exit codes, so raising the right
class matters more than the message text.
"""


class SocBenchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SocBenchError):
    """Invalid configuration: bad flag values, malformed config files,
    unknown config keys, layer dimension mismatches."""


class InputError(SocBenchError):
    """A well-formed call received data violating its preconditions
    (shape mismatch, non-finite values, empty input)."""


class IngestionError(SocBenchError):
    """A data CSV could not be ingested; the message lists the offending
    line numbers where applicable."""


class DataError(SocBenchError):
    """Statistically unusable data, e.g. a feature with zero variance."""


class NumericError(SocBenchError):
    """Numerical failure during computation (non-finite gradients)."""


class TrainingDivergedError(NumericError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(
            f"training diverged: non-finite loss at epoch {epoch}, batch {batch}"
        )


class ModelMismatchError(SocBenchError):
    """A stored model is incompatible with the data it was applied to."""


class InternalError(SocBenchError):
    """Inconsistent internal state, e.g. a forward cache that does not
    belong to the parameters handed to backward()."""
