"""Exception hierarchy shared across the toolkit."""


class FatigueKitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(FatigueKitError):
    """Invalid or missing run configuration."""


class ParseError(FatigueKitError):
    """A file's structure (header, layout) is not what the format requires."""


class DataError(FatigueKitError):
    """File parsed but a value violates the data contract.

    Carries ``row`` (1-based data-row index) when the offence is localized.
    """

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class SpecError(FatigueKitError):
    """A synthetic-generation spec violates its own invariants."""


class InputError(FatigueKitError):
    """An operation's preconditions on its inputs are not met."""


class QualityError(FatigueKitError):
    """A signal window is unsalvageable (e.g. every interval removed)."""


class AlignmentError(FatigueKitError):
    """Windows from different modalities do not share the 5-minute grid."""


class SelectionError(FatigueKitError):
    """Feature selection produced an empty model at every penalty level."""


class ContractError(FatigueKitError):
    """Caller violated a documented numeric contract (e.g. standardization)."""


class SchemaError(FatigueKitError):
    """Feature names or shapes do not match the fitted model."""


class ShapeError(FatigueKitError):
    """Tensor dimensions do not match the model parameters."""


class TrainingError(FatigueKitError):
    """Training diverged; carries the epoch index where loss went non-finite."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class EmptyDatasetError(FatigueKitError):
    """Preprocessing produced no valid segments."""
