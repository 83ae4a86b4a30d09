"""Exception hierarchy shared across the toolkit."""


class SdpkitError(Exception):
    """Base class for all toolkit errors."""


class GraphError(SdpkitError):
    """Invalid graph, tree, or token data at construction time."""


class FormatError(SdpkitError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ProjectionError(SdpkitError):
    """Alignment or projection inputs are inconsistent."""


class SynthError(SdpkitError):
    """Infeasible synthetic-corpus configuration."""


class AutodiffError(SdpkitError):
    """Misuse of the tape or a primitive (shape mismatch, detached backward)."""


class ConfigError(SdpkitError):
    """Invalid or unknown configuration keys/values."""


class CheckpointError(SdpkitError):
    """Unreadable checkpoint or mismatched model configuration."""


class TrainingDiverged(SdpkitError):
    """Loss became NaN/Inf during training."""


class ScoringError(SdpkitError):
    """Prediction and gold corpora cannot be compared."""
