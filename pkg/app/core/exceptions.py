class SpecroofError(Exception):
    """Base exception for user-facing errors (bad input, bad files)."""
    pass

class ConfigError(SpecroofError):
    """Base exception for configuration errors."""
    pass

class ConfigFileNotFoundError(ConfigError):
    """Raised when a configuration file does not exist."""
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"Config file not found: {path}")

class ConfigParseError(ConfigError):
    """Raised when a configuration file is malformed."""
    pass

class ConfigValidationError(ConfigError):
    """Raised when a configuration value violates an invariant."""
    def __init__(self, message: str, field: str = None):
        self.field = field
        super().__init__(message)

class AcceptanceModelError(SpecroofError):
    """Raised when an acceptance model spec is invalid."""
    pass

class RangeSyntaxError(SpecroofError):
    """Raised when a start:stop:step range or a list option cannot be parsed."""
    pass

class ScalingLawError(SpecroofError):
    """Base exception for scaling-law fitting errors."""
    pass

class DataIngestError(ScalingLawError):
    """Raised when a measurement CSV cannot be ingested."""
    pass

class DuplicateXError(DataIngestError):
    """Raised when a series has two points with the same abscissa."""
    pass

class NonPositiveXError(DataIngestError):
    """Raised when a series has an abscissa <= 0."""
    pass

class DegenerateDataError(ScalingLawError):
    """Raised when the transformed abscissae carry no spread."""
    pass

class DomainError(ScalingLawError):
    """Raised when a law is evaluated outside its domain."""
    pass

class SimulationError(SpecroofError):
    """Base exception for simulator errors."""
    pass

class ToyLMFormatError(SimulationError):
    """Raised when a ToyLM file or table is malformed."""
    pass

class TreeConstructionError(SimulationError):
    """Raised when draft tree parameters are invalid."""
    pass

class ZeroDraftProbError(SimulationError):
    """Raised when verification reaches a node the draft gave zero probability."""
    pass

class InvariantViolation(Exception):
    """Raised when an internal invariant fails. Indicates a defect, not bad input."""
    pass

class ResidualMassError(InvariantViolation):
    """Raised when a rejection leaves no residual probability mass."""
    pass
