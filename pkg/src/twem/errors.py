"""Exception hierarchy.

The CLI maps each family to an exit code: ``DataError`` -> 2,
``NumericError`` -> 3. Anything else escaping a command is a bug.
"""


class TwemError(Exception):
    """Base class for every error raised by this package."""


class DataError(TwemError):
    """Input data or file content is malformed."""


class SchemaError(DataError):
    """A required CSV column is missing."""


class ParseError(DataError):
    """An embedding file line could not be parsed."""


class FormatError(DataError):
    """A model file is corrupt or has the wrong magic."""


class EncodingError(DataError):
    """A token sequence cannot be encoded under a vocabulary."""


class ConfigurationError(TwemError):
    """Parameters are inconsistent with the data (e.g. fold count too large)."""


class EvaluationError(TwemError):
    """Prediction and gold arrays disagree in shape."""


class NumericError(TwemError):
    """Numeric failure inside the model core."""


class DimensionError(NumericError):
    pass


class PoolingError(NumericError):
    pass


class OptimizerError(NumericError):
    pass


class TrainingError(NumericError):
    pass


class AnalysisError(NumericError):
    pass
