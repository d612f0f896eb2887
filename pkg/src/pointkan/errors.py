class PointKanError(Exception):
    """Base class for errors raised by pointkan"""


class InvalidInputError(PointKanError, ValueError):
    """Input data which cannot be processed, such as non-finite coordinates"""


class InvalidArgumentError(PointKanError, ValueError):
    """A count, shape, label or name argument outside its permitted range"""


class UsageError(PointKanError, RuntimeError):
    """An operation called in the wrong state"""


class ConfigError(InvalidArgumentError):
    """Error in a `key = value` model config file"""


class CheckpointError(PointKanError):
    """Malformed or incompatible checkpoint file"""


class PointsFileParseError(InvalidInputError):
    """Malformed line in a points file"""

    def __init__(self, path, line_number, detail):
        self.path = path
        self.line_number = line_number
        super().__init__(f"{path}: line {line_number}: {detail}")


class ManifestError(InvalidInputError):
    """Malformed dataset manifest, or one referring to missing files"""
