"""Exception types shared by the library and the command-line scripts."""


class MetaSRError(Exception):
    """Base class for errors that map onto a CLI exit code."""

    exit_code = 1


class ConfigError(MetaSRError, ValueError):
    """Invalid run configuration or command-line values."""

    exit_code = 2


class ImageIOError(MetaSRError, OSError):
    """Unreadable or unwritable image file, or an empty dataset."""

    exit_code = 3


class CheckpointError(MetaSRError):
    """Checkpoint file that cannot be read or does not match this build."""

    exit_code = 4


class ShapeError(ValueError):
    """Operand shapes that an operation cannot combine."""
