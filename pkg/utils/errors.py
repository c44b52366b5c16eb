"""
Exception hierarchy shared by every module.

Each error carries the process exit code `main.py` reports for it:
  2  configuration problems (bad flag, bad value, bad config file)
  3  runtime failures (missing checkpoint, diverged training, I/O, shapes)
"""
from typing import Optional


class LabError(Exception):
    """Base class for all errors raised on purpose by the lab."""

    exit_code = 3

    def __init__(self, message: str):
        self.message = message
        super().__init__(message)


class ConfigError(LabError, ValueError):
    """Raised when a configuration value or argument is invalid."""

    exit_code = 2

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class ShapeError(LabError, ValueError):
    """Raised when array dimensions disagree."""

    def __init__(self, what: str, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected {expected}, got {got}")


class PolicyError(LabError):
    """Raised when a power policy fails on one Monte-Carlo sample."""

    def __init__(self, sample_index: int, cause: BaseException):
        self.sample_index = sample_index
        self.cause = cause
        super().__init__(f"policy failed on sample {sample_index}: {cause}")


class DivergenceError(LabError):
    """Raised when the training loss stops being finite."""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


class CheckpointNotFound(LabError):
    """Raised when a learned method has no stored checkpoint."""

    def __init__(self, path: str, method: Optional[str] = None):
        self.path = path
        self.method = method
        label = f"{method} checkpoint" if method else "checkpoint"
        super().__init__(f"{label} not found: {path} (run `train` first)")


class StoreError(LabError):
    """Raised when reading or writing an artefact fails."""

    def __init__(self, path: str, cause: BaseException | str):
        self.path = path
        super().__init__(f"{path}: {cause}")
