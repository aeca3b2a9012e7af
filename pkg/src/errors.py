from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional


class ToolkitError(Exception):
    """Base class for every error the toolkit raises on purpose."""


class DomainError(ToolkitError, ValueError):
    pass


class SingularityError(ToolkitError):
    """Evaluation landed exactly on an element pole."""

    def __init__(self, pole_hz: float, element: str, cell_index: Optional[int] = None):
        self.pole_hz = float(pole_hz)
        self.element = element
        self.cell_index = cell_index
        where = f" in cell {cell_index}" if cell_index is not None else ""
        super().__init__(f"{element} pole at {self.pole_hz:.6e} Hz{where}")

    def at_cell(self, cell_index: int) -> "SingularityError":
        return SingularityError(self.pole_hz, self.element, cell_index)


class ConversionError(ToolkitError):
    pass


class TouchstoneParseError(ToolkitError):
    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(prefix + message)


class GridMismatchError(ToolkitError):
    pass


class IntegrationError(ToolkitError):
    pass


class FitError(ToolkitError):
    def __init__(self, message: str, residual_rms: Optional[float] = None):
        self.residual_rms = residual_rms
        if residual_rms is not None:
            message = f"{message} (residual rms {residual_rms:.3e})"
        super().__init__(message)


class RegimeError(ToolkitError):
    pass


class ConfigurationError(ToolkitError):
    pass


@dataclass(frozen=True)
class ConfigIssue:
    path: str
    message: str
    kind: str = "invalid"

    def as_dict(self) -> dict:
        return {"path": self.path, "kind": self.kind, "message": self.message}


class ConfigValidationError(ToolkitError):
    def __init__(self, issues: List[ConfigIssue]):
        self.issues = list(issues)
        super().__init__("; ".join(f"{i.path}: {i.message}" for i in self.issues))
