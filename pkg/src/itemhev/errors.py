"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data violates a documented invariant."""


class CycleFormatError(ValueError):
    """A drive-cycle or model file does not follow its documented format."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(ValueError):
    """A persisted artifact (checkpoint, cluster model) is corrupt or has the wrong version."""


class PowerLimitError(ArithmeticError):
    """Requested cell power exceeds what the cell can deliver."""

    def __init__(self, p_cell: float, p_max: float):
        self.p_cell = p_cell
        self.p_max = p_max
        super().__init__(f"cell power {p_cell:.4g} W exceeds deliverable maximum {p_max:.4g} W")


class ConstraintViolation(RuntimeError):
    """Plant state left its admissible region; the episode must terminate."""


class TrainingFailure(RuntimeError):
    """Training produced a non-finite loss or diverged."""
