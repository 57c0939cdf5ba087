"""Exception hierarchy for the feec package."""


class FeecError(Exception):
    """Base class for all structured errors raised by this package."""


class MeshError(FeecError):
    """Invalid mesh input: non-conforming connectivity or degenerate cells."""


class MeshParseError(MeshError):
    """Mesh file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedOperationError(FeecError):
    """Operation outside the supported scope (e.g. 3-D adaptive refinement)."""


class FormDegreeError(FeecError):
    """Differential-form degree out of range for the requested operation."""


class RankAmbiguityError(FeecError):
    """Singular values too close to the rank cutoff to decide the harmonic dimension."""


class SolverError(FeecError):
    """Linear solve failed or did not meet its residual contract."""


class RegularityError(FeecError):
    """Problem data lacks the regularity required by an estimator term."""
