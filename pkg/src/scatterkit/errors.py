"""Exception types shared across the toolkit."""


class ScatterError(Exception):
    """Base class for all toolkit errors."""


class DomainError(ScatterError, ValueError):
    """An argument lies outside the physical domain of an operation."""


class IntegrationError(ScatterError):
    """The radial integration failed (step underflow, lost bracket, ...).

    ``last_good_radius`` is the largest radius reached before the failure,
    or None if the solve never started.
    """

    def __init__(self, message, last_good_radius=None):
        super().__init__(message)
        self.last_good_radius = last_good_radius


class MonotonicityError(ScatterError):
    """Input data violates a required monotonicity beyond repair tolerance."""


class ResolutionError(ScatterError):
    """A sampled line is too sparse for the requested analysis.

    ``needed_points`` is the minimal sample count estimated to proceed.
    """

    def __init__(self, message, needed_points=None):
        super().__init__(message)
        self.needed_points = needed_points


class ReconstructionError(ScatterError):
    """A potential reconstruction step produced inconsistent data."""


class TurningPointError(ScatterError):
    """The classical turning point is absent or not unique.

    ``brackets`` holds the (lo, hi) radii of every detected sign change.
    """

    def __init__(self, message, brackets=()):
        super().__init__(message)
        self.brackets = tuple(brackets)


class StageError(ScatterError):
    """A multi-stage inversion pipeline failed; ``stage`` names the stage."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
