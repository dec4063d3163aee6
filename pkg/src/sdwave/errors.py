"""Exception types shared across the package."""


class SdwaveError(Exception):
    """Base class for all errors raised by sdwave."""


class StateBlowUp(SdwaveError):
    """A state norm became non-finite or exceeded the blow-up threshold."""

    def __init__(self, message="state blow-up", time=None):
        super().__init__(message)
        self.time = time


class DegenerateInput(SdwaveError, ValueError):
    pass


class CutoffError(SdwaveError, ValueError):
    """A frequency or spatial cut-off does not fit the grid."""


class FitError(SdwaveError):
    pass


class NoContraction(SdwaveError):
    """Raised when the Picard map is not contractive at the requested horizon.

    Carries the measured ratio so callers can report it.
    """

    def __init__(self, ratio):
        super().__init__(f"no contraction at this T (ratio={ratio:.4g})")
        self.ratio = ratio


class NotAbsorbed(SdwaveError):
    pass


class ConfigError(SdwaveError, ValueError):
    """Configuration failed validation; ``problems`` lists every violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
