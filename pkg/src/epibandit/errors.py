"""Exception hierarchy shared by every module in the package."""


class EpibanditError(Exception):
    """Base class for all package errors."""


class DegeneratePosterior(EpibanditError):
    """Arm statistics cannot support a proper t posterior (too few or identical rewards)."""


class NoConvergence(EpibanditError):
    pass


class Subcritical(EpibanditError):
    """Effective reproduction number is at most one; the outbreak always dies out."""


class CensoredOutcome(EpibanditError):
    """A non-established outcome was converted to a reward."""


class NoEstablishedSample(EpibanditError):
    """No arm received an accepted (established) reward within the budget."""


class BudgetTooSmall(EpibanditError):
    pass


class ResampleLimit(EpibanditError):
    """The top-two challenger redraw loop hit its iteration cap."""


class ZeroHardness(EpibanditError):
    pass


class ConfigError(EpibanditError):
    pass


class MissingGroundTruth(EpibanditError):
    pass


class MissingRecords(EpibanditError):
    pass
