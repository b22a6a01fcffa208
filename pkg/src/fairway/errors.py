"""Exception hierarchy shared across the toolkit."""


class FairwayError(Exception):
    """Base class for all toolkit errors."""


class InputError(FairwayError, ValueError):
    """Invalid argument or malformed input data."""


class ChartParseError(InputError):
    """Chart file could not be parsed; carries feature/line context."""


class EmptyRegionError(FairwayError):
    """No navigable area remains after filtering; planning cannot run."""


class NoPathError(FairwayError):
    """Planner exhausted its iteration budget without reaching the goal.

    ``stats`` holds tree diagnostics (node count, closest approach to the
    goal, iterations run).
    """

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = dict(stats or {})
