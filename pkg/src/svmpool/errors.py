"""Exception hierarchy.

Every error carries a ``category`` used by the command line front end to pick
an exit code: ``usage`` (2), ``data`` (3) or ``numerical`` (4).
"""


class SVMPoolError(ValueError):
    category = "data"


class DimensionMismatch(SVMPoolError):
    pass


class EmptyBag(SVMPoolError):
    pass


class NonFiniteInput(SVMPoolError):
    pass


class StateMismatch(SVMPoolError):
    pass


class OrderingMismatch(SVMPoolError):
    pass


class NegativeInput(SVMPoolError):
    pass


class MissingClass(SVMPoolError):
    pass


class CountMismatch(SVMPoolError):
    pass


class NotPSD(SVMPoolError):
    category = "numerical"


class InvalidConfig(SVMPoolError):
    category = "usage"


class InvalidSpec(InvalidConfig):
    pass


class EmptySource(SVMPoolError):
    pass


class EmptyDataset(SVMPoolError):
    pass


class FormatVersionMismatch(SVMPoolError):
    pass


class CorruptFile(SVMPoolError):
    pass


class IoFailure(SVMPoolError):
    pass
