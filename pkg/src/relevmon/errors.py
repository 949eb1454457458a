"""Exception hierarchy. Everything raised on bad data derives from ``RelevmonError``."""


class RelevmonError(Exception):
    """Base class for data and calibration errors."""


class QuadratureError(RelevmonError):
    pass


class CalibrationError(RelevmonError):
    """Scaling sequence undefined: bandwidth too large for the horizon."""


class SingularDesign(RelevmonError):
    """Fewer than two distinct observations carry kernel weight."""


class OutOfRange(RelevmonError):
    pass


class AllCandidatesSingular(RelevmonError):
    pass


class DegenerateSeries(RelevmonError):
    pass


class TooShort(RelevmonError):
    pass


class SeriesTooShort(RelevmonError):
    pass


class DeltaNotZero(RelevmonError):
    pass


class NotWarmedUp(RelevmonError):
    pass


class NonConvergence(RelevmonError):
    pass
