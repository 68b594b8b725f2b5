"""Exception types shared across the package."""


class ComclustError(Exception):
    """Base class for all library errors."""


class ZeroVectorError(ComclustError):
    """A vector with (near-)zero norm reached a cosine-distance computation.

    Usually means the embedding space collapsed during training.
    """


class NotScalarError(ComclustError):
    """backward() was called on a non-scalar node."""


class ShapeMismatchError(ComclustError):
    pass


class LengthMismatchError(ComclustError):
    pass


class EmptyBatchError(ComclustError):
    pass


class EmptyInputError(ComclustError):
    pass


class SingleClassError(ComclustError):
    """A metric that needs both classes saw only one."""


class MissingClassError(ComclustError):
    """A batch or dataset lacks samples of a required class."""


class TooFewSamplesError(ComclustError):
    pass


class DegenerateComponentError(ComclustError):
    """A mixture component captured less than one effective sample."""


class SingularCovarianceError(ComclustError):
    pass


class DegenerateDistancesError(ComclustError):
    """Both prototype distances are (near-)zero; no score can be formed."""


class NonFiniteLossError(ComclustError):
    """Training loss became NaN or infinite."""


class InvalidSpecError(ComclustError):
    pass


class ParseError(ComclustError):
    pass


class MissingColumnError(ComclustError):
    pass


class DimensionMismatchError(ComclustError):
    pass
