"""Exception types shared across the library."""


class ShadowError(Exception):
    """Base class for all library-specific errors."""


class RankDeficient(ShadowError):
    """Input columns are numerically rank deficient."""


class DomainError(ShadowError):
    """Argument outside the mathematical domain of the function."""


class NotUnit(ShadowError):
    """Vector expected to have unit norm does not."""


class ZeroDirection(ShadowError):
    """Direction vector is (numerically) zero."""


class NonConvergence(ShadowError):
    """Iterative solver hit its iteration cap before reaching tolerance."""


class DimensionError(ShadowError):
    """Incompatible or out-of-range dimensions."""


class Degenerate(ShadowError):
    """Polytope does not affinely span its ambient space."""


class ChainIdentityError(ShadowError):
    """Iterated projection disagrees with the direct projection."""


class OrbitStabilizerMismatch(ShadowError):
    """|orbit| * |stabilizer| != |G|; tolerance failure in orbit dedup."""


class ModeUnsupported(ShadowError):
    """Requested evaluation mode does not apply to the given report."""


class UnknownBody(ShadowError):
    """Body generator name not recognized."""


class BadParams(ShadowError):
    """Body generator parameters invalid."""


class ConfigError(ShadowError):
    """Experiment configuration is malformed."""
