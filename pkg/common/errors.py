"""
Exception hierarchy shared by the sampler services
"""


class PLMCError(Exception):
    """Base class for all sampler errors"""


class InvalidParameterError(PLMCError, ValueError):
    """A caller-supplied value is outside its documented range"""


class ConfigurationError(PLMCError):
    """A model or run is missing constants an operation needs"""


class EstimationError(PLMCError):
    """An estimator has no usable samples"""


class DivergenceError(PLMCError):
    """A single-step kernel saw a non-finite or exploding state"""
