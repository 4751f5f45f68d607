"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class PackingInfeasibleError(RuntimeError):
    """Terrestrial UEs could not be placed under the ICIC separation rule."""


class NoServerError(RuntimeError):
    """The UAV has no available serving BS."""


class DegenerateChannelError(ValueError):
    """A serving channel amplitude is zero where a closed form divides by it."""


class CooperationSizeError(ValueError):
    """Cooperation size M does not exceed the ICIC tier q."""


class DegenerateSolutionError(RuntimeError):
    """A conic solution cannot be mapped back to a power allocation."""
