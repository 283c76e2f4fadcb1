"""Exception types shared across the package."""


class KimmseError(Exception):
    """Base class for all errors raised by kimmse."""


class GaussianInputPresent(KimmseError):
    """An exact-enumeration routine was handed a user with a Gaussian input law."""


class NonGaussianInput(KimmseError):
    """A closed-form Gaussian routine was handed a user with a discrete input law."""


class EnumerationCapExceeded(KimmseError):
    """The joint input support is larger than the configured cap."""

    def __init__(self, required, cap):
        self.required = int(required)
        self.cap = int(cap)
        super().__init__(
            f"joint support needs {self.required} tuples, cap is {self.cap}"
        )


class StepTooLarge(KimmseError):
    """Central difference step would reach snr <= 0."""


class GridTooSmall(KimmseError):
    """Quadrature needs at least two grid points."""


class ScenarioError(KimmseError):
    """Malformed scenario document; ``path`` locates the offending JSON node."""

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")
