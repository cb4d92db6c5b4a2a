"""Exception types shared across the package."""


class FractalwaveError(Exception):
    """Base class for all package-specific errors."""


class ResourceCapError(FractalwaveError):
    """A requested computation exceeds a configured size cap.

    Carries the offending size and the cap so callers can suggest a
    coarser level.
    """

    def __init__(self, message: str, size: int, cap: int):
        super().__init__(f"{message} (size {size} exceeds cap {cap})")
        self.size = size
        self.cap = cap


class CflViolationError(FractalwaveError):
    """Time step fails the leapfrog stability condition."""

    def __init__(self, h: float, lam_max_scaled: float):
        super().__init__(
            f"time step h={h:.6g} violates the stability condition: "
            f"lambda_max(-h^2 mu^-1 H) = {lam_max_scaled:.6g} > 3; "
            "pass allow_unstable=True to proceed anyway"
        )
        self.h = h
        self.lam_max_scaled = lam_max_scaled


class CoverageError(FractalwaveError):
    """A trajectory does not cover the time range a quadrature needs."""

    def __init__(self, required_span: float, available_span: float):
        super().__init__(
            f"trajectory covers |s| <= {available_span:.6g} but the Gaussian "
            f"quadrature needs |s| <= {required_span:.6g}; run more steps"
        )
        self.required_span = required_span
        self.available_span = available_span


class DecimationError(FractalwaveError):
    """Internal inconsistency in the spectral decimation bookkeeping."""


class HorizonError(FractalwaveError):
    """An arrival-time probe saw no signal above threshold within the horizon."""

    def __init__(self, threshold: float, horizon: float):
        super().__init__(
            f"no crossing above {threshold:.3g} within time horizon {horizon:.3g}; "
            "increase the horizon"
        )
        self.threshold = threshold
        self.horizon = horizon
