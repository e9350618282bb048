"""
Parameter validation and the error hierarchy shared by every module
"""

import math
import numbers


class MirrorCoolingError(Exception):
    """Base class for all domain errors"""
    pass


class InvalidParameterError(MirrorCoolingError, ValueError):
    """Raised when a physical or numerical parameter is outside its allowed range"""
    pass


class OutOfValidityError(MirrorCoolingError):
    """Raised when the classical small-parameter guard is violated"""

    def __init__(self, alpha_zeta: float, k_v_tau: float, threshold: float):
        self.alpha_zeta = alpha_zeta
        self.k_v_tau = k_v_tau
        self.threshold = threshold
        super().__init__(
            f"Outside validity range: |alpha*zeta| = {alpha_zeta:.6g}, "
            f"k*tau*|v| = {k_v_tau:.6g} (both must be < {threshold:g})"
        )


class NoStationaryStateError(MirrorCoolingError):
    """Raised when a temperature is requested where the friction is not positive"""
    pass


class HistoryUnderrunError(MirrorCoolingError, RuntimeError):
    """Raised when a delayed lookup falls outside the stored history"""
    pass


class InsufficientSamplesError(MirrorCoolingError):
    """Raised when a fit window holds too few samples"""
    pass


class NoCoolingError(MirrorCoolingError):
    """Raised when the rate-vs-temperature slope is not negative"""

    def __init__(self, slope: float):
        self.slope = slope
        super().__init__(f"No cooling: fitted slope {slope:.6g} 1/s is not negative")


class TransientNotConvergedError(MirrorCoolingError):
    """Raised when the mode-resolved force has not settled within the run"""
    pass


class ConfigError(MirrorCoolingError):
    """Raised for configuration problems; names the offending key"""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class ToleranceBreachError(MirrorCoolingError):
    """Raised when a validation check falls outside its tolerance"""

    def __init__(self, check: str, message: str):
        self.check = check
        super().__init__(f"{check}: {message}")


class ParameterValidator:
    """Reusable range checks for physical parameters"""

    @staticmethod
    def require_finite(name: str, value: float) -> None:
        if not isinstance(value, numbers.Real) or isinstance(value, bool):
            raise InvalidParameterError(f"{name} must be a real number, got {value!r}")
        if not math.isfinite(value):
            raise InvalidParameterError(f"{name} must be finite, got {value!r}")

    @staticmethod
    def require_positive(name: str, value: float) -> None:
        """Check value is a finite number strictly greater than zero"""
        ParameterValidator.require_finite(name, value)
        if value <= 0:
            raise InvalidParameterError(f"{name} must be positive, got {value!r}")

    @staticmethod
    def require_non_negative(name: str, value: float) -> None:
        ParameterValidator.require_finite(name, value)
        if value < 0:
            raise InvalidParameterError(f"{name} must be non-negative, got {value!r}")

    @staticmethod
    def require_nonzero(name: str, value: float) -> None:
        ParameterValidator.require_finite(name, value)
        if value == 0:
            raise InvalidParameterError(f"{name} must be non-zero")

    @staticmethod
    def require_count(name: str, value: int, minimum: int) -> None:
        """Check value is an integer count of at least `minimum`"""
        if not isinstance(value, numbers.Integral) or isinstance(value, bool):
            raise InvalidParameterError(f"{name} must be an integer, got {value!r}")
        if value < minimum:
            raise InvalidParameterError(f"{name} must be at least {minimum}, got {value}")

    @staticmethod
    def require_real(name: str, value) -> float:
        """Reject complex values (absorption is not modelled) and return a float"""
        if isinstance(value, complex):
            if value.imag != 0:
                raise InvalidParameterError(f"{name} must be real, got {value!r}")
            value = value.real
        ParameterValidator.require_finite(name, value)
        return float(value)

    @staticmethod
    def require_below(name: str, value: float, limit: float, inclusive: bool = False) -> None:
        ParameterValidator.require_finite(name, value)
        if value > limit or (not inclusive and value == limit):
            bound = "<=" if inclusive else "<"
            raise InvalidParameterError(f"{name} must be {bound} {limit:.6g}, got {value:.6g}")

    @staticmethod
    def validate_guard(alpha_zeta: float, k_v_tau: float, threshold: float = 0.1) -> None:
        """Classical expansion guard: both small parameters below threshold"""
        if not (alpha_zeta < threshold and k_v_tau < threshold):
            raise OutOfValidityError(alpha_zeta, k_v_tau, threshold)

    @staticmethod
    def validate_offset(offset: float, wavelength: float, name: str = "center_offset",
                        inclusive: bool = False) -> None:
        """Node-relative offsets must stay within a quarter wavelength"""
        bound = wavelength / 4.0
        ParameterValidator.require_finite(name, offset)
        outside = abs(offset) > bound if inclusive else abs(offset) >= bound
        if outside and not (inclusive and math.isclose(abs(offset), bound, rel_tol=1e-12)):
            raise InvalidParameterError(
                f"{name} = {offset:.6g} m lies outside +/- lambda/4 = {bound:.6g} m"
            )
