"""Exception handling for the de Sitter Klein-Gordon toolkit."""

from __future__ import annotations

from enum import Enum
from typing import Any

EXIT_INTERNAL = 1
EXIT_CONFIGURATION = 2
EXIT_NUMERICAL = 3
EXIT_NON_CONVERGENCE = 4
EXIT_CHECKS_FAILED = 5


class AppExceptionCode(Enum):
    """Defines custom App Exception codes, associated with process exit codes."""

    CONFIGURATION_VALIDATION_ERROR = (
        EXIT_CONFIGURATION,
        "Configuration Error",
        "E_001",
    )
    CONFIGURATION_INITIALIZATION_ERROR = (
        EXIT_CONFIGURATION,
        "Configuration Error",
        "E_002",
    )
    HYPOTHESIS_ERROR = (EXIT_CONFIGURATION, "Hypothesis Violated", "E_003")
    DOMAIN_ERROR = (EXIT_NUMERICAL, "Numerical Error", "E_004")
    SPECIAL_FUNCTION_ERROR = (EXIT_NUMERICAL, "Numerical Error", "E_005")
    INSTABILITY_ERROR = (EXIT_NUMERICAL, "Numerical Error", "E_006")
    QUADRATURE_ERROR = (EXIT_NUMERICAL, "Numerical Error", "E_007")
    FIT_ERROR = (EXIT_NUMERICAL, "Numerical Error", "E_008")
    NON_CONVERGENCE_ERROR = (EXIT_NON_CONVERGENCE, "Non-Convergence", "E_009")
    INTERNAL_ERROR = (EXIT_INTERNAL, "Internal Error", "E_010")

    def __init__(self, exit_code: int, message: str, error_code: str):
        """Constructor to initialize the exception code with exit_code, message, and error_code."""
        self._exit_code = exit_code
        self._message = message
        self._error_code = error_code

    @property
    def exit_code(self):
        """Process exit code for exception code."""
        return self._exit_code

    @property
    def message(self):
        """Short message for exception code."""
        return self._message

    @property
    def error_code(self):
        """Stable error_code for exception code."""
        return self._error_code

    def __str__(self):
        """Str method for logging the exception code."""
        return f"exit_code={self.exit_code}, message={self.message}, error_code={self.error_code}"


class AppException(Exception):
    """Base exception for application."""

    def __init__(
        self,
        detail_message: str,
        app_exception_code: AppExceptionCode = AppExceptionCode.INTERNAL_ERROR,
    ):
        """Constructor to initialize the exception."""
        self._detail_message = detail_message
        self._app_exception_code = app_exception_code
        super().__init__(detail_message)

    @property
    def detail_message(self):
        """Detail error message for exception."""
        return self._detail_message

    @property
    def code(self):
        """The AppExceptionCode carried by the exception."""
        return self._app_exception_code

    @property
    def exit_code(self):
        """Process exit code for exception."""
        return self._app_exception_code.exit_code

    @property
    def message(self):
        """Short message for exception."""
        return self._app_exception_code.message

    @property
    def error_code(self):
        """Error code for exception."""
        return self._app_exception_code.error_code

    def __str__(self):
        """Str method for logging the exception."""
        return f"exit_code={self.exit_code}, message={self.message}, detail_message={self.detail_message}, error_code={self.error_code}"


class ConfigurationException(AppException):
    """Raised when an experiment configuration fails validation."""

    def __init__(self, detail_message: str):
        """Constructor to initialize the ConfigurationException."""
        super().__init__(detail_message, AppExceptionCode.CONFIGURATION_VALIDATION_ERROR)


class HypothesisException(AppException):
    """Raised when parameters fall outside an estimate's hypotheses."""

    def __init__(self, detail_message: str):
        """Constructor to initialize the HypothesisException."""
        super().__init__(detail_message, AppExceptionCode.HYPOTHESIS_ERROR)


class KernelDomainException(AppException):
    """Raised when a kernel is queried outside its support."""

    def __init__(self, detail_message: str):
        """Constructor to initialize the KernelDomainException."""
        super().__init__(detail_message, AppExceptionCode.DOMAIN_ERROR)


class KernelSingularityException(KernelDomainException):
    """Raised when K0 is queried on its singular boundary."""

    def __str__(self):
        """Str method for logging the KernelSingularityException."""
        return f"singular boundary: {super().__str__()}"


class SeriesRegionException(AppException):
    """Raised when an expansion is used outside its convergence region."""

    def __init__(self, detail_message: str):
        """Constructor to initialize the SeriesRegionException."""
        super().__init__(detail_message, AppExceptionCode.DOMAIN_ERROR)


class GammaPoleException(AppException):
    """Raised when gamma or digamma is evaluated at a pole."""

    def __init__(self, detail_message: str):
        """Constructor to initialize the GammaPoleException."""
        super().__init__(detail_message, AppExceptionCode.SPECIAL_FUNCTION_ERROR)


class SeriesNonConvergenceException(AppException):
    """Raised when a hypergeometric series exhausts its term budget."""

    def __init__(self, detail_message: str):
        """Constructor to initialize the SeriesNonConvergenceException."""
        super().__init__(detail_message, AppExceptionCode.NON_CONVERGENCE_ERROR)


class InstabilityException(AppException):
    """Raised when a requested time step violates the CFL limit."""

    def __init__(self, detail_message: str):
        """Constructor to initialize the InstabilityException."""
        super().__init__(detail_message, AppExceptionCode.INSTABILITY_ERROR)


class QuadratureException(AppException):
    """Raised when a quadrature produces non-finite values."""

    def __init__(self, detail_message: str, location: Any = None):
        """Constructor to initialize the QuadratureException."""
        self.location = location
        super().__init__(detail_message, AppExceptionCode.QUADRATURE_ERROR)

    def __str__(self):
        """Str method for logging the QuadratureException."""
        return f"{super().__str__()}, location={self.location}"


class FitException(AppException):
    """Raised when a regression window is degenerate."""

    def __init__(self, detail_message: str):
        """Constructor to initialize the FitException."""
        super().__init__(detail_message, AppExceptionCode.FIT_ERROR)


class PicardNonConvergenceException(AppException):
    """Raised when Picard iteration fails to reach its tolerance."""

    def __init__(self, detail_message: str, report: Any = None):
        """Constructor to initialize the PicardNonConvergenceException."""
        self.report = report
        super().__init__(detail_message, AppExceptionCode.NON_CONVERGENCE_ERROR)
