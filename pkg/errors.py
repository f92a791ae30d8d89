"""
Exception hierarchy for the malware spread pipeline.
Every error carries the CLI exit code it maps to.
"""

from typing import List, Optional, Sequence


class MalspreadError(Exception):
    """Base class for all pipeline errors"""

    exit_code: int = 3


class UsageError(MalspreadError):
    """Bad command-line flags or configuration values"""

    exit_code = 1


class ParameterDomainError(MalspreadError):
    """A parameter lies outside its valid domain"""

    exit_code = 1


class InputError(MalspreadError):
    """Missing, unreadable or rejected input data"""

    exit_code = 2


class ConfigurationError(MalspreadError):
    """The requested configuration produced nothing usable"""

    exit_code = 2


class NumericalInstabilityError(MalspreadError):
    """A compartment went below the undershoot tolerance during integration"""

    exit_code = 3


class UndefinedCorrelationError(MalspreadError):
    """The observation window has zero variance"""

    exit_code = 3


class FitFailureError(MalspreadError):
    """No dictionary entry yielded a defined correlation"""

    exit_code = 3


class FeatureExtractionError(MalspreadError):
    """Features could not be computed for one malware"""

    exit_code = 3

    def __init__(self, message: str, malware_id: Optional[str] = None):
        super().__init__(message)
        self.malware_id = malware_id


class InsufficientDataError(MalspreadError):
    """Too few samples for a statistical model"""

    exit_code = 3


class CollinearityError(MalspreadError):
    """Singular information matrix in the hazard model"""

    exit_code = 3

    def __init__(self, features: Sequence[str]):
        self.features: List[str] = list(features)
        super().__init__(f"Collinear covariates: {', '.join(self.features)}")


class ScenarioError(MalspreadError):
    """A synthetic scenario cannot be generated"""

    exit_code = 3
