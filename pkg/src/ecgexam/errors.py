"""Exception hierarchy shared across the toolkit."""


class EcgExamError(Exception):
    """Base class for all toolkit errors."""


class FormatError(EcgExamError):
    """A record or map file does not match the documented layout."""


class SpecError(EcgExamError):
    """A synthesis spec is internally inconsistent."""


class RenderError(EcgExamError):
    """A record cannot be rendered (e.g. zero duration)."""


class DimensionError(EcgExamError):
    """Probability map and record dimensions disagree."""


class EmptyDelineation(EcgExamError):
    """No QRS complexes available to anchor beats."""


class SchemaError(EcgExamError):
    """A configuration file fails validation.

    ``location`` is a JSON-pointer-style path to the offending element.
    """

    def __init__(self, message: str, location: str = "/"):
        super().__init__(f"{location}: {message}")
        self.location = location


class CycleError(EcgExamError):
    """A logic diagram contains a cycle."""


class DanglingFindingError(EcgExamError):
    """A logic diagram references a finding absent from the catalog."""


class MissingFindingError(EcgExamError):
    """A diagram walk reached a finding with no evaluation result."""


class UndefinedAxis(EcgExamError):
    """Both axis lead areas are below the magnitude floor."""


class InsufficientDistractors(EcgExamError):
    """Not enough distractor findings to fill an option set."""


class GroundingUnavailable(EcgExamError):
    """A present finding carries no usable grounding evidence."""


class EndpointError(EcgExamError):
    """A model endpoint failed after all retries."""


class VerifierError(EcgExamError):
    """The answer verifier itself failed (e.g. judge endpoint error)."""


class EmptyInput(EcgExamError):
    """An aggregate operation received no input."""
