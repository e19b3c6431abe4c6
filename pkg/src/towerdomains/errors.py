"""Exception hierarchy.

Every failure mode that a caller might want to tell apart from a mathematical
"no" gets its own class.  The CLI maps these onto exit codes.
"""


class TowerError(Exception):
    """Base class for all package errors."""

    code = "error"


class ValidationError(TowerError, ValueError):
    """Input data violates a documented precondition."""

    code = "validation"


class DescriptorMismatchError(ValidationError):
    code = "descriptor_mismatch"


class NotCMError(ValidationError):
    """Complex conjugation requested on a field that is not known to be CM."""

    code = "not_cm"


class NotIntegralError(ValidationError):
    code = "not_integral"


class BasisUnavailableError(ValidationError):
    """No certified integral basis for this descriptor in this build."""

    code = "basis_unavailable"


class UndecidableError(TowerError):
    """The question is outside the regimes this build can decide."""

    code = "undecidable"


class CapacityError(TowerError):
    """A size cap (rank, residue table, vertex count) was exceeded."""

    code = "capacity"


class PrecisionError(TowerError):
    """Interval arithmetic could not certify a predicate within the precision cap."""

    code = "precision"


class BudgetExhaustedError(TowerError):
    """A search ran out of budget; ``partial`` carries what was found."""

    code = "budget"

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InternalCheckError(TowerError, AssertionError):
    """Two independent computations that must agree did not."""

    code = "internal"


# build_tower validation failures, one per precondition
class NotPrimeFamilyError(ValidationError):
    code = "not_prime_family"


class UnitNotInLError(ValidationError):
    code = "unit_not_in_L"


class UnitClassError(ValidationError):
    code = "unit_class"


class HypothesisOrthoError(ValidationError):
    code = "hypothesis_ortho"


class DependentUnitsError(ValidationError):
    code = "dependent_units"


class UnitResidueError(ValidationError):
    code = "unit_not_1_mod_4"
