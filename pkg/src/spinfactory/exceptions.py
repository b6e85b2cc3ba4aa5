"""Exception types raised across spinfactory."""


class SpinFactoryError(Exception):
    """Base class for all package errors."""


class ValidationError(SpinFactoryError, ValueError):
    """Input rejected before any numerics ran (maps to CLI exit code 1)."""


class NumericalConsistencyError(SpinFactoryError, ArithmeticError):
    """A computed quantity violated a tolerance it must satisfy (exit code 2)."""


class DegenerateComponent(ValidationError):
    """A direction has a vanishing Cartesian component where a closed form divides by it."""


class NoUniformField(SpinFactoryError):
    """Antiparallel pair with nonzero perpendicular field: no uniform pair field exists."""


class InvalidSpin(ValidationError):
    """Spin magnitude is not a positive integer multiple of 1/2."""


class DimensionCap(ValidationError):
    """Hilbert-space dimension exceeds the configured dense cap."""


class NotFactorized(NumericalConsistencyError):
    """The product state is not an eigenstate of the supplied system."""


class DegenerateGS(NumericalConsistencyError):
    """The reference product state is not a nondegenerate ground state."""


class UnsupportedSpin(ValidationError):
    """Operation only defined for spin-1/2 sites."""


class IndexOutOfRange(ValidationError, IndexError):
    """Site index outside the system."""


class InvalidCyclicIncrement(ValidationError):
    """Cyclic spiral increment is not 2*pi*k/N with 1 <= k <= N-1."""


class SingularMeanAngle(ValidationError):
    """sin of the mean polar angle vanishes."""


class UnknownScenario(ValidationError, KeyError):
    """Scenario name not in the complexity table."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown scenario"


class SchemaError(ValidationError):
    """Configuration text does not match the expected schema."""

    def __init__(self, message, *, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class LevelCrossing(UserWarning):
    """Ground state changed character between two consecutive sweep points."""
