"""Exception hierarchy shared by every module of the package."""


class GeometryError(Exception):
    """Base class for all errors raised by fpkgeom."""


class ExprSyntaxError(GeometryError, ValueError):
    def __init__(self, position: int, message: str, text: str = ""):
        self.position = position
        self.message = message
        self.text = text
        super().__init__(f"position {position}: {message}")


class UnknownCoordinate(GeometryError, ValueError):
    def __init__(self, name: str, position: int | None = None):
        self.name = name
        self.position = position
        where = "" if position is None else f" at position {position}"
        super().__init__(f"unknown coordinate {name!r}{where}")


class DivisionNearZero(GeometryError, ArithmeticError):
    def __init__(self, subexpr: str):
        self.subexpr = subexpr
        super().__init__(f"divisor magnitude below guard in ({subexpr})")


class SamplingExhausted(GeometryError):
    pass


class DegreeOverflow(GeometryError, ValueError):
    pass


class DimensionMismatch(GeometryError, ValueError):
    pass


class AlphaFitIllPosed(GeometryError):
    pass


class PreconditionNotAlmostS(GeometryError):
    pass


class SingularRestriction(GeometryError):
    pass


class AllAlphaZero(GeometryError):
    pass


class EmptyPositiveCone(GeometryError):
    pass


class PreconditionViolated(GeometryError):
    def __init__(self, relation: str, residual: float):
        self.relation = relation
        self.residual = residual
        super().__init__(f"precondition {relation!r} violated (residual {residual:.3e})")


class SchemaError(GeometryError, ValueError):
    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")
