"""Exception hierarchy shared by all modules."""


class PoroperfError(Exception):
    """Base class for every error raised by the package."""


class DomainError(PoroperfError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class TreeStructureError(PoroperfError):
    """Segments do not form a rooted arborescence."""


class TreeStateError(PoroperfError):
    """A tree lacks data (flows, radii) required by an operation."""


class DegeneracyError(PoroperfError):
    """Geometric degeneracy: coincident points, empty sampling region, ..."""


class OptimizerError(PoroperfError):
    """The geometry optimizer produced a non-finite cost."""


class MeshParseError(PoroperfError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MeshResourceError(PoroperfError):
    """Requested mesh would exceed the memory budget."""


class InadmissibleStateError(PoroperfError):
    """det F <= 0 (or an equivalent constitutive precondition) was violated."""

    def __init__(self, message, element=None):
        self.element = element
        if element is not None:
            message = f"{message} (element {element})"
        super().__init__(message)


class ConstraintError(PoroperfError):
    """Conflicting Dirichlet constraints on the same dof."""


class SolverError(PoroperfError):
    def __init__(self, message, iterations=None):
        self.iterations = iterations
        super().__init__(message)


class NonlinearSolverError(PoroperfError):
    def __init__(self, message, history=None):
        self.history = list(history or [])
        super().__init__(message)


class SourcePlacementError(PoroperfError):
    """An inlet source is (almost) entirely outside the mesh."""


class BindingError(PoroperfError):
    """An outlet port captured no pressure dofs."""


class ResectionError(PoroperfError):
    pass


class FullResectionError(ResectionError):
    pass


class RootResectedError(ResectionError):
    pass


class NoSupplyError(ResectionError):
    pass


class NoOutletError(ResectionError):
    pass


class ConfigError(PoroperfError):
    pass
