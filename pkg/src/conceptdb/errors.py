"""Exception hierarchy for the engine.

Every failure raised by the engine derives from EngineError so front ends
can distinguish engine problems from programming errors.
"""


class EngineError(Exception):
    pass


# --- schema ---------------------------------------------------------------

class SchemaError(EngineError):
    pass


class DuplicateConcept(SchemaError):
    pass


class UnknownSuperConcept(SchemaError):
    pass


class DuplicateDimensionName(SchemaError):
    pass


class UnresolvedName(SchemaError):
    pass


class UnknownConcept(SchemaError):
    pass


class SchemaNotValidated(SchemaError):
    pass


# --- store ----------------------------------------------------------------

class StoreError(EngineError):
    pass


class DuplicateCollection(StoreError):
    pass


class UnknownCollection(StoreError):
    pass


class MissingParentBinding(StoreError):
    pass


class BindingTypeMismatch(StoreError):
    pass


class DuplicateIdentity(StoreError):
    pass


class UnknownParent(StoreError):
    pass


class DanglingReference(StoreError):
    pass


class SecondChildOfInheritanceConcept(StoreError):
    pass


class UnboundDimension(StoreError):
    pass


class NoParent(StoreError):
    pass


class ElementReferenced(StoreError):
    """Delete refused: other elements still reference the target."""


class ElementHasChildren(StoreError):
    """Delete refused: child elements exist under the target."""


# --- shared value/navigation errors ----------------------------------------

class TypeMismatch(EngineError):
    """A value does not fit the declared type of a dimension or operation."""


class UnknownField(EngineError):
    pass


class PathThroughPrimitive(EngineError):
    """A primitive value appeared in a non-final attribute path step."""


class AmbiguousBinding(EngineError):
    """More than one registered collection can hold the referenced element."""


# --- query algebra ----------------------------------------------------------

class QueryError(EngineError):
    pass


class UnknownDimension(QueryError):
    pass


class AmbiguousDimension(QueryError):
    pass


class TargetMismatch(QueryError):
    pass


class CollectionMismatch(QueryError):
    pass


class UnknownVariable(QueryError):
    pass


class LevelNotOnPath(QueryError):
    pass


# --- inference --------------------------------------------------------------

class InferenceError(EngineError):
    pass


class NoPropagationPath(InferenceError):
    pass


class AmbiguousPropagation(InferenceError):
    pass


class ConstraintTypeError(InferenceError):
    pass


class CellBudgetExceeded(InferenceError):
    pass


# --- COQL text --------------------------------------------------------------

class CoqlError(EngineError):
    """Base for lexer/parser errors; carries a 1-based source position."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column

    def __str__(self):
        base = super().__str__()
        if self.line is not None:
            return f"{base} (line {self.line}, col {self.column})"
        return base


class LexError(CoqlError):
    pass


class ParseError(CoqlError):
    pass


# --- persistence ------------------------------------------------------------

class SnapshotError(EngineError):
    pass


class VersionMismatch(SnapshotError):
    pass


class CorruptSnapshot(SnapshotError):
    pass
