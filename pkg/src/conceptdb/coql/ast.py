"""AST node types for COQL statements and query expressions.

Every node carries its source position (line, column); positions never take
part in structural equality, so round-tripped trees compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..schema import PrimitiveType

Pos = Optional[tuple]


@dataclass
class Node:
    pass


def _pos_field():
    return field(default=None, compare=False, repr=False)


@dataclass
class Literal(Node):
    value: Union[int, float, str]
    pos: Pos = _pos_field()


@dataclass
class Name(Node):
    """A bare identifier; resolved against variables, collections and
    dimensions at evaluation time."""
    text: str
    pos: Pos = _pos_field()


@dataclass
class This(Node):
    pos: Pos = _pos_field()


@dataclass
class SuperRef(Node):
    """Path-start `super`: the current element's physical parent."""
    pos: Pos = _pos_field()


@dataclass
class Dot(Node):
    base: Node
    attr: str
    pos: Pos = _pos_field()


UP = "up"
DOWN = "down"


@dataclass
class Arrow(Node):
    """One `->`/`<-` item; payload is a Name (dimension or collection) or a
    term.  Grouping of items into projection/de-projection runs happens at
    evaluation time."""
    base: Node
    direction: str
    payload: Node
    pos: Pos = _pos_field()


@dataclass
class ViaSpec(Node):
    name: str
    pred: Optional[Node] = None
    pos: Pos = _pos_field()


@dataclass
class InferStep(Node):
    base: Node
    target: Node
    via: Optional[ViaSpec] = None
    pos: Pos = _pos_field()


@dataclass
class Filtered(Node):
    """`(Name var | pred)` term."""
    name: str
    var: Optional[str]
    pred: Node
    pos: Pos = _pos_field()


@dataclass
class Cmp(Node):
    op: str
    left: Node
    right: Node
    pos: Pos = _pos_field()


@dataclass
class StartsWith(Node):
    left: Node
    right: Node
    pos: Pos = _pos_field()


@dataclass
class InSet(Node):
    left: Node
    items: tuple
    pos: Pos = _pos_field()


@dataclass
class And(Node):
    left: Node
    right: Node
    pos: Pos = _pos_field()


@dataclass
class Or(Node):
    left: Node
    right: Node
    pos: Pos = _pos_field()


@dataclass
class Not(Node):
    operand: Node
    pos: Pos = _pos_field()


@dataclass
class Arith(Node):
    op: str
    left: Node
    right: Node
    pos: Pos = _pos_field()


@dataclass
class Neg(Node):
    operand: Node
    pos: Pos = _pos_field()


@dataclass
class Aggregate(Node):
    fn: str
    arg: Node
    pos: Pos = _pos_field()


@dataclass
class CubeSource(Node):
    expr: Node
    var: Optional[str] = None
    pos: Pos = _pos_field()


@dataclass
class CubeExpr(Node):
    sources: list
    where: Optional[Node] = None
    body: Optional[list] = None      # [(name, expr)]
    returns: Optional[list] = None   # [(name|None, expr)]
    pos: Pos = _pos_field()


@dataclass
class FieldDecl(Node):
    type: Union[PrimitiveType, str]
    name: str
    pos: Pos = _pos_field()


@dataclass
class ConceptDecl(Node):
    name: str
    super_name: Optional[str]
    identity_fields: list
    entity_fields: list
    pos: Pos = _pos_field()


@dataclass
class CreateTable(Node):
    collection: str
    concept: str
    parent: Optional[str] = None
    bindings: list = field(default_factory=list)  # [(dim, collection)]
    pos: Pos = _pos_field()


@dataclass
class Assignment(Node):
    name: str
    expr: Node
    pos: Pos = _pos_field()
