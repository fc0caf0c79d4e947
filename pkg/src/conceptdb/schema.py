"""Concept declarations, inclusion hierarchy and the dimension-induced order.

A concept pairs an identity class with an entity class.  Concepts form two
orthogonal structures: the inclusion forest (``super_name`` links, rooted at
the reserved ROOT) and a strict partial order induced by concept-typed
dimensions (the dimension's domain is a greater concept).  Validation checks
both structures; structural queries (neighbors, paths, common lesser
concepts) require a validated schema.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    DuplicateConcept,
    DuplicateDimensionName,
    SchemaError,
    SchemaNotValidated,
    UnknownConcept,
    UnknownSuperConcept,
    UnresolvedName,
)

ROOT = "ROOT"
TOP = "TOP"
BOTTOM = "BOTTOM"
RESERVED_NAMES = frozenset({ROOT, TOP, BOTTOM})

IDENTITY = "identity"
ENTITY = "entity"

GREATER = "greater"
LESSER = "lesser"

MAX_INCLUSION_DEPTH = 32


@dataclass(frozen=True)
class PrimitiveType:
    """One of INT (64-bit signed), DOUBLE, CHAR(n) or BOOL."""

    kind: str
    length: int | None = None

    def __post_init__(self):
        if self.kind not in ("INT", "DOUBLE", "CHAR", "BOOL"):
            raise SchemaError(f"unknown primitive type {self.kind!r}")
        if self.kind == "CHAR":
            if self.length is None or self.length < 1:
                raise SchemaError("CHAR length must be >= 1")
        elif self.length is not None:
            raise SchemaError(f"{self.kind} takes no length")

    def __str__(self):
        if self.kind == "CHAR":
            return f"CHAR({self.length})"
        return self.kind


INT = PrimitiveType("INT")
DOUBLE = PrimitiveType("DOUBLE")
BOOL = PrimitiveType("BOOL")


def char(n: int) -> PrimitiveType:
    return PrimitiveType("CHAR", n)


@dataclass
class Dimension:
    """A named, typed field of a concept.

    ``domain`` is either a PrimitiveType or the name of a concept; a
    concept-typed dimension makes its domain a greater concept unless it
    names the owning concept itself (``self_reference``).
    """

    name: str
    domain: PrimitiveType | str
    section: str = ENTITY
    self_reference: bool = False

    @property
    def is_primitive(self) -> bool:
        return isinstance(self.domain, PrimitiveType)

    @property
    def is_concept(self) -> bool:
        return isinstance(self.domain, str)


@dataclass
class Concept:
    name: str
    super_name: str = ROOT
    identity_dims: list[Dimension] = field(default_factory=list)
    entity_dims: list[Dimension] = field(default_factory=list)

    def dims(self) -> list[Dimension]:
        return list(self.identity_dims) + list(self.entity_dims)

    def dim(self, name: str) -> Dimension | None:
        for d in self.dims():
            if d.name == name:
                return d
        return None

    def order_dims(self) -> list[Dimension]:
        """Concept-typed dimensions that participate in the order graph."""
        return [d for d in self.dims() if d.is_concept and not d.self_reference]

    @property
    def is_primitive(self) -> bool:
        return not any(d.is_concept for d in self.dims())

    @property
    def is_inheritance_like(self) -> bool:
        """Empty identity class: at most one child element per parent."""
        return not self.identity_dims


@dataclass
class Violation:
    kind: str
    message: str
    concepts: tuple[str, ...] = ()

    def __str__(self):
        return f"{self.kind}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    infos: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations


@dataclass
class Schema:
    concepts: dict[str, Concept] = field(default_factory=dict)
    validated: bool = False

    def concept(self, name: str) -> Concept:
        try:
            return self.concepts[name]
        except KeyError:
            raise UnknownConcept(f"unknown concept {name!r}") from None

    def has(self, name: str) -> bool:
        return name in self.concepts

    def require_validated(self):
        if not self.validated:
            raise SchemaNotValidated("schema must be validated first")


def define_concept(schema: Schema, declaration: Concept) -> Schema:
    """Register a concept; dimension domains may be forward references.

    The super-concept must already exist (or be ROOT); dimension domains are
    resolved later by validate(), so mutually-referencing concepts can be
    declared in any order within one batch.
    """
    name = declaration.name
    if name in RESERVED_NAMES:
        raise SchemaError(f"{name!r} is reserved and cannot be declared")
    if name in schema.concepts:
        raise DuplicateConcept(f"concept {name!r} already defined")
    if declaration.super_name != ROOT and declaration.super_name not in schema.concepts:
        raise UnknownSuperConcept(
            f"super-concept {declaration.super_name!r} of {name!r} is not defined"
        )
    seen = set()
    for dim in declaration.dims():
        if dim.name in seen:
            raise DuplicateDimensionName(
                f"dimension {dim.name!r} declared twice in concept {name!r}"
            )
        seen.add(dim.name)
        dim.self_reference = dim.is_concept and dim.domain == name
    schema.concepts[name] = declaration
    schema.validated = False
    return schema


def _resolve_names(schema: Schema):
    unresolved = []
    for c in schema.concepts.values():
        if c.super_name != ROOT and c.super_name not in schema.concepts:
            unresolved.append(f"{c.name}.super -> {c.super_name}")
        for d in c.dims():
            if d.is_concept and d.domain not in schema.concepts:
                unresolved.append(f"{c.name}.{d.name} -> {d.domain}")
    if unresolved:
        raise UnresolvedName("unresolved names: " + ", ".join(sorted(unresolved)))


def _inclusion_violations(schema: Schema) -> list[Violation]:
    out = []
    cycles_seen = set()
    for start in schema.concepts:
        chain = []
        seen = {}
        cur = start
        while cur != ROOT:
            if cur in seen:
                cycle = tuple(chain[seen[cur]:])
                rot = _smallest_rotation(cycle)
                if rot not in cycles_seen:
                    cycles_seen.add(rot)
                    out.append(Violation(
                        "InclusionCycle",
                        "inclusion cycle: " + " -> ".join(rot + (rot[0],)),
                        rot,
                    ))
                break
            seen[cur] = len(chain)
            chain.append(cur)
            cur = schema.concepts[cur].super_name
        else:
            if len(chain) > MAX_INCLUSION_DEPTH:
                out.append(Violation(
                    "DepthExceeded",
                    f"concept {start!r} is {len(chain)} levels below ROOT "
                    f"(maximum {MAX_INCLUSION_DEPTH})",
                    (start,),
                ))
    return out


def _smallest_rotation(cycle: tuple[str, ...]) -> tuple[str, ...]:
    i = cycle.index(min(cycle))
    return cycle[i:] + cycle[:i]


def _elementary_cycles(edges: dict[str, list[str]]) -> list[tuple[str, ...]]:
    """All elementary cycles of length >= 2, each starting at its smallest node."""
    cycles = []
    nodes = sorted(edges)
    for start in nodes:
        path = [start]
        on_path = {start}

        def walk(node):
            for nxt in sorted(edges.get(node, ())):
                if nxt == start and len(path) >= 2:
                    cycles.append(tuple(path))
                elif nxt > start and nxt not in on_path:
                    path.append(nxt)
                    on_path.add(nxt)
                    walk(nxt)
                    path.pop()
                    on_path.remove(nxt)

        walk(start)
    return sorted(cycles)


def validate(schema: Schema) -> ValidationReport:
    """Check both structures and mark the schema validated when clean.

    Order cycles of length >= 2 and inclusion cycles are violations; a direct
    self-reference is reported informationally and excluded from all
    order-based operations.
    """
    _resolve_names(schema)
    report = ValidationReport()
    report.violations.extend(_inclusion_violations(schema))

    edges: dict[str, list[str]] = {}
    for c in schema.concepts.values():
        for d in c.dims():
            if not d.is_concept:
                continue
            if d.self_reference:
                report.infos.append(Violation(
                    "SelfReference",
                    f"dimension {c.name}.{d.name} references its own concept; "
                    "ignored by order-based operations",
                    (c.name,),
                ))
            else:
                edges.setdefault(c.name, []).append(d.domain)
    for cycle in _elementary_cycles(edges):
        report.violations.append(Violation(
            "CycleViolation",
            "order cycle: " + " -> ".join(cycle + (cycle[0],)),
            cycle,
        ))

    schema.validated = report.valid
    return report


# --- structural queries -----------------------------------------------------

def inclusion_chain(schema: Schema, name: str) -> list[str]:
    """Concept names from the inclusion root down to ``name`` (inclusive)."""
    chain = []
    cur = name
    while cur != ROOT:
        chain.append(cur)
        cur = schema.concept(cur).super_name
    chain.reverse()
    return chain


def inclusion_depth(schema: Schema, name: str) -> int:
    return len(inclusion_chain(schema, name))


def is_inclusion_descendant(schema: Schema, name: str, ancestor: str) -> bool:
    """True when ``name`` equals ``ancestor`` or lies below it in inclusion."""
    cur = name
    while cur != ROOT:
        if cur == ancestor:
            return True
        cur = schema.concept(cur).super_name
    return False


def order_neighbors(schema: Schema, concept: str, direction: str) -> list[tuple[str, str]]:
    """(neighbor concept, dimension) pairs along the order graph.

    ``greater`` walks the concept's own concept-typed dimensions; ``lesser``
    finds dimensions of other concepts whose domain is this concept.
    Self-references and primitive-typed dimensions never appear.
    """
    schema.require_validated()
    c = schema.concept(concept)
    if direction == GREATER:
        return [(d.domain, d.name) for d in c.order_dims()]
    if direction == LESSER:
        out = []
        for other in schema.concepts.values():
            for d in other.order_dims():
                if d.domain == concept:
                    out.append((other.name, d.name))
        return out
    raise ValueError(f"direction must be {GREATER!r} or {LESSER!r}")


def dimension_paths(schema: Schema, from_concept: str, to_concept: str) -> list[list[str]]:
    """All simple upward dimension-name paths from one concept to another.

    The empty path is returned for a concept and itself; an empty list means
    the target is unreachable.
    """
    schema.require_validated()
    schema.concept(to_concept)
    paths: list[list[str]] = []

    def walk(cur: str, acc: list[str], seen: frozenset[str]):
        if cur == to_concept:
            paths.append(list(acc))
        for d in schema.concept(cur).order_dims():
            if d.domain not in seen:
                acc.append(d.name)
                walk(d.domain, acc, seen | {d.domain})
                acc.pop()

    walk(from_concept, [], frozenset({from_concept}))
    return paths


def reaches_up(schema: Schema, from_concept: str, to_concept: str) -> bool:
    return bool(dimension_paths(schema, from_concept, to_concept))


def common_lesser(schema: Schema, concepts) -> list[str]:
    """Maximal concepts lesser-or-equal to every input concept.

    Empty result means no common lesser concept exists (the caller may fall
    back to a formal bottom extension).
    """
    schema.require_validated()
    targets = list(concepts)
    if not targets:
        raise ValueError("common_lesser needs at least one concept")
    for t in targets:
        schema.concept(t)
    candidates = [
        c for c in schema.concepts
        if all(reaches_up(schema, c, t) for t in targets)
    ]
    maximal = []
    for c in candidates:
        if not any(o != c and reaches_up(schema, c, o) for o in candidates):
            maximal.append(c)
    return maximal
