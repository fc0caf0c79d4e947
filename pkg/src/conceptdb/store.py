"""Collections, elements and complex identities.

An element is one identity plus one entity.  The identity is a sequence of
segments, one per level of the concept's inclusion chain; the entity maps
entity-dimension names to primitive values, references (complex identities)
or NULL.  Collections are typed containers bound into a parent collection
and into greater collections, one binding per concept-typed dimension.

The database handle is single-writer / multi-reader: reads may run
concurrently, any mutation requires exclusive access.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from . import schema as sch
from .errors import (
    AmbiguousBinding,
    BindingTypeMismatch,
    DanglingReference,
    DuplicateCollection,
    DuplicateIdentity,
    ElementHasChildren,
    ElementReferenced,
    MissingParentBinding,
    NoParent,
    PathThroughPrimitive,
    SecondChildOfInheritanceConcept,
    StoreError,
    TypeMismatch,
    UnboundDimension,
    UnknownCollection,
    UnknownDimension,
    UnknownField,
    UnknownParent,
)

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1

SUPER = "super"
SUPER_ALIASES = ("super", "parent")


def _value_key(v):
    """Hash/equality key for an identity value.

    Values are type-tagged so 1, 1.0 and True stay distinct; DOUBLE compares
    by bit pattern (DOUBLEs in identity classes are discouraged but legal).
    """
    if isinstance(v, ComplexIdentity):
        return ("ref", v._key())
    if isinstance(v, bool):
        return ("bool", v)
    if isinstance(v, int):
        return ("int", v)
    if isinstance(v, float):
        return ("float", struct.pack(">d", v))
    return ("str", v)


@dataclass(frozen=True)
class IdentitySegment:
    """Values for one concept's identity dimensions, in declaration order."""

    values: tuple

    def _key(self):
        return tuple(_value_key(v) for v in self.values)

    def __eq__(self, other):
        return isinstance(other, IdentitySegment) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


@dataclass(frozen=True)
class ComplexIdentity:
    """The full reference to an element: (concept, segment) pairs root-down."""

    segments: tuple[tuple[str, IdentitySegment], ...]

    def _key(self):
        return tuple((name, seg._key()) for name, seg in self.segments)

    def __eq__(self, other):
        return isinstance(other, ComplexIdentity) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @property
    def concept(self) -> str:
        return self.segments[-1][0]

    @property
    def depth(self) -> int:
        return len(self.segments)

    def parent(self) -> ComplexIdentity | None:
        if len(self.segments) == 1:
            return None
        return ComplexIdentity(self.segments[:-1])

    def child(self, concept: str, segment: IdentitySegment) -> ComplexIdentity:
        return ComplexIdentity(self.segments + ((concept, segment),))

    def sort_key(self):
        return tuple(
            (name,) + tuple(_sort_value(v) for v in seg.values)
            for name, seg in self.segments
        )

    def text(self) -> str:
        return identity_text(self)

    def __str__(self):
        return identity_text(self)


def _sort_value(v):
    if isinstance(v, ComplexIdentity):
        return ("ref", v.sort_key())
    if isinstance(v, bool):
        return ("bool", v)
    if isinstance(v, (int, float)):
        return ("num", float(v))
    return ("str", v)


def identity_text(identity: ComplexIdentity) -> str:
    """Render as '/'-joined segments, ';'-joined fields, nested refs in [..]."""
    parts = []
    for _, seg in identity.segments:
        fields = []
        for v in seg.values:
            if isinstance(v, ComplexIdentity):
                fields.append("[" + identity_text(v) + "]")
            elif isinstance(v, bool):
                fields.append("true" if v else "false")
            elif isinstance(v, float):
                fields.append(repr(v))
            else:
                fields.append(str(v))
        parts.append(";".join(fields))
    return "/".join(parts)


@dataclass
class Element:
    """One identity plus one entity; lives in exactly one collection."""

    collection: str
    identity: ComplexIdentity
    entity: dict[str, object] = field(default_factory=dict)

    @property
    def concept(self) -> str:
        return self.identity.concept

    def same_data(self, other: Element) -> bool:
        return (
            self.collection == other.collection
            and self.identity == other.identity
            and self.entity == other.entity
        )


@dataclass
class Collection:
    name: str
    concept: str
    parent_collection: str | None = None
    greater_bindings: dict[str, str] = field(default_factory=dict)
    elements: dict[ComplexIdentity, Element] = field(default_factory=dict)

    def __len__(self):
        return len(self.elements)


@dataclass
class Database:
    schema: sch.Schema
    collections: dict[str, Collection] = field(default_factory=dict)
    bottom_cell_budget: int = 1_000_000

    def collection(self, name: str) -> Collection:
        try:
            return self.collections[name]
        except KeyError:
            raise UnknownCollection(f"unknown collection {name!r}") from None

    def collections_of(self, concept: str) -> list[Collection]:
        return [c for c in self.collections.values() if c.concept == concept]

    def same_data(self, other: Database) -> bool:
        if set(self.collections) != set(other.collections):
            return False
        for name, coll in self.collections.items():
            oc = other.collections[name]
            if (coll.concept, coll.parent_collection, coll.greater_bindings) != (
                oc.concept, oc.parent_collection, oc.greater_bindings
            ):
                return False
            if list(coll.elements) != list(oc.elements):
                return False
            for ident, elem in coll.elements.items():
                if not elem.same_data(oc.elements[ident]):
                    return False
        return True


def check_primitive(value, ptype: sch.PrimitiveType, context: str):
    if ptype.kind == "INT":
        if not isinstance(value, int) or isinstance(value, bool):
            raise TypeMismatch(f"{context}: expected INT, got {value!r}")
        if not INT64_MIN <= value <= INT64_MAX:
            raise TypeMismatch(f"{context}: {value} outside 64-bit signed range")
    elif ptype.kind == "DOUBLE":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeMismatch(f"{context}: expected DOUBLE, got {value!r}")
    elif ptype.kind == "BOOL":
        if not isinstance(value, bool):
            raise TypeMismatch(f"{context}: expected BOOL, got {value!r}")
    elif ptype.kind == "CHAR":
        if not isinstance(value, str):
            raise TypeMismatch(f"{context}: expected CHAR, got {value!r}")
        if len(value) > ptype.length:
            raise TypeMismatch(
                f"{context}: string of length {len(value)} exceeds CHAR({ptype.length})"
            )


def coerce_primitive(value, ptype: sch.PrimitiveType, context: str):
    """check_primitive, promoting int literals in DOUBLE positions."""
    if ptype.kind == "DOUBLE" and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    check_primitive(value, ptype, context)
    return value


def create_collection(
    db: Database,
    name: str,
    concept: str,
    parent: str | None = None,
    bindings: dict[str, str] | None = None,
) -> Collection:
    """Register an empty collection typed by ``concept``.

    The parent collection is required exactly when the concept's super is not
    ROOT, and its concept must equal the super-concept.  A binding target's
    concept must match the dimension's domain exactly (references to
    sub-concept elements are still storable; only the binding itself is
    exact).
    """
    if name in db.collections:
        raise DuplicateCollection(f"collection {name!r} already exists")
    db.schema.require_validated()
    c = db.schema.concept(concept)
    if c.super_name == sch.ROOT:
        if parent is not None:
            raise BindingTypeMismatch(
                f"concept {concept!r} has no super-concept; collection takes no parent"
            )
    else:
        if parent is None:
            raise MissingParentBinding(
                f"collection of {concept!r} needs a parent collection of {c.super_name!r}"
            )
        pcoll = db.collection(parent)
        if pcoll.concept != c.super_name:
            raise BindingTypeMismatch(
                f"parent collection {parent!r} holds {pcoll.concept!r}, "
                f"expected {c.super_name!r}"
            )
    resolved: dict[str, str] = {}
    for dim_name, target in (bindings or {}).items():
        d = c.dim(dim_name)
        if d is None:
            raise UnknownDimension(f"{concept!r} has no dimension {dim_name!r}")
        if not d.is_concept:
            raise BindingTypeMismatch(f"dimension {dim_name!r} is primitive-typed")
        tcoll = db.collection(target)
        if tcoll.concept != d.domain:
            raise BindingTypeMismatch(
                f"binding {dim_name} = {target}: collection holds "
                f"{tcoll.concept!r}, dimension domain is {d.domain!r}"
            )
        resolved[dim_name] = target
    coll = Collection(name=name, concept=concept,
                      parent_collection=parent, greater_bindings=resolved)
    db.collections[name] = coll
    return coll


def _resolve_reference(db: Database, coll: Collection, dim: sch.Dimension,
                       identity: ComplexIdentity, context: str) -> Element:
    """Locate the element a stored reference points at.

    The reference may name the dimension's domain concept or any inclusion
    descendant of it; descendants are searched among collections whose parent
    chain leads back to the bound collection.  Two candidate collections
    holding the identity is an integrity error.
    """
    binding = coll.greater_bindings.get(dim.name)
    if binding is None:
        raise UnboundDimension(
            f"{context}: dimension {dim.name!r} of collection {coll.name!r} "
            "is not bound; only NULL is storable"
        )
    ref_concept = identity.concept
    if not sch.is_inclusion_descendant(db.schema, ref_concept, dim.domain):
        raise TypeMismatch(
            f"{context}: reference of concept {ref_concept!r} does not fit "
            f"dimension {dim.name!r} of domain {dim.domain!r}"
        )
    bound = db.collection(binding)
    hits = []
    for cand in db.collections_of(ref_concept):
        cur = cand
        while cur is not None and cur.name != bound.name:
            cur = (db.collections.get(cur.parent_collection)
                   if cur.parent_collection else None)
        if cur is None:
            continue
        elem = cand.elements.get(identity)
        if elem is not None:
            hits.append(elem)
    if not hits:
        raise DanglingReference(
            f"{context}: no element {identity_text(identity)!r} reachable "
            f"from binding {dim.name} = {binding}"
        )
    if len(hits) > 1:
        raise AmbiguousBinding(
            f"{context}: element {identity_text(identity)!r} found in "
            f"{len(hits)} collections under binding {dim.name} = {binding}"
        )
    return hits[0]


def _check_segment(db: Database, coll: Collection, concept: sch.Concept,
                   values) -> IdentitySegment:
    values = tuple(values)
    if len(values) != len(concept.identity_dims):
        raise TypeMismatch(
            f"identity segment for {concept.name!r} needs "
            f"{len(concept.identity_dims)} values, got {len(values)}"
        )
    out = []
    for d, v in zip(concept.identity_dims, values):
        context = f"{concept.name}.{d.name}"
        if v is None:
            raise TypeMismatch(f"{context}: identity values cannot be NULL")
        if d.is_primitive:
            v = coerce_primitive(v, d.domain, context)
        else:
            if not isinstance(v, ComplexIdentity):
                raise TypeMismatch(f"{context}: expected a reference, got {v!r}")
            _resolve_reference(db, coll, d, v, context)
        out.append(v)
    return IdentitySegment(tuple(out))


def _check_entity(db: Database, coll: Collection, concept: sch.Concept,
                  values: dict) -> dict:
    unknown = set(values) - {d.name for d in concept.entity_dims}
    if unknown:
        raise UnknownField(
            f"{concept.name!r} has no entity dimension(s) {sorted(unknown)}"
        )
    entity = {}
    for d in concept.entity_dims:
        v = values.get(d.name)
        context = f"{concept.name}.{d.name}"
        if v is None:
            entity[d.name] = None
        elif d.is_primitive:
            entity[d.name] = coerce_primitive(v, d.domain, context)
        else:
            if not isinstance(v, ComplexIdentity):
                raise TypeMismatch(f"{context}: expected a reference, got {v!r}")
            _resolve_reference(db, coll, d, v, context)
            entity[d.name] = v
    return entity


def insert(
    db: Database,
    collection: str,
    parent_identity: ComplexIdentity | None,
    segment,
    entity_values: dict | None = None,
) -> ComplexIdentity:
    """Store a new element and return its full identity.

    ``segment`` supplies one value per identity dimension of the collection's
    concept; missing entity dimensions are stored as NULL.
    """
    coll = db.collection(collection)
    concept = db.schema.concept(coll.concept)
    if coll.parent_collection is None:
        if parent_identity is not None:
            raise UnknownParent(
                f"collection {collection!r} has no parent collection"
            )
        base = None
    else:
        if parent_identity is None:
            raise UnknownParent(
                f"insert into {collection!r} requires a parent identity"
            )
        pcoll = db.collection(coll.parent_collection)
        if parent_identity not in pcoll.elements:
            raise UnknownParent(
                f"parent {identity_text(parent_identity)!r} not found in "
                f"{coll.parent_collection!r}"
            )
        base = parent_identity
    seg = _check_segment(db, coll, concept, segment)
    if concept.is_inheritance_like and base is not None:
        for existing in coll.elements:
            if existing.parent() == base:
                raise SecondChildOfInheritanceConcept(
                    f"{concept.name!r} has an empty identity class; parent "
                    f"{identity_text(base)!r} already has a child in {collection!r}"
                )
    identity = (base.child(concept.name, seg) if base is not None
                else ComplexIdentity(((concept.name, seg),)))
    if identity in coll.elements:
        raise DuplicateIdentity(
            f"identity {identity_text(identity)!r} already present in {collection!r}"
        )
    entity = _check_entity(db, coll, concept, entity_values or {})
    coll.elements[identity] = Element(collection, identity, entity)
    return identity


def lookup(db: Database, collection: str, identity: ComplexIdentity) -> Element | None:
    """Exact-identity match; not-found is a normal None result."""
    return db.collection(collection).elements.get(identity)


def update_entity(db: Database, collection: str, identity: ComplexIdentity,
                  values: dict) -> Element:
    """Replace entity values (same validation as insert); identity is immutable."""
    coll = db.collection(collection)
    elem = coll.elements.get(identity)
    if elem is None:
        raise StoreError(
            f"no element {identity_text(identity)!r} in {collection!r}"
        )
    concept = db.schema.concept(coll.concept)
    merged = dict(elem.entity)
    merged.update(values)
    elem.entity = _check_entity(db, coll, concept, merged)
    return elem


def delete_element(db: Database, collection: str, identity: ComplexIdentity):
    """Remove a childless, unreferenced element."""
    coll = db.collection(collection)
    if identity not in coll.elements:
        raise StoreError(f"no element {identity_text(identity)!r} in {collection!r}")
    for other in db.collections.values():
        if other.parent_collection == collection:
            for child in other.elements:
                if child.parent() == identity:
                    raise ElementHasChildren(
                        f"{identity_text(identity)!r} has a child in {other.name!r}"
                    )
    for other in db.collections.values():
        for elem in other.elements.values():
            for v in elem.entity.values():
                if v == identity:
                    raise ElementReferenced(
                        f"{identity_text(identity)!r} is referenced by "
                        f"{identity_text(elem.identity)!r} in {other.name!r}"
                    )
            for v in elem.identity.segments[-1][1].values:
                if v == identity and elem.identity != identity:
                    raise ElementReferenced(
                        f"{identity_text(identity)!r} is referenced by "
                        f"{identity_text(elem.identity)!r} in {other.name!r}"
                    )
    del coll.elements[identity]


def super_of(db: Database, element: Element) -> Element:
    """The parent-collection element holding this element's identity prefix."""
    coll = db.collection(element.collection)
    if coll.parent_collection is None:
        raise NoParent(
            f"concept {coll.concept!r} is included directly in ROOT"
        )
    parent_identity = element.identity.parent()
    parent = lookup(db, coll.parent_collection, parent_identity)
    if parent is None:
        raise StoreError(
            f"identity prefix {identity_text(parent_identity)!r} missing from "
            f"{coll.parent_collection!r}"
        )
    return parent


def dim_value(db: Database, element: Element, name: str):
    """Raw value of an identity or entity dimension of the element's concept."""
    concept = db.schema.concept(element.concept)
    for i, d in enumerate(concept.identity_dims):
        if d.name == name:
            return element.identity.segments[-1][1].values[i]
    if name in element.entity:
        return element.entity[name]
    raise UnknownField(f"{element.concept!r} has no dimension {name!r}")


def deref(db: Database, element: Element, dim_name: str) -> Element | None:
    """Follow a concept-typed dimension to the referenced greater element."""
    coll = db.collection(element.collection)
    concept = db.schema.concept(element.concept)
    d = concept.dim(dim_name)
    if d is None:
        raise UnknownField(f"{element.concept!r} has no dimension {dim_name!r}")
    v = dim_value(db, element, dim_name)
    if v is None:
        return None
    if not d.is_concept:
        raise TypeMismatch(f"dimension {dim_name!r} is primitive-typed")
    return _resolve_reference(db, coll, d, v, f"{element.concept}.{dim_name}")


def _segment_by_concept(db: Database, element: Element, name: str) -> Element | None:
    """Concept-named accessor: the nearest self-or-ancestor segment whose
    concept name matches ``name`` case-insensitively."""
    folded = name.lower()
    cur = element
    while True:
        if cur.concept.lower() == folded:
            return cur
        coll = db.collection(cur.collection)
        if coll.parent_collection is None:
            return None
        cur = super_of(db, cur)


def resolve_step(db: Database, element: Element, name: str):
    """One attribute-path step: super/parent, a dimension, an inherited
    dimension of an ancestor segment, or a concept-named segment accessor."""
    if name in SUPER_ALIASES:
        return super_of(db, element)
    concept = db.schema.concept(element.concept)
    d = concept.dim(name)
    if d is not None:
        if d.is_primitive:
            return dim_value(db, element, name)
        return deref(db, element, name)
    coll = db.collection(element.collection)
    if coll.parent_collection is not None:
        try:
            return resolve_step(db, super_of(db, element), name)
        except UnknownField:
            pass
    seg = _segment_by_concept(db, element, name)
    if seg is not None:
        return seg
    raise UnknownField(f"{element.concept!r} has no dimension {name!r}")


def resolve_path(db: Database, element: Element, path) -> object:
    """Walk ``super`` steps and dimensions; NULL at any step yields NULL.

    Primitive values may appear only at the final step.
    """
    cur: object = element
    steps = list(path)
    for i, name in enumerate(steps):
        if cur is None:
            return None
        if not isinstance(cur, Element):
            raise PathThroughPrimitive(
                f"cannot step into {name!r}: {steps[i - 1]!r} is primitive-valued"
            )
        cur = resolve_step(db, cur, name)
    return cur
