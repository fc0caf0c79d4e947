"""Set-level query operations and the expression evaluator.

All operations are read-only over the database and reentrant.  ElementSets
carry identities, not elements; members resolve through their collection on
demand.  Projection follows references up to greater elements, de-projection
collects the lesser elements referencing a set, and access paths fold the
two over raw arrow chains from the parser.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import schema as sch
from . import store
from .coql import ast as A
from .errors import (
    AmbiguousDimension,
    CollectionMismatch,
    TypeMismatch,
    UnboundDimension,
    UnknownDimension,
    UnknownField,
    UnknownVariable,
    TargetMismatch,
)
from .store import ComplexIdentity, Database, Element

SUM = "SUM"
COUNT = "COUNT"


@dataclass(frozen=True)
class ElementSet:
    """Deduplicated, unordered set of identities scoped to one collection."""

    collection: str
    members: frozenset

    def __len__(self):
        return len(self.members)

    def __contains__(self, identity):
        return identity in self.members

    def sorted_members(self) -> list[ComplexIdentity]:
        return sorted(self.members, key=lambda m: m.sort_key())

    def elements(self, db: Database) -> list[Element]:
        coll = db.collection(self.collection)
        return [coll.elements[m] for m in self.sorted_members()]


def full_set(db: Database, collection: str) -> ElementSet:
    coll = db.collection(collection)
    return ElementSet(collection, frozenset(coll.elements))


def make_set(collection: str, identities) -> ElementSet:
    return ElementSet(collection, frozenset(identities))


def singleton(element: Element) -> ElementSet:
    return ElementSet(element.collection, frozenset({element.identity}))


def _concept_of(db: Database, eset: ElementSet) -> str:
    return db.collection(eset.collection).concept


def _dim_matches_target(db: Database, dim: sch.Dimension, target_concept: str) -> bool:
    return dim.is_concept and (
        dim.domain == target_concept
        or sch.is_inclusion_descendant(db.schema, target_concept, dim.domain)
    )


def _dim_matches_source(db: Database, dim: sch.Dimension, source_concept: str) -> bool:
    return dim.is_concept and (
        dim.domain == source_concept
        or sch.is_inclusion_descendant(db.schema, source_concept, dim.domain)
    )


def project(db: Database, eset: ElementSet, dimension: str | None,
            target: ElementSet | str | None = None) -> ElementSet:
    """Greater elements referenced along a dimension (or physical parents
    for ``super``), restricted to the target set; NULL references skipped.

    Pass ``dimension=None`` to infer the unique dimension reaching the
    target, or ``target=None`` to use the source collection's binding.
    """
    if isinstance(target, str):
        target = full_set(db, target)
    coll = db.collection(eset.collection)
    concept = db.schema.concept(coll.concept)

    if dimension is None:
        if target is None:
            raise AmbiguousDimension("projection needs a dimension or a target")
        tconcept = _concept_of(db, target)
        matches = [d for d in concept.dims()
                   if not d.self_reference and _dim_matches_target(db, d, tconcept)]
        if len(matches) != 1:
            raise AmbiguousDimension(
                f"{len(matches)} dimensions of {concept.name!r} reach "
                f"{tconcept!r}; specify one"
            )
        dimension = matches[0].name

    if dimension in store.SUPER_ALIASES:
        if coll.parent_collection is None:
            from .errors import NoParent
            raise NoParent(f"concept {concept.name!r} is included directly in ROOT")
        if target is None:
            target = full_set(db, coll.parent_collection)
        elif target.collection != coll.parent_collection:
            raise TargetMismatch(
                f"super projection from {eset.collection!r} lands in "
                f"{coll.parent_collection!r}, not {target.collection!r}"
            )
        out = {m.parent() for m in eset.members}
        return ElementSet(target.collection, frozenset(out & target.members))

    d = concept.dim(dimension)
    if d is None:
        raise UnknownDimension(f"{concept.name!r} has no dimension {dimension!r}")
    if not d.is_concept:
        raise TypeMismatch(f"cannot project along primitive dimension {dimension!r}")
    if target is None:
        binding = coll.greater_bindings.get(dimension)
        if binding is None:
            raise UnboundDimension(
                f"dimension {dimension!r} of {eset.collection!r} is not bound"
            )
        target = full_set(db, binding)
    else:
        tconcept = _concept_of(db, target)
        if not _dim_matches_target(db, d, tconcept):
            raise TargetMismatch(
                f"dimension {dimension!r} has domain {d.domain!r}; it cannot "
                f"reach collection {target.collection!r} of {tconcept!r}"
            )
    out = set()
    coll_elems = coll.elements
    for m in eset.members:
        v = store.dim_value(db, coll_elems[m], dimension)
        if v is not None and v in target.members:
            out.add(v)
    return ElementSet(target.collection, frozenset(out))


def deproject(db: Database, eset: ElementSet, dimension: str | None,
              lesser: ElementSet | str) -> ElementSet:
    """Elements of the lesser set whose dimension value is in the source set
    (or whose identity prefix is, for ``super``)."""
    if isinstance(lesser, str):
        lesser = full_set(db, lesser)
    lcoll = db.collection(lesser.collection)
    lconcept = db.schema.concept(lcoll.concept)
    sconcept = _concept_of(db, eset)

    if dimension is None:
        matches = [d for d in lconcept.dims()
                   if not d.self_reference and _dim_matches_source(db, d, sconcept)]
        if len(matches) != 1:
            raise AmbiguousDimension(
                f"{len(matches)} dimensions of {lconcept.name!r} reach "
                f"{sconcept!r}; specify one"
            )
        dimension = matches[0].name

    if dimension in store.SUPER_ALIASES:
        if lcoll.parent_collection != eset.collection:
            raise TargetMismatch(
                f"collection {lesser.collection!r} is not bound under "
                f"{eset.collection!r}"
            )
        out = {m for m in lesser.members if m.parent() in eset.members}
        return ElementSet(lesser.collection, frozenset(out))

    d = lconcept.dim(dimension)
    if d is None:
        raise UnknownDimension(f"{lconcept.name!r} has no dimension {dimension!r}")
    if not d.is_concept:
        raise TypeMismatch(f"cannot de-project along primitive dimension {dimension!r}")
    if not _dim_matches_source(db, d, sconcept):
        raise TargetMismatch(
            f"dimension {dimension!r} of {lconcept.name!r} has domain "
            f"{d.domain!r}, which does not reach {sconcept!r}"
        )
    out = set()
    lelems = lcoll.elements
    for m in lesser.members:
        v = store.dim_value(db, lelems[m], dimension)
        if v is not None and v in eset.members:
            out.add(m)
    return ElementSet(lesser.collection, frozenset(out))


def combine(db: Database, a: ElementSet, b: ElementSet, op: str) -> ElementSet:
    if a.collection != b.collection:
        raise CollectionMismatch(
            f"cannot combine sets over {a.collection!r} and {b.collection!r}"
        )
    if op == "AND":
        return ElementSet(a.collection, a.members & b.members)
    if op == "OR":
        return ElementSet(a.collection, a.members | b.members)
    raise ValueError(f"op must be AND or OR, not {op!r}")


def aggregate(db: Database, eset: ElementSet, function: str,
              path=None) -> int | float:
    """COUNT of a set, or SUM of the non-NULL values of an attribute path
    over its members; the empty SUM is 0."""
    if function == COUNT:
        if path:
            raise TypeMismatch("COUNT takes no attribute path")
        return len(eset.members)
    if function != SUM:
        raise ValueError(f"unknown aggregate {function!r}")
    if not path:
        raise TypeMismatch("SUM needs a numeric attribute path")
    coll = db.collection(eset.collection)
    total = 0
    for m in eset.members:
        v = store.resolve_path(db, coll.elements[m], path)
        if v is None:
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise TypeMismatch(f"SUM over non-numeric value {v!r}")
        total += v
    return total


def eval_query(db: Database, query, env: dict | None = None):
    """Evaluate a query expression (COQL text or AST) against the database."""
    if isinstance(query, str):
        from .coql.parser import parse_query
        query = parse_query(query)
    return Evaluator(db, env).eval(query)


def eval_access_path(db: Database, path, env: dict | None = None) -> ElementSet:
    """Evaluate an access path and require a set-valued result."""
    v = eval_query(db, path, env)
    if isinstance(v, Element):
        return singleton(v)
    if not isinstance(v, ElementSet):
        raise TypeMismatch(f"access path produced {_describe(v)}, not a set")
    return v


def filter_set(db: Database, eset: ElementSet, predicate: A.Node,
               env: dict | None = None, var: str | None = None) -> ElementSet:
    """Members satisfying the predicate; NULL comparisons never satisfy."""
    ev = Evaluator(db, env or {})
    coll = db.collection(eset.collection)
    out = set()
    for m in eset.members:
        elem = coll.elements[m]
        bindings = {"this": elem}
        if var:
            bindings[var] = elem
        if ev.condition(predicate, bindings):
            out.add(m)
    return ElementSet(eset.collection, frozenset(out))


# --- expression evaluation ---------------------------------------------------


@dataclass
class SetAttr:
    """An attribute path hanging off a set; only aggregations may consume it."""

    eset: ElementSet
    path: tuple


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


class Evaluator:
    """Evaluates query expression ASTs against a database and an environment.

    The environment maps variable names to elements (cube/instance
    variables), element sets or cube results; variables shadow collections.
    """

    def __init__(self, db: Database, env: dict | None = None):
        self.db = db
        self.env = dict(env or {})

    # -- entry points --

    def eval(self, node: A.Node, bindings: dict | None = None):
        env = dict(self.env)
        if bindings:
            env.update(bindings)
        return self._eval(node, env)

    def eval_set(self, node: A.Node, bindings: dict | None = None) -> ElementSet:
        return self._to_set(self.eval(node, bindings))

    def condition(self, node: A.Node, bindings: dict | None = None) -> bool:
        return _as_condition(self.eval(node, bindings))

    # -- helpers --

    def _to_set(self, v) -> ElementSet:
        if isinstance(v, ElementSet):
            return v
        if isinstance(v, Element):
            return singleton(v)
        raise TypeMismatch(f"expected a set of elements, got {_describe(v)}")

    def _lookup_name(self, name: str, env: dict):
        """Resolution order: variables, collections, fields of `this`,
        then the `parent` alias for the super element."""
        if name in env:
            return env[name]
        if name in self.db.collections:
            return full_set(self.db, name)
        this = env.get("this")
        if this is not None:
            try:
                return store.resolve_step(self.db, this, name)
            except UnknownField:
                pass
        if name == "parent" and this is not None:
            return store.super_of(self.db, this)
        raise UnknownVariable(f"unknown name {name!r}")

    def _name_is_setlike(self, name: str, env: dict) -> bool:
        if name in env:
            return isinstance(env[name], (ElementSet, Element))
        return name in self.db.collections

    # -- dispatch --

    def _eval(self, node: A.Node, env: dict):
        if isinstance(node, A.Literal):
            return node.value
        if isinstance(node, A.This):
            if "this" not in env:
                raise UnknownVariable("`this` is not bound here")
            return env["this"]
        if isinstance(node, A.SuperRef):
            if "this" not in env:
                raise UnknownVariable("`super` needs a current element")
            return store.super_of(self.db, env["this"])
        if isinstance(node, A.Name):
            return self._lookup_name(node.text, env)
        if isinstance(node, A.Dot):
            return self._eval_dot(node, env)
        if isinstance(node, A.Arrow):
            return self._eval_arrows(node, env)
        if isinstance(node, A.Filtered):
            return self._eval_filtered(node, env)
        if isinstance(node, A.Cmp):
            return self._compare(node, env)
        if isinstance(node, A.StartsWith):
            l = self._eval(node.left, env)
            r = self._eval(node.right, env)
            if l is None or r is None:
                return False
            if not isinstance(l, str) or not isinstance(r, str):
                raise TypeMismatch("STARTSWITH needs string operands")
            return l.startswith(r)
        if isinstance(node, A.InSet):
            l = self._eval(node.left, env)
            return any(_equal_values(l, item.value) for item in node.items)
        if isinstance(node, A.And):
            return self._eval_and_or(node, env, "AND")
        if isinstance(node, A.Or):
            return self._eval_and_or(node, env, "OR")
        if isinstance(node, A.Not):
            return not _as_condition(self._eval(node.operand, env))
        if isinstance(node, A.Arith):
            return self._arith(node, env)
        if isinstance(node, A.Neg):
            v = self._eval(node.operand, env)
            if v is None:
                return None
            if not _is_number(v):
                raise TypeMismatch(f"cannot negate {_describe(v)}")
            return -v
        if isinstance(node, A.Aggregate):
            return self._aggregate(node, env)
        if isinstance(node, A.CubeExpr):
            from .cube import eval_cube
            return eval_cube(self.db, node, env)
        if isinstance(node, A.InferStep):
            from .inference import eval_infer_step
            return eval_infer_step(self.db, node, env)
        raise TypeMismatch(f"cannot evaluate {type(node).__name__} here")

    def _eval_dot(self, node: A.Dot, env: dict):
        base = self._eval(node.base, env)
        if base is None:
            return None
        if isinstance(base, Element):
            return store.resolve_step(self.db, base, node.attr)
        if isinstance(base, ElementSet):
            return SetAttr(base, (node.attr,))
        if isinstance(base, SetAttr):
            return SetAttr(base.eset, base.path + (node.attr,))
        from .errors import PathThroughPrimitive
        raise PathThroughPrimitive(
            f"cannot access {node.attr!r} on {_describe(base)}"
        )

    def _eval_filtered(self, node: A.Filtered, env: dict):
        base = self._lookup_name(node.name, env)
        eset = self._to_set(base)
        return filter_set(self.db, eset, node.pred, env=env, var=node.var)

    def _eval_and_or(self, node, env: dict, op: str):
        left = self._eval(node.left, env)
        if isinstance(left, (ElementSet, Element)):
            lset = self._to_set(left)
            rset = self._to_set(self._eval(node.right, env))
            return combine(self.db, lset, rset, op)
        lcond = _as_condition(left)
        if op == "AND" and not lcond:
            return False
        if op == "OR" and lcond:
            return True
        return _as_condition(self._eval(node.right, env))

    def _arith(self, node: A.Arith, env: dict):
        l = self._eval(node.left, env)
        r = self._eval(node.right, env)
        if l is None or r is None:
            return None
        if not _is_number(l) or not _is_number(r):
            raise TypeMismatch(
                f"arithmetic needs numbers, got {_describe(l)} and {_describe(r)}"
            )
        if node.op == "+":
            return l + r
        if node.op == "-":
            return l - r
        if node.op == "*":
            return l * r
        if r == 0:
            return None
        return l / r

    def _aggregate(self, node: A.Aggregate, env: dict):
        v = self._eval(node.arg, env)
        if node.fn == COUNT:
            if isinstance(v, (ElementSet, Element)):
                return len(self._to_set(v).members)
            raise TypeMismatch("COUNT takes a set of elements")
        if isinstance(v, SetAttr):
            return aggregate(self.db, v.eset, SUM, list(v.path))
        raise TypeMismatch("SUM needs a set attribute like SUM(Items.price)")

    def _compare(self, node: A.Cmp, env: dict):
        l = self._eval(node.left, env)
        r = self._eval(node.right, env)
        # A set in a numeric comparison compares its COUNT.
        if isinstance(l, ElementSet) and _is_number(r):
            l = len(l.members)
        elif isinstance(r, ElementSet) and _is_number(l):
            r = len(r.members)
        if l is None or r is None:
            return False
        if node.op == "==":
            return _equal_values(l, r)
        if node.op == "!=":
            return not _equal_values(l, r)
        l, r = _ordering_pair(l, r)
        if node.op == "<":
            return l < r
        if node.op == "<=":
            return l <= r
        if node.op == ">":
            return l > r
        return l >= r

    # -- arrow chains --

    def _eval_arrows(self, node: A.Arrow, env: dict):
        items = []
        base = node
        while isinstance(base, A.Arrow):
            items.append((base.direction, base.payload))
            base = base.base
        items.reverse()
        cur = self._to_set(self._eval(base, env))
        i = 0
        while i < len(items):
            direction, payload = items[i]
            if isinstance(payload, A.Name) and not self._name_is_setlike(payload.text, env):
                names = [payload.text]
                j = i + 1
                while (j < len(items) and items[j][0] == direction
                       and isinstance(items[j][1], A.Name)
                       and not self._name_is_setlike(items[j][1].text, env)):
                    names.append(items[j][1].text)
                    j += 1
                final = None
                if j < len(items) and items[j][0] == direction:
                    final = items[j][1]
                    j += 1
                cur = self._run(cur, direction, names, final, env)
                i = j
            else:
                cur = self._run(cur, direction, [], payload, env)
                i += 1
        return cur

    def _run(self, cur: ElementSet, direction: str, dims: list,
             final: A.Node | None, env: dict) -> ElementSet:
        if direction == A.UP:
            for k, d in enumerate(dims):
                target = None
                if final is not None and k == len(dims) - 1:
                    target = self.eval_set(final, env)
                cur = project(self.db, cur, d, target)
            if not dims:
                cur = project(self.db, cur, None, self.eval_set(final, env))
            return cur
        if dims and final is not None:
            target = self.eval_set(final, env)
            chain = [target.collection]
            for d in reversed(dims[1:]):
                chain.append(self._binding_of(chain[-1], d))
            chain.reverse()
            for k, (d, cname) in enumerate(zip(dims, chain)):
                lesser = target if k == len(dims) - 1 else full_set(self.db, cname)
                cur = deproject(self.db, cur, d, lesser)
            return cur
        if dims:
            for d in dims:
                lesser = self._unique_lesser_collection(cur.collection, d)
                cur = deproject(self.db, cur, d, full_set(self.db, lesser))
            return cur
        return deproject(self.db, cur, None, self.eval_set(final, env))

    def _binding_of(self, collection: str, dim: str) -> str:
        coll = self.db.collection(collection)
        if dim in store.SUPER_ALIASES:
            if coll.parent_collection is None:
                raise TargetMismatch(f"collection {collection!r} has no parent")
            return coll.parent_collection
        concept = self.db.schema.concept(coll.concept)
        if concept.dim(dim) is None:
            raise UnknownDimension(
                f"{concept.name!r} has no dimension {dim!r}"
            )
        binding = coll.greater_bindings.get(dim)
        if binding is None:
            raise UnboundDimension(
                f"dimension {dim!r} of {collection!r} is not bound"
            )
        return binding

    def _unique_lesser_collection(self, source_collection: str, dim: str) -> str:
        """The one collection whose concept de-projects from the source along
        ``dim`` (used when a trailing arrow names only the dimension)."""
        src = self.db.collection(source_collection)
        candidates = []
        for coll in self.db.collections.values():
            if dim in store.SUPER_ALIASES:
                if coll.parent_collection == source_collection:
                    candidates.append(coll.name)
                continue
            concept = self.db.schema.concept(coll.concept)
            d = concept.dim(dim)
            if d is not None and not d.self_reference and \
                    _dim_matches_source(self.db, d, src.concept):
                candidates.append(coll.name)
        if len(candidates) != 1:
            raise AmbiguousDimension(
                f"{len(candidates)} collections de-project from "
                f"{source_collection!r} along {dim!r}"
            )
        return candidates[0]


def _describe(v) -> str:
    if v is None:
        return "NULL"
    if isinstance(v, ElementSet):
        return f"a set over {v.collection!r}"
    if isinstance(v, Element):
        return f"an element of {v.collection!r}"
    if isinstance(v, SetAttr):
        return "a set attribute"
    return f"{type(v).__name__} {v!r}"


def _as_condition(v) -> bool:
    if isinstance(v, bool):
        return v
    if v is None:
        return False
    raise TypeMismatch(f"condition must be boolean, got {_describe(v)}")


def _identity_of(v) -> ComplexIdentity | None:
    if isinstance(v, Element):
        return v.identity
    if isinstance(v, ComplexIdentity):
        return v
    return None


def _single_identity_value(ident: ComplexIdentity):
    if len(ident.segments) == 1 and len(ident.segments[0][1].values) == 1:
        return ident.segments[0][1].values[0]
    return None


def _equal_values(l, r) -> bool:
    if l is None or r is None:
        return False
    li, ri = _identity_of(l), _identity_of(r)
    if li is not None and ri is not None:
        return li == ri
    if isinstance(l, ElementSet) and ri is not None:
        return len(l.members) == 1 and ri in l.members
    if isinstance(r, ElementSet) and li is not None:
        return len(r.members) == 1 and li in r.members
    if isinstance(l, ElementSet) and isinstance(r, ElementSet):
        return l.collection == r.collection and l.members == r.members
    # A reference with a one-field, one-segment identity compares by that field.
    if li is not None:
        l = _single_identity_value(li)
        if l is None:
            raise TypeMismatch("cannot compare a structured identity with a value")
    if ri is not None:
        r = _single_identity_value(ri)
        if r is None:
            raise TypeMismatch("cannot compare a value with a structured identity")
    if isinstance(l, bool) or isinstance(r, bool):
        if isinstance(l, bool) and isinstance(r, bool):
            return l == r
        raise TypeMismatch("BOOL compares only with BOOL")
    if _is_number(l) and _is_number(r):
        return l == r
    if isinstance(l, str) and isinstance(r, str):
        return l == r
    raise TypeMismatch(
        f"cannot compare {_describe(l)} with {_describe(r)}"
    )


def _ordering_pair(l, r):
    li, ri = _identity_of(l), _identity_of(r)
    if li is not None:
        l = _single_identity_value(li)
    if ri is not None:
        r = _single_identity_value(ri)
    if _is_number(l) and _is_number(r):
        return l, r
    if isinstance(l, str) and isinstance(r, str):
        return l, r
    raise TypeMismatch(
        f"ordering comparison needs two numbers or two strings, got "
        f"{_describe(l)} and {_describe(r)}"
    )
