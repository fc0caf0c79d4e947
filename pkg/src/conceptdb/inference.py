"""Constraint-propagation inference: de-project down, intersect, project up.

Source constraints descend along every dimension path to one propagation
collection (an explicit via collection, the unique common lesser collection,
or a formal bottom extension), per-source results intersect there, and the
intersection ascends to the target.  Multiple paths from one collection
union their results.  A bottom extension is never materialized: its tuples
stream through the constraint, bounded by the database's cell budget.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce

from . import algebra as alg
from . import schema as sch
from .coql import ast as A
from .errors import (
    AmbiguousBinding,
    AmbiguousPropagation,
    CellBudgetExceeded,
    ConstraintTypeError,
    NoPropagationPath,
    TypeMismatch,
)
from .store import Collection, Database

BOTTOM_NAME = "Bottom"


@dataclass
class BottomExtension:
    """A formal product collection over greater terms, restricted lazily by a
    background-knowledge constraint over one dimension per term."""

    terms: list            # [(collection name, filter predicate | None)]
    constraint: A.Node | None = None


@dataclass
class InferenceSpec:
    sources: list                     # list[ElementSet]
    target: str                       # target collection name
    via: tuple | None = None          # (collection name, predicate | None)
    bottom: BottomExtension | None = None


@dataclass
class InferenceTrace:
    propagation_collection: str
    intermediate: alg.ElementSet | None
    result: alg.ElementSet
    intermediate_size: int = 0


def _binding_chains(db: Database, start: Collection, to_concept: str):
    """Usable (path, collection-chain) pairs walking dims up from ``start``."""
    out = []
    for path in sch.dimension_paths(db.schema, start.concept, to_concept):
        chain = [start.name]
        ok = True
        for d in path:
            coll = db.collection(chain[-1])
            binding = coll.greater_bindings.get(d)
            if binding is None:
                ok = False
                break
            chain.append(binding)
        if ok:
            out.append((path, chain))
    return out


def _descend(db: Database, source: alg.ElementSet, prop: Collection) -> alg.ElementSet:
    """Union of the source set de-projected down every usable path."""
    usable = [(p, c) for p, c in _binding_chains(db, prop, _concept(db, source))
              if c[-1] == source.collection]
    if not usable:
        raise NoPropagationPath(
            f"no dimension path from {prop.name!r} up to {source.collection!r}"
        )
    result: alg.ElementSet | None = None
    for path, chain in usable:
        cur = source
        for i in range(len(path) - 1, -1, -1):
            cur = alg.deproject(db, cur, path[i], alg.full_set(db, chain[i]))
        result = cur if result is None else alg.combine(db, result, cur, "OR")
    return result


def _ascend(db: Database, inter: alg.ElementSet, target: str) -> alg.ElementSet:
    prop = db.collection(inter.collection)
    tcoll = db.collection(target)
    usable = [(p, c) for p, c in _binding_chains(db, prop, tcoll.concept)
              if c[-1] == target]
    if not usable:
        raise NoPropagationPath(
            f"no dimension path from {inter.collection!r} up to {target!r}"
        )
    result: alg.ElementSet | None = None
    for path, chain in usable:
        cur = inter
        for i, d in enumerate(path):
            cur = alg.project(db, cur, d, alg.full_set(db, chain[i + 1]))
        result = cur if result is None else alg.combine(db, result, cur, "OR")
    return result


def _concept(db: Database, eset: alg.ElementSet) -> str:
    return db.collection(eset.collection).concept


def _propagation_collection(db: Database, spec: InferenceSpec) -> Collection:
    if spec.via is not None:
        return db.collection(spec.via[0])
    concepts = {_concept(db, s) for s in spec.sources}
    concepts.add(db.collection(spec.target).concept)
    lesser = sch.common_lesser(db.schema, sorted(concepts))
    if not lesser:
        raise NoPropagationPath(
            "the sources and target have no common lesser concept; "
            "give a via collection or a Bottom extension"
        )
    if len(lesser) > 1:
        raise AmbiguousPropagation(
            f"{len(lesser)} maximal common lesser concepts "
            f"({', '.join(sorted(lesser))}); give a via collection"
        )
    colls = db.collections_of(lesser[0])
    if not colls:
        raise NoPropagationPath(f"concept {lesser[0]!r} has no collection")
    if len(colls) > 1:
        raise AmbiguousBinding(
            f"concept {lesser[0]!r} has {len(colls)} collections; "
            "give a via collection"
        )
    return colls[0]


def infer_trace(db: Database, spec: InferenceSpec,
                env: dict | None = None) -> InferenceTrace:
    if not spec.sources:
        raise ValueError("inference needs at least one source set")
    if spec.bottom is not None:
        return _infer_bottom(db, spec, env)
    prop = _propagation_collection(db, spec)
    descended = [_descend(db, s, prop) for s in spec.sources]
    inter = reduce(lambda a, b: alg.combine(db, a, b, "AND"), descended)
    if spec.via is not None and spec.via[1] is not None:
        inter = alg.filter_set(db, inter, spec.via[1], env=env)
    result = _ascend(db, inter, spec.target)
    return InferenceTrace(prop.name, inter, result, len(inter.members))


def infer(db: Database, spec: InferenceSpec, env: dict | None = None) -> alg.ElementSet:
    return infer_trace(db, spec, env).result


def infer_via(db: Database, sources, via, target: str,
              env: dict | None = None) -> alg.ElementSet:
    """Inference with the propagation collection forced to ``via``.

    ``via`` is a collection name or a (name, predicate) pair.
    """
    if isinstance(via, str):
        via = (via, None)
    return infer(db, InferenceSpec(list(sources), target, via=via), env)


def infer_bottom(db: Database, sources, bottom: BottomExtension, target: str,
                 env: dict | None = None) -> alg.ElementSet:
    return infer(db, InferenceSpec(list(sources), target, bottom=bottom), env)


def _infer_bottom(db: Database, spec: InferenceSpec,
                  env: dict | None) -> InferenceTrace:
    bx = spec.bottom
    if not bx.terms:
        raise NoPropagationPath("bottom extension has no greater terms")
    term_names = [name for name, _ in bx.terms]
    term_colls = [db.collection(name) for name in term_names]
    term_sets = []
    for (name, pred) in bx.terms:
        eset = alg.full_set(db, name)
        if pred is not None:
            eset = alg.filter_set(db, eset, pred, env=env)
        term_sets.append(eset)

    # Which bottom dimensions can reach each source, and with what descent.
    descents = []
    for s in spec.sources:
        per_term = {}
        for ti, coll in enumerate(term_colls):
            try:
                per_term[ti] = _descend(db, s, coll).members
            except NoPropagationPath:
                continue
        if not per_term:
            raise NoPropagationPath(
                f"no bottom dimension reaches source {s.collection!r}"
            )
        descents.append(per_term)
    target_terms = []
    tcoll = db.collection(spec.target)
    for ti, coll in enumerate(term_colls):
        if any(c[-1] == spec.target
               for _, c in _binding_chains(db, coll, tcoll.concept)):
            target_terms.append(ti)
    if not target_terms:
        raise NoPropagationPath(
            f"no bottom dimension reaches target {spec.target!r}"
        )

    ev = alg.Evaluator(db, env or {})
    budget = db.bottom_cell_budget
    member_lists = [s.sorted_members() for s in term_sets]
    elems = [db.collection(s.collection).elements for s in term_sets]
    survivors = 0
    carried: dict[int, set] = {ti: set() for ti in target_terms}
    for tup in itertools.product(*member_lists):
        if bx.constraint is not None:
            bindings = {name: elems[i][tup[i]]
                        for i, name in enumerate(term_names)}
            try:
                keep = ev.condition(bx.constraint, bindings)
            except TypeMismatch as exc:
                raise ConstraintTypeError(str(exc)) from exc
            if not keep:
                continue
        survivors += 1
        if survivors > budget:
            raise CellBudgetExceeded(
                f"bottom extent exceeds the cell budget of {budget}"
            )
        if not all(
            any(tup[ti] in members for ti, members in per_term.items())
            for per_term in descents
        ):
            continue
        for ti in target_terms:
            carried[ti].add(tup[ti])

    result: alg.ElementSet | None = None
    for ti in target_terms:
        part = _ascend(db, alg.make_set(term_sets[ti].collection, carried[ti]),
                       spec.target)
        result = part if result is None else alg.combine(db, result, part, "OR")
    return InferenceTrace(BOTTOM_NAME, None, result, survivors)


# --- COQL surface -------------------------------------------------------------


def _collect_source_terms(node: A.Node, out: list):
    if isinstance(node, A.And):
        _collect_source_terms(node.left, out)
        _collect_source_terms(node.right, out)
    else:
        out.append(node)


def _collection_roots(db: Database, node: A.Node, acc: list):
    if isinstance(node, A.Name):
        if node.text in db.collections and node.text not in acc:
            acc.append(node.text)
        return
    if isinstance(node, A.Dot):
        _collection_roots(db, node.base, acc)
        return
    for attr in ("left", "right", "operand", "arg", "base", "pred"):
        child = getattr(node, attr, None)
        if isinstance(child, A.Node):
            _collection_roots(db, child, acc)


def _maximal_lesser_collection(db: Database, endpoint: str) -> str:
    """The unique closest collection strictly below an endpoint collection."""
    ecoll = db.collection(endpoint)
    candidates = []
    for coll in db.collections.values():
        if coll.name == endpoint:
            continue
        if any(c[-1] == endpoint and p
               for p, c in _binding_chains(db, coll, ecoll.concept)):
            candidates.append(coll)
    maximal = []
    for c in candidates:
        above = False
        for other in candidates:
            if other.name != c.name:
                oconcept = db.collection(other.name).concept
                if any(ch[-1] == other.name and p
                       for p, ch in _binding_chains(db, c, oconcept)):
                    above = True
                    break
        if not above:
            maximal.append(c.name)
    if not maximal:
        raise NoPropagationPath(f"no collection lies below {endpoint!r}")
    if len(maximal) > 1:
        raise AmbiguousPropagation(
            f"{len(maximal)} collections lie directly below {endpoint!r} "
            f"({', '.join(sorted(maximal))}); name the bottom dimensions "
            "in a constraint"
        )
    return maximal[0]


def eval_infer_step(db: Database, node: A.InferStep, env: dict | None = None):
    """Evaluate a `<-*->` / `<-*(X)*->` step from the parser."""
    env = dict(env or {})
    ev = alg.Evaluator(db, env)
    raw_terms: list[A.Node] = []
    _collect_source_terms(node.base, raw_terms)
    merged: dict[str, alg.ElementSet] = {}
    order: list[str] = []
    for term in raw_terms:
        eset = ev.eval_set(term, env)
        if eset.collection in merged:
            merged[eset.collection] = alg.combine(
                db, merged[eset.collection], eset, "AND")
        else:
            merged[eset.collection] = eset
            order.append(eset.collection)
    sources = [merged[name] for name in order]

    target_set = ev.eval_set(node.target, env)
    target = target_set.collection

    if node.via is None:
        spec = InferenceSpec(sources, target)
    elif node.via.name == BOTTOM_NAME and BOTTOM_NAME not in db.collections:
        if node.via.pred is not None:
            roots: list[str] = []
            _collection_roots(db, node.via.pred, roots)
            if not roots:
                raise NoPropagationPath(
                    "the Bottom constraint names no collections"
                )
            terms = [(name, None) for name in roots]
        else:
            endpoints = [s.collection for s in sources] + [target]
            terms = []
            for e in endpoints:
                below = _maximal_lesser_collection(db, e)
                if below not in [t[0] for t in terms]:
                    terms.append((below, None))
        spec = InferenceSpec(sources, target,
                             bottom=BottomExtension(terms, node.via.pred))
    else:
        spec = InferenceSpec(sources, target, via=(node.via.name, node.via.pred))

    result = infer(db, spec, env)
    if isinstance(node.target, (A.Filtered, A.CubeExpr)):
        result = alg.combine(db, result, target_set, "AND")
    return result
