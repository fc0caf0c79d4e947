"""Shared test machinery: independent oracles and randomized generators.

The oracles here deliberately re-derive results with nested loops and raw
value reads so they share no code path with the engine's algebra.
"""

from __future__ import annotations

import random

from conceptdb import algebra as alg
from conceptdb import schema as sch
from conceptdb import store
from conceptdb.coql import ast as A
from conceptdb.store import Database


def ids(eset) -> set:
    return {m.text() for m in eset.members}


# --- nested-loop oracles -------------------------------------------------------


def raw_value(db, elem, dim_name):
    concept = db.schema.concept(elem.concept)
    for i, d in enumerate(concept.identity_dims):
        if d.name == dim_name:
            return elem.identity.segments[-1][1].values[i]
    return elem.entity.get(dim_name)


def oracle_project(db: Database, source: alg.ElementSet, dim: str,
                   target: alg.ElementSet) -> set:
    scoll = db.collection(source.collection)
    out = set()
    for g in target.members:
        for s in source.members:
            if dim == "super":
                if s.parent() == g:
                    out.add(g)
            elif raw_value(db, scoll.elements[s], dim) == g:
                out.add(g)
    return out


def oracle_deproject(db: Database, source: alg.ElementSet, dim: str,
                     lesser: alg.ElementSet) -> set:
    lcoll = db.collection(lesser.collection)
    out = set()
    for l in lesser.members:
        for s in source.members:
            if dim == "super":
                if l.parent() == s:
                    out.add(l)
            elif raw_value(db, lcoll.elements[l], dim) == s:
                out.add(l)
    return out


def oracle_sum(db: Database, eset: alg.ElementSet, path: list) -> float:
    coll = db.collection(eset.collection)
    total = 0
    for m in eset.members:
        v = coll.elements[m]
        for step in path:
            if v is None:
                break
            if isinstance(v, store.Element):
                raw = raw_value(db, v, step)
                if isinstance(raw, store.ComplexIdentity):
                    v = _find_element(db, raw)
                else:
                    v = raw
            else:
                raise AssertionError("oracle path through primitive")
        if v is not None:
            total += v
    return total


def _find_element(db: Database, identity: store.ComplexIdentity):
    for coll in db.collections_of(identity.concept):
        if identity in coll.elements:
            return coll.elements[identity]
    return None


def oracle_eval_pred(db: Database, elem, pred) -> bool:
    """Straightforward predicate walker over (op, *args) tuples."""
    kind = pred[0]
    if kind == "cmp":
        _, op, dim, lit = pred
        v = raw_value(db, elem, dim)
        if v is None:
            return False
        if op == "==":
            return v == lit
        if op == "!=":
            return v != lit
        if op == "<":
            return v < lit
        if op == "<=":
            return v <= lit
        if op == ">":
            return v > lit
        return v >= lit
    if kind == "startswith":
        v = raw_value(db, elem, pred[1])
        return isinstance(v, str) and v.startswith(pred[2])
    if kind == "in":
        v = raw_value(db, elem, pred[1])
        return v is not None and v in pred[2]
    if kind == "and":
        return all(oracle_eval_pred(db, elem, p) for p in pred[1:])
    if kind == "or":
        return any(oracle_eval_pred(db, elem, p) for p in pred[1:])
    if kind == "not":
        return not oracle_eval_pred(db, elem, pred[1])
    raise AssertionError(kind)


def pred_to_ast(pred) -> A.Node:
    kind = pred[0]
    if kind == "cmp":
        return A.Cmp(pred[1], A.Name(pred[2]), A.Literal(pred[3]))
    if kind == "startswith":
        return A.StartsWith(A.Name(pred[1]), A.Literal(pred[2]))
    if kind == "in":
        return A.InSet(A.Name(pred[1]), tuple(A.Literal(v) for v in pred[2]))
    if kind == "and":
        node = pred_to_ast(pred[1])
        for p in pred[2:]:
            node = A.And(node, pred_to_ast(p))
        return node
    if kind == "or":
        node = pred_to_ast(pred[1])
        for p in pred[2:]:
            node = A.Or(node, pred_to_ast(p))
        return node
    if kind == "not":
        return A.Not(pred_to_ast(pred[1]))
    raise AssertionError(kind)


# --- random flat fixture for algebra draws --------------------------------------

TAGS = ["red", "blue", "green", "amber", "black"]


def flat_db(rng: random.Random, with_nulls: bool = True,
            n_greater: int = 8, n_lesser: int = 20) -> Database:
    """Greater collection As, lesser Bs referencing it, children Cs under Bs."""
    schema = sch.Schema()
    sch.define_concept(schema, sch.Concept("A", identity_dims=[
        sch.Dimension("id", sch.INT, sch.IDENTITY)], entity_dims=[
        sch.Dimension("tag", sch.char(8)),
        sch.Dimension("num", sch.INT)]))
    sch.define_concept(schema, sch.Concept("B", identity_dims=[
        sch.Dimension("id", sch.INT, sch.IDENTITY)], entity_dims=[
        sch.Dimension("a", "A"),
        sch.Dimension("val", sch.DOUBLE),
        sch.Dimension("tag", sch.char(8))]))
    sch.define_concept(schema, sch.Concept("C", "B", identity_dims=[
        sch.Dimension("id", sch.INT, sch.IDENTITY)], entity_dims=[
        sch.Dimension("w", sch.INT)]))
    assert sch.validate(schema).valid
    db = Database(schema)
    store.create_collection(db, "As", "A")
    store.create_collection(db, "Bs", "B", bindings={"a": "As"})
    store.create_collection(db, "Cs", "C", parent="Bs")
    a_ids = []
    for i in range(n_greater):
        a_ids.append(store.insert(db, "As", None, [i], {
            "tag": rng.choice(TAGS), "num": rng.randint(0, 50)}))
    for i in range(n_lesser):
        ref = rng.choice(a_ids)
        if with_nulls and rng.random() < 0.15:
            ref = None
        b = store.insert(db, "Bs", None, [i], {
            "a": ref,
            "val": round(rng.uniform(0, 100), 2),
            "tag": rng.choice(TAGS)})
        for k in range(rng.randint(0, 2)):
            store.insert(db, "Cs", b, [k], {"w": rng.randint(0, 9)})
    return db


def random_subset(rng: random.Random, db: Database, collection: str) -> alg.ElementSet:
    members = list(db.collection(collection).elements)
    take = [m for m in members if rng.random() < 0.5]
    return alg.make_set(collection, take)


def random_pred(rng: random.Random, concept: sch.Concept, depth: int = 2):
    dims = [d for d in concept.dims() if d.is_primitive]
    d = rng.choice(dims)
    if depth > 0 and rng.random() < 0.4:
        parts = [random_pred(rng, concept, depth - 1) for _ in range(2)]
        return (rng.choice(["and", "or"]),) + tuple(parts)
    if depth > 0 and rng.random() < 0.15:
        return ("not", random_pred(rng, concept, depth - 1))
    if d.domain.kind == "CHAR":
        if rng.random() < 0.5:
            return ("startswith", d.name, rng.choice(TAGS)[:2])
        return ("in", d.name, tuple(rng.sample(TAGS, 2)))
    if d.domain.kind == "INT":
        return ("cmp", rng.choice(["<", "<=", ">", ">=", "==", "!="]),
                d.name, rng.randint(0, 50))
    return ("cmp", rng.choice(["<", ">"]), d.name, round(rng.uniform(0, 100), 2))


# --- randomized inference schemas ------------------------------------------------


def inference_case(rng: random.Random):
    """A schema with axis concepts, chains below them, and one bottom concept
    that is the unique common lesser of every axis top."""
    n_axes = rng.randint(2, 3)
    schema = sch.Schema()
    axis_tops = []
    chains = []  # per axis: [top, i1, i2...] bottom-most last
    for k in range(n_axes):
        top = f"X{k}"
        sch.define_concept(schema, sch.Concept(top, identity_dims=[
            sch.Dimension("id", sch.INT, sch.IDENTITY)]))
        axis_tops.append(top)
        chain = [top]
        for j in range(rng.randint(0, 2)):
            name = f"I{k}_{j}"
            sch.define_concept(schema, sch.Concept(name, identity_dims=[
                sch.Dimension("id", sch.INT, sch.IDENTITY)], entity_dims=[
                sch.Dimension("up", chain[-1])]))
            chain.append(name)
        chains.append(chain)
    bottom_dims = []
    for k, chain in enumerate(chains):
        for j in range(rng.randint(1, 2)):
            bottom_dims.append(sch.Dimension(f"d{k}_{j}", chain[-1]))
    sch.define_concept(schema, sch.Concept("Bot", identity_dims=[
        sch.Dimension("id", sch.INT, sch.IDENTITY)],
        entity_dims=bottom_dims))
    assert sch.validate(schema).valid

    db = Database(schema)
    colls = {}
    for name in schema.concepts:
        colls[name] = name + "s"
    for k, chain in enumerate(chains):
        store.create_collection(db, colls[chain[0]], chain[0])
        for j, cname in enumerate(chain[1:]):
            store.create_collection(db, colls[cname], cname,
                                    bindings={"up": colls[chain[j]]})
    store.create_collection(db, "Bots", "Bot", bindings={
        d.name: colls[d.domain] for d in bottom_dims})

    for name in schema.concepts:
        if name == "Bot":
            continue
        size = rng.randint(2, 8)
        concept = schema.concept(name)
        for i in range(size):
            entity = {}
            for d in concept.entity_dims:
                choices = list(db.collection(colls[d.domain]).elements)
                entity[d.name] = rng.choice(choices)
            store.insert(db, colls[name], None, [i], entity)
    for i in range(rng.randint(5, 50)):
        entity = {}
        for d in bottom_dims:
            choices = list(db.collection(colls[d.domain]).elements)
            value = rng.choice(choices)
            if rng.random() < 0.1:
                value = None
            entity[d.name] = value
        store.insert(db, "Bots", None, [i], entity)

    target_axis = rng.randrange(n_axes)
    source_axes = [k for k in range(n_axes) if k != target_axis]
    sources = [random_subset(rng, db, colls[axis_tops[k]]) for k in source_axes]
    target = colls[axis_tops[target_axis]]
    return db, sources, target, "Bots"


def brute_paths(schema: sch.Schema, frm: str, to: str) -> list[list[str]]:
    """Exhaustive DFS path enumeration, written against raw concept dims."""
    out = []

    def walk(cur, acc, seen):
        if cur == to:
            out.append(list(acc))
        for d in schema.concept(cur).dims():
            if d.is_concept and not d.self_reference and d.domain not in seen:
                walk(d.domain, acc + [d.name], seen | {d.domain})

    walk(frm, [], {frm})
    return out


def oracle_infer(db: Database, sources, target_coll: str, prop_coll: str) -> set:
    """Nested-loop two-phase propagation using brute-force path enumeration
    and direct reference composition (one collection per concept assumed)."""
    prop = db.collection(prop_coll)

    def concept_of(coll_name):
        return db.collection(coll_name).concept

    def compose(elem, path):
        v = elem
        for dim in path:
            if v is None:
                return None
            raw = raw_value(db, v, dim)
            v = _find_element(db, raw) if raw is not None else None
        return v.identity if v is not None else None

    def descend(src: alg.ElementSet) -> set:
        paths = brute_paths(db.schema, prop.concept, concept_of(src.collection))
        found = set()
        for path in paths:
            for ident, elem in prop.elements.items():
                if compose(elem, path) in src.members:
                    found.add(ident)
        return found

    inter = None
    for s in sources:
        d = descend(s)
        inter = d if inter is None else inter & d
    result = set()
    paths = brute_paths(db.schema, prop.concept, concept_of(target_coll))
    for path in paths:
        for ident in inter:
            v = compose(prop.elements[ident], path)
            if v is not None:
                result.add(v)
    return result


# --- randomized AST generator ------------------------------------------------


IDENT_POOL = ["Alpha", "Beta", "Gmm", "Delta", "foo", "bar", "baz",
              "qux", "x1", "y2", "zz", "Items", "Widgets"]
ATTR_POOL = ["name", "size", "tag", "val", "num", "super"]
STR_POOL = ["a", "Bee", "see 3", "d-4", ""]


def gen_literal(rng):
    k = rng.randrange(3)
    if k == 0:
        return A.Literal(rng.randint(0, 5000))
    if k == 1:
        return A.Literal(rng.randint(0, 99) + rng.randint(1, 99) / 100)
    return A.Literal(rng.choice(STR_POOL))


def gen_atom(rng, depth):
    k = rng.randrange(6)
    if k == 0:
        return gen_literal(rng)
    if k == 1:
        return A.This()
    if k == 2:
        return A.SuperRef()
    if k == 3 and depth > 0:
        return gen_filtered(rng, depth - 1)
    if k == 4 and depth > 0:
        return gen_cube(rng, depth - 1)
    return A.Name(rng.choice(IDENT_POOL))


def gen_filtered(rng, depth):
    var = rng.choice([None, rng.choice(["v", "w"])])
    return A.Filtered(rng.choice(IDENT_POOL), var, gen_expr(rng, depth))


def gen_path(rng, depth):
    e = gen_atom(rng, depth)
    if isinstance(e, A.Literal):
        return e
    for _ in range(rng.randrange(3)):
        if rng.random() < 0.5:
            e = A.Dot(e, rng.choice(ATTR_POOL))
        else:
            payload = (A.Name(rng.choice(IDENT_POOL + ["super"]))
                       if rng.random() < 0.7 or depth == 0
                       else gen_filtered(rng, depth - 1))
            e = A.Arrow(e, rng.choice([A.UP, A.DOWN]), payload)
    return e


def gen_expr(rng, depth):
    if depth <= 0:
        return gen_path(rng, 0)
    k = rng.randrange(10)
    if k == 0:
        return A.And(gen_expr(rng, depth - 1), gen_expr(rng, depth - 1))
    if k == 1:
        return A.Or(gen_expr(rng, depth - 1), gen_expr(rng, depth - 1))
    if k == 2:
        return A.Not(gen_expr(rng, depth - 1))
    if k == 3:
        op = rng.choice(["==", "!=", "<", "<=", ">", ">="])
        return A.Cmp(op, gen_arith(rng, depth - 1), gen_arith(rng, depth - 1))
    if k == 4:
        return A.StartsWith(gen_path(rng, depth - 1), gen_literal(rng))
    if k == 5:
        items = tuple(gen_literal(rng) for _ in range(rng.randint(1, 3)))
        return A.InSet(gen_path(rng, depth - 1), items)
    if k == 6:
        return A.Aggregate(rng.choice(["SUM", "COUNT"]), gen_expr(rng, depth - 1))
    if k == 7:
        via = None
        if rng.random() < 0.5:
            pred = gen_expr(rng, depth - 1) if rng.random() < 0.5 else None
            via = A.ViaSpec(rng.choice(IDENT_POOL), pred)
        target = (A.Name(rng.choice(IDENT_POOL)) if rng.random() < 0.7
                  else gen_filtered(rng, depth - 1))
        return A.InferStep(gen_expr(rng, depth - 1), target, via)
    if k == 8:
        return gen_arith(rng, depth - 1)
    return gen_path(rng, depth - 1)


def gen_arith(rng, depth):
    if depth <= 0 or rng.random() < 0.5:
        e = gen_path(rng, max(depth, 0))
        if rng.random() < 0.2:
            return A.Neg(e)
        return e
    op = rng.choice(["+", "-", "*", "/"])
    return A.Arith(op, gen_arith(rng, depth - 1), gen_arith(rng, depth - 1))


def gen_cube(rng, depth):
    sources = []
    for _ in range(rng.randint(1, 2)):
        expr = (A.Name(rng.choice(IDENT_POOL)) if rng.random() < 0.7
                else gen_filtered(rng, max(depth - 1, 0)))
        var = rng.choice([None, rng.choice(["u", "v"])])
        sources.append(A.CubeSource(expr, var))
    where = gen_expr(rng, depth - 1) if depth > 0 and rng.random() < 0.5 else None
    body = None
    if depth > 0 and rng.random() < 0.4:
        body = [(rng.choice(["m1", "m2"]), gen_expr(rng, depth - 1))
                for _ in range(rng.randint(1, 2))]
    returns = None
    if rng.random() < 0.5:
        returns = [(rng.choice([None, "out"]), gen_path(rng, max(depth - 1, 0)))
                   for _ in range(rng.randint(1, 3))]
    return A.CubeExpr(sources, where, body, returns)


def gen_fields(rng):
    types = [sch.INT, sch.DOUBLE, sch.BOOL, sch.char(rng.randint(1, 64)),
             rng.choice(IDENT_POOL)]
    return [A.FieldDecl(rng.choice(types), rng.choice(ATTR_POOL[:-1]))
            for _ in range(rng.randrange(3))]


def gen_statement(rng):
    k = rng.randrange(8)
    if k == 0:
        return A.ConceptDecl(rng.choice(IDENT_POOL),
                             rng.choice([None, rng.choice(IDENT_POOL)]),
                             gen_fields(rng), gen_fields(rng))
    if k == 1:
        bindings = [(rng.choice(ATTR_POOL[:-1]), rng.choice(IDENT_POOL))
                    for _ in range(rng.randrange(3))]
        return A.CreateTable(rng.choice(IDENT_POOL), rng.choice(IDENT_POOL),
                             rng.choice([None, rng.choice(IDENT_POOL)]),
                             bindings)
    if k == 2:
        return A.Assignment(rng.choice(IDENT_POOL), gen_expr(rng, 3))
    return gen_expr(rng, 3)
