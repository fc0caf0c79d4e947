"""Multidimensional cubes: Cartesian products with per-cell measures.

Cells are the product of the source sets restricted by WHERE; BODY
assignments run per cell with only that cell's bindings visible, so cells
can never observe each other.  Output rows are sorted canonically by the
source element identities, which is an engine guarantee for testability.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

from . import algebra as alg
from . import store
from .coql import ast as A
from .coql.render import render
from .errors import LevelNotOnPath, TypeMismatch
from .store import ComplexIdentity, Database, Element


@dataclass
class CubeResult:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def arity(self) -> int:
        return len(self.columns)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([format_value(v) for v in row])
        return buf.getvalue()

    def to_table(self) -> str:
        return format_table(self.columns, [
            [format_value(v) for v in row] for row in self.rows
        ])


def format_value(v) -> str:
    if v is None:
        return "NULL"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, ComplexIdentity):
        return store.identity_text(v)
    if isinstance(v, Element):
        return store.identity_text(v.identity)
    return str(v)


def format_table(columns, rows) -> str:
    widths = [len(c) for c in columns]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def fmt(cells):
        return " | ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [fmt(columns), "-+-".join("-" * w for w in widths)]
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines)


def _row_value(v, context: str):
    if v is None or isinstance(v, (bool, int, float, str)):
        return v
    if isinstance(v, Element):
        return v.identity
    if isinstance(v, ComplexIdentity):
        return v
    raise TypeMismatch(f"{context}: cells hold values or identities, got sets")


@dataclass
class CubeQuery:
    """Programmatic form of a cube: sources are (ElementSet, var) pairs."""

    sources: list
    where: A.Node | None = None
    body: list | None = None
    returns: list | None = None


def run_cube(db: Database, query: CubeQuery, env: dict | None = None) -> CubeResult:
    env = dict(env or {})
    ev = alg.Evaluator(db, env)
    source_sets = []
    for eset, var in query.sources:
        source_sets.append((eset, var))
    member_lists = [s.sorted_members() for s, _ in source_sets]
    colls = [db.collection(s.collection) for s, _ in source_sets]

    columns: list[str] = []
    if query.returns is None:
        for (s, var) in source_sets:
            columns.append(var or s.collection)
    else:
        for name, expr in query.returns:
            columns.append(name if name else render(expr))

    rows = []
    for cell in itertools.product(*member_lists):
        bindings = dict(env)
        elements = []
        for (s, var), coll, ident in zip(source_sets, colls, cell):
            elem = coll.elements[ident]
            elements.append(elem)
            if var:
                bindings[var] = elem
        if query.where is not None:
            if not ev.condition(query.where, bindings):
                continue
        if query.body:
            for name, expr in query.body:
                bindings[name] = ev.eval(expr, bindings)
        if query.returns is None:
            row = tuple(e.identity for e in elements)
        else:
            out = []
            for (name, expr), col in zip(query.returns, columns):
                out.append(_row_value(ev.eval(expr, bindings), col))
            row = tuple(out)
        rows.append(row)
    # itertools.product over sorted member lists already yields canonical order
    return CubeResult(columns, rows)


def eval_cube(db: Database, node: A.CubeExpr, env: dict | None = None):
    """Evaluate a CUBE expression from the parser.

    A single-source cube with neither BODY nor RETURN is a plain restricted
    set, so it flows on through the algebra as an ElementSet.
    """
    env = dict(env or {})
    ev = alg.Evaluator(db, env)
    sources = []
    for src in node.sources:
        eset = ev.eval_set(src.expr, env)
        sources.append((eset, src.var))
    if len(sources) == 1 and node.body is None and node.returns is None:
        eset, var = sources[0]
        if node.where is None:
            return eset
        return alg.filter_set(db, eset, node.where, env=env, var=var)
    query = CubeQuery(sources, node.where, node.body, node.returns)
    return run_cube(db, query, env)


# --- the OLAP convenience procedure ------------------------------------------

SUM = "SUM"
COUNT = "COUNT"
COUNT_PROJECT = "COUNT_PROJECT"


@dataclass
class Measure:
    name: str
    kind: str                 # SUM | COUNT | COUNT_PROJECT
    arg: object = None        # SUM: attribute path; COUNT_PROJECT: dimension


def _path_chain(db: Database, fact_collection: str, dims: list[str]) -> list[str]:
    """Collections visited walking a dimension path up from the fact."""
    chain = [fact_collection]
    ev = alg.Evaluator(db)
    for d in dims:
        chain.append(ev._binding_of(chain[-1], d))
    return chain


def olap_run(
    db: Database,
    fact: str,
    dimension_paths: list[list[str]],
    levels: list[tuple],
    fact_filter: A.Node | None = None,
    measures: list[Measure] | None = None,
    env: dict | None = None,
) -> CubeResult:
    """Group a fact collection over level collections chosen on dimension
    paths and aggregate measures per cell.

    ``levels`` pairs each path with (collection name, filter predicate or
    None); the level collection must lie on its path.  Equivalent to the
    hand-written CUBE/BODY/RETURN form.
    """
    if len(dimension_paths) != len(levels):
        raise ValueError("one level per dimension path")
    measures = measures or []
    ev = alg.Evaluator(db, env or {})

    fact_set = alg.full_set(db, fact)
    if fact_filter is not None:
        fact_set = alg.filter_set(db, fact_set, fact_filter, env=env)

    plans = []  # (level ElementSet, descent dims bottom-up portion, chain)
    for dims, (level_name, level_filter) in zip(dimension_paths, levels):
        chain = _path_chain(db, fact, dims)
        if level_name not in chain[1:]:
            raise LevelNotOnPath(
                f"collection {level_name!r} is not on path {dims} from {fact!r}"
            )
        pos = chain[1:].index(level_name) + 1
        level_set = alg.full_set(db, level_name)
        if level_filter is not None:
            level_set = alg.filter_set(db, level_set, level_filter, env=env)
        plans.append((level_set, dims[:pos], chain[:pos + 1]))

    columns = [s.collection for s, _, _ in plans] + [m.name for m in measures]
    member_lists = [s.sorted_members() for s, _, _ in plans]
    rows = []
    for cell in itertools.product(*member_lists):
        group = fact_set
        for (level_set, dims, chain), ident in zip(plans, cell):
            part = alg.make_set(level_set.collection, [ident])
            for k in range(len(dims) - 1, -1, -1):
                lesser = alg.full_set(db, chain[k]) if k > 0 else fact_set
                part = alg.deproject(db, part, dims[k], lesser)
            group = alg.combine(db, group, part, "AND")
        out = list(cell)
        for m in measures:
            if m.kind == COUNT:
                out.append(len(group.members))
            elif m.kind == SUM:
                out.append(alg.aggregate(db, group, alg.SUM, m.arg))
            elif m.kind == COUNT_PROJECT:
                projected = alg.project(db, group, m.arg, None)
                out.append(len(projected.members))
            else:
                raise ValueError(f"unknown measure kind {m.kind!r}")
        rows.append(tuple(out))
    return CubeResult(columns, rows)
