"""Canonical pretty-printer: parse(render(ast)) is structurally the ast."""

from __future__ import annotations

from ..schema import PrimitiveType
from . import ast as A

_INFER = 1
_OR = 2
_AND = 3
_NOT = 4
_CMP = 5
_ADD = 6
_MUL = 7
_UNARY = 8
_POSTFIX = 9
_ATOM = 10


def render(node: A.Node) -> str:
    if isinstance(node, A.ConceptDecl):
        return _concept(node)
    if isinstance(node, A.CreateTable):
        return _create_table(node)
    if isinstance(node, A.Assignment):
        return f"{node.name} = {_expr(node.expr, 0)}"
    return _expr(node, 0)


def _literal(v) -> str:
    if isinstance(v, str):
        return f"'{v}'"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _wrap(text: str, level: int, ctx: int) -> str:
    return f"({text})" if level < ctx else text


def _expr(node: A.Node, ctx: int) -> str:
    if isinstance(node, A.Literal):
        return _literal(node.value)
    if isinstance(node, A.Name):
        return node.text
    if isinstance(node, A.This):
        return "this"
    if isinstance(node, A.SuperRef):
        return "super"
    if isinstance(node, A.Dot):
        return _wrap(f"{_expr(node.base, _POSTFIX)}.{node.attr}", _POSTFIX, ctx)
    if isinstance(node, A.Arrow):
        arrow = "->" if node.direction == A.UP else "<-"
        text = f"{_expr(node.base, _POSTFIX)} {arrow} {_expr(node.payload, _ATOM)}"
        return _wrap(text, _POSTFIX, ctx)
    if isinstance(node, A.InferStep):
        base = _expr(node.base, _INFER)
        target = _expr(node.target, _ATOM)
        if node.via is None:
            text = f"{base} <-*-> {target}"
        elif node.via.pred is None:
            text = f"{base} <-*({node.via.name})*-> {target}"
        else:
            text = f"{base} <-*({node.via.name} | {_expr(node.via.pred, 0)})*-> {target}"
        return _wrap(text, _INFER, ctx)
    if isinstance(node, A.Filtered):
        var = f" {node.var}" if node.var else ""
        return f"({node.name}{var} | {_expr(node.pred, 0)})"
    if isinstance(node, A.Cmp):
        text = f"{_expr(node.left, _ADD)} {node.op} {_expr(node.right, _ADD)}"
        return _wrap(text, _CMP, ctx)
    if isinstance(node, A.StartsWith):
        text = f"{_expr(node.left, _ADD)} STARTSWITH {_expr(node.right, _ADD)}"
        return _wrap(text, _CMP, ctx)
    if isinstance(node, A.InSet):
        items = ", ".join(_literal(i.value) for i in node.items)
        return _wrap(f"{_expr(node.left, _ADD)} IN {{{items}}}", _CMP, ctx)
    if isinstance(node, A.And):
        text = f"{_expr(node.left, _AND)} AND {_expr(node.right, _NOT)}"
        return _wrap(text, _AND, ctx)
    if isinstance(node, A.Or):
        text = f"{_expr(node.left, _OR)} OR {_expr(node.right, _AND)}"
        return _wrap(text, _OR, ctx)
    if isinstance(node, A.Not):
        return _wrap(f"NOT {_expr(node.operand, _NOT)}", _NOT, ctx)
    if isinstance(node, A.Arith):
        if node.op in ("+", "-"):
            text = f"{_expr(node.left, _ADD)} {node.op} {_expr(node.right, _MUL)}"
            return _wrap(text, _ADD, ctx)
        text = f"{_expr(node.left, _MUL)} {node.op} {_expr(node.right, _UNARY)}"
        return _wrap(text, _MUL, ctx)
    if isinstance(node, A.Neg):
        return _wrap(f"-{_expr(node.operand, _UNARY)}", _UNARY, ctx)
    if isinstance(node, A.Aggregate):
        return f"{node.fn}({_expr(node.arg, 0)})"
    if isinstance(node, A.CubeExpr):
        # Trailing CUBE clauses would swallow adjacent text when nested, so a
        # cube is parenthesized in every non-top context.
        return _wrap(_cube(node), 0, ctx)
    raise TypeError(f"cannot render {type(node).__name__}")


def _cube(node: A.CubeExpr) -> str:
    sources = ", ".join(
        _expr(s.expr, _ATOM) + (f" {s.var}" if s.var else "")
        for s in node.sources
    )
    parts = [f"CUBE ({sources})"]
    if node.where is not None:
        parts.append(f"WHERE ({_expr(node.where, 0)})")
    if node.body is not None:
        assigns = " ".join(f"{n} = {_expr(e, 0)}" for n, e in node.body)
        parts.append(f"BODY ({assigns})")
    if node.returns is not None:
        items = ", ".join(
            (f"{n} = " if n else "") + _expr(e, 0) for n, e in node.returns
        )
        parts.append(f"RETURN ({items})")
    return " ".join(parts)


def _field_list(fields) -> str:
    out = []
    for f in fields:
        tname = str(f.type) if isinstance(f.type, PrimitiveType) else f.type
        out.append(f"{tname} {f.name}")
    return ", ".join(out)


def _concept(node: A.ConceptDecl) -> str:
    text = f"CONCEPT {node.name}"
    if node.super_name:
        text += f" IN {node.super_name}"
    text += " IDENTITY"
    if node.identity_fields:
        text += " " + _field_list(node.identity_fields)
    text += " ENTITY"
    if node.entity_fields:
        text += " " + _field_list(node.entity_fields)
    return text


def _create_table(node: A.CreateTable) -> str:
    text = f"CREATE TABLE {node.collection} CONCEPT {node.concept}"
    if node.parent:
        text += f" IN {node.parent}"
    for dim, coll in node.bindings:
        text += f", {dim} = {coll}"
    return text
