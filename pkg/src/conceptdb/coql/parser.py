"""Recursive-descent parser for COQL statements and query expressions.

Arrow chains are kept raw in the AST (a flat sequence of `->`/`<-` items);
whether a bare name is a dimension or a collection is decided at evaluation
time, matching how queries omit either part.
"""

from __future__ import annotations

from .. import schema as sch
from ..errors import ParseError
from . import ast as A
from .tokens import EOF, IDENT, KW, NUMBER, OP, PUNCT, STRING, Token, tokenize

_PRIM_TYPE_NAMES = ("INT", "DOUBLE", "BOOL")
_CMP_OPS = ("==", "!=", "<=", ">=", "<", ">")


class Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    # --- token helpers ---

    def peek(self, k: int = 0) -> Token:
        j = min(self.i + k, len(self.toks) - 1)
        return self.toks[j]

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != EOF:
            self.i += 1
        return t

    def at(self, kind: str, text: str | None = None, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind == kind and (text is None or t.text == text)

    def at_eof(self) -> bool:
        return self.cur.kind == EOF

    def error(self, expected: str, tok: Token | None = None) -> ParseError:
        t = tok or self.cur
        found = t.text or "end of input"
        return ParseError(f"expected {expected}, found {found!r}", t.line, t.column)

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            raise self.error(text or kind)
        return self.advance()

    def _pos(self, tok: Token) -> tuple:
        return (tok.line, tok.column)

    # --- statements ---

    def parse_statement(self) -> A.Node:
        if self.at(KW, "CONCEPT"):
            return self.parse_concept_decl()
        if self.at(KW, "CREATE"):
            return self.parse_create_table()
        if self.at(KW, "SELECT"):
            return self.parse_select()
        if self.at(IDENT) and self.at(OP, "=", 1):
            tok = self.advance()
            self.advance()
            return A.Assignment(tok.text, self.parse_expr(), pos=self._pos(tok))
        return self.parse_expr()

    def statements(self):
        while not self.at_eof():
            yield self.parse_statement()

    def parse_concept_decl(self) -> A.ConceptDecl:
        tok = self.expect(KW, "CONCEPT")
        name = self.expect(IDENT).text
        super_name = None
        if self.at(KW, "IN"):
            self.advance()
            super_name = self.expect(IDENT).text
        self.expect(KW, "IDENTITY")
        identity_fields = self.parse_fields()
        self.expect(KW, "ENTITY")
        entity_fields = self.parse_fields()
        return A.ConceptDecl(name, super_name, identity_fields, entity_fields,
                             pos=self._pos(tok))

    def _at_field_start(self, k: int = 0) -> bool:
        t = self.peek(k)
        if t.kind != IDENT:
            return False
        if t.text in _PRIM_TYPE_NAMES:
            return True
        if t.text == "CHAR" and self.at(PUNCT, "(", k + 1):
            return True
        return self.at(IDENT, None, k + 1)

    def parse_field_type(self):
        t = self.expect(IDENT)
        if t.text == "INT":
            return sch.INT
        if t.text == "DOUBLE":
            return sch.DOUBLE
        if t.text == "BOOL":
            return sch.BOOL
        if t.text == "CHAR":
            self.expect(PUNCT, "(")
            n = self.expect(NUMBER)
            if not isinstance(n.value, int):
                raise self.error("integer CHAR length", n)
            self.expect(PUNCT, ")")
            return sch.char(n.value)
        return t.text

    def parse_fields(self) -> list[A.FieldDecl]:
        # Fields may be separated by commas or plain juxtaposition (multi-line
        # declarations); "INT x, y" declares two INT fields.
        fields: list[A.FieldDecl] = []
        while self._at_field_start():
            tok = self.cur
            ftype = self.parse_field_type()
            name = self.expect(IDENT).text
            fields.append(A.FieldDecl(ftype, name, pos=self._pos(tok)))
            while (self.at(PUNCT, ",") and self.at(IDENT, None, 1)
                   and not self._at_field_start(1)):
                self.advance()
                extra = self.expect(IDENT)
                fields.append(A.FieldDecl(ftype, extra.text, pos=self._pos(extra)))
            if self.at(PUNCT, ",") and self._at_field_start(1):
                self.advance()
        return fields

    def parse_create_table(self) -> A.CreateTable:
        tok = self.expect(KW, "CREATE")
        self.expect(KW, "TABLE")
        name = self.expect(IDENT).text
        self.expect(KW, "CONCEPT")
        concept = self.expect(IDENT).text
        parent = None
        if self.at(KW, "IN"):
            self.advance()
            parent = self.expect(IDENT).text
        bindings = []
        while self.at(PUNCT, ","):
            self.advance()
            dim = self.expect(IDENT).text
            self.expect(OP, "=")
            bindings.append((dim, self.expect(IDENT).text))
        return A.CreateTable(name, concept, parent, bindings, pos=self._pos(tok))

    def parse_select(self) -> A.CubeExpr:
        # SELECT a, b FROM Coll var  ==  CUBE (Coll var) RETURN (a, b)
        tok = self.expect(KW, "SELECT")
        items = [(None, self.parse_expr())]
        while self.at(PUNCT, ","):
            self.advance()
            items.append((None, self.parse_expr()))
        self.expect(KW, "FROM")
        src = self.expect(IDENT)
        var = self.advance().text if self.at(IDENT) else None
        source = A.CubeSource(A.Name(src.text, pos=self._pos(src)), var,
                              pos=self._pos(src))
        return A.CubeExpr([source], returns=items, pos=self._pos(tok))

    # --- expressions, loosest binding first ---

    def parse_expr(self) -> A.Node:
        e = self.parse_or()
        while self.at(OP, "<-*->") or self.at(OP, "<-*("):
            tok = self.cur
            if self.at(OP, "<-*->"):
                self.advance()
                e = A.InferStep(e, self.parse_term(), pos=self._pos(tok))
            else:
                self.advance()
                vtok = self.expect(IDENT)
                pred = None
                if self.at(OP, "|"):
                    self.advance()
                    pred = self.parse_expr()
                self.expect(OP, ")*->")
                via = A.ViaSpec(vtok.text, pred, pos=self._pos(vtok))
                e = A.InferStep(e, self.parse_term(), via, pos=self._pos(tok))
        return e

    def parse_or(self) -> A.Node:
        e = self.parse_and()
        while self.at(KW, "OR"):
            tok = self.advance()
            e = A.Or(e, self.parse_and(), pos=self._pos(tok))
        return e

    def parse_and(self) -> A.Node:
        e = self.parse_not()
        while self.at(KW, "AND"):
            tok = self.advance()
            e = A.And(e, self.parse_not(), pos=self._pos(tok))
        return e

    def parse_not(self) -> A.Node:
        if self.at(KW, "NOT"):
            tok = self.advance()
            return A.Not(self.parse_not(), pos=self._pos(tok))
        return self.parse_cmp()

    def parse_cmp(self) -> A.Node:
        e = self.parse_add()
        if self.cur.kind == OP and self.cur.text in _CMP_OPS + ("=",):
            tok = self.advance()
            op = "==" if tok.text == "=" else tok.text
            return A.Cmp(op, e, self.parse_add(), pos=self._pos(tok))
        if self.at(KW, "STARTSWITH"):
            tok = self.advance()
            return A.StartsWith(e, self.parse_add(), pos=self._pos(tok))
        if self.at(KW, "IN"):
            tok = self.advance()
            self.expect(PUNCT, "{")
            items = [self.parse_set_literal()]
            while self.at(PUNCT, ","):
                self.advance()
                items.append(self.parse_set_literal())
            self.expect(PUNCT, "}")
            return A.InSet(e, tuple(items), pos=self._pos(tok))
        return e

    def parse_set_literal(self) -> A.Literal:
        neg = False
        if self.at(OP, "-"):
            self.advance()
            neg = True
        t = self.cur
        if t.kind not in (NUMBER, STRING):
            raise self.error("literal")
        self.advance()
        value = -t.value if neg else t.value
        return A.Literal(value, pos=self._pos(t))

    def parse_add(self) -> A.Node:
        e = self.parse_mul()
        while self.cur.kind == OP and self.cur.text in ("+", "-"):
            tok = self.advance()
            e = A.Arith(tok.text, e, self.parse_mul(), pos=self._pos(tok))
        return e

    def parse_mul(self) -> A.Node:
        e = self.parse_unary()
        while self.cur.kind == OP and self.cur.text in ("*", "/"):
            tok = self.advance()
            e = A.Arith(tok.text, e, self.parse_unary(), pos=self._pos(tok))
        return e

    def parse_unary(self) -> A.Node:
        if self.at(OP, "-"):
            tok = self.advance()
            return A.Neg(self.parse_unary(), pos=self._pos(tok))
        return self.parse_postfix()

    def parse_postfix(self) -> A.Node:
        e = self.parse_primary()
        while True:
            if self.at(PUNCT, "."):
                tok = self.advance()
                if self.at(IDENT) or self.at(KW, "super"):
                    attr = self.advance().text
                else:
                    raise self.error("attribute name")
                e = A.Dot(e, attr, pos=self._pos(tok))
            elif self.at(OP, "->") or self.at(OP, "<-"):
                tok = self.advance()
                direction = A.UP if tok.text == "->" else A.DOWN
                e = A.Arrow(e, direction, self.parse_arrow_payload(),
                            pos=self._pos(tok))
            else:
                return e

    def parse_arrow_payload(self) -> A.Node:
        if self.at(IDENT):
            t = self.advance()
            return A.Name(t.text, pos=self._pos(t))
        if self.at(KW, "super"):
            t = self.advance()
            return A.Name("super", pos=self._pos(t))
        if self.at(PUNCT, "("):
            return self.parse_paren_term()
        if self.at(KW, "CUBE"):
            return self.parse_cube()
        raise self.error("dimension or collection after arrow")

    def parse_term(self) -> A.Node:
        """A collection term: bare name, parenthesized term, or cube."""
        if self.at(IDENT):
            t = self.advance()
            return A.Name(t.text, pos=self._pos(t))
        if self.at(PUNCT, "("):
            return self.parse_paren_term()
        if self.at(KW, "CUBE"):
            return self.parse_cube()
        raise self.error("collection term")

    def parse_paren_term(self) -> A.Node:
        tok = self.expect(PUNCT, "(")
        if self.at(IDENT):
            if self.at(OP, "|", 1):
                name = self.advance().text
                self.advance()
                pred = self.parse_expr()
                self.expect(PUNCT, ")")
                return A.Filtered(name, None, pred, pos=self._pos(tok))
            if self.at(IDENT, None, 1) and self.at(OP, "|", 2):
                name = self.advance().text
                var = self.advance().text
                self.advance()
                pred = self.parse_expr()
                self.expect(PUNCT, ")")
                return A.Filtered(name, var, pred, pos=self._pos(tok))
        e = self.parse_expr()
        self.expect(PUNCT, ")")
        return e

    def parse_primary(self) -> A.Node:
        t = self.cur
        if t.kind == NUMBER or t.kind == STRING:
            self.advance()
            return A.Literal(t.value, pos=self._pos(t))
        if t.kind == KW:
            if t.text == "this":
                self.advance()
                return A.This(pos=self._pos(t))
            if t.text == "super":
                self.advance()
                return A.SuperRef(pos=self._pos(t))
            if t.text == "CUBE":
                return self.parse_cube()
            if t.text in ("SUM", "COUNT"):
                self.advance()
                self.expect(PUNCT, "(")
                arg = self.parse_expr()
                self.expect(PUNCT, ")")
                return A.Aggregate(t.text, arg, pos=self._pos(t))
        if t.kind == IDENT:
            self.advance()
            return A.Name(t.text, pos=self._pos(t))
        if self.at(PUNCT, "("):
            return self.parse_paren_term()
        raise self.error("expression")

    # --- CUBE ---

    def parse_cube(self) -> A.CubeExpr:
        tok = self.expect(KW, "CUBE")
        sources = None
        if self.at(PUNCT, "("):
            mark = self.i
            self.advance()
            try:
                sources = self.parse_source_list()
                self.expect(PUNCT, ")")
            except ParseError:
                self.i = mark
                sources = None
        if sources is None:
            sources = self.parse_source_list()
        where = None
        if self.at(KW, "WHERE"):
            self.advance()
            where = self.parse_expr()
        body = None
        if self.at(KW, "BODY"):
            self.advance()
            parens = self.at(PUNCT, "(")
            if parens:
                self.advance()
            body = self.parse_assignment_list()
            if parens:
                self.expect(PUNCT, ")")
        returns = None
        if self.at(KW, "RETURN"):
            self.advance()
            parens = self.at(PUNCT, "(")
            if parens:
                self.advance()
            returns = [self.parse_return_item()]
            while self.at(PUNCT, ","):
                self.advance()
                returns.append(self.parse_return_item())
            if parens:
                self.expect(PUNCT, ")")
        return A.CubeExpr(sources, where, body, returns, pos=self._pos(tok))

    def parse_source_list(self) -> list[A.CubeSource]:
        sources = [self.parse_source()]
        while self.at(PUNCT, ","):
            self.advance()
            sources.append(self.parse_source())
        return sources

    def parse_source(self) -> A.CubeSource:
        tok = self.cur
        term = self.parse_term()
        var = None
        if self.at(IDENT):
            var = self.advance().text
        return A.CubeSource(term, var, pos=self._pos(tok))

    def parse_assignment_list(self) -> list[tuple]:
        out = []
        while self.at(IDENT) and self.at(OP, "=", 1):
            name = self.advance().text
            self.advance()
            out.append((name, self.parse_expr()))
        return out

    def parse_return_item(self) -> tuple:
        if self.at(IDENT) and self.at(OP, "=", 1):
            name = self.advance().text
            self.advance()
            return (name, self.parse_expr())
        return (None, self.parse_expr())


def parse_statement(text: str) -> A.Node:
    """Parse exactly one statement; trailing input is an error."""
    p = Parser(tokenize(text))
    stmt = p.parse_statement()
    if not p.at_eof():
        raise p.error("end of input")
    return stmt


def parse_query(text: str) -> A.Node:
    """Parse exactly one query expression; trailing input is an error."""
    p = Parser(tokenize(text))
    expr = p.parse_expr()
    if not p.at_eof():
        raise p.error("end of input")
    return expr


def parse_script(text: str, start_line: int = 1) -> list[A.Node]:
    return list(Parser(tokenize(text, start_line)).statements())


def iter_statements(text: str, start_line: int = 1):
    """Parse statements lazily so earlier ones can run before a later error."""
    yield from Parser(tokenize(text, start_line)).statements()
