from . import ast
from .parser import iter_statements, parse_query, parse_script, parse_statement
from .render import render
from .tokens import Token, tokenize

__all__ = [
    "ast",
    "tokenize",
    "Token",
    "parse_statement",
    "parse_query",
    "parse_script",
    "iter_statements",
    "render",
]
