"""Front end of the modeling language."""

from .desugar import DesugarError, desugar
from .parser import ParseError, parse, parse_expr
from .render import render, render_expr, render_ltl, render_stmt

__all__ = ["DesugarError", "ParseError", "desugar", "parse", "parse_expr", "render",
           "render_expr", "render_ltl", "render_stmt"]
