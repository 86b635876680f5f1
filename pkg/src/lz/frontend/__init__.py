"""Surface language: parser, pattern-match compiler and lowering to lp."""
from lz.frontend.ast import (
    App,
    Ctor,
    CtorPat,
    FnDef,
    IntLit,
    IntPat,
    Let,
    Match,
    MatchRow,
    PApp,
    Var,
    WildPat,
)
from lz.frontend.compile import FrontendError, build_decision_tree, compile_match, leaf_counts, lower_surface
from lz.frontend.parser import parse_surface


def compile_surface(text: str):
    """Parse and lower surface text to an lp module."""
    return lower_surface(parse_surface(text))


__all__ = [
    "App", "Ctor", "CtorPat", "FnDef", "IntLit", "IntPat", "Let", "Match", "MatchRow", "PApp", "Var",
    "WildPat", "FrontendError", "build_decision_tree", "compile_match", "leaf_counts", "lower_surface",
    "parse_surface", "compile_surface",
]
