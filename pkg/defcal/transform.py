"""
fwdElim: the translation from DeF+F to DeF that turns every forward* v into return v.
"""
from __future__ import annotations

import logging

from .syntax import Dialect, ForwardStar, FunDef, If, Program, Return, Seq, Stmt, contains_forward
from .utils import TranslationError

logger = logging.getLogger(__name__)


def fwd_elim_stmt(s: Stmt) -> Stmt:
    """Replace every forward* v by return v; every other node is kept as is."""
    if isinstance(s, ForwardStar):
        return Return(s.atom, pos=s.pos)
    if isinstance(s, Seq):
        return Seq(fwd_elim_stmt(s.first), fwd_elim_stmt(s.second))
    if isinstance(s, If):
        return If(s.cond, fwd_elim_stmt(s.then), fwd_elim_stmt(s.else_), pos=s.pos)
    return s


def fwd_elim(p: Program) -> Program:
    """
    Translate a DeF+F program into DeF.

    Only programs typed under the strict forward* rule are accepted: with a basic return
    type a synchronous forward* waits for its value, which return does not.

    Args:
        p (Program): a DeF+F (or DeF) program.

    Raises:
        TranslationError: if forward* occurs in a function whose return type is not a Flow.

    Returns:
        Program: the DeF program, with unchanged signatures.
    """
    if p is None:
        raise ValueError("Program is required")

    functions = []
    for fun in p.functions:
        if contains_forward(fun.body) and not fun.return_type.is_flow:
            raise TranslationError(
                f"{fun.name} forwards but returns {fun.return_type}; only strictly typed programs can be translated"
            )
        functions.append(FunDef(fun.return_type, fun.name, fun.params, fun.locals, fwd_elim_stmt(fun.body), pos=fun.pos))

    logger.debug(f"Translated {len(functions)} function(s) to the def dialect")
    return Program(p.globals, tuple(functions), p.main_locals, fwd_elim_stmt(p.main_body), Dialect.DEF)
