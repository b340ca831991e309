"""
Concrete syntax for DeF and DeF+F programs.

The grammar is flat: right-hand sides hold at most one binary operator over atoms,
`--` starts a comment running to the end of the line and an optional first line
`#dialect def+f` selects the forward* dialect.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

import pyparsing as pp

from .syntax import (
    RESERVED_WORDS,
    Assign,
    AsyncCall,
    BaseType,
    BinOp,
    BoolLit,
    Dialect,
    ForwardStar,
    FunDef,
    GetStar,
    If,
    IntLit,
    Program,
    Return,
    Rhs,
    Skip,
    Stmt,
    SyncCall,
    TypeExpr,
    Var,
    leaves,
    normalize_program,
    seq,
)
from .utils import ParseFailure

logger = logging.getLogger(__name__)

pp.ParserElement.enable_packrat()

"""
Characters that may start some token of the language
"""
TOKEN_START = re.compile(r"[A-Za-z0-9_\s;,(){}\[\]=!<>+\-*&|#]")
COMMENT = re.compile(r"--[^\n]*")


@dataclass(frozen=True)
class ParseError:
    line: int
    col: int
    message: str
    expected: Tuple[str, ...] = ()

    def __str__(self):
        return f"{self.line}:{self.col}: {self.message}"


def _pos(s: str, loc: int) -> Tuple[int, int]:
    return pp.lineno(loc, s), pp.col(loc, s)


def _decl(t):
    return [(t[1], t[0])]


@lru_cache(maxsize=None)
def _grammar():
    LPAR, RPAR, LBRACE, RBRACE, LBRACK, RBRACK, SEMI, COMMA = map(pp.Suppress, "(){}[];,")
    ASSIGN = pp.Suppress(pp.Regex(r"=(?!=)"))
    OP = pp.one_of("<= == && || + - * <")

    ident = pp.Regex(r"[A-Za-z_][A-Za-z0-9_]*").set_name("identifier")
    ident.add_condition(lambda t: t[0] not in RESERVED_WORDS, message="reserved word")

    integer = pp.Regex(r"-?\d+").set_name("integer").set_parse_action(lambda t: IntLit(int(t[0])))
    boolean = (pp.Keyword("true") | pp.Keyword("false")).set_parse_action(lambda t: BoolLit(t[0] == "true"))
    var = ident.copy().add_parse_action(lambda t: Var(t[0]))
    atom = (integer | boolean | var).set_name("atom")

    base_name = pp.Keyword("int") | pp.Keyword("bool")
    basic_type = base_name.copy().set_parse_action(lambda t: TypeExpr.basic(BaseType(t[0])))
    flow_type = (pp.Suppress(pp.Keyword("Flow")) + LBRACK + base_name + RBRACK).set_parse_action(
        lambda t: TypeExpr.flow(BaseType(t[0]))
    )
    type_ = (flow_type | basic_type).set_name("type")

    decl = (type_ + ident).set_parse_action(_decl)
    decls = pp.Group(pp.ZeroOrMore(decl + SEMI))
    args = pp.Group(pp.Optional(atom + pp.ZeroOrMore(COMMA + atom)))
    params = pp.Group(pp.Optional(decl + pp.ZeroOrMore(COMMA + decl)))

    async_call = (pp.Suppress("!") + ident + LPAR + args + RPAR).set_parse_action(lambda t: AsyncCall(t[0], tuple(t[1])))
    get_star = (pp.Suppress(pp.Literal("get*")) + atom).set_parse_action(lambda t: GetStar(t[0]))
    sync_call = (ident + LPAR + args + RPAR).set_parse_action(lambda t: SyncCall(t[0], tuple(t[1])))
    binop = (atom + OP + atom).set_parse_action(lambda t: BinOp(t[0], t[1], t[2]))
    rhs = (async_call | get_star | sync_call | binop | atom).set_name("right-hand side")

    stmt = pp.Forward().set_name("statement")
    stmtseq = (stmt + pp.ZeroOrMore(SEMI + stmt)).set_parse_action(lambda t: seq(*t))

    skip = pp.Keyword("skip").set_parse_action(lambda s, loc, t: Skip(pos=_pos(s, loc)))
    if_ = (
        pp.Suppress(pp.Keyword("if"))
        + atom
        + LBRACE
        + stmtseq
        + RBRACE
        + pp.Suppress(pp.Keyword("else"))
        + LBRACE
        + stmtseq
        + RBRACE
    ).set_parse_action(lambda s, loc, t: If(t[0], t[1], t[2], pos=_pos(s, loc)))
    return_ = (pp.Suppress(pp.Keyword("return")) + atom).set_parse_action(lambda s, loc, t: Return(t[0], pos=_pos(s, loc)))
    forward = (pp.Suppress(pp.Literal("forward*")) + atom).set_parse_action(
        lambda s, loc, t: ForwardStar(t[0], pos=_pos(s, loc))
    )
    assign = (ident + ASSIGN + rhs).set_parse_action(lambda s, loc, t: Assign(t[0], t[1], pos=_pos(s, loc)))
    stmt <<= skip | if_ | return_ | forward | assign

    fundef = (
        pp.Suppress(pp.Keyword("fun")) + type_ + ident + LPAR + params + RPAR + LBRACE + decls + stmtseq + RBRACE
    ).set_parse_action(lambda s, loc, t: FunDef(t[0], t[1], tuple(t[2]), tuple(t[3]), t[4], pos=_pos(s, loc)))

    pragma = pp.Suppress(pp.Literal("#dialect")) + (pp.Literal("def+f") | pp.Literal("def"))("pragma")
    program = (
        pp.Optional(pragma)
        + decls("globals")
        + pp.Group(pp.ZeroOrMore(fundef))("functions")
        + LBRACE
        + decls("locals")
        + stmtseq("body")
        + RBRACE
    )

    comment = pp.Regex(r"--[^\n]*")
    program.ignore(comment)
    rhs_only = rhs + pp.StringEnd()
    rhs_only.ignore(comment)
    return program, rhs_only


def _error_from(exc: pp.ParseBaseException, source: str) -> ParseError:
    expected = ()
    element = getattr(exc, "parser_element", None)
    if element is not None:
        expected = (str(element),)
    loc = min(exc.loc, len(source))
    message = exc.msg
    found = source[loc:loc + 12].split()
    if found:
        message = f"{message}, found {found[0]!r}"
    else:
        message = f"{message}, found end of input"
    return ParseError(exc.lineno, exc.col, message, expected)


def _unknown_tokens(source: str) -> List[ParseError]:
    # comments are blanked in place so that offsets keep matching the source
    text = COMMENT.sub(lambda m: " " * len(m.group()), source)
    return [
        ParseError(*_pos(source, loc), f"unknown token {ch!r}")
        for loc, ch in enumerate(text)
        if not TOKEN_START.match(ch)
    ]


def _forward_positions(s: Stmt) -> List[Tuple[int, int]]:
    out = []
    for leaf in leaves(s):
        if isinstance(leaf, ForwardStar):
            out.append(leaf.pos or (1, 1))
        elif isinstance(leaf, If):
            out.extend(_forward_positions(leaf.then))
            out.extend(_forward_positions(leaf.else_))
    return out


def parse_program(source: str, dialect: Optional[Dialect] = None) -> Program:
    """
    Parse the source text of a program.

    The dialect of the result is DeF+F when a forward* statement occurs or when the
    `#dialect def+f` pragma is present. Forcing `Dialect.DEF` rejects any forward*.

    Args:
        source (str): program text.
        dialect (Dialect, optional): dialect override. By default None, which infers the dialect.

    Raises:
        ParseFailure: on lexical or syntax errors, duplicate function definitions or forward* in a DeF program.

    Returns:
        Program: the program, with statements right-associated as written (see load_program for the normalized form).
    """
    if source is None:
        raise ValueError("Source is required")

    unknown = _unknown_tokens(source)
    if unknown:
        raise ParseFailure(unknown)

    program_rule, _ = _grammar()
    try:
        result = program_rule.parse_string(source, parse_all=True)
    except pp.ParseBaseException as exc:
        error = _error_from(exc, source)
        logger.debug(f"Parse failed: {error}")
        raise ParseFailure([error]) from None

    functions = tuple(result.get("functions", []))
    errors = []
    seen = set()
    for fun in functions:
        if fun.name in seen:
            line, col = fun.pos or (1, 1)
            errors.append(ParseError(line, col, f"duplicate definition of function {fun.name!r}"))
        seen.add(fun.name)

    forwards = _forward_positions(result["body"])
    for fun in functions:
        forwards.extend(_forward_positions(fun.body))

    pragma = result.get("pragma")
    if dialect is None:
        if pragma == "def" and forwards:
            dialect = Dialect.DEF
        elif pragma == "def+f" or forwards:
            dialect = Dialect.DEF_PLUS_F
        else:
            dialect = Dialect.DEF
    if dialect is Dialect.DEF:
        for line, col in forwards:
            errors.append(ParseError(line, col, "forward* is not part of the def dialect", ("return",)))

    if errors:
        raise ParseFailure(sorted(errors, key=lambda e: (e.line, e.col)))

    return Program(
        globals=tuple(result.get("globals", [])),
        functions=functions,
        main_locals=tuple(result.get("locals", [])),
        main_body=result["body"],
        dialect=dialect,
    )


def parse_rhs(source: str) -> Rhs:
    """Parse a single right-hand side such as `!foo(1, x)` or `get* y`."""
    unknown = _unknown_tokens(source.strip())
    if unknown:
        raise ParseFailure(unknown)

    _, rhs_rule = _grammar()
    try:
        return rhs_rule.parse_string(source.strip(), parse_all=True)[0]
    except pp.ParseBaseException as exc:
        raise ParseFailure([_error_from(exc, source.strip())]) from None


def load_program(source: str, dialect: Optional[Dialect] = None) -> Program:
    """Parse and normalize a program."""
    return normalize_program(parse_program(source, dialect))
