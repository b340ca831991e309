"""
Abstract syntax of DeF and DeF+F programs.

Every node is a frozen dataclass, so programs, statements and runtime values are
hashable and can be shared freely. Source positions are carried for diagnostics
only and never take part in equality.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Tuple, Union

RESERVED_WORDS = frozenset(
    ["skip", "if", "else", "return", "forward*", "get*", "true", "false", "int", "bool", "Flow", "fun", "main"]
)

MAIN = "main"


class BaseType(Enum):
    """
    Basic types of the calculus.

    To use any value from this enumeration, use BaseType.<attribute> i.e. defcal.BaseType.INT
    """
    INT = "int"
    BOOL = "bool"


class Dialect(Enum):
    """
    Language dialect of a program or configuration.

    Attributes:
        DEF: data-flow explicit futures only.
        DEF_PLUS_F: DeF extended with the forward* statement and chained futures.
    """
    DEF = "def"
    DEF_PLUS_F = "def+f"


@dataclass(frozen=True)
class TypeExpr:
    """A basic type B or a flow Flow[B]. The payload of a flow is always a basic type."""

    base: BaseType
    is_flow: bool = False

    @classmethod
    def basic(cls, base: BaseType) -> "TypeExpr":
        return cls(base, False)

    @classmethod
    def flow(cls, base: BaseType) -> "TypeExpr":
        return cls(base, True)

    def lifted(self) -> "TypeExpr":
        return TypeExpr(self.base, True)

    def __str__(self):
        if self.is_flow:
            return f"Flow[{self.base.value}]"
        return self.base.value


INT = TypeExpr.basic(BaseType.INT)
BOOL = TypeExpr.basic(BaseType.BOOL)
FLOW_INT = TypeExpr.flow(BaseType.INT)
FLOW_BOOL = TypeExpr.flow(BaseType.BOOL)

"""
MAIN RETURN TYPE: main is the f0 task and any returned int lifts into it
"""
MAIN_RETURN_TYPE = FLOW_INT


# Atoms. IntLit, BoolLit and FutRef double as runtime values.


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class FutRef:
    """Future identifier; only appears in runtime statements and stores."""

    fid: int


Atom = Union[Var, IntLit, BoolLit, FutRef]
Value = Union[IntLit, BoolLit, FutRef]

"""
Operator table: symbol -> accepted ((left, right), result) signatures
"""
OPERATORS = {
    "+": (((BaseType.INT, BaseType.INT), BaseType.INT),),
    "-": (((BaseType.INT, BaseType.INT), BaseType.INT),),
    "*": (((BaseType.INT, BaseType.INT), BaseType.INT),),
    "==": (((BaseType.INT, BaseType.INT), BaseType.BOOL), ((BaseType.BOOL, BaseType.BOOL), BaseType.BOOL)),
    "<": (((BaseType.INT, BaseType.INT), BaseType.BOOL),),
    "<=": (((BaseType.INT, BaseType.INT), BaseType.BOOL),),
    "&&": (((BaseType.BOOL, BaseType.BOOL), BaseType.BOOL),),
    "||": (((BaseType.BOOL, BaseType.BOOL), BaseType.BOOL),),
}


@dataclass(frozen=True)
class BinOp:
    left: Atom
    op: str
    right: Atom

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise ValueError(f"Unknown operator {self.op!r}")


Expr = Union[Atom, BinOp]


@dataclass(frozen=True)
class SyncCall:
    fn: str
    args: Tuple[Atom, ...] = ()


@dataclass(frozen=True)
class AsyncCall:
    fn: str
    args: Tuple[Atom, ...] = ()


@dataclass(frozen=True)
class GetStar:
    atom: Atom


@dataclass(frozen=True)
class Hole:
    """Pending-assignment marker left in a caller frame by INVK-SYNC."""

    pass


Rhs = Union[Atom, BinOp, SyncCall, AsyncCall, GetStar, Hole]

Pos = Optional[Tuple[int, int]]


def _pos():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Skip:
    pos: Pos = _pos()


@dataclass(frozen=True)
class Assign:
    target: str
    rhs: Rhs
    pos: Pos = _pos()


@dataclass(frozen=True)
class If:
    cond: Atom
    then: "Stmt"
    else_: "Stmt"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Seq:
    first: "Stmt"
    second: "Stmt"


@dataclass(frozen=True)
class Return:
    atom: Atom
    pos: Pos = _pos()


@dataclass(frozen=True)
class ForwardStar:
    atom: Atom
    pos: Pos = _pos()


Stmt = Union[Skip, Assign, If, Seq, Return, ForwardStar]

Decl = Tuple[str, TypeExpr]


@dataclass(frozen=True)
class FunDef:
    return_type: TypeExpr
    name: str
    params: Tuple[Decl, ...]
    locals: Tuple[Decl, ...]
    body: Stmt
    pos: Pos = _pos()


@dataclass(frozen=True)
class Program:
    globals: Tuple[Decl, ...]
    functions: Tuple[FunDef, ...]
    main_locals: Tuple[Decl, ...]
    main_body: Stmt
    dialect: Dialect = Dialect.DEF

    def function(self, name: str) -> Optional[FunDef]:
        for fun in self.functions:
            if fun.name == name:
                return fun
        return None


def seq(*stmts: Stmt) -> Stmt:
    """Right-associated sequence of the given statements."""
    if not stmts:
        return Skip()
    acc = stmts[-1]
    for s in reversed(stmts[:-1]):
        acc = Seq(s, acc)
    return acc


def leaves(s: Stmt):
    """The non-Seq statements of s, left to right."""
    out = []
    stack = [s]
    while stack:
        node = stack.pop()
        if isinstance(node, Seq):
            stack.append(node.second)
            stack.append(node.first)
        else:
            out.append(node)
    return out


def normalize(s: Stmt) -> Stmt:
    """
    Rewrite s into the normal form s'; s'' used by the operational semantics.

    Sequences are right-associated, if-branches are normalized recursively and an
    explicit trailing skip closes every sequence. Leading skips are kept: the SKIP
    rule consumes them at runtime.

    Args:
        s (Stmt): any statement.

    Returns:
        Stmt: a Seq whose first component is not a Seq.
    """
    items = []
    for leaf in leaves(s):
        if isinstance(leaf, If):
            leaf = If(leaf.cond, normalize(leaf.then), normalize(leaf.else_), pos=leaf.pos)
        items.append(leaf)
    if not isinstance(items[-1], Skip):
        items.append(Skip())
    if len(items) == 1:
        items.append(Skip())
    return seq(*items)


def normalize_program(p: Program) -> Program:
    functions = tuple(
        FunDef(f.return_type, f.name, f.params, f.locals, normalize(f.body), pos=f.pos) for f in p.functions
    )
    return Program(p.globals, functions, p.main_locals, normalize(p.main_body), p.dialect)


def map_atoms(s: Stmt, fn: Callable[[Atom], Atom]) -> Stmt:
    """Apply fn to every atom occurring in s, rebuilding the tree."""

    def rhs(z):
        if isinstance(z, BinOp):
            return BinOp(fn(z.left), z.op, fn(z.right))
        if isinstance(z, (SyncCall, AsyncCall)):
            return type(z)(z.fn, tuple(fn(a) for a in z.args))
        if isinstance(z, GetStar):
            return GetStar(fn(z.atom))
        if isinstance(z, Hole):
            return z
        return fn(z)

    def walk(t):
        if isinstance(t, Seq):
            return Seq(walk(t.first), walk(t.second))
        if isinstance(t, Assign):
            return Assign(t.target, rhs(t.rhs), pos=t.pos)
        if isinstance(t, If):
            return If(fn(t.cond), walk(t.then), walk(t.else_), pos=t.pos)
        if isinstance(t, Return):
            return Return(fn(t.atom), pos=t.pos)
        if isinstance(t, ForwardStar):
            return ForwardStar(fn(t.atom), pos=t.pos)
        return t

    return walk(s)


def iter_atoms(s: Stmt):
    """Yield the atoms of s in textual order."""
    for leaf in leaves(s):
        if isinstance(leaf, Assign):
            z = leaf.rhs
            if isinstance(z, BinOp):
                yield z.left
                yield z.right
            elif isinstance(z, (SyncCall, AsyncCall)):
                yield from z.args
            elif isinstance(z, GetStar):
                yield z.atom
            elif not isinstance(z, Hole):
                yield z
        elif isinstance(leaf, If):
            yield leaf.cond
            yield from iter_atoms(leaf.then)
            yield from iter_atoms(leaf.else_)
        elif isinstance(leaf, (Return, ForwardStar)):
            yield leaf.atom


def contains_forward(s: Stmt) -> bool:
    for leaf in leaves(s):
        if isinstance(leaf, ForwardStar):
            return True
        if isinstance(leaf, If) and (contains_forward(leaf.then) or contains_forward(leaf.else_)):
            return True
    return False


# Pretty printing


def pretty_atom(a: Atom) -> str:
    if isinstance(a, Var):
        return a.name
    if isinstance(a, BoolLit):
        return "true" if a.value else "false"
    if isinstance(a, IntLit):
        return str(a.value)
    if isinstance(a, FutRef):
        return f"<f{a.fid}>"
    raise TypeError(f"Not an atom: {a!r}")


def pretty_rhs(z: Rhs) -> str:
    if isinstance(z, BinOp):
        return f"{pretty_atom(z.left)} {z.op} {pretty_atom(z.right)}"
    if isinstance(z, SyncCall):
        return f"{z.fn}({', '.join(pretty_atom(a) for a in z.args)})"
    if isinstance(z, AsyncCall):
        return f"!{z.fn}({', '.join(pretty_atom(a) for a in z.args)})"
    if isinstance(z, GetStar):
        return f"get* {pretty_atom(z.atom)}"
    if isinstance(z, Hole):
        return "<hole>"
    return pretty_atom(z)


def _pretty_leaf(s: Stmt, indent: Optional[int]) -> str:
    if isinstance(s, Skip):
        return "skip"
    if isinstance(s, Assign):
        return f"{s.target} = {pretty_rhs(s.rhs)}"
    if isinstance(s, Return):
        return f"return {pretty_atom(s.atom)}"
    if isinstance(s, ForwardStar):
        return f"forward* {pretty_atom(s.atom)}"
    if isinstance(s, If):
        cond = pretty_atom(s.cond)
        if indent is None:
            return f"if {cond} {{ {pretty_stmt(s.then)} }} else {{ {pretty_stmt(s.else_)} }}"
        pad = " " * indent
        then = pretty_stmt(s.then, indent + 4)
        else_ = pretty_stmt(s.else_, indent + 4)
        return f"if {cond} {{\n{then}\n{pad}}} else {{\n{else_}\n{pad}}}"
    raise TypeError(f"Not a statement: {s!r}")


def pretty_stmt(s: Stmt, indent: Optional[int] = None) -> str:
    """
    Render a statement.

    Args:
        s (Stmt): statement, static or runtime.
        indent (int, optional): indentation of a multi-line block. By default None, which renders on one line.

    Returns:
        str: the concrete syntax of s.
    """
    parts = [_pretty_leaf(leaf, indent) for leaf in leaves(s)]
    if indent is None:
        return "; ".join(parts)
    pad = " " * indent
    return ";\n".join(pad + part for part in parts)


def _pretty_block(decls, body, indent=4) -> str:
    pad = " " * indent
    lines = [f"{pad}{t} {name};" for name, t in decls]
    lines.append(pretty_stmt(body, indent))
    return "\n".join(lines)


def pretty(p: Program) -> str:
    """
    Render a program in the concrete syntax accepted by parse_program.

    The program is normalized first, so parse_program(pretty(p)) equals normalize_program(p).
    """
    p = normalize_program(p)
    chunks = []
    header = []
    if p.dialect is Dialect.DEF_PLUS_F:
        header.append("#dialect def+f")
    header.extend(f"{t} {name};" for name, t in p.globals)
    if header:
        chunks.append("\n".join(header))
    for f in p.functions:
        params = ", ".join(f"{t} {name}" for name, t in f.params)
        chunks.append(f"fun {f.return_type} {f.name}({params}) {{\n{_pretty_block(f.locals, f.body)}\n}}")
    chunks.append(f"{{\n{_pretty_block(p.main_locals, p.main_body)}\n}}")
    return "\n\n".join(chunks) + "\n"
