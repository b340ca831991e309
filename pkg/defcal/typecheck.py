"""
Static typing of DeF and DeF+F programs and typing of runtime configurations.

Subtyping is algorithmic: a basic type B is accepted where Flow[B] is expected at
assignments, argument passing and returns, and nowhere else. The result of an
asynchronous call is the collapse of Flow[T] for the callee's return type T.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple, Union

from .syntax import (
    BOOL,
    INT,
    MAIN,
    MAIN_RETURN_TYPE,
    Assign,
    AsyncCall,
    Atom,
    BaseType,
    BinOp,
    BoolLit,
    Dialect,
    ForwardStar,
    FutRef,
    GetStar,
    Hole,
    If,
    IntLit,
    OPERATORS,
    Program,
    Return,
    Rhs,
    Skip,
    Stmt,
    SyncCall,
    TypeExpr,
    Value,
    Var,
    contains_forward,
    leaves,
)
from .utils import TypeCheckFailure

logger = logging.getLogger(__name__)

"""
Prefix of the locals introduced by CEF-FORWARD-SYNC; not a legal source identifier
"""
FRESH_PREFIX = "$fwd"


class ForwardMode(Enum):
    """
    Typing and semantics of forward*.

    Attributes:
        STRICT: forward* only in functions returning Flow[T]; a synchronous forward* behaves like return.
        FLEXIBLE: forward* also in functions returning T; a synchronous forward* waits for the forwarded value.
    """
    STRICT = "strict"
    FLEXIBLE = "flexible"


@dataclass(frozen=True)
class TypeCheckError:
    rule: str
    message: str
    pos: Optional[Tuple[int, int]] = None
    future: Optional[int] = None

    def __str__(self):
        if self.pos is not None:
            where = f"{self.pos[0]}:{self.pos[1]}"
        elif self.future is not None:
            where = f"f{self.future}"
        else:
            where = "-"
        return f"{where}: [{self.rule}] {self.message}"


class _Reject(Exception):
    def __init__(self, error: TypeCheckError):
        super().__init__(str(error))
        self.error = error


@dataclass
class TypeEnv:
    """
    Typing environment Γ.

    `futures` maps future identifiers to the basic type they resolve to and `hole`
    types the pending-assignment marker of a frame waiting on a synchronous call;
    both only matter for runtime statements.
    """

    vars: Dict[str, TypeExpr] = field(default_factory=dict)
    funs: Dict[str, Tuple[Tuple[TypeExpr, ...], TypeExpr]] = field(default_factory=dict)
    futures: Mapping[int, BaseType] = field(default_factory=dict)
    hole: Optional[TypeExpr] = None

    def extend(self, decls) -> "TypeEnv":
        """New environment where the given declarations shadow existing variables."""
        new_vars = dict(self.vars)
        new_vars.update({name: t for name, t in decls})
        return replace(self, vars=new_vars)

    def return_type(self, fn: str) -> TypeExpr:
        return self.funs[fn][1]


@dataclass(frozen=True)
class NestedFlow:
    """A flow whose payload may itself be a flow; only exists between T-INVK-ASYNC and collapse."""

    inner: Union[TypeExpr, "NestedFlow"]


def collapse(t: Union[TypeExpr, NestedFlow]) -> TypeExpr:
    """
    Collapse a possibly nested flow type.

    ↓Flow[Flow[T]] = ↓Flow[T], ↓Flow[B] = Flow[B] and ↓B = B.
    """
    if isinstance(t, TypeExpr):
        return t
    return collapse(t.inner).lifted()


def subtype(t1: TypeExpr, t2: TypeExpr) -> bool:
    """True iff t1 equals t2 or t1 is a basic type B and t2 is Flow[B]."""
    if t1 == t2:
        return True
    return not t1.is_flow and t2.is_flow and t1.base is t2.base


def type_of_atom(env: TypeEnv, a: Atom) -> TypeExpr:
    if isinstance(a, Var):
        if a.name not in env.vars:
            raise _Reject(TypeCheckError("T-VAR", f"unknown variable {a.name!r}"))
        return env.vars[a.name]
    if isinstance(a, BoolLit):
        return BOOL
    if isinstance(a, IntLit):
        return INT
    if isinstance(a, FutRef):
        if a.fid not in env.futures:
            raise _Reject(TypeCheckError("T-VALUE", f"unknown future f{a.fid}"))
        return TypeExpr.flow(env.futures[a.fid])
    raise _Reject(TypeCheckError("T-VALUE", f"not an atom: {a!r}"))


def _check_args(env: TypeEnv, rule: str, z: Union[SyncCall, AsyncCall]) -> TypeExpr:
    if z.fn not in env.funs or z.fn == MAIN:
        raise _Reject(TypeCheckError(rule, f"unknown function {z.fn!r}"))
    params, ret = env.funs[z.fn]
    if len(params) != len(z.args):
        raise _Reject(TypeCheckError(rule, f"{z.fn} expects {len(params)} argument(s), got {len(z.args)}"))
    for index, (arg, expected) in enumerate(zip(z.args, params)):
        actual = type_of_atom(env, arg)
        if not subtype(actual, expected):
            raise _Reject(TypeCheckError(rule, f"argument {index + 1} of {z.fn}: expected {expected}, found {actual}"))
    return ret


def _type_of_rhs(env: TypeEnv, z: Rhs) -> TypeExpr:
    if isinstance(z, BinOp):
        left = type_of_atom(env, z.left)
        right = type_of_atom(env, z.right)
        if not left.is_flow and not right.is_flow:
            for (expected_left, expected_right), result in OPERATORS[z.op]:
                if left.base is expected_left and right.base is expected_right:
                    return TypeExpr.basic(result)
        raise _Reject(TypeCheckError("T-EXPRESSION", f"operator {z.op} does not apply to {left} and {right}"))
    if isinstance(z, SyncCall):
        return _check_args(env, "T-INVK-SYNC", z)
    if isinstance(z, AsyncCall):
        return collapse(NestedFlow(_check_args(env, "T-INVK-ASYNC", z)))
    if isinstance(z, GetStar):
        # a basic operand lifts to a resolved flow first
        return TypeExpr.basic(type_of_atom(env, z.atom).base)
    if isinstance(z, Hole):
        if env.hole is None:
            raise _Reject(TypeCheckError("T-INVK-SYNC", "pending assignment without a callee frame"))
        return env.hole
    return type_of_atom(env, z)


def type_of_rhs(env: TypeEnv, z: Rhs, mode: ForwardMode = ForwardMode.STRICT) -> TypeExpr:
    """
    Type a right-hand side.

    Args:
        env (TypeEnv): the environment.
        z (Rhs): the right-hand side.
        mode (ForwardMode, optional): forward typing mode. Right-hand sides type the same in both modes.

    Raises:
        TypeCheckFailure: with the violated rule.

    Returns:
        TypeExpr: the type of z.
    """
    try:
        return _type_of_rhs(env, z)
    except _Reject as exc:
        raise TypeCheckFailure([exc.error]) from None


def _at(error: TypeCheckError, pos) -> TypeCheckError:
    return replace(error, pos=error.pos or pos)


def check_stmt(env: TypeEnv, fn: str, s: Stmt, mode: ForwardMode = ForwardMode.STRICT) -> List[TypeCheckError]:
    """
    Check a statement of function fn.

    Returns:
        list: the errors found, empty when s is well-typed.
    """
    errors = []
    ret = env.return_type(fn)
    for leaf in leaves(s):
        pos = getattr(leaf, "pos", None)
        try:
            if isinstance(leaf, Skip):
                continue
            if isinstance(leaf, Assign):
                if leaf.target not in env.vars:
                    raise _Reject(TypeCheckError("T-ASSIGN", f"unknown variable {leaf.target!r}"))
                actual = _type_of_rhs(env, leaf.rhs)
                expected = env.vars[leaf.target]
                if not subtype(actual, expected):
                    raise _Reject(TypeCheckError("T-ASSIGN", f"cannot assign {actual} to {leaf.target}: {expected}"))
            elif isinstance(leaf, If):
                cond = type_of_atom(env, leaf.cond)
                if cond != BOOL:
                    raise _Reject(TypeCheckError("T-IF", f"condition must be bool, found {cond}"))
                errors.extend(check_stmt(env, fn, leaf.then, mode))
                errors.extend(check_stmt(env, fn, leaf.else_, mode))
            elif isinstance(leaf, Return):
                actual = type_of_atom(env, leaf.atom)
                if not subtype(actual, ret):
                    raise _Reject(TypeCheckError("T-RETURN", f"{fn} returns {ret}, found {actual}"))
            elif isinstance(leaf, ForwardStar):
                actual = type_of_atom(env, leaf.atom)
                if mode is ForwardMode.STRICT:
                    if not ret.is_flow:
                        raise _Reject(TypeCheckError("T-FORWARD", f"forward* requires {fn} to return a Flow, found {ret}"))
                    if not subtype(actual, ret):
                        raise _Reject(TypeCheckError("T-FORWARD", f"forward* of {actual} in {fn} returning {ret}"))
                elif not subtype(actual, ret.lifted()):
                    raise _Reject(TypeCheckError("T-CEF-FORWARD", f"forward* of {actual} in {fn} returning {ret}"))
        except _Reject as exc:
            errors.append(_at(exc.error, pos))
    return errors


def _always_returns(s: Stmt) -> bool:
    for leaf in leaves(s):
        if isinstance(leaf, (Return, ForwardStar)):
            return True
        if isinstance(leaf, If) and _always_returns(leaf.then) and _always_returns(leaf.else_):
            return True
    return False


def _distinct(decls, scope: str, pos) -> List[TypeCheckError]:
    errors = []
    seen = set()
    for name, _ in decls:
        if name in seen:
            errors.append(TypeCheckError("T-METHOD", f"{name!r} declared twice in {scope}", pos))
        seen.add(name)
    return errors


def global_env(p: Program) -> TypeEnv:
    """Γ for the globals and function signatures of p, including main."""
    funs = {f.name: (tuple(t for _, t in f.params), f.return_type) for f in p.functions}
    funs[MAIN] = ((), MAIN_RETURN_TYPE)
    return TypeEnv(vars={name: t for name, t in p.globals}, funs=funs)


def function_env(env: TypeEnv, p: Program, fn: str) -> TypeEnv:
    if fn == MAIN:
        return env.extend(p.main_locals)
    fun = p.function(fn)
    return env.extend(fun.params + fun.locals)


def check_program(p: Program, mode: ForwardMode = ForwardMode.STRICT) -> TypeEnv:
    """
    Type check a normalized program.

    Args:
        p (Program): the program.
        mode (ForwardMode, optional): forward* typing. By default ForwardMode.STRICT.

    Raises:
        TypeCheckFailure: carrying every error found.

    Returns:
        TypeEnv: Γ for the globals and function signatures.
    """
    if p is None:
        raise ValueError("Program is required")

    env = global_env(p)
    errors = _distinct(p.globals, "globals", None)

    names = set()
    for fun in p.functions:
        if fun.name in names:
            errors.append(TypeCheckError("T-PROGRAM", f"function {fun.name!r} defined twice", fun.pos))
        names.add(fun.name)

    scopes = [(fun.name, fun.params + fun.locals, fun.body, fun.pos) for fun in p.functions]
    scopes.append((MAIN, p.main_locals, p.main_body, None))
    for name, decls, body, pos in scopes:
        errors.extend(_distinct(decls, name, pos))
        errors.extend(check_stmt(function_env(env, p, name), name, body, mode))
        if not _always_returns(body):
            errors.append(TypeCheckError("T-METHOD", f"{name} may finish without return or forward*", pos))
        if p.dialect is Dialect.DEF and contains_forward(body):
            errors.append(TypeCheckError("T-FORWARD", f"forward* in {name} is not part of the def dialect", pos))

    if errors:
        errors.sort(key=lambda e: e.pos or (0, 0))
        logger.debug(f"Type check failed with {len(errors)} error(s)")
        raise TypeCheckFailure(errors)
    return env


# Configuration typing


@dataclass
class ConfigTypeEnv:
    """
    Typing Ω of a runtime configuration.

    Attributes:
        globals: Γ of the program.
        pending: for each unresolved future, its stack of (Γ, function) bottom first.
        resolved: for each resolved or chained future, the type of its value.
    """

    globals: TypeEnv
    pending: Dict[int, Tuple[Tuple[TypeEnv, str], ...]] = field(default_factory=dict)
    resolved: Dict[int, TypeExpr] = field(default_factory=dict)

    def result_base(self, fid: int) -> Optional[BaseType]:
        if fid in self.resolved:
            return self.resolved[fid].base
        if fid in self.pending:
            _, fn = self.pending[fid][0]
            return self.globals.return_type(fn).base
        return None


def _result_type(env: TypeEnv, fn: str) -> TypeExpr:
    return collapse(NestedFlow(env.return_type(fn)))


def frame_env(env: TypeEnv, p: Program, frame) -> TypeEnv:
    """Γ of a runtime frame: the function scope plus the locals introduced by CEF-FORWARD-SYNC."""
    scoped = function_env(env, p, frame.fn)
    base = TypeExpr.basic(env.return_type(frame.fn).base)
    fresh = [(name, base) for name, _ in frame.locals.bindings if name.startswith(FRESH_PREFIX)]
    return scoped.extend(fresh)


def omega_for(p: Program, cn, mode: ForwardMode = ForwardMode.STRICT) -> ConfigTypeEnv:
    """
    Reconstruct Ω for a configuration reached from p.

    The type of a finished future is the type of an asynchronous call to the function
    it ran, so it is read off the spawn bookkeeping of the configuration.
    """
    from .runtime import Unresolved

    env = global_env(p)
    omega = ConfigTypeEnv(globals=env)
    for fid, state in enumerate(cn.futures):
        if isinstance(state, Unresolved):
            omega.pending[fid] = tuple((frame_env(env, p, frame), frame.fn) for frame in state.frames)
        else:
            omega.resolved[fid] = _result_type(env, cn.tasks[fid].fn)
    return omega


def _inhabits(futures: Mapping[int, BaseType], w: Value, t: TypeExpr) -> bool:
    if isinstance(w, FutRef):
        return t.is_flow and futures.get(w.fid) is t.base
    if isinstance(w, BoolLit):
        return t.base is BaseType.BOOL
    if isinstance(w, IntLit):
        return t.base is BaseType.INT
    return False


def check_configuration(omega: ConfigTypeEnv, cn, mode: ForwardMode = ForwardMode.STRICT) -> List[TypeCheckError]:
    """
    Check that a configuration is well-typed under Ω.

    Args:
        omega (ConfigTypeEnv): the configuration typing.
        cn (Configuration): the configuration.
        mode (ForwardMode, optional): forward* typing of runtime statements. By default ForwardMode.STRICT.

    Returns:
        list: the errors found, empty when cn is well-typed.
    """
    from .runtime import Chained, Resolved, Unresolved

    errors = []
    futures = {}
    for fid in range(len(cn.futures)):
        base = omega.result_base(fid)
        if base is None:
            errors.append(TypeCheckError("T-CONFIG", "future missing from the configuration typing", future=fid))
        else:
            futures[fid] = base

    for name, t in omega.globals.vars.items():
        if name not in cn.globals:
            errors.append(TypeCheckError("T-STORE", f"global {name!r} is not in the store"))
        elif not _inhabits(futures, cn.globals.get(name), t):
            errors.append(TypeCheckError("T-STORE", f"global {name} holds a value outside {t}"))

    for fid, state in enumerate(cn.futures):
        if isinstance(state, Unresolved):
            stack = omega.pending.get(fid)
            if stack is None or len(stack) != len(state.frames):
                errors.append(TypeCheckError("T-CONFIG", "frame stack does not match its typing", future=fid))
                continue
            for index, (frame, (env, fn)) in enumerate(zip(state.frames, stack)):
                if frame.fn != fn:
                    errors.append(TypeCheckError("T-CONFIG", f"frame runs {frame.fn}, typed as {fn}", future=fid))
                    continue
                for name, w in frame.locals.bindings:
                    if name not in env.vars or not _inhabits(futures, w, env.vars[name]):
                        errors.append(TypeCheckError("T-STORE", f"local {name} of {fn} is ill-typed", future=fid))
                hole = None
                if index + 1 < len(stack):
                    hole = env.return_type(stack[index + 1][1])
                frame_env_ = replace(env, futures=futures, hole=hole)
                for error in check_stmt(frame_env_, fn, frame.stmt, mode):
                    errors.append(replace(error, pos=None, future=fid))
        elif isinstance(state, Resolved):
            t = omega.resolved.get(fid)
            if t is not None and not _inhabits(futures, state.value, t):
                errors.append(TypeCheckError("T-FUTURE", f"value does not inhabit {t}", future=fid))
        elif isinstance(state, Chained):
            t = omega.resolved.get(fid)
            if t is not None and futures.get(state.target) is not t.base:
                errors.append(TypeCheckError("T-CHAIN", f"chained to f{state.target} of another result type", future=fid))
    return errors
