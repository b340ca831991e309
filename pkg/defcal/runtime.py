"""
Runtime configurations and the labeled one-step transition relation of DeF and DeF+F.

A configuration is an immutable value: the global store, the futures indexed by
identifier, and per-future spawn bookkeeping (the function a task runs and its
lineage path) that no rule reads. `enabled_transitions` lists every enabled step;
at most one rule applies to each future, so a label identifies its successor.
"""
from __future__ import annotations

import logging
import operator
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Tuple, Union

import networkx as nx

from .syntax import (
    MAIN,
    OPERATORS,
    Assign,
    AsyncCall,
    BaseType,
    BinOp,
    BoolLit,
    Dialect,
    Expr,
    ForwardStar,
    FutRef,
    GetStar,
    Hole,
    If,
    IntLit,
    Program,
    Return,
    Seq,
    Skip,
    Stmt,
    SyncCall,
    TypeExpr,
    Value,
    Var,
    iter_atoms,
    normalize,
    pretty_stmt,
    seq,
)
from .typecheck import FRESH_PREFIX, ForwardMode
from .utils import IntegrityError, InternalError

logger = logging.getLogger(__name__)


class Rule(Enum):
    """
    Names of the transition rules, in tie-breaking order.

    To use any value from this enumeration, use Rule.<attribute> i.e. defcal.Rule.GET_FUTURE
    """
    SKIP = "SKIP"
    ASSIGN = "ASSIGN"
    IF_TRUE = "IF-TRUE"
    IF_FALSE = "IF-FALSE"
    INVK_SYNC = "INVK-SYNC"
    INVK_ASYNC = "INVK-ASYNC"
    RETURN_SYNC = "RETURN-SYNC"
    RETURN_ASYNC = "RETURN-ASYNC"
    GET_FUTURE = "GET-FUTURE"
    GET_DATA = "GET-DATA"
    FORWARD_SYNC = "FORWARD-SYNC"
    FORWARD_ASYNC = "FORWARD-ASYNC"
    FORWARD_DATA = "FORWARD-DATA"
    CHAIN_UPDATE = "CHAIN-UPDATE"
    CEF_FORWARD_SYNC = "CEF-FORWARD-SYNC"

    @property
    def order(self) -> int:
        return _RULE_ORDER[self]


_RULE_ORDER = {rule: index for index, rule in enumerate(Rule)}

"""
Rules that only exist in DeF+F
"""
FORWARD_RULES = frozenset([Rule.FORWARD_SYNC, Rule.FORWARD_ASYNC, Rule.FORWARD_DATA, Rule.CHAIN_UPDATE, Rule.CEF_FORWARD_SYNC])


@dataclass(frozen=True)
class TransitionLabel:
    rule: Rule
    actor: int

    def __str__(self):
        return f"{self.rule.value} f{self.actor}"


@dataclass(frozen=True)
class Store:
    """A finite map from variable names to values, kept sorted by name."""

    bindings: Tuple[Tuple[str, Value], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[str, Value]) -> "Store":
        return cls(tuple(sorted(mapping.items())))

    @cached_property
    def _index(self) -> Dict[str, Value]:
        return dict(self.bindings)

    def __contains__(self, name) -> bool:
        return name in self._index

    def get(self, name: str, default=None) -> Optional[Value]:
        return self._index.get(name, default)

    def set(self, name: str, w: Value) -> "Store":
        updated = dict(self._index)
        updated[name] = w
        return Store.of(updated)

    def names(self):
        return [name for name, _ in self.bindings]


@dataclass(frozen=True)
class Frame:
    locals: Store
    stmt: Stmt
    fn: str


@dataclass(frozen=True)
class Unresolved:
    """A running task; the top of the stack is the last frame."""

    frames: Tuple[Frame, ...]


@dataclass(frozen=True)
class Resolved:
    value: Value


@dataclass(frozen=True)
class Chained:
    target: int


FutureState = Union[Unresolved, Resolved, Chained]


@dataclass(frozen=True)
class TaskInfo:
    """Spawn bookkeeping: the function a future's task runs and its path in the spawn tree."""

    lineage: Tuple[int, ...]
    fn: str


@dataclass(frozen=True)
class Configuration:
    globals: Store
    futures: Tuple[FutureState, ...]
    tasks: Tuple[TaskInfo, ...]
    dialect: Dialect = Dialect.DEF

    @property
    def next_id(self) -> int:
        return len(self.futures)

    def with_future(self, fid: int, state: FutureState) -> "Configuration":
        futures = list(self.futures)
        futures[fid] = state
        return replace(self, futures=tuple(futures))


@dataclass(frozen=True)
class Running:
    pass


@dataclass(frozen=True)
class Terminated:
    """Every future is resolved; `result` is f0's value followed down to a basic value where possible."""

    result: Optional[Value] = None


@dataclass(frozen=True)
class Deadlocked:
    """
    Global quiescence with unresolved work.

    Attributes:
        blocked: wait-for edges (waiting future, awaited future).
        cycle: one cycle of the wait-for graph, when there is one.
    """

    blocked: Tuple[Tuple[int, int], ...]
    cycle: Tuple[Tuple[int, int], ...] = field(default=())


Status = Union[Running, Terminated, Deadlocked]


def init_value(t: TypeExpr) -> Value:
    """The initial value of a variable; a flow starts as an already resolved future holding 0 or false."""
    if t.base is BaseType.BOOL:
        return BoolLit(False)
    return IntLit(0)


def _init_store(decls) -> Store:
    return Store.of({name: init_value(t) for name, t in decls})


def initial_configuration(p: Program) -> Configuration:
    """The configuration a ▷ f0({ℓ | s}) running the main body, all variables at their initial values."""
    main = Frame(_init_store(p.main_locals), normalize(p.main_body), MAIN)
    return Configuration(
        globals=_init_store(p.globals),
        futures=(Unresolved((main,)),),
        tasks=(TaskInfo((), MAIN),),
        dialect=p.dialect,
    )


_APPLY = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "==": operator.eq,
    "<": operator.lt,
    "<=": operator.le,
    "&&": lambda a, b: a and b,
    "||": lambda a, b: a or b,
}


def _lookup(globals: Store, locals: Store, name: str) -> Value:
    if name in locals:
        return locals.get(name)
    if name in globals:
        return globals.get(name)
    raise InternalError(f"Variable {name!r} is not bound")


def _base_of(w: Value) -> BaseType:
    if isinstance(w, BoolLit):
        return BaseType.BOOL
    if isinstance(w, IntLit):
        return BaseType.INT
    raise InternalError(f"Operator applied to a future reference {w!r}")


def eval_expr(globals: Store, locals: Store, e: Expr) -> Value:
    """
    Evaluate an atom or a binary operation in a + ℓ; locals shadow globals.

    Raises:
        InternalError: for an unbound variable or an operator applied to a future reference.
    """
    if isinstance(e, Var):
        return _lookup(globals, locals, e.name)
    if isinstance(e, (IntLit, BoolLit, FutRef)):
        return e
    if isinstance(e, BinOp):
        left = eval_expr(globals, locals, e.left)
        right = eval_expr(globals, locals, e.right)
        kinds = (_base_of(left), _base_of(right))
        for signature, result in OPERATORS[e.op]:
            if signature == kinds:
                value = _APPLY[e.op](left.value, right.value)
                return BoolLit(bool(value)) if result is BaseType.BOOL else IntLit(int(value))
        raise InternalError(f"Operator {e.op} does not apply to {left!r} and {right!r}")
    raise InternalError(f"Cannot evaluate {e!r}")


def bind(p: Program, fn: str, args) -> Frame:
    """A fresh frame for fn: parameters bound to args, locals at their initial values."""
    fun = p.function(fn)
    if fun is None:
        raise InternalError(f"Function {fn!r} is not defined")
    values = {name: init_value(t) for name, t in fun.locals}
    values.update({name: w for (name, _), w in zip(fun.params, args)})
    return Frame(Store.of(values), normalize(fun.body), fn)


def store_update(globals: Store, locals: Store, x: str, w: Value) -> Tuple[Store, Store]:
    """(a + ℓ)[x ↦ w]: updates ℓ when x is local, a otherwise."""
    if x in locals:
        return globals, locals.set(x, w)
    if x in globals:
        return globals.set(x, w), locals
    raise InternalError(f"Variable {x!r} is not declared")


def future_refs(cn: Configuration):
    """Yield every future identifier referenced by cn."""
    for _, w in cn.globals.bindings:
        if isinstance(w, FutRef):
            yield w.fid
    for state in cn.futures:
        if isinstance(state, Unresolved):
            for frame in state.frames:
                for _, w in frame.locals.bindings:
                    if isinstance(w, FutRef):
                        yield w.fid
                for a in iter_atoms(frame.stmt):
                    if isinstance(a, FutRef):
                        yield a.fid
        elif isinstance(state, Resolved):
            if isinstance(state.value, FutRef):
                yield state.value.fid
        else:
            yield state.target


def check_integrity(cn: Configuration) -> None:
    """
    Raises:
        IntegrityError: when a future reference dangles, the bookkeeping is out of step or a stack is empty.
    """
    if len(cn.tasks) != len(cn.futures):
        raise IntegrityError(f"{len(cn.futures)} futures but {len(cn.tasks)} task records")
    for fid, state in enumerate(cn.futures):
        if isinstance(state, Unresolved) and not state.frames:
            raise IntegrityError(f"Future f{fid} is unresolved with an empty stack")
        if isinstance(state, Chained) and cn.dialect is Dialect.DEF:
            raise IntegrityError(f"Future f{fid} is chained in a def configuration")
    for fid in future_refs(cn):
        if not 0 <= fid < len(cn.futures):
            raise IntegrityError(f"Dangling future reference f{fid}")


def _child_index(cn: Configuration, parent: Tuple[int, ...]) -> int:
    depth = len(parent) + 1
    return sum(1 for task in cn.tasks if len(task.lineage) == depth and task.lineage[:-1] == parent)


def _set_top(cn: Configuration, fid: int, frames, globals: Optional[Store] = None) -> Configuration:
    cn = cn.with_future(fid, Unresolved(tuple(frames)))
    if globals is not None and globals is not cn.globals:
        cn = replace(cn, globals=globals)
    return cn


def _deliver(cn: Configuration, fid: int, frames, w: Value) -> Optional[Configuration]:
    """Pop the top frame and fill the caller's pending assignment with w."""
    caller = frames[-2]
    pending = caller.stmt
    if not (isinstance(pending, Seq) and isinstance(pending.first, Assign) and isinstance(pending.first.rhs, Hole)):
        raise IntegrityError(f"Future f{fid}: caller of {frames[-1].fn} has no pending assignment")
    globals, locals = store_update(cn.globals, caller.locals, pending.first.target, w)
    return _set_top(cn, fid, frames[:-2] + (Frame(locals, pending.second, caller.fn),), globals)


def _step_task(p: Program, cn: Configuration, fid: int, mode: ForwardMode) -> Optional[Tuple[Rule, Configuration]]:
    frames = cn.futures[fid].frames
    top = frames[-1]
    if not isinstance(top.stmt, Seq):
        return None
    head, rest = top.stmt.first, top.stmt.second
    globals, locals = cn.globals, top.locals

    if isinstance(head, Skip):
        return Rule.SKIP, _set_top(cn, fid, frames[:-1] + (Frame(locals, rest, top.fn),))

    if isinstance(head, Assign):
        z = head.rhs
        if isinstance(z, Hole):
            return None
        if isinstance(z, SyncCall):
            args = [eval_expr(globals, locals, a) for a in z.args]
            caller = Frame(locals, Seq(Assign(head.target, Hole(), pos=head.pos), rest), top.fn)
            return Rule.INVK_SYNC, _set_top(cn, fid, frames[:-1] + (caller, bind(p, z.fn, args)))
        if isinstance(z, AsyncCall):
            args = [eval_expr(globals, locals, a) for a in z.args]
            new_id = cn.next_id
            parent = cn.tasks[fid].lineage
            task = TaskInfo(parent + (_child_index(cn, parent),), z.fn)
            globals, locals = store_update(globals, locals, head.target, FutRef(new_id))
            cn = replace(
                cn,
                futures=cn.futures + (Unresolved((bind(p, z.fn, args),)),),
                tasks=cn.tasks + (task,),
            )
            return Rule.INVK_ASYNC, _set_top(cn, fid, frames[:-1] + (Frame(locals, rest, top.fn),), globals)
        if isinstance(z, GetStar):
            w = eval_expr(globals, locals, z.atom)
            if isinstance(w, FutRef):
                target = cn.futures[w.fid]
                if not isinstance(target, Resolved):
                    return None
                advanced = Seq(Assign(head.target, GetStar(target.value), pos=head.pos), rest)
                return Rule.GET_FUTURE, _set_top(cn, fid, frames[:-1] + (Frame(locals, advanced, top.fn),))
            globals, locals = store_update(globals, locals, head.target, w)
            return Rule.GET_DATA, _set_top(cn, fid, frames[:-1] + (Frame(locals, rest, top.fn),), globals)
        w = eval_expr(globals, locals, z)
        globals, locals = store_update(globals, locals, head.target, w)
        return Rule.ASSIGN, _set_top(cn, fid, frames[:-1] + (Frame(locals, rest, top.fn),), globals)

    if isinstance(head, If):
        cond = eval_expr(globals, locals, head.cond)
        if not isinstance(cond, BoolLit):
            raise InternalError(f"Condition evaluated to {cond!r}")
        branch, rule = (head.then, Rule.IF_TRUE) if cond.value else (head.else_, Rule.IF_FALSE)
        return rule, _set_top(cn, fid, frames[:-1] + (Frame(locals, normalize(Seq(branch, rest)), top.fn),))

    if isinstance(head, Return):
        w = eval_expr(globals, locals, head.atom)
        if len(frames) > 1:
            return Rule.RETURN_SYNC, _deliver(cn, fid, frames, w)
        return Rule.RETURN_ASYNC, cn.with_future(fid, Resolved(w))

    if isinstance(head, ForwardStar):
        w = eval_expr(globals, locals, head.atom)
        if len(frames) == 1:
            if isinstance(w, FutRef):
                return Rule.FORWARD_ASYNC, cn.with_future(fid, Chained(w.fid))
            return Rule.FORWARD_DATA, cn.with_future(fid, Resolved(w))
        if mode is ForwardMode.STRICT:
            # pops and propagates in one step, like the RETURN-SYNC it stands for
            return Rule.FORWARD_SYNC, _deliver(cn, fid, frames, w)
        fresh = f"{FRESH_PREFIX}{sum(1 for name in locals.names() if name.startswith(FRESH_PREFIX))}"
        fun = p.function(top.fn)
        base = fun.return_type.base if fun is not None else BaseType.INT
        locals = locals.set(fresh, init_value(TypeExpr.basic(base)))
        rewritten = seq(Assign(fresh, GetStar(w), pos=head.pos), Return(Var(fresh), pos=head.pos), rest)
        return Rule.CEF_FORWARD_SYNC, _set_top(cn, fid, frames[:-1] + (Frame(locals, rewritten, top.fn),))

    raise InternalError(f"Unexpected statement {head!r}")


def enabled_transitions(
    p: Program, cn: Configuration, mode: ForwardMode = ForwardMode.STRICT
) -> List[Tuple[TransitionLabel, Configuration]]:
    """
    Every enabled transition of a configuration.

    Args:
        p (Program): the program being run; supplies function bodies for bind.
        cn (Configuration): the configuration; never mutated.
        mode (ForwardMode, optional): semantics of a synchronous forward*. By default ForwardMode.STRICT.

    Raises:
        IntegrityError: if cn is malformed.

    Returns:
        list: (label, successor) pairs ordered by actor.
    """
    check_integrity(cn)
    out = []
    for fid, state in enumerate(cn.futures):
        if isinstance(state, Unresolved):
            step = _step_task(p, cn, fid, mode)
            if step is not None:
                rule, successor = step
                out.append((TransitionLabel(rule, fid), successor))
        elif isinstance(state, Chained):
            target = cn.futures[state.target]
            if isinstance(target, Resolved):
                out.append((TransitionLabel(Rule.CHAIN_UPDATE, fid), cn.with_future(fid, Resolved(target.value))))
    return out


def waits_on(cn: Configuration, fid: int) -> Optional[int]:
    """The future a blocked task waits on, or None when the task is not blocked on a get*."""
    state = cn.futures[fid]
    if isinstance(state, Chained):
        return state.target
    if not isinstance(state, Unresolved):
        return None
    top = state.frames[-1]
    if not isinstance(top.stmt, Seq):
        return None
    head = top.stmt.first
    if isinstance(head, Assign) and isinstance(head.rhs, GetStar):
        try:
            w = eval_expr(cn.globals, top.locals, head.rhs.atom)
        except InternalError:
            return None
        if isinstance(w, FutRef) and not isinstance(cn.futures[w.fid], Resolved):
            return w.fid
    return None


def _can_step(cn: Configuration, fid: int) -> bool:
    state = cn.futures[fid]
    if isinstance(state, Chained):
        return isinstance(cn.futures[state.target], Resolved)
    if not isinstance(state, Unresolved):
        return False
    top = state.frames[-1]
    if not isinstance(top.stmt, Seq):
        return False
    head = top.stmt.first
    if isinstance(head, Assign) and isinstance(head.rhs, Hole):
        return False
    return waits_on(cn, fid) is None


def classify(cn: Configuration) -> Status:
    """
    Classify a configuration as running, terminated or deadlocked.

    A configuration is deadlocked when nothing can step while some future is unresolved
    or chained to a future that never resolves. The wait-for edges pair each blocked
    future with the future it waits on.
    """
    if any(_can_step(cn, fid) for fid in range(len(cn.futures))):
        return Running()
    pending = [fid for fid, state in enumerate(cn.futures) if not isinstance(state, Resolved)]
    if not pending:
        return Terminated(final_value(cn))
    edges = []
    for fid in pending:
        target = waits_on(cn, fid)
        if target is not None:
            edges.append((fid, target))
    graph = nx.DiGraph(edges)
    try:
        cycle = tuple((u, v) for u, v, *_ in nx.find_cycle(graph, orientation="original"))
    except nx.NetworkXNoCycle:
        cycle = ()
    return Deadlocked(tuple(edges), cycle)


def final_value(cn: Configuration) -> Optional[Value]:
    """f0's value with Resolved future references followed down to a basic value when possible."""
    state = cn.futures[0]
    seen = set()
    while isinstance(state, Resolved):
        w = state.value
        if not isinstance(w, FutRef):
            return w
        if w.fid in seen:
            return w
        seen.add(w.fid)
        state = cn.futures[w.fid]
    return None


# Serialization


def value_to_data(w: Value):
    if isinstance(w, FutRef):
        return f"f{w.fid}"
    return w.value


def store_to_data(store: Store) -> Dict[str, object]:
    return {name: value_to_data(w) for name, w in store.bindings}


def config_to_data(cn: Configuration) -> Dict[str, object]:
    """JSON-ready form of a configuration: futures by id, stores with sorted keys, statements as text."""
    futures = []
    for fid, (state, task) in enumerate(zip(cn.futures, cn.tasks)):
        entry = {"id": fid, "fn": task.fn, "lineage": list(task.lineage)}
        if isinstance(state, Unresolved):
            entry["state"] = "unresolved"
            entry["frames"] = [
                {"fn": frame.fn, "locals": store_to_data(frame.locals), "stmt": pretty_stmt(frame.stmt)}
                for frame in state.frames
            ]
        elif isinstance(state, Resolved):
            entry["state"] = "resolved"
            entry["value"] = value_to_data(state.value)
        else:
            entry["state"] = "chained"
            entry["target"] = f"f{state.target}"
        futures.append(entry)
    return {"dialect": cn.dialect.value, "globals": store_to_data(cn.globals), "futures": futures}
