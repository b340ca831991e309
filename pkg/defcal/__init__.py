"""
defcal: parse, type check, run and compare programs of the DeF and DeF+F future calculi.

DeF is a small imperative language with asynchronous calls returning data-flow explicit
futures (`Flow[T]`) read with `get*`. DeF+F adds `forward*`, which delegates the
resolution of the current future to another one. This package implements both
semantics, the strict and flexible typings of forward*, the fwdElim translation to DeF,
exhaustive exploration of interleavings and a branching-bisimilarity check between a
program and its translation.

    >>> import defcal
    >>> p = defcal.load("delegate")
    >>> env = defcal.check_program(p)
    >>> defcal.run(p).outcome
    Terminated(result=IntLit(value=10))
"""
from .bisim import (
    TAU,
    BisimVerdict,
    LabelMode,
    ObsLabel,
    branching_bisimilar,
    compare_programs,
    observe,
    relabel,
    replay,
    verdict_to_json,
)
from .corpus import ackermann, delegation_chain, load, names
from .explore import (
    Counterexample,
    DepthExceeded,
    ExploreBounds,
    Lts,
    RoundRobin,
    SeededRandom,
    Trace,
    canonicalize,
    check_preservation,
    check_progress,
    check_write_once,
    digest,
    explore,
    lts_to_json,
    rule_counts,
    run,
    tau_cycles,
    trace_to_jsonl,
)
from .parser import ParseError, load_program, parse_program, parse_rhs
from .relation import RelationCounterexample, check_lemmas, check_r_is_bisimulation, in_relation_r, sequence_of_futures
from .runtime import (
    Chained,
    Configuration,
    Deadlocked,
    Frame,
    Resolved,
    Rule,
    Running,
    Store,
    Terminated,
    TransitionLabel,
    Unresolved,
    bind,
    check_integrity,
    classify,
    config_to_data,
    enabled_transitions,
    eval_expr,
    final_value,
    initial_configuration,
    store_update,
)
from .syntax import BaseType, Dialect, Program, TypeExpr, normalize, normalize_program, pretty
from .transform import fwd_elim, fwd_elim_stmt
from .typecheck import (
    ConfigTypeEnv,
    ForwardMode,
    TypeCheckError,
    TypeEnv,
    check_configuration,
    check_program,
    check_stmt,
    collapse,
    omega_for,
    subtype,
    type_of_rhs,
)
from .utils import (
    BisimulationError,
    DefcalError,
    IntegrityError,
    InternalError,
    ParseFailure,
    TranslationError,
    TypeCheckFailure,
    load_settings,
)
