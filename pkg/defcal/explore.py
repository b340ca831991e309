"""
Scheduled execution and bounded exhaustive exploration.

Explored states are canonical: futures are renumbered in spawn-lineage order
(shallower first, then by path), so configurations that differ only in the
identifiers an interleaving happened to allocate coincide. A future keeps its
lineage along a trace but may change number when a shallower future is spawned.
"""
from __future__ import annotations

import hashlib
import logging
import random
import warnings
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Callable, Dict, FrozenSet, List, Optional, Tuple, Union

import networkx as nx
from more_itertools import first
from sortedcontainers import SortedDict

from .runtime import (
    Chained,
    Configuration,
    Deadlocked,
    Resolved,
    Rule,
    Running,
    Store,
    Terminated,
    TransitionLabel,
    Unresolved,
    classify,
    config_to_data,
    enabled_transitions,
    initial_configuration,
    waits_on,
)
from .syntax import FutRef, Program, map_atoms
from .typecheck import ForwardMode, check_configuration, omega_for
from .utils import DEFAULT_MAX_DEPTH, DEFAULT_MAX_STATES, DEFAULT_MAX_STEPS, IntegrityError, canonical_dumps

logger = logging.getLogger(__name__)

"""
Rules whose steps are unobservable
"""
TAU_RULES = frozenset([Rule.GET_FUTURE, Rule.CHAIN_UPDATE])


@dataclass(frozen=True)
class RoundRobin:
    """Cycle through actor ids, taking the enabled step of the next actor after the last one served."""

    def __str__(self):
        return "round-robin"


@dataclass(frozen=True)
class SeededRandom:
    """Pick uniformly among enabled steps with a seeded generator."""

    seed: int

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"Seed must be a 64-bit unsigned integer, got {self.seed}")

    def __str__(self):
        return f"random(seed={self.seed})"


SchedulerPolicy = Union[RoundRobin, SeededRandom]


@dataclass(frozen=True)
class ExploreBounds:
    max_states: int = DEFAULT_MAX_STATES
    max_depth: int = DEFAULT_MAX_DEPTH

    def __post_init__(self):
        if self.max_states < 1:
            raise ValueError("max_states must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")


@dataclass
class Lts:
    """
    A finite labeled transition system over canonical configurations.

    Attributes:
        states: one canonical representative per state; state 0 is initial.
        edges: (source, label, target) triples; labels are TransitionLabels or, once relabeled, ObsLabels.
        truncated: whether a bound stopped the exploration.
        unexpanded: states whose successors were not computed because of a bound.
    """

    states: List[Configuration]
    edges: List[Tuple[int, Any, int]] = field(default_factory=list)
    truncated: bool = False
    unexpanded: FrozenSet[int] = frozenset()
    initial: int = 0

    @cached_property
    def digests(self) -> List[str]:
        return [digest(cn) for cn in self.states]

    @cached_property
    def successors(self) -> Dict[int, List[Tuple[Any, int]]]:
        out = {i: [] for i in range(len(self.states))}
        for source, label, target in self.edges:
            out[source].append((label, target))
        return out

    def leaves(self) -> List[int]:
        return [i for i, outgoing in self.successors.items() if not outgoing]


@dataclass(frozen=True)
class DepthExceeded:
    steps: int


@dataclass
class Trace:
    """
    A scheduled run.

    Attributes:
        initial: the initial configuration.
        steps: (label, configuration reached) pairs; configurations keep allocation-order ids.
        outcome: Terminated, Deadlocked or DepthExceeded.
        policy: the scheduler that produced it.
    """

    initial: Configuration
    steps: List[Tuple[TransitionLabel, Configuration]]
    outcome: Union[Terminated, Deadlocked, DepthExceeded]
    policy: SchedulerPolicy

    @property
    def final(self) -> Configuration:
        return self.steps[-1][1] if self.steps else self.initial

    @property
    def labels(self) -> List[TransitionLabel]:
        return [label for label, _ in self.steps]


@dataclass(frozen=True)
class Counterexample:
    state: int
    configuration: Configuration
    reasons: Tuple[str, ...]

    def __str__(self):
        return f"state {self.state}: " + "; ".join(self.reasons)


def _rename(mapping: Dict[int, int]) -> Callable:
    def rename_atom(a):
        if isinstance(a, FutRef):
            return FutRef(mapping[a.fid])
        return a

    return rename_atom


def _rename_store(store: Store, rename_atom) -> Store:
    return Store(tuple((name, rename_atom(w)) for name, w in store.bindings))


def canonicalize(cn: Configuration) -> Configuration:
    """
    Renumber futures in spawn-lineage order.

    Idempotent, and invariant under any renaming of future identifiers that keeps the
    lineage bookkeeping attached to its future.
    """
    order = sorted(range(len(cn.futures)), key=lambda fid: (len(cn.tasks[fid].lineage), cn.tasks[fid].lineage))
    if order == list(range(len(order))):
        return cn
    mapping = {old: new for new, old in enumerate(order)}
    rename_atom = _rename(mapping)

    futures = []
    for old in order:
        state = cn.futures[old]
        if isinstance(state, Unresolved):
            frames = tuple(
                replace(frame, locals=_rename_store(frame.locals, rename_atom), stmt=map_atoms(frame.stmt, rename_atom))
                for frame in state.frames
            )
            futures.append(Unresolved(frames))
        elif isinstance(state, Resolved):
            futures.append(Resolved(rename_atom(state.value)))
        else:
            futures.append(Chained(mapping[state.target]))
    return replace(
        cn,
        globals=_rename_store(cn.globals, rename_atom),
        futures=tuple(futures),
        tasks=tuple(cn.tasks[old] for old in order),
    )


def digest(cn: Configuration) -> str:
    """Hex SHA-256 of the canonical serialization of cn."""
    return hashlib.sha256(canonical_dumps(config_to_data(canonicalize(cn))).encode("utf-8")).hexdigest()


def check_write_once(before: Configuration, after: Configuration, label: TransitionLabel) -> None:
    """
    Raises:
        IntegrityError: if a resolved future changed or a chained future went anywhere but to resolved.
    """
    for fid, old in enumerate(before.futures):
        new = after.futures[fid] if fid < len(after.futures) else None
        if isinstance(old, Resolved) and new != old:
            raise IntegrityError(f"{label}: resolved future f{fid} was rewritten")
        if isinstance(old, Chained) and not (new == old or isinstance(new, Resolved)):
            raise IntegrityError(f"{label}: chained future f{fid} went back to running")


def _pick_round_robin(enabled, cursor: int):
    ranked = sorted(enabled, key=lambda step: (step[0].actor, step[0].rule.order))
    return first((step for step in ranked if step[0].actor >= cursor), ranked[0])


def run(
    p: Program,
    policy: Optional[SchedulerPolicy] = None,
    mode: ForwardMode = ForwardMode.STRICT,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> Trace:
    """
    Execute one trace of p.

    Args:
        p (Program): a well-typed, normalized program.
        policy (SchedulerPolicy, optional): the scheduler. By default RoundRobin().
        mode (ForwardMode, optional): semantics of a synchronous forward*. By default ForwardMode.STRICT.
        max_steps (int, optional): step budget. By default DEFAULT_MAX_STEPS.

    Raises:
        ValueError: if max_steps is not positive.

    Returns:
        Trace: the steps taken and how the run ended.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be positive")
    policy = policy or RoundRobin()
    rng = random.Random(policy.seed) if isinstance(policy, SeededRandom) else None

    cn = initial_configuration(p)
    initial = cn
    steps = []
    cursor = 0
    while len(steps) < max_steps:
        enabled = enabled_transitions(p, cn, mode)
        if not enabled:
            break
        if rng is not None:
            label, cn = rng.choice(enabled)
        else:
            label, cn = _pick_round_robin(enabled, cursor)
            cursor = label.actor + 1
        steps.append((label, cn))

    status = classify(cn)
    outcome = DepthExceeded(len(steps)) if isinstance(status, Running) else status
    logger.info(f"Run under {policy} ended after {len(steps)} steps: {type(outcome).__name__}")
    return Trace(initial=initial, steps=steps, outcome=outcome, policy=policy)


def explore(p: Program, bounds: Optional[ExploreBounds] = None, mode: ForwardMode = ForwardMode.STRICT) -> Lts:
    """
    Breadth-first closure of the canonical states reachable from the initial configuration.

    Args:
        p (Program): a well-typed, normalized program.
        bounds (ExploreBounds, optional): state and depth limits. By default ExploreBounds().
        mode (ForwardMode, optional): semantics of a synchronous forward*. By default ForwardMode.STRICT.

    Raises:
        IntegrityError: if some step rewrites a resolved future.

    Returns:
        Lts: the explored system, flagged as truncated when a bound was hit.
    """
    bounds = bounds or ExploreBounds()
    start = canonicalize(initial_configuration(p))
    index = {start: 0}
    states = [start]
    depth = [0]
    edges = []
    unexpanded = set()
    queue = deque([0])

    while queue:
        i = queue.popleft()
        cn = states[i]
        steps = enabled_transitions(p, cn, mode)
        if depth[i] >= bounds.max_depth:
            # a leaf at the bound is complete
            if steps:
                unexpanded.add(i)
            continue
        for label, successor in steps:
            check_write_once(cn, successor, label)
            successor = canonicalize(successor)
            j = index.get(successor)
            if j is None:
                if len(states) >= bounds.max_states:
                    unexpanded.add(i)
                    continue
                j = len(states)
                index[successor] = j
                states.append(successor)
                depth.append(depth[i] + 1)
                queue.append(j)
            edges.append((i, label, j))

    truncated = bool(unexpanded)
    if truncated:
        logger.warning(f"Exploration truncated at {len(states)} states (bounds {bounds})")
    logger.info(f"Explored {len(states)} states and {len(edges)} edges")
    return Lts(states=states, edges=edges, truncated=truncated, unexpanded=frozenset(unexpanded))


def check_preservation(p: Program, lts: Lts, mode: ForwardMode = ForwardMode.STRICT) -> Optional[Counterexample]:
    """
    Check every retained state against the configuration typing reconstructed for it.

    Returns:
        Counterexample: the first ill-typed state, or None when every state is well-typed.
    """
    for i, cn in enumerate(lts.states):
        errors = check_configuration(omega_for(p, cn, mode), cn, mode)
        if errors:
            return Counterexample(i, cn, tuple(str(e) for e in errors))
    return None


def check_progress(lts: Lts) -> Optional[Counterexample]:
    """
    Check that every state without successors is terminated or blocked on get* of unresolved futures.

    Returns:
        Counterexample: the first violating state, or None.
    """
    if lts.truncated:
        warnings.warn("Progress checked on a truncated exploration; the result is advisory", RuntimeWarning)
    for i in lts.leaves():
        if i in lts.unexpanded:
            continue
        cn = lts.states[i]
        status = classify(cn)
        if isinstance(status, Terminated):
            continue
        if isinstance(status, Running):
            return Counterexample(i, cn, ("state can step but has no transitions",))
        stuck = [
            fid
            for fid, state in enumerate(cn.futures)
            if not isinstance(state, Resolved) and waits_on(cn, fid) is None
        ]
        if stuck:
            return Counterexample(i, cn, tuple(f"f{fid} is stuck without waiting on a future" for fid in stuck))
    return None


def tau_cycles(lts: Lts, is_tau: Optional[Callable[[Any], bool]] = None) -> List[List[int]]:
    """
    The groups of states connected by cycles of unobservable steps.

    Args:
        lts (Lts): the transition system.
        is_tau (callable, optional): predicate on labels. By default GET-FUTURE and CHAIN-UPDATE steps.

    Returns:
        list: sorted state lists, one per strongly connected τ-component with a cycle.
    """
    if is_tau is None:
        is_tau = lambda label: label.rule in TAU_RULES  # noqa: E731
    graph = nx.DiGraph()
    graph.add_edges_from((s, t) for s, label, t in lts.edges if is_tau(label))
    cycles = []
    for component in nx.strongly_connected_components(graph):
        if len(component) > 1 or any(graph.has_edge(s, s) for s in component):
            cycles.append(sorted(component))
    return sorted(cycles)


def rule_counts(trace: Trace, actor: Optional[int] = None) -> SortedDict:
    """Number of steps per rule name, optionally restricted to one actor."""
    counts = SortedDict()
    for label in trace.labels:
        if actor is None or label.actor == actor:
            counts[label.rule.value] = counts.get(label.rule.value, 0) + 1
    return counts


# Serialization


def trace_to_jsonl(trace: Trace) -> str:
    """One JSON object per line: step 0 is the initial configuration, then every step taken."""
    lines = [canonical_dumps({"step": 0, "rule": None, "actor": None, "configuration": config_to_data(trace.initial)})]
    for index, (label, cn) in enumerate(trace.steps, start=1):
        lines.append(
            canonical_dumps({"step": index, "rule": label.rule.value, "actor": label.actor, "configuration": config_to_data(cn)})
        )
    return "\n".join(lines) + "\n"


def _rule_name(label) -> str:
    return getattr(label.rule, "value", label.rule)


def lts_to_json(lts: Lts) -> Dict[str, Any]:
    return {
        "states": lts.digests,
        "initial": lts.initial,
        "edges": [[source, _rule_name(label), label.actor, target] for source, label, target in lts.edges],
        "truncated": lts.truncated,
    }
