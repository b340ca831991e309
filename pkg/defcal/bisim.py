"""
Branching bisimilarity between the transition systems of a DeF+F program and its DeF translation.

GET-FUTURE and CHAIN-UPDATE steps are unobservable; the forward rules are observed as
the return rules they stand for. The equivalence is the divergence-insensitive branching
bisimilarity, computed by signature refinement on the disjoint union of both systems.
"""
from __future__ import annotations

import logging
import warnings
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import networkx as nx

from .explore import ExploreBounds, Lts, explore
from .runtime import Rule, TransitionLabel
from .syntax import Program
from .transform import fwd_elim
from .typecheck import ForwardMode
from .utils import DEFAULT_MAX_BLOCKS, BisimulationError

logger = logging.getLogger(__name__)

"""
WITNESS SEARCH LIMIT: pairs of state sets visited while looking for a distinguishing trace
"""
WITNESS_SEARCH_LIMIT = 100000

TAU_NAME = "tau"

_OBSERVED_AS = {
    Rule.GET_FUTURE: TAU_NAME,
    Rule.CHAIN_UPDATE: TAU_NAME,
    Rule.FORWARD_ASYNC: Rule.RETURN_ASYNC.value,
    Rule.FORWARD_DATA: Rule.RETURN_ASYNC.value,
    Rule.FORWARD_SYNC: Rule.RETURN_SYNC.value,
}


class LabelMode(Enum):
    """
    Observable label granularity.

    Attributes:
        FINE: rule name and acting future.
        COARSE: rule name only.
    """
    FINE = "fine"
    COARSE = "coarse"


@dataclass(frozen=True)
class ObsLabel:
    """An observable label, or τ when rule is "tau"."""

    rule: str
    actor: Optional[int] = None

    @property
    def is_tau(self) -> bool:
        return self.rule == TAU_NAME

    def __str__(self):
        if self.actor is None:
            return self.rule
        return f"{self.rule} f{self.actor}"


TAU = ObsLabel(TAU_NAME)


@dataclass(frozen=True)
class BisimVerdict:
    """
    Outcome of a bisimilarity check.

    Attributes:
        bisimilar: whether the initial states share a block.
        pair: (state in the first system, state in the second) where the systems part ways. For a "trace"
            witness, one of them takes the last label and the other, reached by the same prefix, cannot.
        witness: for a "trace" witness, a shortest observable sequence one system can perform and the other
            cannot. For a "branching" one, a sequence both can perform, after which one state of the pair is
            reached silently and the last label is weakly enabled in exactly one of them; no state of the
            other system reached by the prefix offers the same labels. Empty when the systems differ only
            in branching structure that neither check exposes.
        kind: "trace" or "branching"; empty when bisimilar.
        advisory: set when either system was truncated.
        blocks: number of blocks of the final partition.
    """

    bisimilar: bool
    pair: Optional[Tuple[int, int]] = None
    witness: Tuple[ObsLabel, ...] = ()
    kind: str = ""
    advisory: bool = False
    blocks: int = 0


def observe(label: TransitionLabel, labels: LabelMode = LabelMode.FINE) -> ObsLabel:
    name = _OBSERVED_AS.get(label.rule, label.rule.value)
    if name == TAU_NAME:
        return TAU
    return ObsLabel(name, label.actor if labels is LabelMode.FINE else None)


def relabel(lts: Lts, labels: LabelMode = LabelMode.FINE) -> Lts:
    """Map every edge label to its observable form; states and structure are shared."""
    edges = [(s, observe(label, labels) if isinstance(label, TransitionLabel) else label, t) for s, label, t in lts.edges]
    return Lts(states=lts.states, edges=edges, truncated=lts.truncated, unexpanded=lts.unexpanded, initial=lts.initial)


def _partition(n: int, edges, max_blocks: int) -> List[int]:
    if n > max_blocks:
        raise BisimulationError(f"{n} states exceed the block limit of {max_blocks}")
    outgoing = [[] for _ in range(n)]
    tau_edges = []
    for s, a, t in edges:
        outgoing[s].append((a, t))
        if a.is_tau:
            tau_edges.append((s, t))

    block = [0] * n
    count = 1
    rounds = 0
    while True:
        rounds += 1
        inert = nx.DiGraph()
        inert.add_nodes_from(range(n))
        inert.add_edges_from((s, t) for s, t in tau_edges if block[s] == block[t])
        condensed = nx.condensation(inert)
        members = condensed.graph["mapping"]

        signatures = {}
        for component in reversed(list(nx.topological_sort(condensed))):
            signature = set()
            for s in condensed.nodes[component]["members"]:
                for a, t in outgoing[s]:
                    if not (a.is_tau and block[s] == block[t]):
                        signature.add((a, block[t]))
            for successor in condensed.successors(component):
                signature |= signatures[successor]
            signatures[component] = frozenset(signature)

        keys = {}
        refined = [keys.setdefault((block[s], signatures[members[s]]), len(keys)) for s in range(n)]
        logger.debug(f"Refinement round {rounds}: {len(keys)} blocks")
        if len(keys) == count:
            return refined
        block, count = refined, len(keys)


class _Weak:
    """Weak-step helper over one relabeled system."""

    def __init__(self, lts: Lts):
        self.successors = lts.successors
        self.tau = nx.DiGraph()
        self.tau.add_nodes_from(range(len(lts.states)))
        self.tau.add_edges_from((s, t) for s, a, t in lts.edges if a.is_tau)
        self._closures: Dict[int, FrozenSet[int]] = {}

    def closure(self, states) -> FrozenSet[int]:
        out = set()
        for s in states:
            if s not in self._closures:
                self._closures[s] = frozenset(nx.descendants(self.tau, s) | {s})
            out |= self._closures[s]
        return frozenset(out)

    def labels(self, states) -> set:
        return {a for s in states for a, _ in self.successors[s] if not a.is_tau}

    def after(self, states, a: ObsLabel) -> FrozenSet[int]:
        return self.closure(t for s in states for b, t in self.successors[s] if b == a)

    def ready(self, s: int) -> FrozenSet[ObsLabel]:
        """Observable labels s can take after τ-steps only."""
        return frozenset(self.labels(self.closure([s])))


def _matched(weak_f: _Weak, weak_d: _Weak, start):
    """Pairs of weak derivative sets reached by a common observable trace, shortest trace first."""
    seen = {start}
    queue = deque([(start, ())])
    while queue and len(seen) < WITNESS_SEARCH_LIMIT:
        (sf, sd), path = queue.popleft()
        yield sf, sd, path
        for a in sorted(weak_f.labels(sf) | weak_d.labels(sd), key=str):
            nf, nd = weak_f.after(sf, a), weak_d.after(sd, a)
            if nf and nd and (nf, nd) not in seen:
                seen.add((nf, nd))
                queue.append(((nf, nd), path + (a,)))


def _trace_witness(lts_f: Lts, lts_d: Lts):
    weak_f, weak_d = _Weak(lts_f), _Weak(lts_d)
    start = (weak_f.closure([lts_f.initial]), weak_d.closure([lts_d.initial]))
    for sf, sd, path in _matched(weak_f, weak_d, start):
        for a in sorted(weak_f.labels(sf) | weak_d.labels(sd), key=str):
            nf, nd = weak_f.after(sf, a), weak_d.after(sd, a)
            if nf and nd:
                continue
            # the pair is a state taking a next to a state of the side that cannot
            if nf:
                return (min(s for s in sf if a in weak_f.labels([s])), min(sd)), path + (a,)
            return (min(sf), min(t for t in sd if a in weak_d.labels([t]))), path + (a,)
    return None


def _ready_witness(lts_f: Lts, lts_d: Lts):
    weak_f, weak_d = _Weak(lts_f), _Weak(lts_d)
    start = (weak_f.closure([lts_f.initial]), weak_d.closure([lts_d.initial]))
    for sf, sd, path in _matched(weak_f, weak_d, start):
        ready_f = {s: weak_f.ready(s) for s in sorted(sf)}
        ready_d = {t: weak_d.ready(t) for t in sorted(sd)}
        for t, offered in ready_d.items():
            if offered not in ready_f.values():
                s = min(sf)
                return (s, t), path + (min(ready_f[s] ^ offered, key=str),)
        for s, offered in ready_f.items():
            if offered not in ready_d.values():
                t = min(sd)
                return (s, t), path + (min(ready_d[t] ^ offered, key=str),)
    return None


def replay(lts: Lts, witness: Sequence[ObsLabel]) -> bool:
    """Whether a relabeled system can perform the observable sequence, with τ-steps allowed in between."""
    weak = _Weak(lts)
    current = weak.closure([lts.initial])
    for a in witness:
        current = weak.after(current, a)
        if not current:
            return False
    return True


def _relabeled(lts: Lts) -> Lts:
    if any(isinstance(label, TransitionLabel) for _, label, _ in lts.edges):
        return relabel(lts)
    return lts


def branching_bisimilar(lts_f: Lts, lts_d: Lts, max_blocks: int = DEFAULT_MAX_BLOCKS) -> BisimVerdict:
    """
    Decide whether the initial states of two relabeled systems are branching bisimilar.

    Args:
        lts_f (Lts): the first system, usually the DeF+F program's.
        lts_d (Lts): the second system, usually the translated program's.
        max_blocks (int, optional): largest disjoint union accepted. By default DEFAULT_MAX_BLOCKS.

    Raises:
        BisimulationError: if the union is larger than max_blocks.

    Returns:
        BisimVerdict: the verdict; when negative, a witness preferring a distinguishing observable trace.
    """
    lts_f, lts_d = _relabeled(lts_f), _relabeled(lts_d)
    advisory = lts_f.truncated or lts_d.truncated
    if advisory:
        warnings.warn("Bisimilarity checked on a truncated exploration; the verdict is advisory", RuntimeWarning)

    offset = len(lts_f.states)
    edges = list(lts_f.edges) + [(s + offset, a, t + offset) for s, a, t in lts_d.edges]
    block = _partition(offset + len(lts_d.states), edges, max_blocks)
    blocks = len(set(block))
    initial_f, initial_d = lts_f.initial, lts_d.initial + offset
    logger.info(f"Partition refinement: {blocks} blocks over {len(block)} states")

    if block[initial_f] == block[initial_d]:
        return BisimVerdict(True, advisory=advisory, blocks=blocks)

    found = _trace_witness(lts_f, lts_d)
    if found is not None:
        pair, witness = found
        return BisimVerdict(False, pair, witness, "trace", advisory, blocks)

    found = _ready_witness(lts_f, lts_d)
    if found is not None:
        pair, witness = found
        return BisimVerdict(False, pair, witness, "branching", advisory, blocks)
    logger.info("No trace or ready-set witness; the systems differ in branching structure only")
    return BisimVerdict(False, (lts_f.initial, lts_d.initial), (), "branching", advisory, blocks)


def compare_programs(
    p_f: Program,
    p_d: Optional[Program] = None,
    bounds: Optional[ExploreBounds] = None,
    labels: LabelMode = LabelMode.FINE,
    max_blocks: int = DEFAULT_MAX_BLOCKS,
):
    """
    Explore a DeF+F program and a DeF counterpart under the strict semantics and compare them.

    Args:
        p_f (Program): the program using forward*.
        p_d (Program, optional): the program to compare against. By default fwd_elim(p_f).
        bounds (ExploreBounds, optional): exploration limits.
        labels (LabelMode, optional): observable label granularity. By default LabelMode.FINE.
        max_blocks (int, optional): partition size limit.

    Returns:
        tuple: (BisimVerdict, explored system of p_f, explored system of p_d), both relabeled.
    """
    if p_d is None:
        p_d = fwd_elim(p_f)
    lts_f = relabel(explore(p_f, bounds, ForwardMode.STRICT), labels)
    lts_d = relabel(explore(p_d, bounds, ForwardMode.STRICT), labels)
    return branching_bisimilar(lts_f, lts_d, max_blocks), lts_f, lts_d


def verdict_to_json(verdict: BisimVerdict) -> Dict[str, object]:
    return {
        "verdict": "bisimilar" if verdict.bisimilar else "not_bisimilar",
        "witness": [str(a) for a in verdict.witness],
        "pair": list(verdict.pair) if verdict.pair is not None else None,
        "advisory": verdict.advisory,
    }
