"""
The relation ℛ between DeF+F and DeF configurations, its per-future correspondence properties, and a
direct check that ℛ is a branching bisimulation between two explored systems.

Both configurations must be canonical, so that a future has the same identifier on
both sides. The translation changes how futures resolve, never which are spawned.
A sequence of futures follows resolved-to-future links, and chain links on the
DeF+F side.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

from .explore import Lts
from .runtime import Chained, Configuration, Resolved, Unresolved, eval_expr
from .syntax import Assign, FutRef, GetStar, Seq, Value
from .transform import fwd_elim_stmt

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RelationCounterexample:
    pair: Tuple[int, int]
    clause: str
    detail: str

    def __str__(self):
        return f"pair {self.pair}: [{self.clause}] {self.detail}"


def _link(state) -> Optional[int]:
    if isinstance(state, Resolved) and isinstance(state.value, FutRef):
        return state.value.fid
    if isinstance(state, Chained):
        return state.target
    return None


def sequence_of_futures(cn: Configuration, fid: int) -> List[int]:
    """The longest sequence of futures starting at fid, stopping before the first repeated future."""
    out = [fid]
    seen = {fid}
    nxt = _link(cn.futures[fid])
    while nxt is not None and nxt not in seen:
        out.append(nxt)
        seen.add(nxt)
        nxt = _link(cn.futures[nxt])
    return out


def _reaches_value(cn_f: Configuration, cn_d: Configuration, fid: int, w: Value, flattened: bool = True) -> bool:
    """
    A DeF sequence from fid ends at a future resolved to w.

    With flattened set, every later member must also be resolved to w in DeF+F, as
    chain updates leave it.
    """
    seen = set()
    g = fid
    while g not in seen:
        seen.add(g)
        state = cn_d.futures[g]
        if state == Resolved(w):
            return True
        if not (isinstance(state, Resolved) and isinstance(state.value, FutRef)):
            return False
        g = state.value.fid
        if flattened and cn_f.futures[g] != Resolved(w):
            return False
    return False


def _resolution_path(cn_d: Configuration, w: Value) -> List[Value]:
    """w, then the values successive GET-FUTURE steps on w would read in DeF."""
    path = [w]
    while isinstance(w, FutRef):
        state = cn_d.futures[w.fid]
        if not isinstance(state, Resolved) or state.value in path:
            break
        w = state.value
        path.append(w)
    return path


def _same_sequence(cn_d: Configuration, w_f: Value, w_d: Value) -> bool:
    """Both get* operands lie on one DeF resolution path, in either order."""
    return w_d in _resolution_path(cn_d, w_f) or w_f in _resolution_path(cn_d, w_d)


def _leading_get(stmt):
    if isinstance(stmt, Seq) and isinstance(stmt.first, Assign) and isinstance(stmt.first.rhs, GetStar):
        return stmt.first.target, stmt.first.rhs.atom, stmt.second
    return None


def _tasks_match(cn_f: Configuration, cn_d: Configuration, fid: int) -> Optional[str]:
    frames_f = cn_f.futures[fid].frames
    frames_d = cn_d.futures[fid].frames
    if len(frames_f) != len(frames_d):
        return f"f{fid}: stacks of {len(frames_f)} and {len(frames_d)} frames"
    for depth, (qf, qd) in enumerate(zip(frames_f, frames_d)):
        if qf.fn != qd.fn or qf.locals != qd.locals:
            return f"f{fid}: frame {depth} differs in function or local store"
        if fwd_elim_stmt(qf.stmt) == qd.stmt:
            continue
        top = depth == len(frames_f) - 1
        get_f, get_d = _leading_get(qf.stmt), _leading_get(qd.stmt)
        if not top or get_f is None or get_d is None:
            return f"f{fid}: frame {depth} statements differ beyond forward* elimination"
        (y_f, w_f, rest_f), (y_d, w_d, rest_d) = get_f, get_d
        if y_f != y_d or fwd_elim_stmt(rest_f) != rest_d:
            return f"f{fid}: get* statements differ beyond their operand"
        w_f = eval_expr(cn_f.globals, qf.locals, w_f)
        w_d = eval_expr(cn_d.globals, qd.locals, w_d)
        if not _same_sequence(cn_d, w_f, w_d):
            return f"f{fid}: get* operands are not on one sequence of futures"
    return None


def _future_mismatch(cn_f: Configuration, cn_d: Configuration, fid: int) -> Optional[str]:
    sf, sd = cn_f.futures[fid], cn_d.futures[fid]
    if isinstance(sf, Unresolved) or isinstance(sd, Unresolved):
        if not (isinstance(sf, Unresolved) and isinstance(sd, Unresolved)):
            return f"f{fid}: running on one side only"
        return _tasks_match(cn_f, cn_d, fid)
    if isinstance(sf, Chained):
        if sd != Resolved(FutRef(sf.target)):
            return f"f{fid}: chained to f{sf.target} but not resolved to it"
        return None
    if not _reaches_value(cn_f, cn_d, fid, sf.value):
        return f"f{fid}: resolved value unreachable on the def side"
    return None


def relation_mismatch(cn_f: Configuration, cn_d: Configuration) -> Optional[str]:
    """Why two configurations are not related by ℛ, or None when they are."""
    if cn_f.tasks != cn_d.tasks:
        return "different futures"
    if cn_f.globals != cn_d.globals:
        return "different global stores"
    for fid in range(len(cn_f.futures)):
        reason = _future_mismatch(cn_f, cn_d, fid)
        if reason is not None:
            return reason
    return None


def in_relation_r(cn_f: Configuration, cn_d: Configuration) -> bool:
    """
    Decide cn_F ℛ cn_D.

    Stores are identical; a chained future corresponds to a future resolved to the chain
    target; a resolved future corresponds to a DeF sequence of futures ending at the same
    value; running tasks hold the same stacks up to forward* elimination, except that a
    leading get* may be at different stages of the same sequence on each side.
    """
    return relation_mismatch(cn_f, cn_d) is None


def check_lemmas(cn_f: Configuration, cn_d: Configuration) -> List[str]:
    """
    Check the correspondence properties of futures and tasks on a related pair.

    Returns:
        list: one message per violated property, tagged by its kind, empty when all hold.
    """
    violations = []
    for fid, (sf, sd) in enumerate(zip(cn_f.futures, cn_d.futures)):
        if isinstance(sf, Chained) and sd != Resolved(FutRef(sf.target)):
            violations.append(f"chained-future: f{fid} chained to f{sf.target} without matching resolution")
        if isinstance(sf, Resolved) and not _reaches_value(cn_f, cn_d, fid, sf.value):
            violations.append(f"resolved-future: f{fid} resolved without a matching def sequence")
        if isinstance(sd, Resolved):
            chained = isinstance(sd.value, FutRef) and sf == Chained(sd.value.fid)
            flattened = isinstance(sf, Resolved) and _reaches_value(cn_f, cn_d, fid, sf.value)
            if not (chained or flattened):
                violations.append(f"resolved-in-def: f{fid} resolved in def without a def+f counterpart")
        if isinstance(sf, Unresolved) != isinstance(sd, Unresolved):
            violations.append(f"task: f{fid} has a task on one side only")
        elif isinstance(sf, Unresolved):
            reason = _tasks_match(cn_f, cn_d, fid)
            if reason is not None:
                violations.append(f"task: {reason}")

        seq_d = sequence_of_futures(cn_d, fid)
        last = cn_d.futures[seq_d[-1]]
        if isinstance(last, Resolved) and not isinstance(last.value, FutRef):
            positions = {g: i for i, g in enumerate(seq_d)}
            seq_f = sequence_of_futures(cn_f, fid)
            indices = [positions.get(g) for g in seq_f]
            ordered = None not in indices and indices == sorted(indices)
            ends = seq_f[-1] == seq_d[-1] or cn_f.futures[seq_f[-1]] == last
            if not (ordered and ends):
                violations.append(f"sequence-order: def+f sequence from f{fid} does not follow the def sequence")

        for g in sequence_of_futures(cn_f, fid):
            state = cn_f.futures[g]
            if isinstance(state, Resolved) and not _reaches_value(cn_f, cn_d, fid, state.value, flattened=False):
                violations.append(f"sequence-reach: def sequence from f{fid} never reaches the value of f{g}")
                break
    return violations


def _tau_closure(lts: Lts, start: int) -> List[int]:
    order = [start]
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for a, t in lts.successors[s]:
            if a.is_tau and t not in seen:
                seen.add(t)
                order.append(t)
                queue.append(t)
    return order


def _match(lts: Lts, start: int, a, related) -> Optional[int]:
    for s in _tau_closure(lts, start):
        for b, t in lts.successors[s]:
            if b == a and related(t):
                return t
    return None


def check_r_is_bisimulation(
    lts_f: Lts, lts_d: Lts, sample_pairs: Optional[Iterable[Tuple[int, int]]] = None
) -> Optional[RelationCounterexample]:
    """
    Check the four transfer conditions of ℛ, and the correspondence properties, on every pair reachable by matching steps.

    Unobservable steps on either side must stay related to the same state of the other
    side; an observable step must be matched by τ-steps then the same label on the other
    side, landing in a related pair.

    Args:
        lts_f (Lts): the relabeled system of the DeF+F program.
        lts_d (Lts): the relabeled system of its translation.
        sample_pairs (iterable, optional): further (DeF+F state, DeF state) pairs to start from.

    Returns:
        RelationCounterexample: the first violation with the clause it breaks, or None.
    """
    seeds = [(lts_f.initial, lts_d.initial)] + list(sample_pairs or [])
    states_f, states_d = lts_f.states, lts_d.states
    seen = set()
    queue = deque()
    for pair in seeds:
        reason = relation_mismatch(states_f[pair[0]], states_d[pair[1]])
        if reason is not None:
            return RelationCounterexample(pair, "R", reason)
        if pair not in seen:
            seen.add(pair)
            queue.append(pair)

    def visit(pair):
        if pair not in seen:
            seen.add(pair)
            queue.append(pair)

    while queue:
        s, t = queue.popleft()
        cn_f, cn_d = states_f[s], states_d[t]
        violations = check_lemmas(cn_f, cn_d)
        if violations:
            return RelationCounterexample((s, t), violations[0].split(":")[0], violations[0])

        for a, s2 in lts_f.successors[s]:
            if a.is_tau:
                reason = relation_mismatch(states_f[s2], cn_d)
                if reason is not None:
                    return RelationCounterexample((s2, t), "tau-F", reason)
                visit((s2, t))
            else:
                t2 = _match(lts_d, t, a, lambda u: in_relation_r(states_f[s2], states_d[u]))
                if t2 is None:
                    return RelationCounterexample((s, t), "obs-F", f"{a} from state {s} has no related match")
                visit((s2, t2))

        for a, t2 in lts_d.successors[t]:
            if a.is_tau:
                reason = relation_mismatch(cn_f, states_d[t2])
                if reason is not None:
                    return RelationCounterexample((s, t2), "tau-D", reason)
                visit((s, t2))
            else:
                s2 = _match(lts_f, s, a, lambda u: in_relation_r(states_f[u], states_d[t2]))
                if s2 is None:
                    return RelationCounterexample((s, t), "obs-D", f"{a} from state {t} has no related match")
                visit((s2, t2))

    logger.info(f"Relation checked on {len(seen)} pairs")
    return None
