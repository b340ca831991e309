import json
from dataclasses import replace

import pytest

from defcal import corpus
from defcal.explore import (
    Counterexample,
    DepthExceeded,
    ExploreBounds,
    Lts,
    RoundRobin,
    SeededRandom,
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
from defcal.parser import load_program
from defcal.runtime import (
    Chained,
    Configuration,
    Frame,
    Resolved,
    Rule,
    Store,
    TaskInfo,
    Terminated,
    TransitionLabel,
    Unresolved,
    classify,
)
from defcal.syntax import BoolLit, Dialect, FutRef, IntLit, Skip, map_atoms, seq
from defcal.transform import fwd_elim
from defcal.typecheck import ForwardMode
from defcal.utils import IntegrityError

WORKERS = """\
fun int work(int a) {
  int r;
  r = a + 1;
  r = r + 1;
  r = r + 1;
  r = r + 1;
  return r
}

{
  Flow[int] f1;
  Flow[int] f2;
  Flow[int] f3;
  Flow[int] f4;
  Flow[int] f5;
  int out;
  f1 = !work(1);
  f2 = !work(2);
  f3 = !work(3);
  f4 = !work(4);
  f5 = !work(5);
  out = get* f5;
  return out
}
"""


def _renumber(cn, mapping):
    def atom(a):
        return FutRef(mapping[a.fid]) if isinstance(a, FutRef) else a

    def store(s):
        return Store.of({name: atom(w) for name, w in s.bindings})

    def state(st):
        if isinstance(st, Resolved):
            return Resolved(atom(st.value))
        if isinstance(st, Chained):
            return Chained(mapping[st.target])
        return Unresolved(tuple(replace(f, locals=store(f.locals), stmt=map_atoms(f.stmt, atom)) for f in st.frames))

    futures = [None] * len(cn.futures)
    tasks = [None] * len(cn.tasks)
    for old, new in mapping.items():
        futures[new] = state(cn.futures[old])
        tasks[new] = cn.tasks[old]
    return replace(cn, globals=store(cn.globals), futures=tuple(futures), tasks=tuple(tasks))


class TestExplore:
    # Define test data
    racing = load_program(
        "fun int one() { return 1 }\n{ Flow[int] f; int x; f = !one(); x = 2; x = get* f; return x }"
    )
    straight = load_program("{ int x; x = 1; return x }")

    def test_interleavings_are_closed(self):
        # Call the function
        lts = explore(self.racing)

        # Assertions
        assert len(lts.states) == 8
        assert len(lts.edges) == 8
        assert not lts.truncated
        assert lts.leaves() == [7]
        assert classify(lts.states[7]) == Terminated(IntLit(1))
        assert [(s, t) for s, _, t in lts.edges if s == 1] == [(1, 2), (1, 3)]

    def test_straight_line_program(self):
        # Call the function
        lts = explore(self.straight)

        # Assertions
        assert len(lts.states) == 3
        assert [label.rule for _, label, _ in lts.edges] == [Rule.ASSIGN, Rule.RETURN_ASYNC]

    def test_state_bound_truncates(self):
        # Call the function
        lts = explore(self.racing, ExploreBounds(max_states=2))

        # Assertions
        assert len(lts.states) == 2
        assert lts.truncated
        assert lts.unexpanded == frozenset([1])

    def test_depth_bound_truncates(self):
        # Call the function
        lts = explore(self.racing, ExploreBounds(max_depth=1))

        # Assertions
        assert len(lts.states) == 2
        assert lts.truncated
        assert lts.unexpanded == frozenset([1])

    @pytest.mark.parametrize(
        "source, max_depth, size",
        [("{ int x; x = 1; return x }", 2, 3), ("{ return 0 }", 1, 2)],
    )
    def test_depth_bound_at_a_terminated_leaf(self, source, max_depth, size):
        # Call the function
        lts = explore(load_program(source), ExploreBounds(max_depth=max_depth))

        # Assertions
        assert len(lts.states) == size
        assert not lts.truncated
        assert lts.unexpanded == frozenset()
        assert isinstance(classify(lts.states[-1]), Terminated)
        assert check_progress(lts) is None

    @pytest.mark.parametrize("bounds", [{"max_states": 0}, {"max_depth": 0}])
    def test_bounds_must_be_positive(self, bounds):
        with pytest.raises(ValueError):
            ExploreBounds(**bounds)

    def test_explored_states_are_canonical(self):
        # Call the function
        lts = explore(corpus.load("parallel_forward"))

        # Assertions
        assert all(canonicalize(cn) == cn for cn in lts.states)
        assert len(set(lts.digests)) == len(lts.states)
        assert {classify(lts.states[i]) for i in lts.leaves()} == {Terminated(IntLit(9))}

    def test_racing_writers_reach_both_results(self):
        # Call the function
        lts = explore(corpus.load("writers"))

        # Assertions
        results = {classify(lts.states[i]) for i in lts.leaves()}
        assert results == {Terminated(IntLit(1)), Terminated(IntLit(2))}

    def test_forward_cycle_has_no_tau_cycle(self):
        p = corpus.load("cycle")

        # Call the function
        lts_f = explore(p)
        lts_d = explore(fwd_elim(p))

        # Assertions
        assert tau_cycles(lts_f) == []
        assert len(lts_f.leaves()) == 1
        assert tau_cycles(lts_d) != []
        assert lts_d.leaves() == []


class TestCanonicalForm:
    # Define test data
    shuffled = Configuration(
        globals=Store.of({"p": FutRef(1), "q": FutRef(2)}),
        futures=(Resolved(IntLit(0)), Resolved(IntLit(1)), Chained(1)),
        tasks=(TaskInfo((), "main"), TaskInfo((0, 1), "a"), TaskInfo((0, 0), "b")),
        dialect=Dialect.DEF_PLUS_F,
    )

    def test_canonicalize_renumbers_by_lineage(self):
        # Call the function
        result = canonicalize(self.shuffled)

        # Assertions
        assert result.tasks == (TaskInfo((), "main"), TaskInfo((0, 0), "b"), TaskInfo((0, 1), "a"))
        assert result.futures == (Resolved(IntLit(0)), Chained(2), Resolved(IntLit(1)))
        assert result.globals == Store.of({"p": FutRef(2), "q": FutRef(1)})
        assert canonicalize(result) == result

    def test_digest_ignores_numbering(self):
        assert digest(self.shuffled) == digest(canonicalize(self.shuffled))
        assert digest(self.shuffled) != digest(replace(self.shuffled, futures=(Resolved(IntLit(5)),) + self.shuffled.futures[1:]))

    @pytest.mark.parametrize("name", ["parallel_forward", "writers", "delegate_forward"])
    def test_canonicalize_ignores_any_renumbering(self, name):
        lts = explore(corpus.load(name))

        for cn in lts.states:
            n = len(cn.futures)
            reversed_ids = {0: 0, **{fid: n - fid for fid in range(1, n)}}

            # Call the function
            result = canonicalize(_renumber(cn, reversed_ids))

            # Assertions
            assert result == cn
            assert digest(_renumber(cn, reversed_ids)) == digest(cn)

    def test_write_once(self):
        label = TransitionLabel(Rule.ASSIGN, 0)
        frame = Frame(Store(), seq(Skip(), Skip()), "main")
        before = Configuration(Store(), (Resolved(IntLit(1)), Chained(0)), (TaskInfo((), "main"), TaskInfo((0,), "f")))

        with pytest.raises(IntegrityError):
            check_write_once(before, before.with_future(0, Resolved(IntLit(2))), label)
        with pytest.raises(IntegrityError):
            check_write_once(before, before.with_future(1, Unresolved((frame,))), label)
        check_write_once(before, before.with_future(1, Resolved(IntLit(1))), label)


class TestRuns:
    def test_round_robin_is_default(self):
        # Call the function
        trace = run(corpus.load("delegate"))

        # Assertions
        assert trace.policy == RoundRobin()
        assert str(trace.policy) == "round-robin"
        assert trace.final == trace.steps[-1][1]

    def test_seeded_runs_repeat(self):
        p = corpus.load("writers")

        # Call the function
        first = run(p, SeededRandom(7))
        second = run(p, SeededRandom(7))

        # Assertions
        assert first.labels == second.labels
        assert first.outcome == second.outcome
        assert first.outcome in (Terminated(IntLit(1)), Terminated(IntLit(2)))
        assert str(first.policy) == "random(seed=7)"

    @pytest.mark.parametrize("seed", range(20))
    def test_delegate_result_under_random_schedules(self, seed):
        # Call the function
        trace = run(corpus.load("delegate"), SeededRandom(seed))

        # Assertions
        assert trace.outcome == Terminated(IntLit(10))

    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_seed_range(self, seed):
        with pytest.raises(ValueError):
            SeededRandom(seed)

    def test_step_budget(self):
        # Call the function
        trace = run(corpus.load("delegate"), max_steps=3)

        # Assertions
        assert trace.outcome == DepthExceeded(3)
        assert len(trace.steps) == 3

    def test_step_budget_must_be_positive(self):
        with pytest.raises(ValueError) as excinfo:
            run(corpus.load("delegate"), max_steps=0)

        # Assertions
        assert str(excinfo.value) == "max_steps must be positive"

    def test_rule_counts(self):
        trace = run(corpus.load("delegate"))

        # Call the function
        counts = rule_counts(trace, actor=0)

        # Assertions
        assert list(counts.items()) == [
            ("ASSIGN", 1),
            ("GET-DATA", 2),
            ("GET-FUTURE", 4),
            ("INVK-ASYNC", 2),
            ("RETURN-ASYNC", 1),
        ]
        assert sum(rule_counts(trace).values()) == len(trace.steps)

    def test_trace_to_jsonl(self):
        trace = run(TestExplore.straight)

        # Call the function
        lines = trace_to_jsonl(trace).splitlines()

        # Assertions
        records = [json.loads(line) for line in lines]
        assert [r["step"] for r in records] == [0, 1, 2]
        assert records[0]["rule"] is None
        assert records[1]["rule"] == "ASSIGN"
        assert records[2]["configuration"]["futures"][0] == {
            "id": 0,
            "fn": "main",
            "lineage": [],
            "state": "resolved",
            "value": 1,
        }


class TestChecks:
    def test_preservation_holds(self):
        p = corpus.load("delegate")

        # Call the function
        result = check_preservation(p, explore(p))

        # Assertions
        assert result is None

    def test_preservation_counterexample(self):
        p = corpus.load("delegate")
        lts = explore(p)
        cn = lts.states[1]
        main = cn.futures[0].frames[0]
        broken = cn.with_future(0, Unresolved((replace(main, locals=main.locals.set("y", BoolLit(True))),)))
        states = list(lts.states)
        states[1] = broken

        # Call the function
        result = check_preservation(p, Lts(states=states, edges=lts.edges))

        # Assertions
        assert isinstance(result, Counterexample)
        assert result.state == 1
        assert "T-STORE" in str(result)

    @pytest.mark.parametrize("name", ["delegate", "delegate_forward", "cycle", "writers"])
    def test_progress_holds(self, name):
        # Call the function
        result = check_progress(explore(corpus.load(name)))

        # Assertions
        assert result is None

    def test_progress_on_truncated_system_warns(self):
        lts = explore(TestExplore.racing, ExploreBounds(max_states=3))

        with pytest.warns(RuntimeWarning):
            result = check_progress(lts)

        # Assertions
        assert result is None

    def test_lts_to_json(self):
        lts = explore(TestExplore.straight)

        # Call the function
        data = lts_to_json(lts)

        # Assertions
        assert data["initial"] == 0
        assert data["truncated"] is False
        assert data["edges"] == [[0, "ASSIGN", 0, 1], [1, "RETURN-ASYNC", 0, 2]]
        assert data["states"] == lts.digests


class TestPreservationAtScale:
    # Define test data
    generated = [
        ("workers", WORKERS),
        ("chain(6)", corpus.delegation_chain(6)),
        ("chain(6, return)", corpus.delegation_chain(6, forward=False)),
        ("ackermann(2, 1)", corpus.ackermann(2, 1)),
    ]

    def test_independent_workers_interleave(self):
        # Call the function
        lts = explore(load_program(WORKERS))

        # Assertions
        assert not lts.truncated
        assert len(lts.states) >= 10_000
        assert {classify(lts.states[i]) for i in lts.leaves()} == {Terminated(IntLit(9))}

    def test_every_explored_state_is_well_typed(self):
        programs = [(name, corpus.load(name)) for name in corpus.names()]
        programs += [(name, load_program(source)) for name, source in self.generated]
        total = 0

        for name, p in programs:
            mode = ForwardMode.FLEXIBLE if name == "flexible_deadlock" else ForwardMode.STRICT

            # Call the function
            lts = explore(p, mode=mode)
            result = check_preservation(p, lts, mode)

            # Assertions
            assert not lts.truncated, name
            assert result is None, f"{name}: {result}"
            total += len(lts.states)

        assert total >= 10_000
