import pytest

from defcal import corpus
from defcal.bisim import compare_programs
from defcal.corpus import ackermann, delegation_chain
from defcal.parser import load_program
from defcal.relation import (
    RelationCounterexample,
    check_lemmas,
    check_r_is_bisimulation,
    in_relation_r,
    relation_mismatch,
    sequence_of_futures,
)
from defcal.runtime import Chained, Configuration, Resolved, Store, TaskInfo
from defcal.syntax import Dialect, FutRef, IntLit


def _configuration(*futures, dialect=Dialect.DEF):
    return Configuration(
        globals=Store(),
        futures=tuple(futures),
        tasks=(TaskInfo((), "main"), TaskInfo((0,), "foo"), TaskInfo((0, 0), "bar")),
        dialect=dialect,
    )


class TestRelation:
    # Define test data
    chained = _configuration(Resolved(IntLit(0)), Chained(2), Resolved(IntLit(4)), dialect=Dialect.DEF_PLUS_F)
    updated = _configuration(Resolved(IntLit(0)), Resolved(IntLit(4)), Resolved(IntLit(4)), dialect=Dialect.DEF_PLUS_F)
    returned = _configuration(Resolved(IntLit(0)), Resolved(FutRef(2)), Resolved(IntLit(4)))
    flattened = _configuration(Resolved(IntLit(0)), Resolved(IntLit(4)), Resolved(IntLit(4)))

    def test_sequence_of_futures(self):
        assert sequence_of_futures(self.returned, 1) == [1, 2]
        assert sequence_of_futures(self.chained, 1) == [1, 2]
        assert sequence_of_futures(self.updated, 1) == [1]
        assert sequence_of_futures(self.returned, 0) == [0]

    def test_sequence_stops_at_a_repeat(self):
        cn = _configuration(Resolved(IntLit(0)), Resolved(FutRef(2)), Resolved(FutRef(1)))

        # Assertions
        assert sequence_of_futures(cn, 1) == [1, 2]

    def test_chained_future_matches_returned_future(self):
        # Call the function
        result = in_relation_r(self.chained, self.returned)

        # Assertions
        assert result
        assert check_lemmas(self.chained, self.returned) == []

    def test_chain_update_stays_related(self):
        # Call the function
        result = in_relation_r(self.updated, self.returned)

        # Assertions
        assert result
        assert check_lemmas(self.updated, self.returned) == []

    def test_chain_without_matching_resolution(self):
        # Call the function
        violations = check_lemmas(self.chained, self.flattened)

        # Assertions
        assert violations[0].startswith("chained-future:")
        assert relation_mismatch(self.chained, self.flattened) == "f1: chained to f2 but not resolved to it"

    def test_different_values(self):
        wrong = _configuration(Resolved(IntLit(0)), Resolved(IntLit(5)), Resolved(IntLit(4)), dialect=Dialect.DEF_PLUS_F)

        # Call the function
        violations = check_lemmas(wrong, self.returned)

        # Assertions
        assert not in_relation_r(wrong, self.returned)
        assert any(v.startswith("resolved-future:") for v in violations)

    def test_different_stores(self):
        other = Configuration(Store.of({"g": IntLit(1)}), self.returned.futures, self.returned.tasks)

        # Assertions
        assert relation_mismatch(self.updated, other) == "different global stores"


class TestRelationIsBisimulation:
    @pytest.mark.parametrize(
        "name", ["delegate_forward", "guarded", "parallel_forward", "cycle", "writers", "strict_forward"]
    )
    def test_corpus(self, name):
        _, lts_f, lts_d = compare_programs(corpus.load(name))

        # Call the function
        result = check_r_is_bisimulation(lts_f, lts_d)

        # Assertions
        assert result is None

    @pytest.mark.parametrize(
        "source",
        [delegation_chain(1), delegation_chain(2), delegation_chain(3), delegation_chain(4), ackermann(1, 1)],
    )
    def test_generated_programs(self, source):
        _, lts_f, lts_d = compare_programs(load_program(source))

        # Call the function
        result = check_r_is_bisimulation(lts_f, lts_d)

        # Assertions
        assert result is None

    def test_unrelated_seed(self):
        _, lts_f, lts_d = compare_programs(corpus.load("delegate_forward"))

        # Call the function
        result = check_r_is_bisimulation(lts_f, lts_d, sample_pairs=[(len(lts_f.states) - 1, 0)])

        # Assertions
        assert isinstance(result, RelationCounterexample)
        assert result.clause == "R"
        assert result.pair == (len(lts_f.states) - 1, 0)
        assert str(result).startswith(f"pair ({len(lts_f.states) - 1}, 0): [R]")

    def test_mutant_breaks_the_relation(self):
        _, lts_f, lts_d = compare_programs(corpus.load("guarded"), corpus.load("mutant_constant"))

        # Call the function
        result = check_r_is_bisimulation(lts_f, lts_d)

        # Assertions
        assert isinstance(result, RelationCounterexample)
