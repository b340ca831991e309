import pytest

from defcal import corpus
from defcal.corpus import delegation_chain
from defcal.parser import load_program
from defcal.syntax import Dialect, ForwardStar, If, Return, Var, contains_forward, seq
from defcal.transform import fwd_elim, fwd_elim_stmt
from defcal.typecheck import check_program
from defcal.utils import TranslationError


class TestFwdElim:
    def test_statement_rewrite(self):
        s = seq(If(Var("c"), ForwardStar(Var("x")), Return(Var("y"))), ForwardStar(Var("z")))

        # Call the function
        result = fwd_elim_stmt(s)

        # Assertions
        assert result == seq(If(Var("c"), Return(Var("x")), Return(Var("y"))), Return(Var("z")))
        assert fwd_elim_stmt(result) == result

    def test_forwarding_delegate_translates_to_its_return_version(self):
        # Call the function
        result = fwd_elim(corpus.load("delegate_forward"))

        # Assertions
        assert result == corpus.load("delegate")
        assert result.dialect is Dialect.DEF

    @pytest.mark.parametrize("n", [1, 3, 5])
    def test_chain_translates_to_its_return_version(self, n):
        # Call the function
        result = fwd_elim(load_program(delegation_chain(n)))

        # Assertions
        assert result == load_program(delegation_chain(n, forward=False))

    @pytest.mark.parametrize("name", ["cycle", "guarded", "parallel_forward", "writers", "strict_forward"])
    def test_translation_is_well_typed_def(self, name):
        # Call the function
        result = fwd_elim(corpus.load(name))

        # Assertions
        assert not contains_forward(result.main_body)
        assert not any(contains_forward(f.body) for f in result.functions)
        check_program(result)

    def test_signatures_are_kept(self):
        p = corpus.load("guarded")

        # Call the function
        result = fwd_elim(p)

        # Assertions
        assert [(f.name, f.return_type, f.params, f.locals) for f in result.functions] == [
            (f.name, f.return_type, f.params, f.locals) for f in p.functions
        ]
        assert result.globals == p.globals

    def test_flexible_program_is_rejected(self):
        with pytest.raises(TranslationError) as excinfo:
            fwd_elim(corpus.load("flexible_deadlock"))

        # Assertions
        assert "bar forwards but returns int" in str(excinfo.value)

    def test_missing_program(self):
        with pytest.raises(ValueError):
            fwd_elim(None)
