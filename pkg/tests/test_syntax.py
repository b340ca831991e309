import pytest

from defcal import corpus
from defcal.parser import parse_program
from defcal.syntax import (
    FLOW_INT,
    INT,
    Assign,
    BaseType,
    BinOp,
    ForwardStar,
    FutRef,
    If,
    IntLit,
    Return,
    Seq,
    Skip,
    TypeExpr,
    Var,
    contains_forward,
    iter_atoms,
    leaves,
    map_atoms,
    normalize,
    normalize_program,
    pretty_stmt,
    seq,
)


class TestSyntax:
    a = Assign("x", IntLit(1))
    b = Assign("y", BinOp(Var("x"), "+", IntLit(2)))
    r = Return(Var("y"))

    def test_seq_is_right_associated(self):
        # Call the function
        s = seq(self.a, self.b, self.r)

        # Assertions
        assert s == Seq(self.a, Seq(self.b, self.r))

    def test_normalize_flattens_and_closes_with_skip(self):
        s = Seq(Seq(self.a, self.b), self.r)

        # Call the function
        result = normalize(s)

        # Assertions
        assert leaves(result) == [self.a, self.b, self.r, Skip()]
        assert isinstance(result, Seq)
        assert normalize(result) == result

    def test_normalize_single_statement(self):
        # Call the function
        result = normalize(Skip())

        # Assertions
        assert result == Seq(Skip(), Skip())

    def test_normalize_if_branches(self):
        s = If(Var("c"), self.a, Seq(self.b, Skip()))

        # Call the function
        result = normalize(s)

        # Assertions
        first = result.first
        assert first.then == Seq(self.a, Skip())
        assert first.else_ == Seq(self.b, Skip())

    @pytest.mark.parametrize("name", corpus.names())
    def test_normalize_is_idempotent(self, name):
        p = parse_program(corpus.source(name))

        # Call the function
        once = normalize_program(p)
        twice = normalize_program(once)

        # Assertions
        assert twice == once
        assert all(normalize(f.body) == f.body for f in once.functions)
        assert normalize(once.main_body) == once.main_body

    def test_positions_do_not_take_part_in_equality(self):
        assert Assign("x", IntLit(1), pos=(1, 1)) == Assign("x", IntLit(1), pos=(7, 3))

    def test_unknown_operator(self):
        with pytest.raises(ValueError) as excinfo:
            BinOp(Var("x"), "/", IntLit(2))

        # Assertions
        assert "Unknown operator" in str(excinfo.value)

    def test_map_atoms_renames_futures(self):
        s = seq(Assign("y", Var("x")), Return(FutRef(3)))

        # Call the function
        result = map_atoms(s, lambda a: FutRef(0) if isinstance(a, FutRef) else a)

        # Assertions
        assert list(iter_atoms(result)) == [Var("x"), FutRef(0)]

    def test_contains_forward_looks_into_branches(self):
        s = seq(self.a, If(Var("c"), Return(Var("x")), ForwardStar(Var("x"))))

        # Assertions
        assert contains_forward(s)
        assert not contains_forward(seq(self.a, self.r))

    def test_pretty_stmt(self):
        s = seq(self.a, If(Var("c"), self.r, Skip()))

        # Call the function
        result = pretty_stmt(s)

        # Assertions
        assert result == "x = 1; if c { return y } else { skip }"

    def test_type_rendering(self):
        assert str(INT) == "int"
        assert str(FLOW_INT) == "Flow[int]"
        assert TypeExpr.basic(BaseType.BOOL).lifted() == TypeExpr.flow(BaseType.BOOL)
