from dataclasses import replace

import pytest

from defcal import corpus
from defcal.parser import load_program, parse_rhs
from defcal.runtime import Store, initial_configuration
from defcal.syntax import BOOL, FLOW_BOOL, FLOW_INT, INT, BoolLit, Dialect, Var
from defcal.typecheck import (
    ConfigTypeEnv,
    ForwardMode,
    NestedFlow,
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
from defcal.utils import TypeCheckFailure


class TestCollapse:
    @pytest.mark.parametrize(
        "t, expected",
        [
            (INT, INT),
            (BOOL, BOOL),
            (FLOW_INT, FLOW_INT),
            (FLOW_BOOL, FLOW_BOOL),
            (NestedFlow(INT), FLOW_INT),
            (NestedFlow(BOOL), FLOW_BOOL),
            (NestedFlow(FLOW_INT), FLOW_INT),
            (NestedFlow(FLOW_BOOL), FLOW_BOOL),
            (NestedFlow(NestedFlow(INT)), FLOW_INT),
            (NestedFlow(NestedFlow(FLOW_INT)), FLOW_INT),
            (NestedFlow(NestedFlow(NestedFlow(BOOL))), FLOW_BOOL),
            (NestedFlow(NestedFlow(NestedFlow(FLOW_BOOL))), FLOW_BOOL),
        ],
    )
    def test_collapse(self, t, expected):
        # Call the function
        result = collapse(t)

        # Assertions
        assert result == expected

    @pytest.mark.parametrize(
        "t1, t2, expected",
        [
            (INT, INT, True),
            (INT, FLOW_INT, True),
            (FLOW_INT, INT, False),
            (BOOL, FLOW_INT, False),
            (FLOW_BOOL, FLOW_BOOL, True),
            (INT, BOOL, False),
        ],
    )
    def test_subtype(self, t1, t2, expected):
        assert subtype(t1, t2) is expected


class TestTypeOfRhs:
    # Define test data
    env = TypeEnv(
        vars={"n": INT, "b": BOOL, "f": FLOW_INT, "g": FLOW_BOOL},
        funs={"inc": ((INT,), INT), "relay": ((FLOW_INT,), FLOW_INT), "flag": ((), BOOL)},
    )

    @pytest.mark.parametrize(
        "text, expected",
        [
            ("n + 1", INT),
            ("n < 1", BOOL),
            ("b && true", BOOL),
            ("!inc(n)", FLOW_INT),
            ("!relay(f)", FLOW_INT),
            ("!relay(n)", FLOW_INT),
            ("!flag()", FLOW_BOOL),
            ("inc(3)", INT),
            ("relay(f)", FLOW_INT),
            ("get* f", INT),
            ("get* g", BOOL),
            ("get* n", INT),
            ("f", FLOW_INT),
        ],
    )
    def test_well_typed(self, text, expected):
        # Call the function
        result = type_of_rhs(self.env, parse_rhs(text))

        # Assertions
        assert result == expected

    @pytest.mark.parametrize(
        "text, rule",
        [
            ("n + b", "T-EXPRESSION"),
            ("f + 1", "T-EXPRESSION"),
            ("b < b", "T-EXPRESSION"),
            ("missing", "T-VAR"),
            ("inc(f)", "T-INVK-SYNC"),
            ("inc(1, 2)", "T-INVK-SYNC"),
            ("!nothing()", "T-INVK-ASYNC"),
            ("!inc(b)", "T-INVK-ASYNC"),
        ],
    )
    def test_ill_typed(self, text, rule):
        with pytest.raises(TypeCheckFailure) as excinfo:
            type_of_rhs(self.env, parse_rhs(text))

        # Assertions
        assert excinfo.value.errors[0].rule == rule


class TestCheckProgram:
    # Define test data
    strict_forward = """
fun int one() { return 1 }
fun Flow[int] relay() { Flow[int] y; y = !one(); forward* y }
{ Flow[int] x; int r; x = !relay(); r = get* x; return r }
"""
    basic_forward = """
fun int one() { return 1 }
fun int relay() { Flow[int] y; y = !one(); forward* y }
{ Flow[int] x; int r; x = !relay(); r = get* x; return r }
"""

    @pytest.mark.parametrize("name", ["delegate", "delegate_forward", "cycle", "guarded", "writers", "strict_forward"])
    def test_corpus_is_well_typed(self, name):
        # Call the function
        env = check_program(corpus.load(name))

        # Assertions
        assert "main" in env.funs

    def test_strict_forward_accepted(self):
        # Call the function
        env = check_program(load_program(self.strict_forward))

        # Assertions
        assert env.return_type("relay") == FLOW_INT

    def test_forward_in_basic_function_needs_flexible_mode(self):
        p = load_program(self.basic_forward)

        with pytest.raises(TypeCheckFailure) as excinfo:
            check_program(p, ForwardMode.STRICT)

        # Assertions
        assert [e.rule for e in excinfo.value.errors] == ["T-FORWARD"]
        assert excinfo.value.errors[0].pos[0] == 3
        check_program(p, ForwardMode.FLEXIBLE)

    def test_flexible_deadlock_program(self):
        p = corpus.load("flexible_deadlock")

        with pytest.raises(TypeCheckFailure):
            check_program(p)

        # Assertions
        assert check_program(p, ForwardMode.FLEXIBLE) is not None

    def test_error_position_and_rendering(self):
        source = "{\n  int a;\n  int r;\n  r = a + true;\n  return r\n}"

        with pytest.raises(TypeCheckFailure) as excinfo:
            check_program(load_program(source))

        # Assertions
        error = excinfo.value.errors[0]
        assert error.rule == "T-EXPRESSION"
        assert error.pos == (4, 3)
        assert str(error).startswith("4:3: [T-EXPRESSION]")

    def test_errors_are_aggregated(self):
        source = "{\n  int r;\n  bool c;\n  r = c;\n  if c { return 1 } else { return true }\n}"

        with pytest.raises(TypeCheckFailure) as excinfo:
            check_program(load_program(source))

        # Assertions
        rules = [e.rule for e in excinfo.value.errors]
        assert rules == ["T-ASSIGN", "T-RETURN"]

    @pytest.mark.parametrize(
        "source, rule",
        [
            ("fun int f() { int r; r = 1 }\n{ return 0 }", "T-METHOD"),
            ("fun int f(int a, int a) { return a }\n{ return 0 }", "T-METHOD"),
            ("int g;\nint g;\n{ return 0 }", "T-METHOD"),
            ("{ int r; r = !nope(); return 0 }", "T-INVK-ASYNC"),
            ("{ return 0; x = 1 }", "T-ASSIGN"),
        ],
    )
    def test_program_errors(self, source, rule):
        with pytest.raises(TypeCheckFailure) as excinfo:
            check_program(load_program(source))

        # Assertions
        assert rule in [e.rule for e in excinfo.value.errors]

    def test_forward_in_def_program(self):
        p = replace(load_program(self.strict_forward), dialect=Dialect.DEF)

        with pytest.raises(TypeCheckFailure) as excinfo:
            check_program(p)

        # Assertions
        assert any("not part of the def dialect" in e.message for e in excinfo.value.errors)

    def test_missing_program(self):
        with pytest.raises(ValueError) as excinfo:
            check_program(None)

        # Assertions
        assert str(excinfo.value) == "Program is required"

    def test_check_stmt_returns_errors(self):
        env = TypeEnv(vars={"x": INT}, funs={"main": ((), INT)})
        stmt = load_program("{ int x; x = true; return x }").main_body

        # Call the function
        errors = check_stmt(env, "main", stmt)

        # Assertions
        assert errors == [TypeCheckError("T-ASSIGN", "cannot assign bool to x: int", (1, 10))]


class TestConfigurationTyping:
    def test_initial_configuration_is_well_typed(self):
        p = corpus.load("delegate")
        cn = initial_configuration(p)

        # Call the function
        omega = omega_for(p, cn)

        # Assertions
        assert isinstance(omega, ConfigTypeEnv)
        assert list(omega.pending) == [0]
        assert check_configuration(omega, cn) == []

    def test_ill_typed_local_is_reported(self):
        p = corpus.load("delegate")
        cn = initial_configuration(p)
        frame = cn.futures[0].frames[0]
        bad = cn.with_future(0, replace(cn.futures[0], frames=(replace(frame, locals=frame.locals.set("y", BoolLit(True))),)))

        # Call the function
        errors = check_configuration(omega_for(p, bad), bad)

        # Assertions
        assert [e.rule for e in errors] == ["T-STORE"]
        assert errors[0].future == 0
        assert str(errors[0]).startswith("f0: [T-STORE]")

    def test_missing_global_is_reported(self):
        p = corpus.load("cycle")
        cn = initial_configuration(p)
        bad = replace(cn, globals=Store(tuple(b for b in cn.globals.bindings if b[0] != "b")))

        # Call the function
        errors = check_configuration(omega_for(p, bad), bad)

        # Assertions
        assert any(e.rule == "T-STORE" and "'b'" in e.message for e in errors)

    def test_var_type_lookup(self):
        env = TypeEnv(vars={"v": FLOW_INT}, funs={})

        # Assertions
        assert type_of_rhs(env, Var("v")) == FLOW_INT
