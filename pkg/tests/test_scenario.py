import numpy as np
import pytest

from parabolica.errors import ParseError
from parabolica.expr import compile_expression
from parabolica.scenario import Scenario, build_problem, parse_scenario, serialize_scenario


class TestExpressions:
    def test_arithmetic(self):
        e = compile_expression("2 + 3*x1 - x1^2 / 4", ("x1",))
        x = np.array([0.0, 2.0, -2.0])
        assert np.allclose(e(x1=x), 2 + 3 * x - x**2 / 4)

    def test_functions_and_constants(self):
        e = compile_expression("exp(-x1^2) + cos(pi*t) + tanh(x1) + sin(0)", ("t", "x1"))
        v = e(t=1.0, x1=np.array([0.5]))
        assert v[0] == pytest.approx(np.exp(-0.25) + np.cos(np.pi) + np.tanh(0.5))

    def test_power_right_associative(self):
        e = compile_expression("2^3^2", ())
        assert e() == 2.0 ** 9

    def test_unary_minus(self):
        e = compile_expression("-x1^2", ("x1",))
        assert e(x1=3.0) == -9.0  # -(x^2), the usual precedence

    def test_remark_family_drift(self):
        e = compile_expression("-x1*(1 + x1^2)", ("t", "x1"))
        assert e(t=0.0, x1=2.0) == -10.0

    def test_unknown_identifier_has_position(self):
        with pytest.raises(ParseError, match="unknown identifier 'y'"):
            compile_expression("1 + y", ("x1",))
        try:
            compile_expression("1 + y", ("x1",))
        except ParseError as exc:
            assert exc.col == 5

    def test_trailing_operator(self):
        with pytest.raises(ParseError, match="unexpected"):
            compile_expression("1 +", ("x1",))

    def test_unknown_function(self):
        with pytest.raises(ParseError, match="unknown function"):
            compile_expression("sinh(x1)", ("x1",))

    def test_unbalanced_parens(self):
        with pytest.raises(ParseError):
            compile_expression("(1 + 2", ())


BUILTIN_DOC = """
[problem]
builtin = "ou1d"

[run]
command = "validate"
window = [0.0, 1.0]

[output]
directory = "out"
formats = ["csv", "md"]
"""

INLINE_DOC = """
[problem]
d = 1
Q = "1"
b = "-x1*(1 + x1^2)"
eta0 = 1.0
psi = "-u - u^3"
psi0 = -1.0

[problem.lyapunov]
r = 1.0
a = 4.0
c = 2.0

[run]
command = "solve"
backend = "grid"
window = [0.0, 0.5]
seed = 7
"""


class TestParseScenario:
    def test_builtin_reference(self):
        sc = parse_scenario(BUILTIN_DOC)
        assert sc.problem["builtin"] == "ou1d"
        spec = build_problem(sc)
        assert spec.name == "ou1d"
        assert spec.ou_structure is not None
        assert spec.window.tau == 1.0

    def test_inline_remark_family(self):
        sc = parse_scenario(INLINE_DOC)
        spec = build_problem(sc)
        # drift -x(1+x^2): the l=0, m=1 polynomial-coefficient family
        b = spec.coefficients.b_at(0.0, np.array([2.0]))
        assert b[0] == -10.0
        q = spec.coefficients.q_at(0.3, np.array([1.5]))
        assert q[0, 0] == 1.0
        assert spec.nonlinearity.psi0 == -1.0
        psi = spec.nonlinearity.psi(0.0, np.array([2.0]))
        assert psi[0] == -10.0

    def test_malformed_expression_rejected(self):
        bad = INLINE_DOC.replace('Q = "1"', 'Q = "1 +"')
        with pytest.raises(ParseError, match="unexpected"):
            parse_scenario(bad)

    def test_unknown_builtin(self):
        bad = BUILTIN_DOC.replace('"ou1d"', '"nope"')
        with pytest.raises(ParseError, match="unknown name"):
            parse_scenario(bad)

    def test_missing_field_path_named(self):
        with pytest.raises(ParseError, match="problem.b"):
            parse_scenario("[problem]\nd = 1\nQ = \"1\"\n\n[run]\ncommand = \"solve\"\n")

    def test_bad_window(self):
        bad = BUILTIN_DOC.replace("[0.0, 1.0]", "[1.0, 0.5]")
        with pytest.raises(ParseError, match="tau > s"):
            parse_scenario(bad)

    def test_toml_syntax_error_reported(self):
        with pytest.raises(ParseError, match="syntax"):
            parse_scenario("[problem\nbuiltin = 'x'")

    def test_bad_command(self):
        bad = BUILTIN_DOC.replace('"validate"', '"explode"')
        with pytest.raises(ParseError, match="run.command"):
            parse_scenario(bad)


class TestRoundTrip:
    def _variants(self):
        docs = [BUILTIN_DOC, INLINE_DOC]
        for builtin in ("ou1d", "ou_timedep", "polycoef", "heat1d"):
            for command in ("validate", "solve", "verify", "measures"):
                docs.append(f"""
[problem]
builtin = "{builtin}"

[run]
command = "{command}"
window = [0.0, 2.0]
seed = 11
""")
        for psi, psi0 in (("-u", -1.0), ("-u^3", 0.0), ("sin(u)", 1.0)):
            docs.append(f"""
[problem]
builtin = "ou1d"
psi = "{psi}"
psi0 = {psi0}

[run]
command = "verify"
suite = "sup-stability"
window = [0.0, 3.0]
""")
        docs.append("""
[problem]
d = 1
Q = "2 + sin(t)"
b = "-x1"
eta0 = 1.0

[problem.ou]
q = "2 + sin(t)"
B = "-1"
f = "cos(t)"

[run]
command = "measures"
backend = "ou"
window = [0.0, 1.5]
""")
        return docs

    def test_round_trip_corpus(self):
        docs = self._variants()
        assert len(docs) >= 20
        for doc in docs:
            sc = parse_scenario(doc)
            text = serialize_scenario(sc)
            sc2 = parse_scenario(text)
            assert sc2 == sc, f"round-trip changed the scenario:\n{doc}\n-->\n{text}"

    def test_serialized_is_deterministic(self):
        sc = parse_scenario(INLINE_DOC)
        assert serialize_scenario(sc) == serialize_scenario(
            Scenario(dict(sc.problem), dict(sc.run), dict(sc.output)))


def test_inline_with_ou_block_enables_closed_form():
    doc = """
[problem]
d = 1
Q = "1"
b = "-x1 + cos(t)"
eta0 = 1.0

[problem.ou]
q = "1"
B = "-1"
f = "cos(t)"

[run]
command = "measures"
backend = "ou"
window = [0.0, 1.0]
"""
    spec = build_problem(parse_scenario(doc))
    assert spec.ou_structure is not None
    assert spec.ou_structure.f_at(0.0)[0] == 1.0
