import pytest
from hypothesis import given, settings, strategies as st

from tracesmc import core as C
from tracesmc import syntax as S
from tracesmc.desugar import desugar
from tracesmc.distributions import Dist
from tracesmc.models import NAMES, source
from tracesmc.parser import ParseError, parse, tokenize
from tracesmc.pretty import pretty


def test_sample_beta_node():
    t = parse("sample_Beta(2,2)")
    assert isinstance(t, S.SSample)
    assert t.dist == Dist.BETA
    assert [a.value for a in t.args] == [2.0, 2.0]


def test_weight_of_log_zero():
    t = parse("weight (log 0)")
    assert isinstance(t, S.SWeight)
    assert isinstance(t.arg, S.SPrim) and t.arg.op == "log"
    assert t.arg.args[0].value == 0.0


@pytest.mark.parametrize("text", ["", "   ", "// only a comment\n"])
def test_empty_program_is_an_error(text):
    with pytest.raises(ParseError):
        parse(text)


def test_errors_carry_line_and_column():
    with pytest.raises(ParseError) as e:
        parse("let x = 1 in\n  x +")
    assert e.value.line == 2


def test_distribution_arity_is_checked():
    with pytest.raises(ParseError):
        parse("sample_N(1)")
    with pytest.raises(ParseError):
        parse("sample_Bern(0.1, 0.2)")


def test_both_sample_spellings_agree():
    a = desugar(parse("sample (exponential 2)"))
    b = desugar(parse("sample_Exp(2)"))
    assert C.alpha_eq(a, b)


def test_backslash_lambda_and_fun():
    assert C.alpha_eq(desugar(parse("\\x. x + 1")), desugar(parse("fun y -> y + 1")))


def test_logweight_is_weight_of_exp():
    a = desugar(parse("logweight(0.5)"))
    assert isinstance(a, C.Weight)
    assert isinstance(a.arg, C.Prim) and a.arg.op == "exp"


def test_application_is_left_associative():
    t = parse("f a b")
    assert isinstance(t, S.SApp) and isinstance(t.fn, S.SApp)
    assert t.fn.fn.name == "f"


def test_precedence():
    t = parse("1 + 2 * 3 < 4 && true")
    assert t.op == "and"
    assert t.args[0].op == "lt"
    assert t.args[0].args[0].op == "add"


def test_spans_point_into_source():
    t = parse("let a = 1 in\nweight(a)")
    assert t.span[0] == 1
    assert t.body.span[0] == 2


def test_comments_are_skipped():
    assert [x.text for x in tokenize("1 // hi\n+ 2")][:3] == ["1", "+", "2"]


@pytest.mark.parametrize("name", NAMES)
def test_corpus_parses(name):
    parse(source(name))


@pytest.mark.parametrize("name", NAMES)
def test_pretty_roundtrip_on_corpus(name):
    t = parse(source(name))
    again = parse(pretty(t))
    assert C.alpha_eq(desugar(t), desugar(again))


@pytest.mark.parametrize("name", NAMES)
def test_core_pretty_roundtrip_on_corpus(name):
    t = desugar(parse(source(name)))
    assert C.alpha_eq(desugar(parse(pretty(t))), t)


def test_pretty_simple_sum():
    t = parse("1 + 2")
    assert C.alpha_eq(desugar(parse(pretty(t))), desugar(t))


# random arithmetic and control terms survive print-then-parse
_atoms = st.one_of(st.integers(0, 9).map(str), st.sampled_from(["x", "y", "true", "()"]))


def _combine(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*", "/", "<", "<=", "==", "&&", "||"]),
                  children).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        st.tuples(children, children, children).map(lambda t: f"(if {t[0]} then {t[1]} else {t[2]})"),
        st.tuples(children, children).map(lambda t: f"({t[0]}; {t[1]})"),
        children.map(lambda a: f"weight({a})"),
        children.map(lambda a: f"(-{a})"),
        st.tuples(children, children).map(lambda t: f"[{t[0]}, {t[1]}]"),
        st.tuples(children, children).map(lambda t: f"sample_N({t[0]}, {t[1]})"),
    )


_terms = st.recursive(_atoms, _combine, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(_terms)
def test_pretty_parse_roundtrip_property(body):
    src = f"let x = 1 in let y = 2 in {body}"
    t = desugar(parse(src))
    assert C.alpha_eq(desugar(parse(pretty(t))), t)
