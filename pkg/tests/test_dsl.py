import numpy as np
import pytest

from conftest import build_dataset
from featloop import dsl
from featloop.dsl import DslError, ErrorKind
from helpers_dsl import fuzz_dataset, gen_program


@pytest.fixture
def ds(small_ds):
    return small_ds


def kind_of(source, ds=None):
    try:
        program = dsl.parse(source)
        if ds is not None:
            dsl.validate(program, ds)
    except DslError as err:
        return err.kind
    return None


# -------------------------------------------------------------------- parse

def test_parse_references(ds):
    p = dsl.parse("age / (hours + 1.0)")
    assert p.referenced_columns == {"age", "hours"}


def test_parse_categorical_equality(ds):
    p = dsl.parse('if famsize == "GT3" then age else 0.0')
    dsl.validate(p, ds)
    assert p.referenced_columns == {"famsize", "age"}


def test_escape_attempt_is_syntax_error():
    assert kind_of('__import__("os")') is ErrorKind.SYNTAX


def test_operator_precedence():
    p = dsl.parse("1 + 2 * 3")
    assert p.ast == dsl.Bin("+", dsl.Num(1.0), dsl.Bin("*", dsl.Num(2.0), dsl.Num(3.0)))


def test_parenthesized_comparison_left(ds):
    p = dsl.parse("if (age + hours) > 50 then 1.0 else 0.0")
    dsl.validate(p, ds)


def test_boolean_conditions(ds):
    p = dsl.parse('if age > 30 and not (hours < 10) or famsize == "LE3" '
                  "then 1.0 else 0.0")
    dsl.validate(p, ds)


def test_arity_mismatch():
    assert kind_of("abs(1, 2)") is ErrorKind.ARITY_MISMATCH
    assert kind_of("min(1)") is ErrorKind.ARITY_MISMATCH
    assert kind_of("clip(1, 2)") is ErrorKind.ARITY_MISMATCH


def test_unknown_function():
    assert kind_of('eval("x")') is ErrorKind.UNKNOWN_FUNCTION
    assert kind_of("system(1)") is ErrorKind.UNKNOWN_FUNCTION


def test_depth_cap():
    bomb = "(" * 40 + "1" + ")" * 40
    assert kind_of(bomb) is ErrorKind.DEPTH_EXCEEDED
    nested = "abs(" * 40 + "1" + ")" * 40
    assert kind_of(nested) is ErrorKind.DEPTH_EXCEEDED


def test_source_size_cap():
    big = "1 + " * 2000 + "1"
    assert kind_of(big) is ErrorKind.SYNTAX


def test_trailing_junk():
    assert kind_of("1 + 2 )") is ErrorKind.SYNTAX


# ------------------------------------------------------------------ validate

def test_label_leakage(ds):
    assert kind_of("subscribed + 1", ds) is ErrorKind.LABEL_LEAKAGE
    assert kind_of('if loan == "x" then 1 else 0', ds) is ErrorKind.LABEL_LEAKAGE


def test_unknown_identifier(ds):
    assert kind_of("zzz + 1", ds) is ErrorKind.UNKNOWN_IDENTIFIER


def test_type_errors(ds):
    assert kind_of('if age == "young" then 1 else 0', ds) is ErrorKind.TYPE_ERROR
    assert kind_of("famsize + 1", ds) is ErrorKind.TYPE_ERROR


def test_valid_numeric_program(ds):
    program = dsl.parse("sqrt(abs(age - hours))")
    dsl.validate(program, ds)  # does not raise


# ------------------------------------------------------------------ evaluate

def eval_both(source, ds):
    program = dsl.parse(source)
    dsl.validate(program, ds)
    return dsl.evaluate(program, ds), dsl.reference_evaluate(program, ds)


def test_identity(ds):
    (v, t), _ = eval_both("age + 0", ds)
    assert list(v) == [25.0, 40.0, 31.0, 58.0]
    assert t == 0


def test_division_by_zero(ds):
    (v, t), (rv, rt) = eval_both("age / hours", ds)
    assert v[1] == 0.0  # hours[1] == 0
    assert t == 1 and rt == 1
    assert np.array_equal(v, rv)


def test_categorical_indicator(ds):
    (v, _), _ = eval_both('if famsize == "GT3" then 1.0 else 0.0', ds)
    assert list(v) == [0.0, 1.0, 1.0, 0.0]


def test_sqrt_and_log1p_totalization(ds):
    (v, t), (rv, rt) = eval_both("sqrt(0.0 - age) + log1p(0.0 - age)", ds)
    assert list(v) == [0.0] * 4
    assert t == 8 and rt == 8


def test_exp_overflow_clamped(ds):
    # exp(25^2) is still finite; the other three rows overflow and clamp
    (v, t), (rv, rt) = eval_both("exp(age * age)", ds)
    assert np.isfinite(v).all()
    assert (v[1:] == 1e308).all()
    assert t == 3 and rt == 3
    assert np.array_equal(v, rv)


def test_if_counts_only_selected_branch(ds):
    # the zero division only fires where the condition selects that branch
    (v, t), (rv, rt) = eval_both("if hours > 0 then age / hours else 0.0", ds)
    assert t == 0 and rt == 0
    assert np.array_equal(v, rv)


def test_min_max_clip(ds):
    (v, _), (rv, _) = eval_both("clip(min(age, hours), 10, max(30, hours))", ds)
    assert np.array_equal(v, rv)
    assert list(v) == [25.0, 10.0, 31.0, 20.0]


def test_deterministic(ds):
    program = dsl.parse("exp(age / 10) * sqrt(hours)")
    a, _ = dsl.evaluate(program, ds)
    b, _ = dsl.evaluate(program, ds)
    assert np.array_equal(a, b)


# ---------------------------------------------------------------------- fuzz

def test_fuzz_differential_small():
    fds = fuzz_dataset(n=25, seed=0)
    rng = np.random.Generator(np.random.PCG64(42))
    features = set(fds.feature_names)
    for _ in range(400):
        source = gen_program(rng)
        program = dsl.parse(source)
        dsl.validate(program, fds)
        assert program.referenced_columns <= features
        v, t = dsl.evaluate(program, fds)
        rv, rt = dsl.reference_evaluate(program, fds)
        assert np.isfinite(v).all(), source
        assert np.array_equal(v, rv), source
        assert t == rt, source


def test_fuzz_pretty_roundtrip():
    rng = np.random.Generator(np.random.PCG64(17))
    for _ in range(300):
        program = dsl.parse(gen_program(rng))
        text = dsl.pretty(program.ast)
        assert dsl.parse(text).ast == program.ast, text
