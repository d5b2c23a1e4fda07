import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waistlab.maplang import (
    BinOp,
    Call,
    Const,
    LinearMapSpec,
    MapArityError,
    MapDomainError,
    MapSyntaxError,
    Neg,
    Num,
    UnknownFunctionError,
    UnknownIdentifierError,
    Var,
    eval_jacobian,
    eval_map,
    map_from_config,
    parse_expression,
    parse_map,
    pretty,
)

CORPUS = [
    "x1", "x1 + x2", "x1 - x2 - x3", "x1 * x2 / x3", "x1^2 + x2^2", "2+3*4^2",
    "-x1^2", "(-x1)^2", "2^3^2", "2^-1", "--x1", "x1 * -x2", "sin(pi*x1)", "cos(x1) + sin(x2)",
    "exp(-x1^2 - x2^2)", "sqrt(x1^2 + x2^2 + 1)", "abs(x1 - x2)", "e^x1", "1e-3 * x1", "2.5E2 - x3",
    ".5 * x2", "3. / (1 + x1^2)", "x1*x2*x3", "(x1 + x2) * (x2 + x3)", "x1 / (2 + cos(x2))",
    "sin(cos(exp(x1 / 4)))", "x1^3 - 3*x1*x2^2", "-(x1 + x2)^2 / 2", "pi * e", "abs(sin(x1)) ^ 0.5",
    "sqrt(abs(x1))", "1 - x1 - x2 - x3", "x1 ^ 2 ^ 0.5", "4 * x1 * (1 - x1)", "x2 - x1^2",
    "exp(x1) - exp(-x1)", "(x1 - 0.5)^2 + (x2 + 0.25)^2", "cos(pi * x1 * x2)", "x3 / (1 + x1^2 + x2^2)",
    "-1", "-(-(-x2))", "2 * pi * sqrt(x1^2 + 1)", "x1 + x2 * x3 - x1 / 7", "sin(x1)^2 + cos(x1)^2",
    "1/(1 + exp(-x1))", "x1 * (x2 - x3) ^ 2", "abs(x1) + abs(x2) + abs(x3)", "exp(sin(x1) * cos(x2))",
    "((((x1))))", "0.1 + 0.2 * x2^2 - 0.3 * x3^3",
]


def test_corpus_has_fifty():
    assert len(CORPUS) == 50


def test_examples():
    f = parse_map("x1^2 + x2^2", 2, 1)
    np.testing.assert_allclose(eval_map(f, [0.6, 0.8]), [1.0], atol=1e-15)
    proj = parse_map("x1; x2", 3, 2)
    assert proj.components == (Var(1), Var(2))
    np.testing.assert_array_equal(eval_map(proj, [1.0, 2.0, 3.0]), [1.0, 2.0])
    assert eval_map(parse_map("x1*x2", 2, 1), [3, 4])[0] == 12
    assert eval_map(parse_map("sqrt(abs(x1))", 1, 1), [-4])[0] == 2


def test_dangling_operator_offset():
    with pytest.raises(MapSyntaxError) as info:
        parse_map("x1 + ", 1, 1)
    assert info.value.offset == 5


@pytest.mark.parametrize(
    "text, offset",
    [("x1 $ 2", 3), ("(x1", 3), ("x1 x2", 3), ("sin x1", 0), ("2 +* 3", 3), ("", 0)],
)
def test_syntax_error_offsets(text, offset):
    with pytest.raises(MapSyntaxError) as info:
        parse_map(text, 2, 1)
    assert info.value.offset == offset


def test_byte_offsets_count_utf8():
    with pytest.raises(MapSyntaxError) as info:
        parse_map("x1 + é", 1, 1)
    assert info.value.offset == 5


def test_unknown_names_and_arity():
    with pytest.raises(UnknownIdentifierError):
        parse_map("x3", 2, 1)
    with pytest.raises(UnknownIdentifierError):
        parse_map("y + 1", 2, 1)
    with pytest.raises(UnknownFunctionError):
        parse_map("tan(x1)", 2, 1)
    with pytest.raises(MapArityError):
        parse_map("x1; x2", 2, 1)


def test_precedence_table():
    assert eval_map(parse_map("2+3*4^2", 1, 1), [0])[0] == 50
    assert eval_map(parse_map("-2^2", 1, 1), [0])[0] == -4
    assert eval_map(parse_map("2^3^2", 1, 1), [0])[0] == 512
    assert eval_map(parse_map("2^-1", 1, 1), [0])[0] == 0.5
    assert eval_map(parse_map("8 / 4 / 2", 1, 1), [0])[0] == 1
    assert eval_map(parse_map("8 - 4 - 2", 1, 1), [0])[0] == 2
    assert parse_expression("-x1^2", 1) == Neg(BinOp("^", Var(1), Num(2.0)))


def test_domain_errors_name_component():
    with pytest.raises(MapDomainError) as info:
        eval_map(parse_map("1/x1", 1, 1), [0])
    assert info.value.component == 1
    with pytest.raises(MapDomainError) as info:
        eval_map(parse_map("x1; sqrt(x1)", 1, 2), [-1])
    assert info.value.component == 2
    with pytest.raises(MapDomainError):
        eval_map(parse_map("x1^0.5", 1, 1), [-2])
    # integer powers of negative numbers are fine
    assert eval_map(parse_map("x1^3", 1, 1), [-2])[0] == -8


def test_nan_mode_marks_only_bad_rows():
    f = parse_map("1/x1", 1, 1)
    out = f.evaluate(np.array([[0.0], [2.0]]), errors="nan")
    assert np.isnan(out[0, 0]) and out[1, 0] == 0.5


def test_batch_matches_pointwise():
    f = parse_map("sin(pi*x1) * x2; exp(x1) - x2^2", 2, 2)
    X = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    batch = f.evaluate(X)
    for row, x in zip(batch, X):
        np.testing.assert_array_equal(row, eval_map(f, x))


def test_constants_and_functions():
    f = parse_map("pi; e; abs(-3); cos(0); exp(0)", 1, 5)
    np.testing.assert_allclose(eval_map(f, [0]), [math.pi, math.e, 3, 1, 1])


@pytest.mark.parametrize("text", CORPUS)
def test_round_trip(text):
    n = 3
    tree = parse_expression(text, n)
    assert parse_expression(pretty(tree), n) == tree


def _trees(n=3):
    leaves = st.one_of(
        st.builds(Num, st.floats(0, 1e6, allow_nan=False, allow_infinity=False)),
        st.builds(Const, st.sampled_from(["pi", "e"])),
        st.builds(Var, st.integers(1, n)),
    )
    return st.recursive(
        leaves,
        lambda sub: st.one_of(
            st.builds(Neg, sub),
            st.builds(BinOp, st.sampled_from(list("+-*/^")), sub, sub),
            st.builds(Call, st.sampled_from(["sin", "cos", "exp", "sqrt", "abs"]), sub),
        ),
        max_leaves=12,
    )


@settings(max_examples=200, deadline=None)
@given(_trees())
def test_round_trip_random_trees(tree):
    assert parse_expression(pretty(tree), 3) == tree


def test_jacobian_examples():
    J = eval_jacobian(parse_map("x1^2 + x2^2", 2, 1), [0.6, 0.8])
    np.testing.assert_allclose(J, [[1.2, 1.6]], atol=1e-6)
    rng = np.random.default_rng(1)
    lin = parse_map("2*x1 + 3*x2", 2, 1)
    for x in rng.uniform(-5, 5, (5, 2)):
        np.testing.assert_allclose(eval_jacobian(lin, x), [[2, 3]], atol=1e-9)
    np.testing.assert_allclose(eval_jacobian(parse_map("x1*x2", 2, 1), [0, 0]), [[0, 0]], atol=1e-9)


def test_jacobian_domain_error_propagates():
    with pytest.raises(MapDomainError):
        eval_jacobian(parse_map("sqrt(x1)", 1, 1), [0.0])


@pytest.mark.parametrize("text", CORPUS)
def test_jacobian_step_refinement(text):
    # at h = 1e-3 the truncation term dominates rounding, so halving the
    # error order is visible: |J(h) - J(h/10)| <= 100 h^2
    f = parse_map(text, 3, 1)
    h = 1e-3
    x = np.array([0.31, -0.47, 0.83])
    coarse = eval_jacobian(f, x, step=h)
    fine = eval_jacobian(f, x, step=h / 10)
    assert np.max(np.abs(coarse - fine)) <= 100 * h * h


def test_linear_map_spec():
    f = map_from_config({"kind": "linear", "matrix": [[1, 2, 0], [0, 0, 3]], "offset": [1, -1]})
    assert (f.n, f.k) == (3, 2)
    np.testing.assert_array_equal(f.evaluate([1, 1, 1]), [4, 2])
    np.testing.assert_array_equal(f.jacobian([5, 5, 5]), [[1, 2, 0], [0, 0, 3]])
    with pytest.raises(ValueError):
        LinearMapSpec([[1, 2]], [1, 2])


def test_expr_from_config():
    f = map_from_config({"kind": "expr", "n": 2, "k": 1, "text": "x1*x2"})
    assert eval_map(f, [2, 3])[0] == 6
    with pytest.raises(ValueError):
        map_from_config({"kind": "spline"})
