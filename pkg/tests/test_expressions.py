import math
import random

import numpy as np
import pytest

from helpers import make_dataset, oracle_eval, random_expression

from srloop.expressions import (
    ArityMismatchError,
    Binary,
    Const,
    Dialect,
    Expression,
    OperatorSet,
    Unary,
    Var,
    complexity,
    evaluate,
    evaluate_rows,
    render,
)
from srloop.parsing import parse


def infix(text, variables=("x1",)):
    return parse(text, Dialect.INFIX, list(variables))


class TestRender:
    def test_simple_forms(self):
        assert render(Expression(Binary("+", Var(1), Const(1)))) == "x1+c1"
        assert render(Expression(Unary("sqrt", Var(1)))) == "sqrt(x1)"
        assert render(infix("c1*x1/(c2+x1)")) == "c1*x1/(c2+x1)"

    def test_power_forms(self):
        assert render(infix("x1**1.5")) == "x1**1.5"
        assert render(infix("(c1*x1)**2")) == "(c1*x1)**2"
        assert render(infix("x1**c1**c2")) == "x1**c1**c2"

    def test_round_trip_random_trees(self):
        rng = random.Random(1234)
        for _ in range(500):
            e = random_expression(rng, n_vars=2)
            again = parse(render(e), Dialect.INFIX, ["x1", "x2"])
            assert again.root == e.root, render(e)


class TestComplexity:
    def test_single_node(self):
        assert complexity(Expression(Var(1))) == 1

    def test_langmuir_is_seven_nodes(self):
        assert complexity(infix("c1*x1/(c2+x1)")) == 7

    def test_bode_is_eight_nodes(self):
        assert complexity(infix("c1*exp(c2*x1)+c3")) == 8

    def test_invariant_under_reindexing(self):
        assert complexity(infix("c2*x1+c1")) == complexity(infix("c1*x1+c2"))


class TestEvaluate:
    def test_basic(self):
        assert evaluate(infix("x1+c1"), [2.0], [3.0]) == 5.0

    def test_protected_division(self):
        assert math.isnan(evaluate(infix("c1/x1"), [1.0], [0.0]))

    def test_langmuir_value(self):
        assert evaluate(infix("c1*x1/(c2+x1)"), [5.0, 2.0], [2.0]) == 2.5

    @pytest.mark.parametrize(
        "text,params,row",
        [
            ("log(x1)", (), [-1.0]),
            ("log(x1)", (), [0.0]),
            ("sqrt(x1)", (), [-4.0]),
            ("exp(x1)", (), [1e4]),
            ("x1/(x1-x1)", (), [3.0]),
            ("c1**x1", (-2.0,), [0.5]),
        ],
    )
    def test_protected_cases(self, text, params, row):
        assert math.isnan(evaluate(infix(text), params, row))

    def test_arity_mismatch(self):
        with pytest.raises(ArityMismatchError):
            evaluate(infix("c1*x1"), [1.0, 2.0], [1.0])

    def test_rows_match_scalar(self):
        e = infix("c1*x1/(c2+x1)+sqrt(x1)")
        X = np.array([[0.5], [2.0], [7.0]])
        out = evaluate_rows(e, [3.0, 1.5], X)
        for i, row in enumerate(X):
            assert out[i] == evaluate(e, [3.0, 1.5], row)

    def test_agrees_with_brute_force_oracle(self):
        rng = random.Random(99)
        checked = 0
        while checked < 1000:
            e = random_expression(rng, n_vars=2, max_depth=4)
            params = [rng.uniform(-3, 3) for _ in range(e.n_constants)]
            row = [rng.uniform(-5, 5), rng.uniform(-5, 5)]
            expected = oracle_eval(e.root, params, row)
            got = evaluate(e, params, row)
            if expected is None:
                assert math.isnan(got), render(e)
            else:
                assert math.isclose(got, expected, rel_tol=1e-12, abs_tol=1e-300), render(e)
            checked += 1


class TestOperatorSet:
    def test_easy_and_hard_membership(self):
        easy = OperatorSet.easy()
        assert easy.binary == frozenset({"+", "-", "*", "/"})
        assert easy.unary == frozenset()
        hard = OperatorSet.hard()
        assert hard.unary == frozenset({"sqrt", "log", "exp", "square", "cube"})

    def test_per_dataset_extras(self):
        kepler = OperatorSet.easy(("sqrt",))
        assert "sqrt" in kepler.unary
        bode = OperatorSet.easy(("^", "exp"))
        assert "^" in bode.binary and "exp" in bode.unary

    def test_rejects_out_of_set_operators(self):
        easy = OperatorSet.easy()
        assert easy.violations(infix("exp(x1)+c1")) == ["exp"]
        assert easy.allows(infix("c1*x1/(c2+x1)"))

    def test_restricted_power_allowed_without_caret(self):
        easy = OperatorSet.easy()
        assert easy.allows(infix("c1*x1**(3/2)"))
        assert easy.allows(infix("c1*x1**c2"))
        assert easy.violations(infix("c1*x1**x1")) == ["^"]
        assert OperatorSet.easy(("^",)).allows(infix("c1*x1**x1"))

    def test_neg_rides_on_minus(self):
        assert OperatorSet.easy().allows(infix("-c1*x1"))

    def test_needs_binary_ops(self):
        with pytest.raises(ValueError):
            OperatorSet(frozenset())

    def test_unknown_operator_name(self):
        with pytest.raises(ValueError):
            OperatorSet(frozenset({"+", "%"}))


def test_expression_initial_guess_defaults_to_ones():
    e = Expression(Binary("*", Const(1), Var(1)))
    assert e.initial_guess() == (1.0,)
    parsed = infix("2.5*x1")
    assert parsed.initial_guess() == (2.5,)


def test_dataset_helper_shapes():
    d = make_dataset([1.0, 2.0, 3.0], [2.0, 4.0, 6.0])
    assert d.X.shape == (3, 1)
    assert d.variables == ("x1",)
