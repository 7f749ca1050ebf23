"""Shared test utilities: random expression trees, an independent scalar
evaluation oracle, and small ad-hoc datasets."""

from __future__ import annotations

import math
import random

import numpy as np

from srloop.data import Dataset
from srloop.expressions import Binary, Const, Dialect, Expression, Lit, Unary, Var, render
from srloop.parsing import parse

UNARY_CHOICES = ["sqrt", "log", "exp", "square", "cube", "neg"]
BINARY_CHOICES = ["+", "-", "*", "/", "^"]


def random_node(rng: random.Random, n_vars: int = 2, max_depth: int = 4,
                allow_pow: bool = True, depth: int = 0):
    if depth >= max_depth or (depth > 0 and rng.random() < 0.35):
        roll = rng.random()
        if roll < 0.45:
            return Const(rng.randint(1, 3))
        return Var(rng.randint(1, n_vars))
    roll = rng.random()
    if roll < 0.25:
        op = rng.choice(UNARY_CHOICES)
        return Unary(op, random_node(rng, n_vars, max_depth, allow_pow, depth + 1))
    op = rng.choice(BINARY_CHOICES if allow_pow else BINARY_CHOICES[:4])
    if op == "^":
        if rng.random() < 0.6:
            exponent = Lit(float(rng.choice([2, 3, 0.5, 1.5, -1])))
        else:
            exponent = Const(rng.randint(1, 3))
        return Binary("^", random_node(rng, n_vars, max_depth, allow_pow, depth + 1), exponent)
    return Binary(
        op,
        random_node(rng, n_vars, max_depth, allow_pow, depth + 1),
        random_node(rng, n_vars, max_depth, allow_pow, depth + 1),
    )


def random_expression(rng: random.Random, n_vars: int = 2, max_depth: int = 4,
                      allow_pow: bool = True) -> Expression:
    """A random expression normalized through parse(render(.)) so constant
    indices follow the left-to-right convention the parser guarantees."""
    raw = Expression(random_node(rng, n_vars, max_depth, allow_pow))
    variables = [f"x{i + 1}" for i in range(n_vars)]
    return parse(render(raw), Dialect.INFIX, variables)


def oracle_eval(node, params, row):
    """Independent brute-force tree walk with explicit Undefined (None) handling."""
    if isinstance(node, Const):
        return float(params[node.index - 1])
    if isinstance(node, Var):
        return float(row[node.index - 1])
    if isinstance(node, Lit):
        return float(node.value)
    if isinstance(node, Unary):
        v = oracle_eval(node.child, params, row)
        if v is None:
            return None
        try:
            if node.op == "sqrt":
                if v < 0:
                    return None
                out = math.sqrt(v)
            elif node.op == "log":
                if v <= 0:
                    return None
                out = math.log(v)
            elif node.op == "exp":
                out = math.exp(v)
            elif node.op == "square":
                out = v * v
            elif node.op == "cube":
                out = v * v * v
            elif node.op == "neg":
                out = -v
            else:
                raise AssertionError(node.op)
        except OverflowError:
            return None
        return out if math.isfinite(out) else None
    left = oracle_eval(node.left, params, row)
    right = oracle_eval(node.right, params, row)
    if left is None or right is None:
        return None
    try:
        if node.op == "+":
            out = left + right
        elif node.op == "-":
            out = left - right
        elif node.op == "*":
            out = left * right
        elif node.op == "/":
            if right == 0:
                return None
            out = left / right
        elif node.op == "^":
            out = left**right
        else:
            raise AssertionError(node.op)
    except (OverflowError, ZeroDivisionError, ValueError):
        return None
    if isinstance(out, complex):
        return None
    return out if math.isfinite(out) else None


def reply(*exprs: str, scratchpad: str = "scratchpad: looking at trends.") -> str:
    """A scripted model response carrying the given candidate lines."""
    from srloop.prompts import BEGIN_MARKER, END_MARKER

    return "\n".join([scratchpad, BEGIN_MARKER, *exprs, END_MARKER])


def make_dataset(X, y, dataset_id: str = "adhoc", **kwargs) -> Dataset:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 1 and np.asarray(y).size > 1:
        X = X.T
    variables = tuple(f"x{i + 1}" for i in range(X.shape[1]))
    return Dataset(
        id=dataset_id, variables=variables, X=X,
        y=np.asarray(y, dtype=float), **kwargs,
    )
