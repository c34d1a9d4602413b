"""Feature expressions: trees over original columns and transformations.

Text grammar (also the canonical key)::

    xI | sin(E) | expc(E) | sqrtabs(E) | mul(E,E)

Leaves are written 1-based (``x1`` is column 0) to match the usual
``x_1 ... x_m`` notation. ``mul`` orders its operands by key, so
``mul(x2,x1)`` and ``mul(x1,x2)`` are the same feature.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

EXP_CLAMP = 5.0

UNARY_OPS = ("sin", "expc", "sqrtabs")
BINARY_OPS = ("mul",)
DEFAULT_OPS = ("sin", "expc", "sqrtabs", "mul")


def _apply_unary(op: str, v: np.ndarray) -> np.ndarray:
    if op == "sin":
        return np.sin(v)
    if op == "expc":
        return np.exp(np.minimum(EXP_CLAMP, v))
    if op == "sqrtabs":
        return np.sqrt(np.abs(v))
    raise ValueError(f"unknown unary op {op!r}")


@dataclass(frozen=True)
class FeatureExpression:
    """Immutable expression node.

    ``op`` is ``"x"`` for a leaf (``index`` is the 0-based column), one of
    :data:`UNARY_OPS` with one child, or ``"mul"`` with two children.
    Equality and hashing go through :attr:`key`.
    """

    op: str
    index: int = -1
    children: tuple[FeatureExpression, ...] = ()
    key: str = field(default="", compare=False)

    def __post_init__(self):
        if self.op == "x":
            if self.index < 0 or self.children:
                raise ValueError("leaf needs a non-negative column index and no children")
            key = f"x{self.index + 1}"
        elif self.op in UNARY_OPS:
            if len(self.children) != 1:
                raise ValueError(f"{self.op} takes one operand")
            key = f"{self.op}({self.children[0].key})"
        elif self.op in BINARY_OPS:
            if len(self.children) != 2:
                raise ValueError(f"{self.op} takes two operands")
            a, b = sorted(self.children, key=lambda c: c.key)
            object.__setattr__(self, "children", (a, b))
            key = f"{self.op}({a.key},{b.key})"
        else:
            raise ValueError(f"unknown op {self.op!r}")
        object.__setattr__(self, "key", key)

    def __eq__(self, other):
        if not isinstance(other, FeatureExpression):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __str__(self):
        return self.key

    @property
    def is_leaf(self) -> bool:
        return self.op == "x"

    @property
    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(c.depth for c in self.children)

    def leaves(self) -> set[int]:
        if self.is_leaf:
            return {self.index}
        return set().union(*(c.leaves() for c in self.children))


def leaf(index: int) -> FeatureExpression:
    return FeatureExpression("x", index=index)


def unary(op: str, child: FeatureExpression) -> FeatureExpression:
    return FeatureExpression(op, children=(child,))


def mul(a: FeatureExpression, b: FeatureExpression) -> FeatureExpression:
    return FeatureExpression("mul", children=(a, b))


def apply_op(op: str, operands) -> FeatureExpression:
    """Build ``op(*operands)`` for any supported op."""
    return FeatureExpression(op, children=tuple(operands))


def canonical_key(expr: FeatureExpression) -> str:
    return expr.key


def evaluate_expression(expr: FeatureExpression, X: np.ndarray, cache: dict | None = None) -> np.ndarray:
    """Evaluate ``expr`` row-wise on the design ``X``.

    ``cache`` maps keys to already evaluated columns and is filled in place;
    pass the same dict only together with the same ``X``.
    """
    if cache is not None:
        hit = cache.get(expr.key)
        if hit is not None:
            return hit
    if expr.is_leaf:
        if expr.index >= X.shape[1]:
            raise IndexError(f"{expr.key} refers past the {X.shape[1]} columns of X")
        out = np.asarray(X[:, expr.index], dtype=float)
    elif expr.op == "mul":
        a, b = expr.children
        out = evaluate_expression(a, X, cache) * evaluate_expression(b, X, cache)
    else:
        out = _apply_unary(expr.op, evaluate_expression(expr.children[0], X, cache))
    if cache is not None:
        cache[expr.key] = out
    return out


_TOKEN = re.compile(r"\s*(x\d+|[a-z]+|\(|\)|,)")


def parse_expression(text: str) -> FeatureExpression:
    """Inverse of ``expr.key``; accepts operands of ``mul`` in any order."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ValueError(f"cannot parse expression {text!r} at offset {pos}")
        tokens.append(m.group(1))
        pos = m.end()

    def parse(i: int) -> tuple[FeatureExpression, int]:
        if i >= len(tokens):
            raise ValueError(f"unexpected end of expression {text!r}")
        tok = tokens[i]
        if tok.startswith("x") and tok[1:].isdigit():
            idx = int(tok[1:])
            if idx < 1:
                raise ValueError("column references are 1-based")
            return leaf(idx - 1), i + 1
        if tok in UNARY_OPS or tok in BINARY_OPS:
            if i + 1 >= len(tokens) or tokens[i + 1] != "(":
                raise ValueError(f"expected '(' after {tok}")
            args = []
            j = i + 2
            while True:
                arg, j = parse(j)
                args.append(arg)
                if j < len(tokens) and tokens[j] == ",":
                    j += 1
                    continue
                if j < len(tokens) and tokens[j] == ")":
                    return apply_op(tok, args), j + 1
                raise ValueError(f"malformed arguments in {text!r}")
        raise ValueError(f"unexpected token {tok!r} in {text!r}")

    expr, end = parse(0)
    if end != len(tokens):
        raise ValueError(f"trailing input in {text!r}")
    return expr
