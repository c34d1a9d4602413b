"""Seeded directed tree search that generates features guided by AIC.

Each node of the tree is a feature set: the original columns plus the
generated expressions added along the path from the root. Depth ``d + 1``
is built by drawing random (parent, transformation, operand) triples from
the surviving nodes of depth ``d`` until ``max_nodes`` non-collinear
candidates exist, then reduced by AIC to at most ``max_parents`` nodes.

The response enters only through AIC comparisons (the sort of each level and
the improvement check against the previous level's best). Every such
comparison is appended to a :class:`ComparisonTrace`; conditional inference
turns that trace into constraints on the response.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .core_stats import Dataset, check_rank
from .covariance import CovarianceModel
from .expressions import BINARY_OPS, DEFAULT_OPS, UNARY_OPS, FeatureExpression, apply_op, evaluate_expression, leaf

# relations are stored as "left REL right"
LE, LT, GE = "<=", "<", ">="


@dataclass(frozen=True)
class SearchConfig:
    """Hyperparameters of the tree search.

    Defaults are the settings used for the synthetic studies: depth 6, three
    candidates and three parents per level, tolerance 2 and the four
    transformations ``sin``, ``expc``, ``sqrtabs`` and ``mul``.
    """

    max_depth: int = 6
    max_nodes: int = 3
    max_parents: int = 3
    gamma: int = 2
    seed: int = 0
    ops: tuple[str, ...] = DEFAULT_OPS
    collinearity_tol: float = 1e-6

    def __post_init__(self):
        for name in ("max_depth", "max_nodes", "max_parents", "gamma"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.max_parents > self.max_nodes:
            raise ValueError("max_parents cannot exceed max_nodes")
        ops = tuple(self.ops)
        unknown = [op for op in ops if op not in UNARY_OPS + BINARY_OPS]
        if unknown or not ops:
            raise ValueError(f"unsupported transformation set {ops!r}")
        if len(set(ops)) != len(ops):
            raise ValueError("duplicate transformations")
        object.__setattr__(self, "ops", ops)
        if not 0 < self.collinearity_tol < 1:
            raise ValueError("collinearity_tol must lie in (0, 1)")

    def replace(self, **changes) -> SearchConfig:
        from dataclasses import replace

        return replace(self, **changes)


class Node:
    """A feature set in the search tree."""

    __slots__ = ("generated", "parent", "depth", "creation_index", "no_improve", "aic", "basis", "wbasis", "leaves")

    def __init__(self, generated, parent, depth, creation_index, basis, wbasis, leaves):
        self.generated: tuple[FeatureExpression, ...] = generated
        self.parent: Node | None = parent
        self.depth = depth
        self.creation_index = creation_index
        self.no_improve = 0
        self.aic = np.nan
        self.basis = basis
        self.wbasis = wbasis
        self.leaves: tuple[FeatureExpression, ...] = leaves

    @property
    def m(self) -> int:
        return len(self.leaves)

    @property
    def features(self) -> tuple[FeatureExpression, ...]:
        return self.leaves + self.generated

    @property
    def size(self) -> int:
        return len(self.leaves) + len(self.generated)

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(e.key for e in self.generated)

    def __repr__(self):
        return f"Node(depth={self.depth}, idx={self.creation_index}, gen={list(self.keys)})"


@dataclass(frozen=True)
class Comparison:
    left: Node
    right: Node
    relation: str
    origin: str


@dataclass
class ComparisonTrace:
    entries: list[Comparison] = field(default_factory=list)

    def add(self, left: Node, right: Node, relation: str, origin: str) -> None:
        self.entries.append(Comparison(left, right, relation, origin))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def holds(self, y: np.ndarray, context: SearchContext, slack: float = 1e-9) -> bool:
        """Whether every recorded relation is satisfied by the response ``y``."""
        yw = context.Sigma.whiten(np.asarray(y, dtype=float))
        for c in self.entries:
            diff = context.aic_of(c.left, yw) - context.aic_of(c.right, yw)
            tol = slack * max(1.0, abs(c.left.aic), abs(c.right.aic))
            if c.relation in (LE, LT) and diff > tol:
                return False
            if c.relation == GE and diff < -tol:
                return False
        return True


@dataclass
class AfeResult:
    generated: tuple[FeatureExpression, ...]
    trace: ComparisonTrace
    final_depth: int
    best_node: Node
    candidates: list[Node] = field(default_factory=list, repr=False)

    @property
    def k(self) -> int:
        return len(self.generated)

    @property
    def empty(self) -> bool:
        return not self.generated

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(e.key for e in self.generated)

    @property
    def key_set(self) -> frozenset[str]:
        return frozenset(self.keys)


def _state_key(rng: np.random.Generator):
    s = rng.bit_generator.state
    return (s["state"]["state"], s["has_uint32"], s["uinteger"])


class SearchContext:
    """Response-independent state shared by repeated searches on one design.

    Holds evaluated and whitened columns, orthonormal bases of visited
    feature sets and memoized candidate generation. Reusing a context across
    calls with different responses is what keeps the line search cheap; the
    results are identical to a fresh context.
    """

    def __init__(self, X: np.ndarray, Sigma: CovarianceModel, config: SearchConfig):
        X = np.asarray(X, dtype=float)
        if Sigma.n != X.shape[0]:
            raise ValueError(f"covariance dimension {Sigma.n} does not match n={X.shape[0]}")
        self.X = X
        self.Sigma = Sigma
        self.config = config
        self.m = X.shape[1]
        self._columns: dict[str, np.ndarray] = {}
        self._wcolumns: dict[str, np.ndarray] = {}
        self._bases: dict[tuple[str, ...], tuple[np.ndarray, np.ndarray]] = {}
        self._generation: dict = {}
        check_rank(X)
        Q = np.linalg.qr(X)[0]
        if Sigma.is_isotropic:
            WQ = Q
        else:
            WX = Sigma.whiten(X)
            check_rank(WX)
            WQ = np.linalg.qr(WX)[0]
        self._bases[()] = (Q, WQ)
        self.leaves = tuple(leaf(i) for i in range(self.m))

    def column(self, expr: FeatureExpression) -> np.ndarray:
        return evaluate_expression(expr, self.X, self._columns)

    def wcolumn(self, expr: FeatureExpression) -> np.ndarray:
        if self.Sigma.is_isotropic:
            return self.column(expr)
        w = self._wcolumns.get(expr.key)
        if w is None:
            w = self._wcolumns[expr.key] = self.Sigma.whiten(self.column(expr))
        return w

    def root(self) -> Node:
        Q, WQ = self._bases[()]
        return Node((), None, 0, 0, Q, WQ, self.leaves)

    def aic_of(self, node: Node, yw: np.ndarray) -> float:
        """AIC of ``node`` for an already whitened response ``yw``."""
        Q = node.wbasis
        r = yw - Q @ (Q.T @ yw)
        return float(r @ r) + 2.0 * node.size

    def extend_basis(self, parent: Node, expr: FeatureExpression):
        """Bases for ``parent + [expr]``, or ``None`` when ``expr`` is collinear."""
        keys = parent.keys + (expr.key,)
        hit = self._bases.get(keys)
        if hit is not None:
            return hit
        c = self.column(expr)
        if not is_independent(c, parent.basis, self.config.collinearity_tol):
            return None
        Q = _append_orthonormal(parent.basis, c)
        if self.Sigma.is_isotropic:
            WQ = Q
        else:
            WQ = _append_orthonormal(parent.wbasis, self.wcolumn(expr))
        self._bases[keys] = (Q, WQ)
        return Q, WQ

    def candidate_space_size(self, parents) -> int:
        n_un = sum(op in UNARY_OPS for op in self.config.ops)
        n_bin = sum(op in BINARY_OPS for op in self.config.ops)
        return sum(n_un * p.size + n_bin * comb(p.size, 2) for p in parents)


def _append_orthonormal(Q: np.ndarray, c: np.ndarray) -> np.ndarray:
    r = c - Q @ (Q.T @ c)
    r = r - Q @ (Q.T @ r)
    return np.column_stack([Q, r / np.linalg.norm(r)])


def is_independent(candidate: np.ndarray, basis: np.ndarray, tol: float) -> bool:
    """Relative residual test against an orthonormal ``basis``."""
    candidate = np.asarray(candidate, dtype=float)
    if not np.all(np.isfinite(candidate)):
        return False
    norm = np.linalg.norm(candidate)
    if norm == 0.0:
        return False
    r = candidate - basis @ (basis.T @ candidate)
    r = r - basis @ (basis.T @ r)
    return bool(np.linalg.norm(r) / norm > tol)


def multicollinearity_check(candidate: np.ndarray, node_columns: np.ndarray, tol: float = 1e-6) -> bool:
    """True iff ``candidate`` is finite, nonzero and not (nearly) in the span of ``node_columns``."""
    node_columns = np.asarray(node_columns, dtype=float)
    if node_columns.ndim == 1:
        node_columns = node_columns[:, None]
    check_rank(node_columns)
    Q = np.linalg.qr(node_columns)[0]
    return is_independent(candidate, Q, tol)


def generate_candidates(parents: list[Node], context: SearchContext, rng: np.random.Generator, depth: int, counter=None):
    """Yield up to ``max_nodes`` accepted child nodes of ``parents``.

    Draw discipline per attempt: parent index, transformation index, operand
    index, and for binary transformations a second operand index redrawn
    until it differs from the first. Attempts already made at this depth,
    expressions already present in the parent and collinear candidates are
    skipped. The stream ends early once every (parent, transformation,
    operands) combination has been tried. The response is never read.
    """
    config = context.config
    ops = config.ops
    total = context.candidate_space_size(parents)
    tried: set[tuple[int, str]] = set()
    # a level is a set of feature sets: the same set reached from two parents is kept once
    level_sets: set[frozenset[str]] = set()
    accepted = 0
    counter = counter if counter is not None else iter(range(1, 1 << 62))
    while accepted < config.max_nodes and len(tried) < total:
        pi = int(rng.integers(len(parents)))
        parent = parents[pi]
        op = ops[int(rng.integers(len(ops)))]
        feats = parent.features
        i = int(rng.integers(len(feats)))
        if op in BINARY_OPS:
            if len(feats) < 2:
                continue
            j = int(rng.integers(len(feats)))
            while j == i:
                j = int(rng.integers(len(feats)))
            expr = apply_op(op, (feats[i], feats[j]))
        else:
            expr = apply_op(op, (feats[i],))
        tag = (pi, expr.key)
        if tag in tried:
            continue
        tried.add(tag)
        if expr in feats:
            continue
        fset = frozenset(parent.keys + (expr.key,))
        if fset in level_sets:
            continue
        bases = context.extend_basis(parent, expr)
        if bases is None:
            continue
        level_sets.add(fset)
        accepted += 1
        yield Node(parent.generated + (expr,), parent, depth, next(counter), bases[0], bases[1], parent.leaves)


def _generate_level(parents, context: SearchContext, rng: np.random.Generator, depth: int, counter) -> list[Node]:
    # memoized on (parent feature sets, RNG state); children are rebuilt so
    # creation indices follow this run's counter
    key = (depth, tuple(p.keys for p in parents), _state_key(rng))
    hit = context._generation.get(key)
    if hit is None:
        children = list(generate_candidates(parents, context, rng, depth, counter))
        recipe = [(parents.index(c.parent), c.generated[-1]) for c in children]
        context._generation[key] = (recipe, rng.bit_generator.state)
        return children
    recipe, state = hit
    rng.bit_generator.state = state
    out = []
    for pi, expr in recipe:
        parent = parents[pi]
        Q, WQ = context.extend_basis(parent, expr)
        out.append(Node(parent.generated + (expr,), parent, depth, next(counter), Q, WQ, parent.leaves))
    return out


def reduce_nodes(candidates: list[Node], best_prev: Node, config: SearchConfig, trace: ComparisonTrace) -> list[Node]:
    """Sort a level by AIC and keep up to ``max_parents`` nodes whose no-improvement count is below ``gamma``.

    ``candidates`` must carry their AIC in ``node.aic`` and ``best_prev`` is
    the best node of the previous level (the root for depth one). Appends the
    adjacent sort relations and one improvement check per visited node to
    ``trace``.
    """
    order = sorted(candidates, key=lambda v: (v.aic, v.creation_index))
    for lo, hi in zip(order, order[1:]):
        trace.add(lo, hi, LE, "sort-adjacent")
    kept: list[Node] = []
    for v in order:
        if v.aic < best_prev.aic:
            v.no_improve = 0
            trace.add(v, best_prev, LT, "improvement-check")
        else:
            v.no_improve = v.parent.no_improve + 1
            trace.add(v, best_prev, GE, "improvement-check")
        if v.no_improve < config.gamma:
            kept.append(v)
        if len(kept) == config.max_parents:
            break
    return kept


def run_afe(dataset: Dataset, Sigma: CovarianceModel, config: SearchConfig, context: SearchContext | None = None) -> AfeResult:
    """Run the tree search on ``(dataset.X, dataset.y)``.

    The output is the best node of the last non-empty level. If depth one
    already reduces to nothing the root is returned and ``result.empty`` is
    true. Pass a :class:`SearchContext` built for the same ``X``, ``Sigma``
    and ``config`` to reuse response-independent work between calls.
    """
    if context is None:
        context = SearchContext(dataset.X, Sigma, config)
    elif context.X is not dataset.X and not np.array_equal(context.X, dataset.X):
        raise ValueError("context was built for a different design")
    yw = Sigma.whiten(dataset.y)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    counter = iter(range(1, 1 << 62))
    trace = ComparisonTrace()
    root = context.root()
    root.aic = context.aic_of(root, yw)
    level = [root]
    best_prev = root
    all_candidates: list[Node] = []
    final_depth = 0
    for d in range(config.max_depth):
        children = _generate_level(level, context, rng, d + 1, counter)
        all_candidates.extend(children)
        if not children:
            break
        for v in children:
            v.aic = context.aic_of(v, yw)
        kept = reduce_nodes(children, best_prev, config, trace)
        if not kept:
            break
        level = kept
        best_prev = min(children, key=lambda v: (v.aic, v.creation_index))
        final_depth = d + 1
    best_node = level[0]
    return AfeResult(best_node.generated, trace, final_depth, best_node, all_candidates)
