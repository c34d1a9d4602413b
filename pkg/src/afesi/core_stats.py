"""Linear-model primitives: GLS residual forms, AIC, least squares, test directions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from .covariance import CovarianceModel
from .exceptions import IndexOutOfRange, InvalidVariance, SingularDesign
from .expressions import FeatureExpression, evaluate_expression

RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("X must be a non-empty n x m matrix")
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"y has {y.shape[0]} entries but X has {X.shape[0]} rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def with_response(self, y) -> Dataset:
        return Dataset(self.X, y)

    def rows(self, idx) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx])


@dataclass(frozen=True, eq=False)
class AugmentedDesign:
    """The design ``[X, F]`` where ``F`` holds the evaluated generated features."""

    base: np.ndarray
    generated: tuple[FeatureExpression, ...] = ()
    columns: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        gen = tuple(self.generated)
        cache: dict = {}
        cols = [base] + [evaluate_expression(e, base, cache)[:, None] for e in gen]
        columns = np.hstack(cols)
        columns.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "generated", gen)
        object.__setattr__(self, "columns", columns)

    @property
    def m(self) -> int:
        return self.base.shape[1]

    @property
    def k(self) -> int:
        return len(self.generated)

    @property
    def p(self) -> int:
        return self.columns.shape[1]

    def labels(self) -> list[str]:
        return [f"x{i + 1}" for i in range(self.m)] + [e.key for e in self.generated]


@dataclass(frozen=True)
class TestDirection:
    eta: np.ndarray
    j: int
    sigma_eta_sq: float

    __test__ = False  # not a pytest class


def check_rank(V: np.ndarray, tol: float = RANK_TOL) -> None:
    """Raise :class:`SingularDesign` unless ``V`` has full column rank.

    Uses column-pivoted QR; rank is lost when the diagonal of ``R`` decays
    below ``tol`` relative to its leading entry.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise ValueError("expected a 2-D column matrix")
    n, p = V.shape
    if p == 0:
        return
    if p > n:
        raise SingularDesign(f"{p} columns cannot be independent in dimension {n}")
    R = linalg.qr(V, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(R))
    if d[0] == 0 or d[-1] <= tol * d[0]:
        raise SingularDesign(f"design is rank deficient (|R_pp|/|R_11| = {d[-1] / max(d[0], 1e-300):.3g})")


def whitened_basis(V: np.ndarray, Sigma: CovarianceModel) -> np.ndarray:
    """Orthonormal basis of ``W @ V`` (``W.T @ W = inv(Sigma)``)."""
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    Vw = Sigma.whiten(V)
    check_rank(Vw)
    Q, _ = linalg.qr(Vw, mode="economic")
    return Q


class ResidualOperator:
    """``Lambda = inv(S) - inv(S) V (V' inv(S) V)^-1 V' inv(S)`` held in factored form.

    ``op @ v`` applies it; :meth:`matrix` materializes it.
    """

    def __init__(self, V: np.ndarray, Sigma: CovarianceModel):
        self.Sigma = Sigma
        self.Q = whitened_basis(V, Sigma)
        self.rank = self.Q.shape[1]

    def _resid(self, w: np.ndarray) -> np.ndarray:
        return w - self.Q @ (self.Q.T @ w)

    def __matmul__(self, v: np.ndarray) -> np.ndarray:
        return self.Sigma.whiten_transpose(self._resid(self.Sigma.whiten(v)))

    def quadratic_form(self, v: np.ndarray) -> float:
        r = self._resid(self.Sigma.whiten(v))
        return float(r @ r)

    def matrix(self) -> np.ndarray:
        return self @ np.eye(self.Sigma.n)


def gls_residual_operator(V: np.ndarray, Sigma: CovarianceModel) -> ResidualOperator:
    return ResidualOperator(V, Sigma)


def aic(V: np.ndarray, y: np.ndarray, Sigma: CovarianceModel) -> float:
    """``y' Lambda_V y + 2 |V|`` with ``|V|`` the number of columns."""
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    op = ResidualOperator(V, Sigma)
    return op.quadratic_form(np.asarray(y, dtype=float)) + 2.0 * V.shape[1]


def _design_qr(columns: np.ndarray):
    check_rank(columns)
    return linalg.qr(columns, mode="economic")


def _columns(design) -> np.ndarray:
    return design.columns if isinstance(design, AugmentedDesign) else np.asarray(design, dtype=float)


def fit_beta(design, y: np.ndarray) -> np.ndarray:
    """Ordinary least squares ``(X_F' X_F)^-1 X_F' y``."""
    Q, R = _design_qr(_columns(design))
    return linalg.solve_triangular(R, Q.T @ np.asarray(y, dtype=float))


def test_direction(design, j: int, Sigma: CovarianceModel) -> TestDirection:
    """Direction ``eta`` with ``eta @ y == fit_beta(design, y)[j - 1]``.

    ``j`` is 1-based over the ``m + k`` columns of the design.
    """
    cols = _columns(design)
    p = cols.shape[1]
    if not 1 <= j <= p:
        raise IndexOutOfRange(f"coefficient index {j} outside 1..{p}")
    Q, R = _design_qr(cols)
    e = np.zeros(p)
    e[j - 1] = 1.0
    # eta = X_F R^-1 R^-T e_j = Q R^-T e_j
    eta = Q @ linalg.solve_triangular(R, e, trans="T")
    s2 = float(eta @ Sigma.apply(eta))
    if not s2 > 0:
        raise InvalidVariance("eta' Sigma eta is not positive")
    return TestDirection(eta=eta, j=j, sigma_eta_sq=s2)


test_direction.__test__ = False


def classical_z_p_value(t: float, sigma_eta_sq: float) -> float:
    """Two-sided z-test p-value ``P(|T| >= |t|)`` for ``T ~ N(0, sigma_eta_sq)``."""
    if not np.isfinite(sigma_eta_sq) or sigma_eta_sq <= 0:
        raise InvalidVariance(f"variance must be positive, got {sigma_eta_sq}")
    z = abs(t) / np.sqrt(sigma_eta_sq)
    return float(min(1.0, 2.0 * special.ndtr(-z)))


def estimate_variance(dataset: Dataset) -> float:
    """Residual variance ``||y - X (X'X)^-1 X' y||^2 / (n - m)`` of the original design."""
    n, m = dataset.X.shape
    if n <= m:
        raise ValueError("variance estimate needs n > m")
    Q, _ = _design_qr(dataset.X)
    r = dataset.y - Q @ (Q.T @ dataset.y)
    return float(r @ r) / (n - m)
