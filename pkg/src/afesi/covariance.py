"""Known noise covariance models with factorization-backed linear algebra."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, signal

from .exceptions import InvalidVariance

KINDS = ("identity", "scaled", "ar", "dense")


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Noise covariance ``Sigma`` of the response.

    Every service works through a whitening map ``W`` with ``W.T @ W ==
    inv(Sigma)``; no explicit inverse is ever formed. The ``ar`` kind
    (``Sigma[i, j] = rho ** |i - j|``) uses the Prais-Winsten transform, the
    ``dense`` kind a Cholesky factor computed once at construction.

    Build instances through :meth:`identity`, :meth:`scaled`, :meth:`ar_power`
    or :meth:`dense`.
    """

    kind: str
    n: int
    param: float = 1.0
    _chol: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("covariance dimension must be positive")

    @classmethod
    def identity(cls, n: int) -> CovarianceModel:
        return cls("identity", n)

    @classmethod
    def scaled(cls, n: int, sigma_sq: float) -> CovarianceModel:
        if not np.isfinite(sigma_sq) or sigma_sq <= 0:
            raise InvalidVariance(f"noise variance must be positive, got {sigma_sq}")
        return cls("scaled", n, float(sigma_sq))

    @classmethod
    def ar_power(cls, n: int, rho: float) -> CovarianceModel:
        if not -1.0 < rho < 1.0:
            raise ValueError(f"AR coefficient must lie in (-1, 1), got {rho}")
        return cls("ar", n, float(rho))

    @classmethod
    def dense(cls, matrix) -> CovarianceModel:
        S = np.asarray(matrix, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError("covariance matrix must be square")
        if not np.allclose(S, S.T, rtol=1e-12, atol=1e-12 * np.abs(S).max()):
            raise ValueError("covariance matrix must be symmetric")
        try:
            L = linalg.cholesky(S, lower=True)
        except linalg.LinAlgError as exc:
            raise InvalidVariance("covariance matrix is not positive definite") from exc
        return cls("dense", S.shape[0], 1.0, L)

    @classmethod
    def from_spec(cls, text: str, n: int) -> CovarianceModel:
        """Parse ``identity``, ``scaled:S2`` or ``ar:RHO``."""
        kind, _, arg = text.partition(":")
        if kind == "identity" and not arg:
            return cls.identity(n)
        if kind == "scaled" and arg:
            return cls.scaled(n, float(arg))
        if kind == "ar" and arg:
            return cls.ar_power(n, float(arg))
        raise ValueError(f"cannot parse covariance spec {text!r}")

    @property
    def is_isotropic(self) -> bool:
        return self.kind in ("identity", "scaled")

    def matrix(self) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(self.n)
        if self.kind == "scaled":
            return self.param * np.eye(self.n)
        if self.kind == "ar":
            idx = np.arange(self.n)
            return self.param ** np.abs(idx[:, None] - idx[None, :])
        return self._chol @ self._chol.T

    def whiten(self, v: np.ndarray) -> np.ndarray:
        """Apply ``W`` (rows of ``v`` index observations; 1-D or 2-D)."""
        v = np.asarray(v, dtype=float)
        if self.kind == "identity":
            return v
        if self.kind == "scaled":
            return v / np.sqrt(self.param)
        if self.kind == "ar":
            rho = self.param
            out = np.empty_like(v)
            out[0] = v[0]
            out[1:] = (v[1:] - rho * v[:-1]) / np.sqrt(1.0 - rho * rho)
            return out
        return linalg.solve_triangular(self._chol, v, lower=True)

    def whiten_transpose(self, u: np.ndarray) -> np.ndarray:
        """Apply ``W.T``, so that ``whiten_transpose(whiten(v)) == solve(v)``."""
        u = np.asarray(u, dtype=float)
        if self.kind == "identity":
            return u
        if self.kind == "scaled":
            return u / np.sqrt(self.param)
        if self.kind == "ar":
            rho = self.param
            s = np.sqrt(1.0 - rho * rho)
            out = u / s
            out[0] = u[0]
            out[:-1] -= (rho / s) * u[1:]
            return out
        return linalg.solve_triangular(self._chol.T, u, lower=False)

    def color(self, e: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`whiten`: maps white noise to noise with law N(0, Sigma)."""
        e = np.asarray(e, dtype=float)
        if self.kind == "identity":
            return e
        if self.kind == "scaled":
            return e * np.sqrt(self.param)
        if self.kind == "ar":
            rho = self.param
            s = np.sqrt(1.0 - rho * rho)
            x = s * e
            x[0] = e[0]
            return signal.lfilter([1.0], [1.0, -rho], x, axis=0)
        return self._chol @ e

    def apply(self, v: np.ndarray) -> np.ndarray:
        """``Sigma @ v``."""
        v = np.asarray(v, dtype=float)
        if self.kind == "identity":
            return v.copy()
        if self.kind == "scaled":
            return self.param * v
        if self.kind == "ar":
            return self.matrix() @ v
        return self._chol @ (self._chol.T @ v)

    def solve(self, v: np.ndarray) -> np.ndarray:
        """``inv(Sigma) @ v`` via the whitening map."""
        v = np.asarray(v, dtype=float)
        if self.kind == "identity":
            return v.copy()
        if self.kind == "scaled":
            return v / self.param
        if self.kind == "ar":
            return self.whiten_transpose(self.whiten(v))
        return linalg.cho_solve((self._chol, True), v)

    def quadratic_form(self, v: np.ndarray) -> float:
        w = self.whiten(v)
        return float(w @ w)

    def submatrix(self, idx) -> CovarianceModel:
        """Covariance of the sub-vector ``y[idx]``."""
        idx = np.asarray(idx)
        if self.kind == "identity":
            return CovarianceModel.identity(len(idx))
        if self.kind == "scaled":
            return CovarianceModel.scaled(len(idx), self.param)
        S = self.matrix()
        return CovarianceModel.dense(S[np.ix_(idx, idx)])

    def describe(self) -> str:
        if self.kind == "identity":
            return "identity"
        if self.kind in ("scaled", "ar"):
            return f"{self.kind}:{self.param:g}"
        return "dense"
