"""Symmetric binary adjacency stored as its upper-triangle edge list."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .. import autodiff as ad
from ..autodiff import Tensor


class GraphError(ValueError):
    pass


class SparseSym:
    """Undirected simple graph on ``n`` nodes.

    Only pairs ``i < j`` are stored, so symmetry and a zero diagonal hold by
    construction. Instances are immutable; :meth:`flip` returns a new graph.
    """

    def __init__(self, n: int, pairs=None):
        self.n = int(n)
        if pairs is None or len(pairs) == 0:
            codes = np.zeros(0, dtype=np.int64)
        else:
            p = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
            if p.min() < 0 or p.max() >= self.n:
                raise GraphError(f"edge endpoint outside [0, {self.n})")
            if np.any(p[:, 0] == p[:, 1]):
                raise GraphError("self-loops are not allowed")
            lo, hi = np.minimum(p[:, 0], p[:, 1]), np.maximum(p[:, 0], p[:, 1])
            codes = np.unique(lo * self.n + hi)
        self._codes = codes
        self._csr = None
        self._degree = None

    @classmethod
    def from_dense(cls, A) -> "SparseSym":
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise GraphError(f"adjacency must be square, got {A.shape}")
        if not np.array_equal(A, A.T):
            raise GraphError("adjacency is not symmetric")
        if np.any(np.diag(A) != 0):
            raise GraphError("adjacency has a nonzero diagonal")
        if not np.all((A == 0) | (A == 1)):
            raise GraphError("adjacency entries must be 0 or 1")
        i, j = np.nonzero(np.triu(A, 1))
        return cls(A.shape[0], np.stack([i, j], axis=1))

    @classmethod
    def from_scipy(cls, M) -> "SparseSym":
        return cls.from_dense(np.asarray(M.todense()))

    @property
    def pairs(self) -> np.ndarray:
        return np.stack([self._codes // self.n, self._codes % self.n], axis=1)

    @property
    def n_edges(self) -> int:
        return int(self._codes.size)

    def to_csr(self) -> sp.csr_matrix:
        if self._csr is None:
            p = self.pairs
            rows = np.concatenate([p[:, 0], p[:, 1]])
            cols = np.concatenate([p[:, 1], p[:, 0]])
            data = np.ones(rows.size)
            self._csr = sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))
        return self._csr

    def to_dense(self) -> np.ndarray:
        return np.asarray(self.to_csr().todense(), dtype=np.float64)

    @property
    def degree(self) -> np.ndarray:
        if self._degree is None:
            p = self.pairs
            self._degree = np.bincount(p.reshape(-1), minlength=self.n).astype(np.int64)
        return self._degree

    def has_edge(self, i: int, j: int) -> bool:
        if i == j:
            return False
        lo, hi = min(i, j), max(i, j)
        code = lo * self.n + hi
        k = np.searchsorted(self._codes, code)
        return bool(k < self._codes.size and self._codes[k] == code)

    def neighbors(self, i: int) -> np.ndarray:
        csr = self.to_csr()
        return np.sort(csr.indices[csr.indptr[i] : csr.indptr[i + 1]])

    def flip(self, pairs) -> "SparseSym":
        """Toggle each listed pair (added if absent, removed if present)."""
        p = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if p.size == 0:
            return SparseSym(self.n, self.pairs)
        if np.any(p[:, 0] == p[:, 1]):
            raise GraphError("cannot flip a diagonal entry")
        lo, hi = np.minimum(p[:, 0], p[:, 1]), np.maximum(p[:, 0], p[:, 1])
        codes = lo * self.n + hi
        if np.unique(codes).size != codes.size:
            raise GraphError("flip list contains duplicate pairs")
        out = SparseSym(self.n)
        out._codes = np.setxor1d(self._codes, codes)
        return out

    def __eq__(self, other):
        return isinstance(other, SparseSym) and self.n == other.n and np.array_equal(self._codes, other._codes)

    def __hash__(self):
        return hash((self.n, self._codes.tobytes()))

    def __repr__(self):
        return f"SparseSym(n={self.n}, edges={self.n_edges})"


def upper_pairs(n: int) -> np.ndarray:
    i, j = np.triu_indices(n, 1)
    return np.stack([i, j], axis=1)


def normalize_adj(A) -> sp.csr_matrix:
    """D^{-1/2} (A + I) D^{-1/2} with degrees taken from A + I.

    Accepts a :class:`SparseSym`, a scipy matrix or a dense nonnegative array
    (weighted adjacency, e.g. a low-rank reconstruction).
    """
    if isinstance(A, SparseSym):
        M = A.to_csr()
    elif sp.issparse(A):
        M = sp.csr_matrix(A, dtype=np.float64)
    else:
        M = sp.csr_matrix(np.asarray(A, dtype=np.float64))
    n = M.shape[0]
    M = M + sp.identity(n, format="csr")
    d = np.asarray(M.sum(axis=1)).reshape(-1)
    dinv = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    D = sp.diags(dinv)
    return sp.csr_matrix(D @ M @ D)


def normalize_adj_tensor(A: Tensor) -> Tensor:
    """Differentiable dense version of :func:`normalize_adj`."""
    n = A.shape[0]
    M = A + np.eye(n)
    dinv = ad.power(ad.tsum(M, 1), -0.5)
    outer = dinv.reshape(n, 1) @ dinv.reshape(1, n)
    return M * outer


def spmm(S, X) -> Tensor:
    """Constant sparse matrix times a dense tensor."""
    X = ad.as_tensor(X)
    S = sp.csr_matrix(S)
    if S.shape[1] != X.shape[0]:
        raise ValueError(f"spmm: incompatible shapes {S.shape} and {X.shape}")
    St = S.T.tocsr()
    return ad.record("spmm", np.asarray(S @ X.data), (X,), lambda g: (np.asarray(St @ g),))
