"""Vectorisation helpers.

Operators are vectorised by stacking columns, ``vec(X) = X.reshape(-1,
order="F")``, so that ``vec(A X B) = kron(B.T, A) vec(X)``.  Every
superoperator matrix in the package follows this convention.

Above :data:`SPARSE_DIM` the builders return ``scipy.sparse`` CSR
matrices; the Lindblad matrix of a ``d``-level system has ``O(d^3)``
nonzeros at most and is far sparser for the bosonic models.
"""

import numpy as np
import scipy.sparse as sps

SPARSE_DIM = 16


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def use_sparse(dim: int) -> bool:
    return dim > SPARSE_DIM


def identity(dim: int, sparse: bool = False):
    n = dim * dim
    return sps.identity(n, dtype=complex, format="csr") if sparse else np.eye(n, dtype=complex)


def _kron(A, B, sparse):
    if sparse:
        return sps.kron(sps.csr_matrix(A), sps.csr_matrix(B), format="csr")
    return np.kron(A, B)


def left(A: np.ndarray, sparse: bool = False):
    """Matrix of ``X -> A X``."""
    return _kron(np.eye(A.shape[0]), A, sparse)


def right(B: np.ndarray, sparse: bool = False):
    """Matrix of ``X -> X B``."""
    return _kron(B.T, np.eye(B.shape[0]), sparse)


def sandwich(A: np.ndarray, B: np.ndarray, sparse: bool = False):
    """Matrix of ``X -> A X B``."""
    return _kron(B.T, A, sparse)


def dag(A: np.ndarray) -> np.ndarray:
    return A.conj().T


def herm_part(Y: np.ndarray) -> np.ndarray:
    """``(Y + Y^dagger) / 2``."""
    return 0.5 * (Y + Y.conj().T)


def antiherm_part(Y: np.ndarray) -> np.ndarray:
    """``(Y - Y^dagger) / 2i``, Hermitian."""
    return (Y - Y.conj().T) / 2j


def expect(rho: np.ndarray, X: np.ndarray) -> complex:
    """``Tr(rho X)`` without forming the product."""
    return complex(np.sum(rho.T * X))


def to_dense(M) -> np.ndarray:
    return M.toarray() if sps.issparse(M) else np.asarray(M)
