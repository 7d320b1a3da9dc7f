"""Stationary state, irreducibility certificates and the restricted inverse.

For an irreducible generator the stationary expectation
``P(X) = Tr(rho_ss X) 1`` is an oblique projection and the Heisenberg
generator ``L0`` is invertible on ``{X : Tr(rho_ss X) = 0}``.  The inverse
``Ltilde`` (extended by zero on multiples of the identity) is obtained from
the bordered system

    [ L0    vec(1) ] [ x ]   [ y ]
    [ r     0      ] [ l ] = [ 0 ],     r . vec(X) = Tr(rho_ss X),

whose solution satisfies ``l = Tr(rho_ss y)`` and ``x = Ltilde(y)``.
Inverting the Heisenberg matrix with a plain pseudoinverse would use the
Hilbert-Schmidt complement of the identity instead, which is wrong unless
``rho_ss`` is maximally mixed.
"""

from __future__ import annotations

from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from ._linalg import expect, unvec, vec
from .errors import (CutoffTooSmall, NoStationaryState, NotFullRank, NotIrreducible,
                     SingularOnComplement, ValidationError)
from .model import MASER_TAIL_TOL, ModelPoint
from .superop import SuperOp, lindblad_heisenberg, lindblad_schrodinger

# reciprocal condition number below which the bordered system counts as singular
RCOND_TOL = 1e-14
# eigenvalues requested from the sparse solver when estimating the gap
SPARSE_EIGS = 8


def _bordered(G, top_right: np.ndarray, bottom_left: np.ndarray):
    n = G.shape[0]
    if sps.issparse(G):
        return sps.bmat([[G, sps.csr_matrix(top_right.reshape(n, 1))],
                         [sps.csr_matrix(bottom_left.reshape(1, n)), None]], format="csc")
    K = np.zeros((n + 1, n + 1), dtype=complex)
    K[:n, :n] = G
    K[:n, n] = top_right
    K[n, :n] = bottom_left
    return K


class _BorderedSolver:
    """Factorisation of a bordered matrix with a singularity check."""

    def __init__(self, K, error=SingularOnComplement):
        self.n = K.shape[0]
        if sps.issparse(K):
            try:
                self._lu = spla.splu(sps.csc_matrix(K))
            except RuntimeError as exc:
                raise error(f"bordered system is singular: {exc}") from exc
            self._sparse = True
            diag = np.abs(self._lu.U.diagonal())
            if diag.min() <= RCOND_TOL * diag.max():
                raise error("bordered system is numerically singular")
        else:
            self._sparse = False
            self._lu = sla.lu_factor(K, check_finite=True)
            rcond = _rcond(K, self._lu)
            if not rcond > RCOND_TOL:
                raise error(f"bordered system is numerically singular (rcond {rcond:.2e})")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._sparse:
            return self._lu.solve(np.asarray(rhs, dtype=complex))
        return sla.lu_solve(self._lu, rhs)


def _rcond(K: np.ndarray, lu) -> float:
    gecon, = sla.get_lapack_funcs(("gecon",), (K,))
    anorm = np.abs(K).sum(axis=0).max()
    rcond, info = gecon(lu[0], anorm, norm="1")
    return float(rcond) if info == 0 else 0.0


class StationaryAnalysis:
    """Stationary state of an irreducible generator and derived maps.

    ``P``, ``Q`` and ``Ltilde`` are materialised lazily as full matrices;
    :meth:`project` and :meth:`ltilde_apply` act on single operators and are
    what the Fisher coefficient formulas use.
    """

    def __init__(self, rho_ss, gap, min_eig, eigenvalues, heisenberg: SuperOp):
        self.rho_ss = rho_ss
        self.gap = gap
        self.min_eig = min_eig
        self.eigenvalues = eigenvalues
        self.heisenberg = heisenberg
        self.dim = rho_ss.shape[0]
        self._row = vec(rho_ss.T)

    def expect(self, X: np.ndarray) -> complex:
        return expect(self.rho_ss, X)

    def project(self, X: np.ndarray) -> np.ndarray:
        return self.expect(X) * np.eye(self.dim, dtype=complex)

    @cached_property
    def _solver(self) -> _BorderedSolver:
        K = _bordered(self.heisenberg.matrix, vec(np.eye(self.dim, dtype=complex)), self._row)
        return _BorderedSolver(K)

    def ltilde_apply(self, Y: np.ndarray) -> np.ndarray:
        n = self.dim * self.dim
        rhs = np.concatenate([vec(np.asarray(Y, dtype=complex)), [0.0]])
        return unvec(self._solver.solve(rhs)[:n], self.dim)

    @cached_property
    def P(self) -> SuperOp:
        return SuperOp(self.dim, np.outer(vec(np.eye(self.dim, dtype=complex)), self._row),
                       "heisenberg")

    @cached_property
    def Q(self) -> SuperOp:
        n = self.dim * self.dim
        return SuperOp(self.dim, np.eye(n, dtype=complex) - self.P.matrix, "heisenberg")

    @cached_property
    def Ltilde(self) -> SuperOp:
        n = self.dim * self.dim
        rhs = np.vstack([self.Q.matrix, np.zeros((1, n), dtype=complex)])
        return SuperOp(self.dim, self._solver.solve(rhs)[:n], "heisenberg")


def _kernel_vector(S, dim: int) -> np.ndarray:
    """Solve ``S v = 0`` with ``Tr v = 1`` through a bordered system."""
    n = dim * dim
    t = vec(np.eye(dim, dtype=complex))
    K = _bordered(S, t, t)
    rhs = np.zeros(n + 1, dtype=complex)
    rhs[n] = 1.0
    try:
        solver = _BorderedSolver(K, error=NotIrreducible)
    except NotIrreducible as exc:
        raise NotIrreducible(f"stationary state is not unique ({exc})") from exc
    return solver.solve(rhs)[:n]


def _spectrum(S, scale: float) -> np.ndarray:
    if sps.issparse(S):
        n = S.shape[0]
        k = min(SPARSE_EIGS, n - 2)
        # shift slightly into the stable half plane so the factorisation is regular
        sigma = -1e-6 * scale
        return spla.eigs(S.tocsc(), k=k, sigma=sigma, which="LM", return_eigenvectors=False,
                         tol=1e-12)
    return sla.eigvals(S)


def stationary_state(gen: SuperOp, rank_tol: float = 1e-10, gap_tol: float = 1e-10,
                     heisenberg: Optional[SuperOp] = None,
                     fock_cutoff: Optional[int] = None) -> StationaryAnalysis:
    """Stationary state and irreducibility certificates of ``gen``.

    ``gen`` is a Schrodinger-picture Lindblad matrix.  ``gap_tol`` is scaled
    by the one-norm of ``gen``; ``rank_tol`` is absolute since ``rho_ss`` has
    unit trace.  The Heisenberg matrix defaults to the adjoint of ``gen``.

    For a truncated bosonic mode (``fock_cutoff`` given) the stationary
    populations may legitimately fall below any fixed rank tolerance; the
    rank certificate is then replaced by a positivity check plus a tail
    check on the last Fock level.

    For sparse generators only the eigenvalues closest to zero are
    computed and the gap is estimated from them.
    """
    if gen.picture != "schrodinger":
        raise ValidationError(f"expected a schrodinger generator, got {gen.picture}")
    d = gen.dim
    S = gen.matrix
    scale = max(1.0, gen.norm1())
    tol = gap_tol * scale

    eigenvalues = _spectrum(S, scale)
    order = np.argsort(np.abs(eigenvalues))
    eigenvalues = eigenvalues[order]
    near_zero = int(np.sum(np.abs(eigenvalues) <= tol))
    if near_zero == 0:
        raise NoStationaryState(
            f"no eigenvalue within {tol:.2e} of zero (closest {abs(eigenvalues[0]):.2e})")
    if near_zero > 1:
        raise NotIrreducible(f"gap certificate failed: zero eigenvalue has multiplicity {near_zero}")
    rest = eigenvalues[1:]
    gap = float(np.min(-rest.real)) if rest.size else np.inf
    if not gap > tol:
        raise NotIrreducible(f"gap certificate failed: spectral gap {gap:.3e} <= {tol:.2e}")

    rho = unvec(_kernel_vector(S, d), d)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    min_eig = float(np.linalg.eigvalsh(rho)[0])

    if fock_cutoff is None:
        if not min_eig > rank_tol:
            raise NotFullRank(f"rank certificate failed: min eigenvalue of rho_ss {min_eig:.3e}"
                              f" <= {rank_tol:g}")
    else:
        if min_eig < -rank_tol:
            raise NotFullRank(f"rank certificate failed: rho_ss has eigenvalue {min_eig:.3e}")
        pops = np.diag(rho).real
        tail = pops[fock_cutoff] / pops.max()
        if tail > MASER_TAIL_TOL:
            raise CutoffTooSmall(f"stationary tail rho({fock_cutoff})/max = {tail:.2e}"
                                 f" exceeds {MASER_TAIL_TOL:g}")

    if heisenberg is None:
        heisenberg = SuperOp(d, S.conj().T.tocsr() if sps.issparse(S) else S.conj().T,
                             "heisenberg")
    return StationaryAnalysis(rho, gap, min_eig, eigenvalues, heisenberg)


def analyze_point(point: ModelPoint, fock_cutoff: Optional[int] = None,
                  rank_tol: float = 1e-10, gap_tol: float = 1e-10) -> StationaryAnalysis:
    """Stationary analysis of the full generator at a model point."""
    return stationary_state(lindblad_schrodinger(point), rank_tol=rank_tol, gap_tol=gap_tol,
                            heisenberg=lindblad_heisenberg(point), fock_cutoff=fock_cutoff)


def restricted_inverse(L0: SuperOp, rho_ss: np.ndarray) -> SuperOp:
    """Full matrix of the inverse of ``L0`` on ``{X : Tr(rho_ss X) = 0}``."""
    if L0.picture != "heisenberg":
        raise ValidationError(f"expected a heisenberg generator, got {L0.picture}")
    d = L0.dim
    n = d * d
    row = vec(np.asarray(rho_ss, dtype=complex).T)
    one = vec(np.eye(d, dtype=complex))
    solver = _BorderedSolver(_bordered(L0.matrix, one, row))
    Q = np.eye(n, dtype=complex) - np.outer(one, row)
    rhs = np.vstack([Q, np.zeros((1, n), dtype=complex)])
    return SuperOp(d, solver.solve(rhs)[:n], "heisenberg")


def check_centering(op: np.ndarray, rho_ss: np.ndarray) -> float:
    """``|Tr(rho_ss op)|``."""
    return abs(expect(np.asarray(rho_ss), np.asarray(op)))
