"""Superoperator matrices: Lindblad generators and their deformations.

All matrices act on column-stacked operators (see :mod:`qlan._linalg`).
The Heisenberg generator is

    L(X) = i[H, X] + sum_j (L_j^dag X L_j - 1/2 {L_j^dag L_j, X})

and the Schrodinger generator is its Hilbert-Schmidt adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from ._linalg import dag, identity, left, right, sandwich, to_dense, unvec, use_sparse, vec
from .errors import BadChannel, Overflow, ValidationError
from .model import ModelPoint, ParamModel, evaluate

PICTURES = ("heisenberg", "schrodinger", "deformed")

# largest admissible one-norm of tau*g; beyond it the exponential of a
# generator with decaying modes is dominated by roundoff
EXPM_NORM_BOUND = 1e8


@dataclass(frozen=True)
class SuperOp:
    """A ``d^2 x d^2`` matrix acting on column-stacked ``d x d`` operators."""

    dim: int
    matrix: object          # ndarray or scipy.sparse CSR matrix
    picture: str

    def __post_init__(self):
        if self.picture not in PICTURES:
            raise ValueError(f"unknown picture {self.picture!r}")
        n = self.dim * self.dim
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match dim {self.dim}")

    @property
    def is_sparse(self) -> bool:
        return sps.issparse(self.matrix)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(np.asarray(X, dtype=complex)), self.dim)

    def dense(self) -> np.ndarray:
        return to_dense(self.matrix)

    def norm1(self) -> float:
        if self.is_sparse:
            return float(abs(self.matrix).sum(axis=0).max())
        return float(np.abs(self.matrix).sum(axis=0).max())


def _check_channel(point_or_model, channel: int) -> None:
    k = point_or_model.channels
    if not (0 <= channel < k):
        raise BadChannel(f"channel {channel} out of range for {k} channels")


def _heisenberg_matrix(H, Ls, sparse):
    G = 1j * (left(H, sparse) - right(H, sparse))
    for L in Ls:
        LdL = dag(L) @ L
        G = G + sandwich(dag(L), L, sparse) - 0.5 * (left(LdL, sparse) + right(LdL, sparse))
    return G.tocsr() if sparse else G


def lindblad_heisenberg(point: ModelPoint) -> SuperOp:
    d = point.dim
    return SuperOp(d, _heisenberg_matrix(point.H, point.L, use_sparse(d)), "heisenberg")


def lindblad_schrodinger(point: ModelPoint) -> SuperOp:
    d = point.dim
    sparse = use_sparse(d)
    G = -1j * (left(point.H, sparse) - right(point.H, sparse))
    for L in point.L:
        LdL = dag(L) @ L
        G = G + sandwich(L, dag(L), sparse) - 0.5 * (left(LdL, sparse) + right(LdL, sparse))
    return SuperOp(d, G.tocsr() if sparse else G, "schrodinger")


def counting_deformed(point: ModelPoint, s: float, channel: int) -> SuperOp:
    """Generator ``L(X) + (e^{is} - 1) L_c^dag X L_c`` of the counting-tilted semigroup."""
    _check_channel(point, channel)
    G = lindblad_heisenberg(point).matrix
    if s != 0:
        L = point.L[channel]
        G = G + (np.exp(1j * s) - 1) * sandwich(dag(L), L, use_sparse(point.dim))
    return SuperOp(point.dim, G, "deformed")


def _quadrature_tilt(L, phi, sparse):
    """Matrix of ``X -> e^{-i phi} L^dag X + X e^{i phi} L``."""
    return np.exp(-1j * phi) * left(dag(L), sparse) + np.exp(1j * phi) * right(L, sparse)


def homodyne_deformed(point: ModelPoint, p: float, phi: float, channel: int) -> SuperOp:
    """Generator ``L(X) + ip(e^{-i phi} L^dag X + X e^{i phi} L) - p^2/2 X``."""
    _check_channel(point, channel)
    G = lindblad_heisenberg(point).matrix
    if p != 0:
        sparse = use_sparse(point.dim)
        G = (G + 1j * p * _quadrature_tilt(point.L[channel], phi, sparse)
             - 0.5 * p**2 * identity(point.dim, sparse))
    return SuperOp(point.dim, G, "deformed")


def _local_thetas(theta0, u, t):
    if not t > 0:
        raise ValidationError(f"t must be positive, got {t}")
    return theta0 + u / np.sqrt(t)


def two_sided_generator(model: ParamModel, theta0: float, u: float, v: float, t: float,
                        a_tilde: Optional[float] = None) -> SuperOp:
    """Generator whose time-one semigroup gives the overlap of output states.

    ``t [ i(H_a X - X H_b) + sum_j (L_{j,a}^dag X L_{j,b}
    - 1/2 (L_{j,a}^dag L_{j,a} X + X L_{j,b}^dag L_{j,b})) - i(a - b) A X ]``
    with ``a = theta0 + u/sqrt(t)``, ``b = theta0 + v/sqrt(t)`` and ``A`` the
    phase generator at ``theta0`` (computed if not supplied).
    """
    a = _local_thetas(theta0, u, t)
    b = _local_thetas(theta0, v, t)
    if a_tilde is None:
        from .fisher import phase_generator_of
        a_tilde = phase_generator_of(model, theta0)
    d = model.dim
    sparse = use_sparse(d)
    Ha = np.asarray(model.hamiltonian(a), dtype=complex)
    Hb = np.asarray(model.hamiltonian(b), dtype=complex)
    G = 1j * (left(Ha, sparse) - right(Hb, sparse))
    for f in model.jumps:
        La = np.asarray(f(a), dtype=complex)
        Lb = np.asarray(f(b), dtype=complex)
        G = G + sandwich(dag(La), Lb, sparse) - 0.5 * (left(dag(La) @ La, sparse)
                                                      + right(dag(Lb) @ Lb, sparse))
    if a != b:
        G = G - 1j * (a - b) * a_tilde * identity(d, sparse)
    return SuperOp(d, t * G, "deformed")


def counting_lan_generator(model: ParamModel, theta0: float, u: float, s: float, t: float,
                           channel: int, rate: Optional[float] = None) -> SuperOp:
    """``t [L_a(X) + (e^{is/sqrt t} - 1) L_a^dag X L_a - (is/sqrt t) rate X]``."""
    _check_channel(model, channel)
    a = _local_thetas(theta0, u, t)
    if rate is None:
        from .fisher import stationary_rate
        rate = stationary_rate(model, theta0, channel)
    point = evaluate(model, a)
    rt = np.sqrt(t)
    G = counting_deformed(point, s / rt, channel).matrix
    if s != 0:
        G = G - 1j * s / rt * rate * identity(point.dim, use_sparse(point.dim))
    return SuperOp(point.dim, t * G, "deformed")


def homodyne_lan_generator(model: ParamModel, theta0: float, u: float, p: float, phi: float,
                           t: float, channel: int, drift: Optional[float] = None) -> SuperOp:
    """``t [L_a(X) + (ip/sqrt t)(e^{-i phi} L^dag X + X e^{i phi} L) - p^2/(2t) X
    - (ip/sqrt t) drift X]``."""
    _check_channel(model, channel)
    a = _local_thetas(theta0, u, t)
    if drift is None:
        from .fisher import stationary_drift
        drift = stationary_drift(model, theta0, phi, channel)
    point = evaluate(model, a)
    rt = np.sqrt(t)
    G = homodyne_deformed(point, p / rt, phi, channel).matrix
    if p != 0:
        G = G - 1j * p / rt * drift * identity(point.dim, use_sparse(point.dim))
    return SuperOp(point.dim, t * G, "deformed")


def semigroup_apply(g: SuperOp, tau: float, X: np.ndarray) -> np.ndarray:
    """``exp(tau g)`` applied to ``X``.

    Dense generators use scaling and squaring with a Pade kernel
    (:func:`scipy.linalg.expm`); sparse ones use the truncated Taylor
    action :func:`scipy.sparse.linalg.expm_multiply`.
    """
    if not (np.isfinite(tau) and tau >= 0):
        raise ValidationError(f"tau must be finite and non-negative, got {tau}")
    X = np.asarray(X, dtype=complex)
    if tau == 0:
        return X.copy()
    size = tau * g.norm1()
    if not np.isfinite(size) or size > EXPM_NORM_BOUND:
        raise Overflow(f"||tau g||_1 = {size:.3e} exceeds the bound {EXPM_NORM_BOUND:g}")
    x = vec(X)
    with np.errstate(over="raise", invalid="raise"):
        try:
            if g.is_sparse:
                y = spla.expm_multiply(tau * g.matrix, x)
            else:
                y = sla.expm(tau * g.matrix) @ x
        except FloatingPointError as exc:
            raise Overflow(f"matrix exponential overflowed: {exc}") from exc
    if not np.all(np.isfinite(y)):
        raise Overflow("matrix exponential produced non-finite entries")
    return unvec(y, g.dim)
