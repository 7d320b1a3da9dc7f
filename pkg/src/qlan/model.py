"""Parametrised Markov models and their closed-form reference values.

A model is a smooth one-parameter family ``theta -> (H(theta), [L_1(theta),
..., L_k(theta)])`` of a Hamiltonian and jump operators on a
``dim``-dimensional system.  :func:`evaluate` freezes a model at a point,
returning the matrices together with their first (and, when available,
second) derivatives.

Two-level basis convention: index 0 is the excited state ``|e>`` and index
1 the ground state ``|g>``, so that ``sigma_minus = |g><e|`` is the matrix
``[[0, 0], [1, 0]]`` and ``sigma_z = diag(1, -1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CutoffTooSmall, NonHermitianHamiltonian, ValidationError, ZeroCoupling

MatrixMap = Callable[[float], np.ndarray]

SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
IDENTITY_2 = np.eye(2, dtype=complex)

HERMITIAN_DEFECT_TOL = 1e-8
MASER_TAIL_TOL = 1e-12


@dataclass(frozen=True)
class ParamModel:
    """A smooth family of Lindblad data indexed by a real parameter.

    ``d_*`` maps are optional; when absent :func:`evaluate` falls back to
    central finite differences.  Second derivatives are only needed for the
    overlap phase constant.  ``fock_cutoff`` marks a truncated bosonic mode;
    such models are checked for stationary tail mass instead of full rank.
    """

    dim: int
    hamiltonian: MatrixMap
    jumps: tuple[MatrixMap, ...]
    d_hamiltonian: Optional[MatrixMap] = None
    d_jumps: Optional[tuple[MatrixMap, ...]] = None
    dd_hamiltonian: Optional[MatrixMap] = None
    dd_jumps: Optional[tuple[MatrixMap, ...]] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    fock_cutoff: Optional[int] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"dim must be positive, got {self.dim}")
        if len(self.jumps) < 1:
            raise ValidationError("a model needs at least one jump operator")
        for name in ("d_jumps", "dd_jumps"):
            maps = getattr(self, name)
            if maps is not None and len(maps) != len(self.jumps):
                raise ValidationError(f"{name} has {len(maps)} entries, expected {len(self.jumps)}")

    @property
    def channels(self) -> int:
        return len(self.jumps)

    @property
    def has_second_derivatives(self) -> bool:
        return self.dd_hamiltonian is not None and self.dd_jumps is not None


@dataclass(frozen=True)
class ModelPoint:
    """Model matrices and derivatives frozen at ``theta0``."""

    theta0: float
    H: np.ndarray
    Hdot: np.ndarray
    L: tuple[np.ndarray, ...]
    Ldot: tuple[np.ndarray, ...]
    Hddot: Optional[np.ndarray] = None
    Lddot: Optional[tuple[np.ndarray, ...]] = None

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def channels(self) -> int:
        return len(self.L)

    @property
    def has_second_derivatives(self) -> bool:
        return self.Hddot is not None and self.Lddot is not None


def _as_matrix(value, dim: int, what: str) -> np.ndarray:
    m = np.asarray(value, dtype=complex)
    if m.shape != (dim, dim):
        raise ValidationError(f"{what} has shape {m.shape}, expected {(dim, dim)}")
    return m


def _hermitize(m: np.ndarray, what: str) -> np.ndarray:
    defect = np.linalg.norm(m - m.conj().T)
    if defect > HERMITIAN_DEFECT_TOL * max(1.0, np.linalg.norm(m)):
        raise NonHermitianHamiltonian(f"{what} is not Hermitian (defect {defect:.3e})")
    return 0.5 * (m + m.conj().T)


def _central_diff(f: MatrixMap, theta: float, h: float) -> np.ndarray:
    return (np.asarray(f(theta + h), dtype=complex) - np.asarray(f(theta - h), dtype=complex)) / (2 * h)


def _second_diff(f: MatrixMap, theta: float, h: float) -> np.ndarray:
    fp = np.asarray(f(theta + h), dtype=complex)
    fm = np.asarray(f(theta - h), dtype=complex)
    f0 = np.asarray(f(theta), dtype=complex)
    return (fp - 2 * f0 + fm) / h**2


def evaluate(model: ParamModel, theta0: float, fd_step: Optional[float] = None,
             fd_second: bool = False) -> ModelPoint:
    """Evaluate ``model`` and its derivatives at ``theta0``.

    Analytic derivative maps are used when the model supplies them, central
    differences with step ``fd_step`` (default ``1e-5 * max(1, |theta0|)``)
    otherwise.  Second derivatives are filled from analytic maps, or by
    finite differences when ``fd_second`` is set, and left ``None`` if
    neither is available.
    """
    theta0 = float(theta0)
    d = model.dim
    h = fd_step if fd_step is not None else 1e-5 * max(1.0, abs(theta0))
    if h <= 0:
        raise ValidationError("fd_step must be positive")

    H = _hermitize(_as_matrix(model.hamiltonian(theta0), d, "H"), "H")
    L = tuple(_as_matrix(f(theta0), d, f"L[{j}]") for j, f in enumerate(model.jumps))

    if model.d_hamiltonian is not None:
        Hdot = _as_matrix(model.d_hamiltonian(theta0), d, "Hdot")
    else:
        Hdot = _as_matrix(_central_diff(model.hamiltonian, theta0, h), d, "Hdot")
    Hdot = _hermitize(Hdot, "Hdot")

    if model.d_jumps is not None:
        Ldot = tuple(_as_matrix(f(theta0), d, f"Ldot[{j}]") for j, f in enumerate(model.d_jumps))
    else:
        Ldot = tuple(_as_matrix(_central_diff(f, theta0, h), d, f"Ldot[{j}]")
                     for j, f in enumerate(model.jumps))

    Hddot = Lddot = None
    if model.has_second_derivatives:
        Hddot = _hermitize(_as_matrix(model.dd_hamiltonian(theta0), d, "Hddot"), "Hddot")
        Lddot = tuple(_as_matrix(f(theta0), d, f"Lddot[{j}]") for j, f in enumerate(model.dd_jumps))
    elif fd_second:
        h2 = (fd_step if fd_step is not None else 1e-4) * max(1.0, abs(theta0))
        Hddot = _hermitize(_second_diff(model.hamiltonian, theta0, h2), "Hddot")
        Lddot = tuple(_second_diff(f, theta0, h2) for f in model.jumps)

    return ModelPoint(theta0=theta0, H=H, Hdot=Hdot, L=L, Ldot=Ldot, Hddot=Hddot, Lddot=Lddot)


# ---------------------------------------------------------------------------
# built-in models
# ---------------------------------------------------------------------------

def two_level_model(z: complex) -> ParamModel:
    """Driven two-level atom with jump ``theta*sigma_- + z`` and
    Hamiltonian ``(i/2) theta (conj(z) sigma_- - z sigma_+)``."""
    z = complex(z)
    if z == 0:
        raise ZeroCoupling("two-level model is reducible for z = 0")
    hgen = 0.5j * (np.conj(z) * SIGMA_MINUS - z * SIGMA_PLUS)
    zero = np.zeros((2, 2), dtype=complex)

    return ParamModel(
        dim=2,
        hamiltonian=lambda th: th * hgen,
        jumps=(lambda th: th * SIGMA_MINUS + z * IDENTITY_2,),
        d_hamiltonian=lambda th: hgen,
        d_jumps=(lambda th: SIGMA_MINUS,),
        dd_hamiltonian=lambda th: zero,
        dd_jumps=(lambda th: zero,),
        name="two_level",
        params={"z_re": z.real, "z_im": z.imag},
    )


def annihilator(cutoff: int) -> np.ndarray:
    """Truncated annihilation operator on Fock levels ``0..cutoff``."""
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)


def atom_maser_model(n_ex: float, nu: float, cutoff: int) -> ParamModel:
    """One-atom maser with the Rabi angle as parameter.

    Channels are, in order: atom leaves in the ground state, atom leaves in
    the excited state, cavity photon loss, thermal photon gain.  Functions
    of ``a a^dagger`` act on its eigenvalues ``n + 1``.
    """
    if n_ex <= 0:
        raise ValidationError("n_ex must be positive")
    if nu < 0:
        raise ValidationError("nu must be non-negative")
    if cutoff < 2:
        raise ValidationError("cutoff must be at least 2")
    a = annihilator(cutoff)
    ad = a.conj().T
    lam = np.arange(1, cutoff + 2, dtype=float)      # eigenvalues of a a^dagger
    root = np.sqrt(lam)
    sq = np.sqrt(n_ex)
    zero = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    loss = np.sqrt(nu + 1) * a
    gain = np.sqrt(nu) * ad

    def l1(phi):
        return sq * ad @ np.diag(np.sin(phi * root) / root)

    def l2(phi):
        return sq * np.diag(np.cos(phi * root)).astype(complex)

    def dl1(phi):
        return sq * ad @ np.diag(np.cos(phi * root))

    def dl2(phi):
        return -sq * np.diag(root * np.sin(phi * root)).astype(complex)

    def ddl1(phi):
        return -sq * ad @ np.diag(root * np.sin(phi * root))

    def ddl2(phi):
        return -sq * np.diag(lam * np.cos(phi * root)).astype(complex)

    return ParamModel(
        dim=cutoff + 1,
        hamiltonian=lambda phi: zero,
        jumps=(l1, l2, lambda phi: loss, lambda phi: gain),
        d_hamiltonian=lambda phi: zero,
        d_jumps=(dl1, dl2, lambda phi: zero, lambda phi: zero),
        dd_hamiltonian=lambda phi: zero,
        dd_jumps=(ddl1, ddl2, lambda phi: zero, lambda phi: zero),
        name="atom_maser",
        params={"n_ex": float(n_ex), "nu": float(nu), "cutoff": int(cutoff)},
        fock_cutoff=int(cutoff),
    )


def custom_model(H, L: Sequence, dH=None, dL: Optional[Sequence] = None, ddH=None,
                 ddL: Optional[Sequence] = None, theta_ref: float = 0.0) -> ParamModel:
    """Model given by matrices at ``theta_ref`` and their derivatives.

    The family is the second-order Taylor polynomial around ``theta_ref``;
    missing derivative matrices are taken as zero.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError(f"H must be square, got shape {H.shape}")
    d = H.shape[0]
    L = [_as_matrix(m, d, f"L[{j}]") for j, m in enumerate(L)]
    k = len(L)
    zero = np.zeros((d, d), dtype=complex)

    def opt(m, what):
        return zero if m is None else _as_matrix(m, d, what)

    def opt_list(ms, what):
        if ms is None:
            return [zero] * k
        if len(ms) != k:
            raise ValidationError(f"{what} has {len(ms)} entries, expected {k}")
        return [_as_matrix(m, d, f"{what}[{j}]") for j, m in enumerate(ms)]

    H1, H2 = opt(dH, "dH"), opt(ddH, "ddH")
    _hermitize(H, "H")
    _hermitize(H1, "dH")
    _hermitize(H2, "ddH")
    L1, L2 = opt_list(dL, "dL"), opt_list(ddL, "ddL")
    ref = float(theta_ref)

    def taylor(m0, m1, m2):
        return lambda th: m0 + (th - ref) * m1 + 0.5 * (th - ref) ** 2 * m2

    def slope(m1, m2):
        return lambda th: m1 + (th - ref) * m2

    return ParamModel(
        dim=d,
        hamiltonian=taylor(H, H1, H2),
        jumps=tuple(taylor(a, b, c) for a, b, c in zip(L, L1, L2)),
        d_hamiltonian=slope(H1, H2),
        d_jumps=tuple(slope(b, c) for b, c in zip(L1, L2)),
        dd_hamiltonian=lambda th: H2,
        dd_jumps=tuple((lambda c: (lambda th: c))(c) for c in L2),
        name="custom",
        params={"theta_ref": ref},
    )


def random_model(rng: np.random.Generator, dim: int, channels: int, scale: float = 1.0) -> ParamModel:
    """Random quadratic family with Gaussian coefficients.

    Generic draws are irreducible with probability one; used by property
    tests and benchmarks.
    """
    def herm():
        m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        return 0.5 * scale * (m + m.conj().T)

    def mat(s):
        return s * scale * (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))

    ref = float(rng.uniform(-1, 1))
    return custom_model(herm(), [mat(0.7) for _ in range(channels)], dH=herm(),
                        dL=[mat(0.5) for _ in range(channels)], ddH=herm(),
                        ddL=[mat(0.3) for _ in range(channels)], theta_ref=ref)


# ---------------------------------------------------------------------------
# closed-form reference values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoLevelOracles:
    """Closed-form values for the driven two-level atom.

    ``A_h``, ``B_h`` and ``I_h`` are the reference homodyne coefficients
    kept for comparison.  ``mu_h``, ``V_h`` and ``I_h_exact`` are the closed forms
    obtained by carrying the restricted-inverse calculation through
    symbolically; they agree with the exact characteristic function of
    the integrated current while ``B_h`` does not.
    """

    F: float
    a: float
    b: complex
    c: complex
    mean_homodyne: float
    A_h: float
    B_h: float
    I_h: float
    mu_h: float
    V_h: float
    I_h_exact: float
    rate: float

    @property
    def rho_ss(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, 1 - self.a]], dtype=complex)


def two_level_oracles(z: complex, theta0: float, phi: float = 0.0) -> TwoLevelOracles:
    z = complex(z)
    theta0 = float(theta0)
    if theta0 == 0:
        raise ValidationError("two-level oracles need theta0 != 0")
    if z == 0:
        raise ZeroCoupling("two-level model is reducible for z = 0")
    z2 = abs(z) ** 2
    den = 8 * z2 + theta0**2
    F = 128 * z2**2 / (den * theta0**2)
    a = 4 * z2 / den
    b = -theta0 * z / (2 * z2) * a
    c = -theta0 * np.conj(z) / (2 * z2) * a
    ez = np.exp(1j * phi) * z
    re, im = ez.real, ez.imag
    atilde = 1 - 2 * a
    mean = 2 * re - 4 * re * atilde
    A_h = 64 * theta0 * z2 * re / den**2
    B_h = 1 + 2 / den**3 * (theta0**4 * (4 * im**2 - 16 * z2) + 192 * theta0**2 * z2**2
                            + 512 * z2**2 * im**2)
    V_h = 1 + 2 / den**3 * (theta0**4 * (32 * im**2 - 16 * z2) + 256 * theta0**2 * z2**2
                            + 1024 * z2**2 * im**2)
    return TwoLevelOracles(F=F, a=a, b=complex(b), c=complex(c), mean_homodyne=mean,
                           A_h=A_h, B_h=B_h, I_h=A_h**2 / B_h, mu_h=-A_h, V_h=V_h,
                           I_h_exact=A_h**2 / V_h, rate=z2)


@dataclass(frozen=True)
class MaserOracles:
    rho_ss: np.ndarray   # diagonal of the stationary state, levels 0..cutoff
    F: float

    @property
    def mean_photons(self) -> float:
        return float(np.arange(self.rho_ss.size) @ self.rho_ss)


def maser_oracles(n_ex: float, nu: float, phi: float, cutoff: int) -> MaserOracles:
    """Detailed-balance stationary distribution and ``F = 4 n_ex <a a^dagger>``."""
    i = np.arange(1, cutoff + 1, dtype=float)
    ratios = nu / (nu + 1) + n_ex / (nu + 1) * np.sin(phi * np.sqrt(i)) ** 2 / i
    # cumulative product in log space: ratios can underflow for large cutoffs
    with np.errstate(divide="ignore"):
        logp = np.concatenate([[0.0], np.cumsum(np.log(ratios))])
    p = np.exp(logp - logp.max())
    p /= p.sum()
    if p[-1] / p.max() > MASER_TAIL_TOL:
        raise CutoffTooSmall(
            f"stationary tail rho({cutoff})/max = {p[-1] / p.max():.2e} exceeds {MASER_TAIL_TOL:g}")
    F = 4 * n_ex * float(np.arange(1, cutoff + 2) @ p)
    return MaserOracles(rho_ss=p, F=F)
