"""Asymptotic quantum and classical Fisher informations.

Notation used below, with ``<.>`` the stationary expectation at
``theta0`` and ``Re Y = (Y + Y^dag)/2``, ``Im Y = (Y - Y^dag)/2i``:

* ``D(X) = i[Hdot, X] + sum_j (Ldot_j^dag X L_j + L_j^dag X Ldot_j
  - 1/2 {Ldot_j^dag L_j + L_j^dag Ldot_j, X})`` is the derivative of the
  Heisenberg generator.  It sums over every channel, measured or not.
* ``B = Hdot + Im sum_j Ldot_j^dag L_j - <.>`` and ``Btilde = Ltilde(B)``.

Quantum Fisher information per unit time::

    F = 8 < 1/2 sum Ldot^dag Ldot - Re(Hdot Btilde) - Im(sum Ldot^dag Btilde L)
            + Im(Re(sum Ldot^dag L) Btilde) >

Counting in channel ``c`` (``L = L_c``)::

    A = -Ltilde(L^dag L - <L^dag L>)
    mu_c = <D(A)> + <Ldot^dag L + L^dag Ldot>,   V_c = <L^dag L + 2 L^dag A L>

Homodyne detection of quadrature ``phi`` in channel ``c``::

    B_h = Ltilde(x - <x>),   x = e^{-i phi} L^dag + e^{i phi} L
    mu_h = <e^{-i phi} Ldot^dag + e^{i phi} Ldot> - <D(B_h)>
    V_h = 1 - 2 <e^{-i phi} L^dag B_h + e^{i phi} B_h L>

``mu_c`` and ``mu_h`` are the derivatives of the stationary count rate
and drift with respect to theta; the tests check them that way.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._linalg import antiherm_part, dag, herm_part
from .errors import BadChannel, BoundViolated, DegenerateVariance, MissingSecondDerivatives, NumericalError
from .model import ModelPoint, ParamModel, evaluate
from .stationary import StationaryAnalysis, analyze_point

IMAG_TOL = 1e-10
VARIANCE_FLOOR = 1e-12
NEGATIVE_TOL = 1e-10


@dataclass(frozen=True)
class FisherContext:
    """A model point together with its stationary analysis."""

    model: ParamModel
    point: ModelPoint
    analysis: StationaryAnalysis

    def expect(self, X: np.ndarray) -> complex:
        return self.analysis.expect(X)


def fisher_context(model: ParamModel, theta0: float, fd_step: Optional[float] = None,
                   rank_tol: float = 1e-10, gap_tol: float = 1e-10) -> FisherContext:
    point = evaluate(model, theta0, fd_step=fd_step)
    analysis = analyze_point(point, fock_cutoff=model.fock_cutoff, rank_tol=rank_tol,
                             gap_tol=gap_tol)
    return FisherContext(model, point, analysis)


def _ctx(model, theta0, context):
    return context if context is not None else fisher_context(model, theta0)


def _real(value: complex, what: str) -> float:
    value = complex(value)
    if abs(value.imag) > IMAG_TOL * max(1.0, abs(value.real)):
        raise NumericalError(f"{what} has imaginary part {value.imag:.3e}")
    return value.real


def _check_channel(point: ModelPoint, channel: int) -> None:
    if not (0 <= channel < point.channels):
        raise BadChannel(f"channel {channel} out of range for {point.channels} channels")


def derivative_action(point: ModelPoint, X: np.ndarray) -> np.ndarray:
    """``D(X)``: theta-derivative of the Heisenberg generator applied to ``X``."""
    out = 1j * (point.Hdot @ X - X @ point.Hdot)
    for L, Ld in zip(point.L, point.Ldot):
        M = dag(Ld) @ L + dag(L) @ Ld
        out = out + dag(Ld) @ X @ L + dag(L) @ X @ Ld - 0.5 * (M @ X + X @ M)
    return out


def _cross(point: ModelPoint) -> np.ndarray:
    """``sum_j Ldot_j^dag L_j``."""
    return sum(dag(Ld) @ L for L, Ld in zip(point.L, point.Ldot))


def phase_generator(point: ModelPoint, rho_ss: np.ndarray) -> float:
    """``<Hdot + Im sum_j Ldot_j^dag L_j>``."""
    op = point.Hdot + antiherm_part(_cross(point))
    return _real(np.sum(np.asarray(rho_ss).T * op), "phase generator")


def phase_generator_of(model: ParamModel, theta0: float) -> float:
    ctx = fisher_context(model, theta0)
    return phase_generator(ctx.point, ctx.analysis.rho_ss)


def stationary_rate(model: ParamModel, theta0: float, channel: int,
                    context: Optional[FisherContext] = None) -> float:
    """Mean count rate ``<L_c^dag L_c>`` at ``theta0``."""
    ctx = _ctx(model, theta0, context)
    _check_channel(ctx.point, channel)
    L = ctx.point.L[channel]
    return _real(ctx.expect(dag(L) @ L), "count rate")


def _quadrature(L: np.ndarray, phi: float) -> np.ndarray:
    return np.exp(-1j * phi) * dag(L) + np.exp(1j * phi) * L


def stationary_drift(model: ParamModel, theta0: float, phi: float, channel: int,
                     context: Optional[FisherContext] = None) -> float:
    """Mean homodyne current ``<e^{-i phi} L_c^dag + e^{i phi} L_c>`` at ``theta0``."""
    ctx = _ctx(model, theta0, context)
    _check_channel(ctx.point, channel)
    return _real(ctx.expect(_quadrature(ctx.point.L[channel], phi)), "homodyne drift")


@dataclass(frozen=True)
class QfiResult:
    F: float
    B: np.ndarray
    Btilde: np.ndarray
    a_tilde: float


def qfi(model: ParamModel, theta0: float, context: Optional[FisherContext] = None) -> QfiResult:
    """Quantum Fisher information per unit time of system plus output."""
    ctx = _ctx(model, theta0, context)
    p = ctx.point
    d = p.dim
    cross = _cross(p)
    a_tilde = phase_generator(p, ctx.analysis.rho_ss)
    B = p.Hdot + antiherm_part(cross) - a_tilde * np.eye(d)
    Bt = ctx.analysis.ltilde_apply(B)
    X1 = (0.5 * sum(dag(Ld) @ Ld for Ld in p.Ldot)
          - herm_part(p.Hdot @ Bt)
          - antiherm_part(sum(dag(Ld) @ Bt @ L for L, Ld in zip(p.L, p.Ldot)))
          + antiherm_part(herm_part(cross) @ Bt))
    F = 8 * _real(ctx.expect(X1), "quantum Fisher information")
    scale = max(1.0, 8 * abs(_real(ctx.expect(0.5 * sum(dag(Ld) @ Ld for Ld in p.Ldot)), "F")))
    if F < 0:
        if F < -NEGATIVE_TOL * scale:
            raise BoundViolated(f"quantum Fisher information is negative: {F:.3e}")
        F = 0.0
    return QfiResult(F=F, B=B, Btilde=Bt, a_tilde=a_tilde)


def phase_constant_X2(model: ParamModel, theta0: float,
                      context: Optional[FisherContext] = None,
                      btilde: Optional[np.ndarray] = None) -> float:
    """Stationary mean of the operator governing the overlap phase.

    Only the real part of the mean is physical; the operator
    ``Re(sum Ldot^dag L) Btilde`` is not self-adjoint on its own.
    """
    if context is None:
        point = evaluate(model, theta0)
        if not point.has_second_derivatives:
            raise MissingSecondDerivatives("the phase constant needs second derivatives")
        context = FisherContext(model, point, analyze_point(point, fock_cutoff=model.fock_cutoff))
    p = context.point
    if not p.has_second_derivatives:
        raise MissingSecondDerivatives("the phase constant needs second derivatives")
    Bt = btilde if btilde is not None else qfi(model, theta0, context).Btilde
    X2 = (0.5 * (p.Hddot + antiherm_part(sum(dag(Ldd) @ L for L, Ldd in zip(p.L, p.Lddot))))
          + antiherm_part(p.Hdot @ Bt)
          - herm_part(sum(dag(Ld) @ Bt @ L for L, Ld in zip(p.L, p.Ldot)))
          + herm_part(_cross(p)) @ Bt)
    return float(context.expect(X2).real)


@dataclass(frozen=True)
class CountingCoefficients:
    mu_c: float
    V_c: float
    rate: float
    I_c: float
    degenerate: bool = False


@dataclass(frozen=True)
class HomodyneCoefficients:
    phi: float
    mu_h: float
    V_h: float
    drift: float
    I_h: float
    degenerate: bool = False


def _information(mu: float, V: float, what: str) -> tuple[float, bool]:
    if V <= VARIANCE_FLOOR:
        if V < -NEGATIVE_TOL:
            raise DegenerateVariance(f"{what} variance is negative: {V:.3e}")
        return 0.0, True
    return mu**2 / V, False


def counting_coefficients(model: ParamModel, theta0: float, channel: int,
                          context: Optional[FisherContext] = None) -> CountingCoefficients:
    """Mean slope, variance and rate of the total counts in ``channel``."""
    ctx = _ctx(model, theta0, context)
    p = ctx.point
    _check_channel(p, channel)
    L, Ld = p.L[channel], p.Ldot[channel]
    LdL = dag(L) @ L
    rate = _real(ctx.expect(LdL), "count rate")
    A = -ctx.analysis.ltilde_apply(LdL - rate * np.eye(p.dim))
    mu = _real(ctx.expect(derivative_action(p, A) + dag(Ld) @ L + dag(L) @ Ld), "mu_c")
    V = _real(ctx.expect(LdL + 2 * dag(L) @ A @ L), "V_c")
    info, degenerate = _information(mu, V, "counting")
    return CountingCoefficients(mu_c=mu, V_c=V, rate=rate, I_c=info, degenerate=degenerate)


def homodyne_coefficients(model: ParamModel, theta0: float, phi: float, channel: int,
                          context: Optional[FisherContext] = None) -> HomodyneCoefficients:
    """Mean slope, variance and drift of the integrated homodyne current."""
    ctx = _ctx(model, theta0, context)
    p = ctx.point
    _check_channel(p, channel)
    L, Ld = p.L[channel], p.Ldot[channel]
    em, ep = np.exp(-1j * phi), np.exp(1j * phi)
    x = _quadrature(L, phi)
    drift = _real(ctx.expect(x), "homodyne drift")
    B = ctx.analysis.ltilde_apply(x - drift * np.eye(p.dim))
    mu = _real(ctx.expect(_quadrature(Ld, phi) - derivative_action(p, B)), "mu_h")
    V = 1 - 2 * _real(ctx.expect(em * dag(L) @ B + ep * B @ L), "V_h")
    info, degenerate = _information(mu, V, "homodyne")
    return HomodyneCoefficients(phi=float(phi), mu_h=mu, V_h=V, drift=drift, I_h=info,
                                degenerate=degenerate)


@dataclass(frozen=True)
class FisherReport:
    theta0: float
    channel: int
    F: float
    a_tilde: float
    gap: float
    min_eig: float
    X2_mean: Optional[float] = None
    count: Optional[CountingCoefficients] = None
    homodyne: Optional[HomodyneCoefficients] = None

    def as_dict(self) -> dict:
        out = {"theta0": self.theta0, "channel": self.channel, "F": self.F,
               "a_tilde": self.a_tilde, "gap": self.gap, "min_eig": self.min_eig,
               "X2_mean": self.X2_mean}
        if self.count is not None:
            c = self.count
            out["count"] = {"mu_c": c.mu_c, "V_c": c.V_c, "I_c": c.I_c, "rate": c.rate,
                            "degenerate": c.degenerate}
        if self.homodyne is not None:
            h = self.homodyne
            out["homodyne"] = {"phi": h.phi, "mu_h": h.mu_h, "V_h": h.V_h, "I_h": h.I_h,
                               "drift": h.drift, "degenerate": h.degenerate}
        return out


def assemble_report(model: ParamModel, theta0: float, phi: float = 0.0, channel: int = 0,
                    context: Optional[FisherContext] = None) -> FisherReport:
    """Quantum and both classical informations at one point, bound-checked."""
    ctx = _ctx(model, theta0, context)
    q = qfi(model, theta0, ctx)
    X2 = phase_constant_X2(model, theta0, ctx, q.Btilde) if ctx.point.has_second_derivatives else None
    count = counting_coefficients(model, theta0, channel, ctx)
    hom = homodyne_coefficients(model, theta0, phi, channel, ctx)
    tol = 1e-8 * q.F + 1e-14
    for name, info in (("I_c", count.I_c), ("I_h", hom.I_h)):
        if info > q.F + tol:
            raise BoundViolated(f"{name} = {info:.10g} exceeds F = {q.F:.10g}")
    return FisherReport(theta0=float(theta0), channel=channel, F=q.F, a_tilde=q.a_tilde,
                        gap=ctx.analysis.gap, min_eig=ctx.analysis.min_eig, X2_mean=X2,
                        count=count, homodyne=hom)
