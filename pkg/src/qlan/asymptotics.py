"""Exact finite-time overlaps and characteristic functions.

Each quantity is one matrix exponential of a ``t``-scaled generator from
:mod:`qlan.superop`, applied to the identity and evaluated in a state.
:func:`lan_sweep` compares these with their Gaussian limits over a grid of
times and reports how fast the logarithmic deviation decays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .errors import BranchCut, ValidationError
from .fisher import (counting_coefficients, fisher_context, homodyne_coefficients,
                     phase_constant_X2, qfi)
from .model import ParamModel
from .superop import (counting_lan_generator, homodyne_lan_generator, semigroup_apply,
                      two_sided_generator)

KINDS = ("overlap", "counting", "homodyne")
BRANCH_CUT_TOL = 1e-12


def _identity(d):
    return np.eye(d, dtype=complex)


def _default_chi(d):
    chi = np.zeros(d, dtype=complex)
    chi[0] = 1.0
    return chi


def exact_overlap(model: ParamModel, theta0: float, u: float, v: float, t: float,
                  chi0: Optional[np.ndarray] = None, a_tilde: Optional[float] = None) -> complex:
    """Overlap of the phase-corrected system plus output states at
    ``theta0 + u/sqrt(t)`` and ``theta0 + v/sqrt(t)``, started in ``chi0``."""
    d = model.dim
    chi = _default_chi(d) if chi0 is None else np.asarray(chi0, dtype=complex)
    if not np.isclose(np.linalg.norm(chi), 1.0, atol=1e-10):
        raise ValidationError("chi0 must be a unit vector")
    g = two_sided_generator(model, theta0, u, v, t, a_tilde=a_tilde)
    Y = semigroup_apply(g, 1.0, _identity(d))
    return complex(chi.conj() @ Y @ chi)


def limit_overlap(F: float, X2_mean: Optional[float], u: float, v: float) -> complex:
    """Coherent-state limit ``exp(-(u-v)^2 F/8 + i(u^2-v^2) <X2>)``."""
    if F < 0:
        raise ValidationError("F must be non-negative")
    return complex(np.exp(log_limit_overlap(F, X2_mean, u, v)))


def log_limit_overlap(F, X2_mean, u, v) -> complex:
    phase = 0.0 if X2_mean is None else (u**2 - v**2) * X2_mean
    return complex(-(u - v) ** 2 * F / 8, phase)


def log_limit_cf(mu: float, V: float, u: float, arg: float) -> complex:
    """Log characteristic function ``i u arg mu - arg^2 V/2`` of ``N(mu u, V)``."""
    return complex(-0.5 * arg**2 * V, u * arg * mu)


def _state_expect(rho, Y):
    return complex(np.sum(np.asarray(rho).T * Y))


def exact_counting_cf(model: ParamModel, theta0: float, u: float, s: float, t: float,
                      channel: int, rho_in: Optional[np.ndarray] = None,
                      rate: Optional[float] = None) -> complex:
    """``E exp(i s Y_t / sqrt t)`` with ``Y_t`` the centred counts in ``channel``.

    ``rho_in`` defaults to the stationary state at ``theta0``.
    """
    if rho_in is None or rate is None:
        ctx = fisher_context(model, theta0)
        rho_in = ctx.analysis.rho_ss if rho_in is None else rho_in
        if rate is None:
            L = ctx.point.L[channel] if channel < ctx.point.channels else None
            rate = None if L is None else ctx.expect(L.conj().T @ L).real
    g = counting_lan_generator(model, theta0, u, s, t, channel, rate=rate)
    return _state_expect(rho_in, semigroup_apply(g, 1.0, _identity(model.dim)))


def exact_homodyne_cf(model: ParamModel, theta0: float, u: float, p: float, phi: float, t: float,
                      channel: int, rho_in: Optional[np.ndarray] = None,
                      drift: Optional[float] = None) -> complex:
    """``E exp(i p W_t / sqrt t)`` with ``W_t`` the centred integrated current."""
    if rho_in is None or drift is None:
        ctx = fisher_context(model, theta0)
        rho_in = ctx.analysis.rho_ss if rho_in is None else rho_in
        if drift is None and channel < ctx.point.channels:
            L = ctx.point.L[channel]
            x = np.exp(-1j * phi) * L.conj().T + np.exp(1j * phi) * L
            drift = ctx.expect(x).real
    g = homodyne_lan_generator(model, theta0, u, p, phi, t, channel, drift=drift)
    return _state_expect(rho_in, semigroup_apply(g, 1.0, _identity(model.dim)))


def log_cf_derivatives(cf, h: float = 1e-3) -> tuple[complex, complex]:
    """First and second derivatives at zero of ``log cf`` by 5-point stencils."""
    vals = {k: np.log(cf(k * h)) for k in (-2, -1, 1, 2)}
    vals[0] = np.log(cf(0.0))
    d1 = (vals[-2] - 8 * vals[-1] + 8 * vals[1] - vals[2]) / (12 * h)
    d2 = (-vals[-2] + 16 * vals[-1] - 30 * vals[0] + 16 * vals[1] - vals[2]) / (12 * h**2)
    return complex(d1), complex(d2)


@dataclass
class LanSweep:
    kind: str
    u: float
    t_grid: np.ndarray
    arg_grid: np.ndarray
    exact: np.ndarray        # shape (len(t_grid), len(arg_grid))
    limit: np.ndarray        # shape (len(arg_grid),)
    deviation: np.ndarray    # shape (len(t_grid),)
    exponent: float
    constants: dict = field(default_factory=dict)

    def rows(self):
        """Flat records ``(kind, t, arg, re_exact, im_exact, re_limit, im_limit, deviation)``."""
        for i, t in enumerate(self.t_grid):
            for j, a in enumerate(self.arg_grid):
                e, lim = self.exact[i, j], self.limit[j]
                yield (self.kind, float(t), float(a), e.real, e.imag, lim.real, lim.imag,
                       float(self.deviation[i]))

    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.deviation) < 0))


def _validate_grids(t_grid, arg_grid):
    t = np.asarray(t_grid, dtype=float)
    a = np.asarray(arg_grid, dtype=float)
    if t.ndim != 1 or t.size < 3:
        raise ValidationError("t_grid needs at least 3 points")
    if not np.all(np.isfinite(t)) or np.any(t <= 0):
        raise ValidationError("t_grid must be positive and finite")
    if np.any(np.diff(t) <= 0):
        raise ValidationError("t_grid must be strictly ascending")
    if np.log10(t[-1] / t[0]) < 2 - 1e-12:
        raise ValidationError("t_grid must span at least two decades")
    if a.ndim != 1 or a.size == 0 or not np.all(np.isfinite(a)):
        raise ValidationError("arg_grid must be a non-empty finite list")
    return t, a


def tracked_log(values: np.ndarray, log_ref: np.ndarray, anchor: int) -> np.ndarray:
    """Continuous logarithm of ``values`` along the grid.

    The branch at ``anchor`` is the one closest to ``log_ref[anchor]``;
    phases are then unwrapped outwards in both directions.
    """
    if np.any(np.abs(values) < BRANCH_CUT_TOL):
        raise BranchCut("characteristic function vanishes on the grid; shrink the argument range")
    logs = np.log(values)
    phase = logs.imag.copy()
    k = np.round((log_ref[anchor].imag - phase[anchor]) / (2 * np.pi))
    phase[anchor] += 2 * np.pi * k
    phase[anchor:] = np.unwrap(phase[anchor:])
    phase[:anchor + 1] = np.unwrap(phase[anchor::-1])[::-1]
    return logs.real + 1j * phase


def fit_exponent(t_grid: np.ndarray, deviation: np.ndarray) -> float:
    """Least-squares slope of ``log deviation`` against ``log t``."""
    dev = np.asarray(deviation, dtype=float)
    if np.any(dev <= 0):
        return float("nan")
    return float(np.polyfit(np.log(t_grid), np.log(dev), 1)[0])


def lan_sweep(kind: str, model: ParamModel, theta0: float, u: float,
              arg_grid: Sequence[float], t_grid: Sequence[float], phi: float = 0.0,
              channel: int = 0, chi0: Optional[np.ndarray] = None,
              rho_in: Optional[np.ndarray] = None, n_jobs: int = 1) -> LanSweep:
    """Exact versus limiting overlap or characteristic function on a grid.

    ``arg_grid`` holds ``v`` for the overlap and the Fourier variable for
    the characteristic functions.
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown kind {kind!r}; expected one of {KINDS}")
    t, a = _validate_grids(t_grid, arg_grid)
    ctx = fisher_context(model, theta0)

    if kind == "overlap":
        q = qfi(model, theta0, ctx)
        X2 = phase_constant_X2(model, theta0, ctx, q.Btilde) if ctx.point.has_second_derivatives else None
        consts = {"F": q.F, "X2_mean": X2, "a_tilde": q.a_tilde}
        log_lim = np.array([log_limit_overlap(q.F, X2, u, v) for v in a])
        origin = u

        def cell(tt, v):
            return exact_overlap(model, theta0, u, v, tt, chi0=chi0, a_tilde=q.a_tilde)
    elif kind == "counting":
        c = counting_coefficients(model, theta0, channel, ctx)
        consts = {"mu": c.mu_c, "V": c.V_c, "rate": c.rate}
        log_lim = np.array([log_limit_cf(c.mu_c, c.V_c, u, s) for s in a])
        origin = 0.0
        rho = ctx.analysis.rho_ss if rho_in is None else rho_in

        def cell(tt, s):
            return exact_counting_cf(model, theta0, u, s, tt, channel, rho_in=rho, rate=c.rate)
    else:
        h = homodyne_coefficients(model, theta0, phi, channel, ctx)
        consts = {"mu": h.mu_h, "V": h.V_h, "drift": h.drift, "phi": phi}
        log_lim = np.array([log_limit_cf(h.mu_h, h.V_h, u, p) for p in a])
        origin = 0.0
        rho = ctx.analysis.rho_ss if rho_in is None else rho_in

        def cell(tt, p):
            return exact_homodyne_cf(model, theta0, u, p, phi, tt, channel, rho_in=rho,
                                     drift=h.drift)

    cells = [(tt, x) for tt in t for x in a]
    if n_jobs == 1:
        values = [cell(tt, x) for tt, x in cells]
    else:
        values = Parallel(n_jobs=n_jobs)(delayed(cell)(tt, x) for tt, x in cells)
    exact = np.array(values, dtype=complex).reshape(t.size, a.size)

    anchor = int(np.argmin(np.abs(a - origin)))
    deviation = np.empty(t.size)
    for i in range(t.size):
        logs = tracked_log(exact[i], log_lim, anchor)
        deviation[i] = np.max(np.abs(logs - log_lim))
    return LanSweep(kind=kind, u=float(u), t_grid=t, arg_grid=a, exact=exact,
                    limit=np.exp(log_lim), deviation=deviation,
                    exponent=fit_exponent(t, deviation), constants=consts)
