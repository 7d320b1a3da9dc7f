"""Monte Carlo unravellings of counting and homodyne detection.

Both schemes propagate a conditional density matrix with a symmetric
splitting over each step of length ``dt``::

    exp(dt/2 G_u)  ->  measurement instrument on the monitored channel
                   ->  exp(dt/2 G_u)

where ``G_u`` is the Schrodinger generator of the Hamiltonian and every
unmonitored channel (those are averaged out, so the conditional state is
mixed in general).  The instrument is a finite set of completely positive
maps ``S_j`` with reference weights ``w_j`` and record increments ``y_j``;
outcome ``j`` is drawn with probability proportional to
``w_j Tr(S_j rho)``.

Counting: ``S_0(rho) = M0 rho M0^dag`` with ``M0 = exp(-dt L^dag L/2)`` (no
click), ``S_1`` the exact one-click term of the Dyson expansion and
``S_2 = exp(dt D_c) - S_0 - S_1`` (two or more clicks, recorded as two),
``D_c`` the dissipator of the monitored channel.  The branches sum to an
exactly trace-preserving map.

Homodyne: increments take the values ``-sqrt(3 dt), 0, sqrt(3 dt)`` with
weights ``1/6, 2/3, 1/6`` (the three-point law matching the first five
Gaussian moments), and ``M_y = exp(A dt) + (C + (A C + C A) dt/2) y
+ C^2 (y^2 - dt)/2`` with ``C = e^{i phi} L``, ``A = -C^dag C/2``.  This
is a weak second order instrument; a plain Euler-Maruyama step of the
stochastic master equation loses positivity at the step sizes of interest.

Random numbers come from one counter-based Philox stream per trajectory,
keyed by ``(seed, trajectory index)``, so results do not depend on how
trajectories are grouped or scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from joblib import Parallel, delayed

from ._linalg import dag, sandwich, to_dense, unvec, vec
from .errors import DegenerateMean, StateBlowup, StepTooLarge, ValidationError
from .model import ModelPoint
from .stationary import analyze_point
from .superop import lindblad_schrodinger

SCHEMES = ("jump", "diffusive")
MAX_DIM = 32
BATCH_SIZE = 250
CHUNK_STEPS = 2000
STEP_BOUND = 0.05
CLICK_BOUND = 0.1
TRACE_TOL = 1e-3
NORMALITY_GRID = np.linspace(0.25, 3.0, 12)


@dataclass(frozen=True)
class TrajectoryConfig:
    """Simulation settings.

    ``centering`` is the stationary rate (jump) or drift (diffusive) at the
    reference parameter; when absent it is computed at the simulated point.
    ``rho0`` defaults to the stationary state at the simulated point.  The
    number of steps is ``round(t_final/dt)`` and the step is adjusted to
    divide ``t_final`` exactly.
    """

    t_final: float
    dt: float
    seed: int
    n_traj: int
    scheme: str = "diffusive"
    phi: float = 0.0
    channel: int = 0
    centering: Optional[float] = None
    rho0: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (np.isfinite(self.t_final) and self.t_final > 0):
            raise ValidationError("t_final must be positive")
        if not (np.isfinite(self.dt) and 0 < self.dt <= self.t_final):
            raise ValidationError("dt must satisfy 0 < dt <= t_final")
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise ValidationError("n_traj must be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2**64:
            raise ValidationError("seed must be an integer in [0, 2^64)")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.dt)))

    @property
    def step(self) -> float:
        return self.t_final / self.n_steps


@dataclass(frozen=True)
class TrajectoryRecord:
    traj_id: int
    raw: float               # total counts (jump) or integrated current (diffusive)
    y_centered: float
    final_state: np.ndarray

    @property
    def n_counts(self) -> int:
        return int(round(self.raw))

    @property
    def z_integrated(self) -> float:
        return self.raw


class _Instrument:
    """Precomputed split-step maps for a batch of conditional states."""

    def __init__(self, maps: Sequence[np.ndarray], weights, increments, half: np.ndarray,
                 click_index: Optional[tuple] = None):
        dim2 = half.shape[0]
        self.dim = int(round(np.sqrt(dim2)))
        self.tr = vec(np.eye(self.dim, dtype=complex))
        self.weights = np.asarray(weights, dtype=float)
        self.increments = np.asarray(increments, dtype=float)
        self.K = len(maps)
        self.half = half
        full = half @ half
        # row j of R gives w_j Tr(S_j v)
        self.R = np.array([w * (self.tr @ S) for w, S in zip(self.weights, maps)])
        self.T = np.hstack([(full @ S).T for S in maps])
        self.T_last = np.hstack([(half @ S).T for S in maps])
        self.click_index = click_index

    def start(self, rho0: np.ndarray, n: int) -> np.ndarray:
        v0 = self.half @ vec(rho0)
        return np.tile(v0, (n, 1))

    def step(self, v: np.ndarray, u: np.ndarray, last: bool):
        q = (v @ self.R.T).real
        total = q.sum(axis=1)
        if not np.all(np.isfinite(total)) or np.any(np.abs(total - 1) > TRACE_TOL):
            raise StateBlowup("conditional state lost normalisation; reduce dt")
        if self.click_index is not None and np.any(
                q[:, list(self.click_index)].sum(axis=1) > CLICK_BOUND * total):
            raise StepTooLarge(f"jump probability per step exceeds {CLICK_BOUND}; reduce dt")
        cum = np.cumsum(q, axis=1)
        j = np.sum((u * total)[:, None] > cum[:, :-1], axis=1)
        new = (v @ (self.T_last if last else self.T)).reshape(v.shape[0], self.K, -1)
        v = new[np.arange(v.shape[0]), j]
        v = v / (v @ self.tr)[:, None]
        return v, self.increments[j]


def _unmonitored_half_step(point: ModelPoint, channel: int, dt: float) -> np.ndarray:
    keep = [i for i in range(point.channels) if i != channel]
    rest = replace(point, L=tuple(point.L[i] for i in keep), Ldot=tuple(point.Ldot[i] for i in keep),
                   Lddot=None)
    G = to_dense(lindblad_schrodinger(rest).matrix)
    return sla.expm(0.5 * dt * G)


def _check_point(point: ModelPoint, cfg: TrajectoryConfig) -> None:
    if point.dim > MAX_DIM:
        raise ValidationError(f"trajectory simulation supports dim <= {MAX_DIM}, got {point.dim}")
    if not (0 <= cfg.channel < point.channels):
        raise ValidationError(f"channel {cfg.channel} out of range for {point.channels} channels")
    worst = max(np.linalg.norm(dag(L) @ L, 2) for L in point.L)
    if cfg.step * worst > STEP_BOUND:
        raise StepTooLarge(f"dt * max ||L^dag L|| = {cfg.step * worst:.3g} exceeds {STEP_BOUND}")


def counting_instrument(point: ModelPoint, channel: int, dt: float) -> _Instrument:
    L = point.L[channel]
    d = point.dim
    LdL = dag(L) @ L
    eye = np.eye(d)
    n = d * d
    damp = -0.5 * (np.kron(eye, LdL) + np.kron(LdL.T, eye))
    jump = sandwich(L, dag(L))
    # exp([[N, J], [0, N]] dt) carries the single-jump Dyson term in its corner
    block = np.zeros((2 * n, 2 * n), dtype=complex)
    block[:n, :n] = damp
    block[n:, n:] = damp
    block[:n, n:] = jump
    E = sla.expm(dt * block)
    S0 = E[:n, :n]
    S1 = E[:n, n:]
    S2 = sla.expm(dt * (damp + jump)) - S0 - S1
    return _Instrument([S0, S1, S2], [1.0, 1.0, 1.0], [0.0, 1.0, 2.0],
                       _unmonitored_half_step(point, channel, dt), click_index=(1, 2))


def homodyne_instrument(point: ModelPoint, channel: int, phi: float, dt: float) -> _Instrument:
    C = np.exp(1j * phi) * point.L[channel]
    A = -0.5 * dag(C) @ C
    M0 = sla.expm(A * dt)
    first = C + 0.5 * (A @ C + C @ A) * dt
    second = 0.5 * C @ C
    h = np.sqrt(3 * dt)
    ys = [-h, 0.0, h]
    maps = []
    for y in ys:
        M = M0 + first * y + second * (y * y - dt)
        maps.append(sandwich(M, dag(M)))
    return _Instrument(maps, [1 / 6, 2 / 3, 1 / 6], ys,
                       _unmonitored_half_step(point, channel, dt))


def _stream(seed: int, traj_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, traj_id], dtype=np.uint64)))


def _run_batch(inst: _Instrument, rho0: np.ndarray, ids: Sequence[int], seed: int, n_steps: int):
    gens = [_stream(seed, i) for i in ids]
    v = inst.start(rho0, len(ids))
    raw = np.zeros(len(ids))
    for start in range(0, n_steps, CHUNK_STEPS):
        m = min(CHUNK_STEPS, n_steps - start)
        U = np.stack([g.random(m) for g in gens])
        for k in range(m):
            v, inc = inst.step(v, U[:, k], last=(start + k == n_steps - 1))
            raw += inc
    return raw, v


def _simulate(point: ModelPoint, cfg: TrajectoryConfig, inst: _Instrument, centering: float,
              n_jobs: int) -> list[TrajectoryRecord]:
    d = point.dim
    rho0 = cfg.rho0
    if rho0 is None:
        rho0 = analyze_point(point).rho_ss
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (d, d) or abs(np.trace(rho0) - 1) > 1e-10:
        raise ValidationError("rho0 must be a unit-trace d x d matrix")
    ids = list(range(cfg.n_traj))
    batches = [ids[i:i + BATCH_SIZE] for i in range(0, len(ids), BATCH_SIZE)]
    n_steps = cfg.n_steps
    if n_jobs == 1 or len(batches) == 1:
        results = [_run_batch(inst, rho0, b, cfg.seed, n_steps) for b in batches]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_run_batch)(inst, rho0, b, cfg.seed, n_steps) for b in batches)
    records = []
    for b, (raw, v) in zip(batches, results):
        for i, tid in enumerate(b):
            rho = unvec(v[i], d)
            records.append(TrajectoryRecord(traj_id=tid, raw=float(raw[i]),
                                            y_centered=float(raw[i] - cfg.t_final * centering),
                                            final_state=0.5 * (rho + dag(rho))))
    return records


def simulate_counting(point: ModelPoint, cfg: TrajectoryConfig, n_jobs: int = 1) -> list[TrajectoryRecord]:
    """Quantum-jump unravelling; returns one record per trajectory."""
    if cfg.scheme != "jump":
        raise ValidationError("simulate_counting needs scheme 'jump'")
    _check_point(point, cfg)
    centering = cfg.centering
    if centering is None:
        rho = analyze_point(point).rho_ss
        L = point.L[cfg.channel]
        centering = float(np.sum(rho.T * (dag(L) @ L)).real)
    inst = counting_instrument(point, cfg.channel, cfg.step)
    return _simulate(point, cfg, inst, centering, n_jobs)


def simulate_homodyne(point: ModelPoint, cfg: TrajectoryConfig, n_jobs: int = 1) -> list[TrajectoryRecord]:
    """Diffusive unravelling; returns one record per trajectory."""
    if cfg.scheme != "diffusive":
        raise ValidationError("simulate_homodyne needs scheme 'diffusive'")
    _check_point(point, cfg)
    centering = cfg.centering
    if centering is None:
        rho = analyze_point(point).rho_ss
        L = point.L[cfg.channel]
        x = np.exp(-1j * cfg.phi) * dag(L) + np.exp(1j * cfg.phi) * L
        centering = float(np.sum(rho.T * x).real)
    inst = homodyne_instrument(point, cfg.channel, cfg.phi, cfg.step)
    return _simulate(point, cfg, inst, centering, n_jobs)


def plug_in_estimator(records: Sequence[TrajectoryRecord], mu: float, theta0: float, t: float,
                      theta_true: Optional[float] = None) -> dict:
    """``theta_hat = theta0 + y/(t mu)`` per record and ``t * MSE`` about ``theta_true``."""
    if abs(mu) <= 1e-10:
        raise DegenerateMean(f"|mu| = {abs(mu):.2e}: the linear estimator is undefined")
    theta_true = theta0 if theta_true is None else theta_true
    y = np.array([r.y_centered for r in records])
    hats = theta0 + y / (t * mu)
    err2 = (hats - theta_true) ** 2
    return {"theta_hats": hats, "mse_times_t": float(t * err2.mean()),
            "mse_times_t_se": float(t * err2.std(ddof=1) / np.sqrt(len(y))),
            "bias": float(hats.mean() - theta_true)}


def normality_stat(z: np.ndarray, grid: np.ndarray = NORMALITY_GRID) -> float:
    """Sup distance on ``grid`` between the empirical characteristic function
    of ``z`` and that of a normal law with the same mean and variance."""
    m, v = z.mean(), z.var(ddof=1)
    emp = np.exp(1j * np.outer(grid, z)).mean(axis=1)
    gauss = np.exp(1j * grid * m - 0.5 * grid**2 * v)
    return float(np.max(np.abs(emp - gauss)))


def empirical_lan_check(records: Sequence[TrajectoryRecord], mu: float, V: float, u: float,
                        t: float) -> dict:
    """Sample moments of ``y/sqrt(t)`` against the limit ``N(mu u, V)``."""
    n = len(records)
    if n < 500:
        raise ValidationError(f"empirical_lan_check needs at least 500 records, got {n}")
    z = np.array([r.y_centered for r in records]) / np.sqrt(t)
    mean, var = float(z.mean()), float(z.var(ddof=1))
    m4 = float(np.mean((z - mean) ** 4))
    return {
        "mean_z": mean,
        "mean_z_se": float(np.sqrt(var / n)),
        "var_z": var,
        "var_z_se": float(np.sqrt(max(m4 - var**2, 0.0) / n)),
        "normality_stat": normality_stat(z),
        "target_mean": float(mu * u),
        "target_var": float(V),
        "n": n,
    }
