"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import time

import numpy as np
import pytest

from qlan._linalg import vec
from qlan.asymptotics import lan_sweep
from qlan.cli import main
from qlan.fisher import (counting_coefficients, fisher_context, homodyne_coefficients, qfi)
from qlan.model import (atom_maser_model, evaluate, maser_oracles, random_model, two_level_model,
                        two_level_oracles, SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z, IDENTITY_2)
from qlan.stationary import analyze_point, restricted_inverse
from qlan.superop import lindblad_heisenberg, lindblad_schrodinger
from qlan.trajectories import (TrajectoryConfig, empirical_lan_check, plug_in_estimator,
                               simulate_homodyne)

THETAS = (0.5, 1.0, 2.0)
ZS = (1.0, 0.5 + 0.3j, 2j)
PHI_GRID = np.arange(12) * np.pi / 12


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_criterion_1_two_level_qfi(criterion):
    start = time.perf_counter()
    worst = 0.0
    for th in THETAS:
        for z in ZS:
            worst = max(worst, rel(qfi(two_level_model(z), th).F, two_level_oracles(z, th).F))
    elapsed = time.perf_counter() - start
    criterion(1, worst <= 1e-8 and elapsed < 1.0,
              f"max rel err {worst:.2e} (tol 1e-8), runtime {elapsed:.2f} s (< 1 s)")


def test_criterion_2_two_level_counting(criterion):
    worst_rate = worst_mu = worst_info = 0.0
    for th in THETAS:
        for z in ZS:
            c = counting_coefficients(two_level_model(z), th, 0)
            worst_rate = max(worst_rate, abs(c.rate - abs(z) ** 2))
            worst_mu = max(worst_mu, abs(c.mu_c))
            worst_info = max(worst_info, c.I_c)
    ok = worst_rate <= 1e-10 and worst_mu <= 1e-10 and worst_info <= 1e-18
    criterion(2, ok, f"|rate - |z|^2| {worst_rate:.1e}, |mu_c| {worst_mu:.1e} (tol 1e-10), "
                     f"max I_c {worst_info:.1e}")


def test_criterion_3_two_level_homodyne(criterion):
    z, th = 1.0, 2.0
    m = two_level_model(z)
    ctx = fisher_context(m, th)
    err_v = err_i = 0.0
    info = []
    for phi in PHI_GRID:
        h = homodyne_coefficients(m, th, phi, 0, ctx)
        o = two_level_oracles(z, th, phi)
        err_v = max(err_v, rel(h.V_h, o.B_h))
        err_i = max(err_i, rel(h.mu_h**2 / h.V_h, o.A_h**2 / o.B_h))
        info.append(h.I_h)
    best = PHI_GRID[int(np.argmax(info))]
    target = (-np.angle(z)) % np.pi
    argmax_ok = min(abs(best - target), np.pi - abs(best - target)) < 1e-12
    ok = err_v <= 1e-8 and err_i <= 1e-8 and argmax_ok
    criterion(3, ok, f"max rel err V_h vs B_h {err_v:.3e}, mu^2/V vs A^2/B {err_i:.3e} (tol 1e-8); "
                     f"argmax phi {best:.4f} vs {target:.4f} ({'ok' if argmax_ok else 'wrong'})")


def test_criterion_4_appendix_matrices(criterion):
    z, th = 1.0, 2.0
    o = two_level_oracles(z, th)
    point = evaluate(two_level_model(z), th)
    G = lindblad_heisenberg(point).dense()
    rho = analyze_point(point).rho_ss
    Lt = restricted_inverse(lindblad_heisenberg(point), rho).dense()
    basis = [SIGMA_Z + (1 - 2 * o.a) * IDENTITY_2, SIGMA_PLUS - o.c * IDENTITY_2,
             SIGMA_MINUS - o.b * IDENTITY_2, IDENTITY_2]
    E = np.array([vec(x) for x in basis]).T
    M = np.linalg.solve(E, G @ E)
    Mt = np.linalg.solve(E, Lt @ E)
    zc, z2 = np.conj(z), abs(z) ** 2
    m55 = np.array([[-th**2, zc * th, z * th, 0], [-2 * z * th, -th**2 / 2, 0, 0],
                    [-2 * zc * th, 0, -th**2 / 2, 0], [0, 0, 0, 0]])
    lt = np.array([[-th**2, -2 * zc * th, -2 * z * th],
                   [4 * z * th, -2 * th**2 - 8 * z2, 8 * z**2],
                   [4 * zc * th, 8 * zc**2, -2 * th**2 - 8 * z2]]) / (th**2 * (th**2 + 8 * z2))
    err_m = np.max(np.abs(M - m55))
    err_l = max(np.max(np.abs(Mt[:3, :3] - lt)), np.max(np.abs(Mt[3])), np.max(np.abs(Mt[:, 3])))
    criterion(4, err_m <= 1e-12 and err_l <= 1e-10,
              f"generator matrix err {err_m:.1e} (tol 1e-12), restricted inverse err {err_l:.1e} (tol 1e-10)")


def test_criterion_5_atom_maser(criterion):
    model = atom_maser_model(16, 0.1, 60)
    err_rho = err_f = 0.0
    slowest = 0.0
    for phi in (0.4, 0.8, 1.2):
        start = time.perf_counter()
        ctx = fisher_context(model, phi)
        F = qfi(model, phi, ctx).F
        slowest = max(slowest, time.perf_counter() - start)
        o = maser_oracles(16, 0.1, phi, 60)
        err_rho = max(err_rho, np.max(np.abs(ctx.analysis.rho_ss - np.diag(o.rho_ss))))
        err_f = max(err_f, rel(F, o.F))
    ok = err_rho <= 1e-10 and err_f <= 1e-6 and slowest < 30
    criterion(5, ok, f"rho_ss entry err {err_rho:.1e} (tol 1e-10), F rel err {err_f:.1e} (tol 1e-6), "
                     f"slowest phi {slowest:.2f} s (< 30 s)")


def test_criterion_6_structural_properties(criterion):
    rng = np.random.default_rng(2024)
    worst = dict(duality=0.0, unit=0.0, trace=0.0, inverse=0.0, centred=0.0)
    bound_ok = True
    for k in range(50):
        dim, ch = 2 + k % 3, 1 + (k // 3) % 3
        model = random_model(rng, dim, ch)
        point = evaluate(model, 0.0)
        heis, schr = lindblad_heisenberg(point), lindblad_schrodinger(point)
        rho = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = rho @ rho.conj().T
        rho /= np.trace(rho)
        X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        worst["duality"] = max(worst["duality"], abs(np.trace(schr.apply(rho) @ X)
                                                     - np.trace(rho @ heis.apply(X))))
        worst["unit"] = max(worst["unit"], np.max(np.abs(heis.apply(np.eye(dim)))))
        worst["trace"] = max(worst["trace"], abs(np.trace(schr.apply(rho))))
        ctx = fisher_context(model, 0.0)
        a = ctx.analysis
        G, Lt, Q = heis.dense(), a.Ltilde.dense(), a.Q.dense()
        worst["inverse"] = max(worst["inverse"], np.max(np.abs(Lt @ G - Q)), np.max(np.abs(G @ Lt - Q)))
        q = qfi(model, 0.0, ctx)
        L = point.L[0]
        LdL = L.conj().T @ L
        A = -a.ltilde_apply(LdL - ctx.expect(LdL) * np.eye(dim))
        worst["centred"] = max(worst["centred"], abs(ctx.expect(A)), abs(ctx.expect(q.Btilde)))
        c = counting_coefficients(model, 0.0, 0, ctx)
        h = homodyne_coefficients(model, 0.0, rng.uniform(0, np.pi), 0, ctx)
        slack = 1e-8 * q.F + 1e-14
        bound_ok &= c.I_c <= q.F + slack and h.I_h <= q.F + slack
    ok = (worst["duality"] <= 1e-12 and worst["unit"] <= 1e-12 and worst["trace"] <= 1e-12
          and worst["inverse"] <= 1e-10 and worst["centred"] <= 1e-10 and bound_ok)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    criterion(6, ok, f"50 random models: {detail}; I_c, I_h <= F {'holds' if bound_ok else 'violated'}")


def test_criterion_7_exact_lan(criterion):
    model = two_level_model(1)
    start = time.perf_counter()
    parts, ok = [], True
    for kind in ("overlap", "counting", "homodyne"):
        s = lan_sweep(kind, model, 2.0, 1.0, np.linspace(-2, 2, 9), [1e2, 1e3, 1e4])
        good = s.monotone() and -1.0 <= s.exponent <= -0.25
        ok &= good
        parts.append(f"{kind} exponent {s.exponent:.3f} monotone {s.monotone()}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    criterion(7, ok, "; ".join(parts) + f"; runtime {elapsed:.2f} s (< 60 s)")


@pytest.mark.slow
def test_criterion_8_monte_carlo_lan(criterion):
    z, th, u, t = 1.0, 2.0, 1.0, 200.0
    model = two_level_model(z)
    h = homodyne_coefficients(model, th, 0.0, 0)
    start = time.perf_counter()
    theta_true = th + u / np.sqrt(t)
    cfg = TrajectoryConfig(t_final=t, dt=0.005, seed=20240601, n_traj=2000, scheme="diffusive",
                           phi=0.0, channel=0, centering=h.drift)
    recs = simulate_homodyne(evaluate(model, theta_true), cfg, n_jobs=4)
    elapsed = time.perf_counter() - start
    chk = empirical_lan_check(recs, h.mu_h, h.V_h, u, t)
    est = plug_in_estimator(recs, h.mu_h, th, t, theta_true)
    target = 2.0155
    mean_ok = abs(chk["mean_z"] - h.mu_h * u) <= 3 * chk["mean_z_se"]
    var_ok = rel(chk["var_z"], h.V_h) <= 0.10
    mse_ok = rel(est["mse_times_t"], target) <= 0.15
    ok = mean_ok and var_ok and mse_ok and elapsed < 300
    criterion(8, ok,
              f"mean {chk['mean_z']:.4f} +- {chk['mean_z_se']:.4f} vs mu_h {h.mu_h:.4f} "
              f"({'ok' if mean_ok else 'off'}); var {chk['var_z']:.4f} vs V_h {h.V_h:.4f} "
              f"({'ok' if var_ok else 'off'}); t*MSE {est['mse_times_t']:.4f} vs {target} "
              f"({'ok' if mse_ok else 'off'}, rel {rel(est['mse_times_t'], target):.1%}); "
              f"runtime {elapsed:.0f} s")


def test_criterion_9_reproducible_simulation(criterion, tmp_path):
    import json
    cfg = {"model": {"type": "two_level", "z_re": 1.0}, "theta0": 2.0, "seed": 99,
           "simulate": {"scheme": "diffusive", "t_final": 5.0, "dt": 0.005, "n_traj": 600, "u": 1.0}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    blobs = []
    for k, jobs in enumerate(("1", "1", "2", "4")):
        out = tmp_path / f"run{k}"
        code = main(["simulate", "--config", str(path), "--jobs", jobs, "--out", str(out)])
        assert code == 0
        blobs.append(tuple((out / name).read_bytes()
                           for name in ("simulate_summary.json", "trajectories.csv")))
    same = all(b == blobs[0] for b in blobs)
    criterion(9, same, f"byte-identical outputs over 2 runs and jobs 1/2/4: {same}")
