"""Command line front end.

Subcommands ``fisher``, ``lan``, ``simulate``, ``figdata`` and ``validate``
read a JSON config (see :mod:`qlan.config`) and write CSV and JSON files
to the output directory.  Exit status: 0 success, 2 irreducibility
certificate failed, 3 invalid input, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .asymptotics import lan_sweep
from .config import (RunConfig, figdata_block, fisher_block, lan_block, load_config,
                     simulate_block)
from .errors import DegenerateMean, QlanError, ValidationError
from .fisher import (assemble_report, counting_coefficients, fisher_context,
                     homodyne_coefficients, qfi)
from .model import atom_maser_model, evaluate, maser_oracles, two_level_model, two_level_oracles
from .trajectories import (TrajectoryConfig, empirical_lan_check, plug_in_estimator,
                           simulate_counting, simulate_homodyne)

ORACLE_COLUMNS = ["oracle_F", "oracle_mean_homodyne", "oracle_A_h", "oracle_B_h", "oracle_I_h",
                  "oracle_mu_h", "oracle_V_h", "oracle_I_h_exact"]
SWEEP_COLUMNS = ["theta0", "phi", "channel", "F", "X2_mean", "mu_c", "V_c", "I_c", "rate",
                 "mu_h", "V_h", "I_h", "drift", "gap", "min_eig"] + ORACLE_COLUMNS
LAN_COLUMNS = ["kind", "t", "arg", "re_exact", "im_exact", "re_limit", "im_limit", "deviation"]
TRAJ_COLUMNS = ["traj_id", "n_counts_or_current", "y_centered"]

# figure presets
HOMODYNE_RATIO = 0.66
HOMODYNE_THETA0 = 1.0
HOMODYNE_ARGS = (0.0, np.pi / 3)
HOMODYNE_PHI = np.linspace(0.0, np.pi, 61)
HOMODYNE_THETA_GRID = np.round(np.arange(0.1, 5.0001, 0.1), 10)
HOMODYNE_Z_ABS = (0.5, 1.0, 2.0)
MASER_PHI = np.round(np.arange(0.05, 1.5001, 0.05), 10)
MASER_N_EX, MASER_NU, MASER_CUTOFF = 16.0, 0.1, 60


def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else v for v in row])
    return path


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return path


def _pairs(a) -> list:
    return [[float(np.real(x)), float(np.imag(x))] for x in np.ravel(a)]


def _matrix_pairs(m) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.asarray(m)]


def _oracle_values(cfg: RunConfig, theta0: float, phi: float) -> list:
    spec = cfg.model_spec
    if cfg.model.name == "two_level" and theta0 != 0:
        o = two_level_oracles(complex(spec.get("z_re", 1.0), spec.get("z_im", 0.0)), theta0, phi)
        return [o.F, o.mean_homodyne, o.A_h, o.B_h, o.I_h, o.mu_h, o.V_h, o.I_h_exact]
    if cfg.model.name == "atom_maser":
        p = cfg.model.params
        return [maser_oracles(p["n_ex"], p["nu"], theta0, p["cutoff"]).F] + [None] * 7
    return [None] * len(ORACLE_COLUMNS)


def _fisher_rows(cfg: RunConfig, theta0: float, phis, channel: int):
    ctx = fisher_context(cfg.model, theta0, rank_tol=cfg.rank_tol, gap_tol=cfg.gap_tol)
    rows, reports = [], []
    for phi in phis:
        r = assemble_report(cfg.model, theta0, phi, channel, context=ctx)
        c, h = r.count, r.homodyne
        rows.append([theta0, phi, channel, r.F, r.X2_mean, c.mu_c, c.V_c, c.I_c, c.rate,
                     h.mu_h, h.V_h, h.I_h, h.drift, r.gap, r.min_eig]
                    + _oracle_values(cfg, theta0, phi))
        reports.append(r)
    return rows, reports, ctx


def cmd_fisher(cfg: RunConfig, jobs: int = 1) -> list[Path]:
    block = fisher_block(cfg)
    thetas, phis, channel = block["theta0_grid"], block["phi_grid"], block["channel"]
    if jobs == 1:
        results = [_fisher_rows(cfg, th, phis, channel) for th in thetas]
    else:
        results = Parallel(n_jobs=jobs)(delayed(_fisher_rows)(cfg, th, phis, channel) for th in thetas)
    rows = [row for res in results for row in res[0]]
    _, reports, ctx = results[0]
    a = ctx.analysis
    report = {
        "model": cfg.model_spec,
        "channel": channel,
        "reports": [r.as_dict() for res in results for r in res[1]],
        "stationary": {
            "theta0": thetas[0],
            "rho_ss": _matrix_pairs(a.rho_ss),
            "gap": a.gap,
            "min_eig": a.min_eig,
            "eigenvalues": _pairs(a.eigenvalues[:20]),
        },
    }
    out = cfg.output_dir
    return [_write_json(out / "fisher_report.json", report),
            _write_csv(out / "fisher_sweep.csv", SWEEP_COLUMNS, rows)]


def cmd_lan(cfg: RunConfig, jobs: int = 1) -> list[Path]:
    block = lan_block(cfg)
    rows, summary = [], {}
    for kind in block["kinds"]:
        sweep = lan_sweep(kind, cfg.model, cfg.theta0, block["u"], block["arg_grids"][kind],
                          block["t_grid"], phi=block["phi"], channel=block["channel"], n_jobs=jobs)
        rows.extend(sweep.rows())
        summary[kind] = {
            "u": sweep.u,
            "t_grid": sweep.t_grid.tolist(),
            "deviation": sweep.deviation.tolist(),
            "exponent": sweep.exponent,
            "monotone": sweep.monotone(),
            "constants": sweep.constants,
        }
    out = cfg.output_dir
    return [_write_csv(out / "lan_sweep.csv", LAN_COLUMNS, rows),
            _write_json(out / "lan_summary.json",
                        {"model": cfg.model_spec, "theta0": cfg.theta0, "sweeps": summary})]


def cmd_simulate(cfg: RunConfig, jobs: int = 1) -> list[Path]:
    b = simulate_block(cfg)
    t, u, channel = b["t_final"], b["u"], b["channel"]
    ctx = fisher_context(cfg.model, cfg.theta0, rank_tol=cfg.rank_tol, gap_tol=cfg.gap_tol)
    if b["scheme"] == "jump":
        coef = counting_coefficients(cfg.model, cfg.theta0, channel, ctx)
        mu, V, info, centering = coef.mu_c, coef.V_c, coef.I_c, coef.rate
    else:
        coef = homodyne_coefficients(cfg.model, cfg.theta0, b["phi"], channel, ctx)
        mu, V, info, centering = coef.mu_h, coef.V_h, coef.I_h, coef.drift
    theta_true = cfg.theta0 + u / np.sqrt(t)
    tcfg = TrajectoryConfig(t_final=t, dt=b["dt"], seed=cfg.seed, n_traj=b["n_traj"],
                            scheme=b["scheme"], phi=b["phi"], channel=channel, centering=centering)
    point = evaluate(cfg.model, theta_true)
    sim = simulate_counting if b["scheme"] == "jump" else simulate_homodyne
    records = sim(point, tcfg, n_jobs=jobs)

    warnings = []
    if len(records) >= 500:
        empirical = empirical_lan_check(records, mu, V, u, t)
    else:
        empirical = None
        warnings.append("empirical check skipped: fewer than 500 trajectories")
    try:
        est = plug_in_estimator(records, mu, cfg.theta0, t, theta_true)
        estimator = {k: v for k, v in est.items() if k != "theta_hats"}
    except DegenerateMean as exc:
        estimator = None
        warnings.append(f"DegenerateMean: {exc}")

    summary = {
        "model": cfg.model_spec,
        "theta0": cfg.theta0,
        "theta_true": theta_true,
        "u": u,
        "scheme": b["scheme"],
        "phi": b["phi"] if b["scheme"] == "diffusive" else None,
        "channel": channel,
        "t_final": t,
        "dt": tcfg.step,
        "n_traj": b["n_traj"],
        "seed": cfg.seed,
        "theory": {"mu": mu, "V": V, "I": info, "I_inv": (1 / info) if info > 0 else None,
                   "centering": centering},
        "empirical": empirical,
        "estimator": estimator,
        "warnings": warnings,
    }
    out = cfg.output_dir
    written = [_write_json(out / "simulate_summary.json", summary)]
    if b["dump"]:
        rows = ([r.traj_id, r.n_counts if b["scheme"] == "jump" else r.raw, r.y_centered]
                for r in records)
        written.append(_write_csv(out / "trajectories.csv", TRAJ_COLUMNS, rows))
    return written


def _homodyne_rows(jobs: int):
    phi_rows, theta_rows = [], []
    abs_z = HOMODYNE_RATIO * HOMODYNE_THETA0
    for arg in HOMODYNE_ARGS:
        z = abs_z * np.exp(1j * arg)
        model = two_level_model(z)
        ctx = fisher_context(model, HOMODYNE_THETA0)
        F = qfi(model, HOMODYNE_THETA0, ctx).F
        for phi in HOMODYNE_PHI:
            h = homodyne_coefficients(model, HOMODYNE_THETA0, phi, 0, ctx)
            o = two_level_oracles(z, HOMODYNE_THETA0, phi)
            phi_rows.append([arg, abs_z, HOMODYNE_THETA0, phi, h.I_h, h.mu_h, h.V_h, F, o.I_h, o.I_h_exact])
    for r in HOMODYNE_Z_ABS:
        model = two_level_model(r)
        for th in HOMODYNE_THETA_GRID:
            ctx = fisher_context(model, th)
            F = qfi(model, th, ctx).F
            h = homodyne_coefficients(model, th, 0.0, 0, ctx)
            o = two_level_oracles(r, th, 0.0)
            theta_rows.append([0.0, r, th, 0.0, h.I_h, h.mu_h, h.V_h, F, o.I_h, o.I_h_exact])
    return phi_rows, theta_rows


def _maser_row(phi: float):
    model = atom_maser_model(MASER_N_EX, MASER_NU, MASER_CUTOFF)
    ctx = fisher_context(model, phi)
    F = qfi(model, phi, ctx).F
    ground = counting_coefficients(model, phi, 0, ctx)
    excited = counting_coefficients(model, phi, 1, ctx)
    photons = float(np.arange(model.dim) @ np.diag(ctx.analysis.rho_ss).real)
    oracle = maser_oracles(MASER_N_EX, MASER_NU, phi, MASER_CUTOFF)
    return [phi, F, ground.I_c, excited.I_c, ground.rate, excited.rate, ground.mu_c,
            excited.mu_c, photons, oracle.F]


def cmd_figdata(cfg: RunConfig, jobs: int = 1) -> list[Path]:
    preset = figdata_block(cfg)["preset"]
    out = cfg.output_dir
    written = []
    homodyne_header = ["arg_z", "abs_z", "theta0", "phi", "I_h", "mu_h", "V_h", "F",
                   "oracle_I_h", "oracle_I_h_exact"]
    if preset in ("homodyne", "all"):
        phi_rows, theta_rows = _homodyne_rows(jobs)
        written.append(_write_csv(out / "homodyne_vs_phi.csv", homodyne_header, phi_rows))
        written.append(_write_csv(out / "homodyne_vs_theta0.csv", homodyne_header, theta_rows))
    if preset in ("maser", "all"):
        if jobs == 1:
            rows = [_maser_row(float(p)) for p in MASER_PHI]
        else:
            rows = Parallel(n_jobs=jobs)(delayed(_maser_row)(float(p)) for p in MASER_PHI)
        written.append(_write_csv(out / "maser_counting.csv",
                                  ["phi", "F", "I_c_ground", "I_c_excited", "rate_ground",
                                   "rate_excited", "mu_c_ground", "mu_c_excited",
                                   "mean_photons", "oracle_F"], rows))
    return written


def cmd_validate(cfg: RunConfig, jobs: int = 1) -> list[Path]:
    ctx = fisher_context(cfg.model, cfg.theta0, rank_tol=cfg.rank_tol, gap_tol=cfg.gap_tol)
    a = ctx.analysis
    report = {"model": cfg.model_spec, "theta0": cfg.theta0, "irreducible": True,
              "gap": a.gap, "min_eig": a.min_eig, "rho_ss": _matrix_pairs(a.rho_ss)}
    return [_write_json(cfg.output_dir / "validate_report.json", report)]


COMMANDS = {"fisher": cmd_fisher, "lan": cmd_lan, "simulate": cmd_simulate,
            "figdata": cmd_figdata, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="JSON run configuration")
        p.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes")
        p.add_argument("--seed", type=int, default=None, metavar="N", help="override config seed")
        p.add_argument("--out", metavar="DIR", default=None, help="override output directory")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ValidationError("--jobs must be at least 1")
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ValidationError("--seed must be non-negative")
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, output_dir=Path(args.out))
        written = COMMANDS[args.command](cfg, jobs=args.jobs)
    except QlanError as exc:
        print(f"qlan {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
