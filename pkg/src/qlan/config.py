"""Run configuration: JSON parsing and validation.

Example::

    {
      "model": {"type": "two_level", "z_re": 1.0, "z_im": 0.0},
      "theta0": 2.0,
      "seed": 1234,
      "output_dir": "out",
      "tolerances": {"rank_tol": 1e-10, "gap_tol": 1e-10},
      "fisher": {"theta0_grid": [0.5, 1, 2], "phi_grid": [0.0], "channel": 0},
      "lan": {"kinds": ["overlap", "counting", "homodyne"], "u": 1.0,
              "t_grid": [100, 1000, 10000], "arg_grid": [-2, -1, 0, 1, 2]},
      "simulate": {"scheme": "diffusive", "t_final": 200, "dt": 0.005,
                   "n_traj": 2000, "u": 1.0, "phi": 0.0, "channel": 0, "dump": true},
      "figdata": {"preset": "all"}
    }

Other model blocks::

    {"type": "atom_maser", "n_ex": 16, "nu": 0.1, "cutoff": 60}
    {"type": "custom", "dim": 2, "H": [[...]], "L": [[[...]]],
     "dH": ..., "dL": ..., "ddH": ..., "ddL": ..., "theta_ref": 0.0}

Complex entries are ``[re, im]`` pairs or plain reals; matrices are
row-major nested lists.  Custom models are the second-order Taylor
polynomial about ``theta_ref`` (default ``theta0``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .errors import ValidationError
from .model import ParamModel, atom_maser_model, custom_model, two_level_model

DEFAULT_ARG_GRIDS = {
    "overlap": [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0],
    "counting": [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0],
    "homodyne": [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0],
}


def _finite(value, what: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{what} must be a number, got {value!r}") from None
    if not math.isfinite(x):
        raise ValidationError(f"{what} must be finite")
    return x


def _grid(values, what: str) -> list[float]:
    if not isinstance(values, (list, tuple)) or len(values) == 0:
        raise ValidationError(f"{what} must be a non-empty list")
    return [_finite(v, f"{what} entry") for v in values]


def _int(value, what: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ValidationError(f"{what} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{what} must be at least {minimum}")
    return int(value)


def _complex(entry, what: str) -> complex:
    if isinstance(entry, (list, tuple)):
        if len(entry) != 2:
            raise ValidationError(f"{what}: complex entries are [re, im] pairs")
        return complex(_finite(entry[0], what), _finite(entry[1], what))
    return complex(_finite(entry, what))


def parse_matrix(rows, dim: int, what: str) -> np.ndarray:
    if not isinstance(rows, (list, tuple)) or len(rows) != dim:
        raise ValidationError(f"{what} must have {dim} rows")
    out = np.empty((dim, dim), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, (list, tuple)) or len(row) != dim:
            raise ValidationError(f"{what} row {i} must have {dim} entries")
        for j, entry in enumerate(row):
            out[i, j] = _complex(entry, f"{what}[{i}][{j}]")
    return out


def _matrix_list(values, dim: int, what: str) -> list[np.ndarray]:
    if not isinstance(values, (list, tuple)) or len(values) == 0:
        raise ValidationError(f"{what} must be a non-empty list of matrices")
    return [parse_matrix(m, dim, f"{what}[{k}]") for k, m in enumerate(values)]


def build_model(spec: dict, theta0: float) -> ParamModel:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ValidationError("model block needs a 'type'")
    kind = spec["type"]
    if kind == "two_level":
        z = complex(_finite(spec.get("z_re", 1.0), "z_re"), _finite(spec.get("z_im", 0.0), "z_im"))
        return two_level_model(z)
    if kind == "atom_maser":
        return atom_maser_model(_finite(spec.get("n_ex", 16.0), "n_ex"),
                                _finite(spec.get("nu", 0.1), "nu"),
                                _int(spec.get("cutoff", 60), "cutoff", minimum=2))
    if kind == "custom":
        dim = _int(spec.get("dim"), "dim", minimum=1)
        H = parse_matrix(spec.get("H"), dim, "H")
        L = _matrix_list(spec.get("L"), dim, "L")
        dH = parse_matrix(spec["dH"], dim, "dH") if "dH" in spec else None
        dL = _matrix_list(spec["dL"], dim, "dL") if "dL" in spec else None
        ddH = parse_matrix(spec["ddH"], dim, "ddH") if "ddH" in spec else None
        ddL = _matrix_list(spec["ddL"], dim, "ddL") if "ddL" in spec else None
        ref = _finite(spec.get("theta_ref", theta0), "theta_ref")
        return custom_model(H, L, dH=dH, dL=dL, ddH=ddH, ddL=ddL, theta_ref=ref)
    raise ValidationError(f"unknown model type {kind!r}")


@dataclass(frozen=True)
class RunConfig:
    model_spec: dict
    model: ParamModel
    theta0: float
    seed: int = 0
    output_dir: Path = Path("out")
    rank_tol: float = 1e-10
    gap_tol: float = 1e-10
    fisher: dict = field(default_factory=dict)
    lan: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)
    figdata: dict = field(default_factory=dict)


def parse_config(data: Any) -> RunConfig:
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    theta0 = _finite(data.get("theta0", 2.0), "theta0")
    model_spec = data.get("model", {"type": "two_level"})
    model = build_model(model_spec, theta0)
    tol = data.get("tolerances", {}) or {}
    rank_tol = _finite(tol.get("rank_tol", 1e-10), "rank_tol")
    gap_tol = _finite(tol.get("gap_tol", 1e-10), "gap_tol")
    if rank_tol < 0 or gap_tol <= 0:
        raise ValidationError("tolerances must be positive")
    for block in ("fisher", "lan", "simulate", "figdata"):
        if block in data and not isinstance(data[block], dict):
            raise ValidationError(f"'{block}' must be an object")
    return RunConfig(
        model_spec=model_spec, model=model, theta0=theta0,
        seed=_int(data.get("seed", 0), "seed"),
        output_dir=Path(data.get("output_dir", "out")),
        rank_tol=rank_tol, gap_tol=gap_tol,
        fisher=dict(data.get("fisher", {})), lan=dict(data.get("lan", {})),
        simulate=dict(data.get("simulate", {})), figdata=dict(data.get("figdata", {})),
    )


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)


# block accessors with defaults and validation ------------------------------

def fisher_block(cfg: RunConfig) -> dict:
    b = cfg.fisher
    return {
        "theta0_grid": _grid(b.get("theta0_grid", [cfg.theta0]), "fisher.theta0_grid"),
        "phi_grid": _grid(b.get("phi_grid", [0.0]), "fisher.phi_grid"),
        "channel": _int(b.get("channel", 0), "fisher.channel"),
    }


def lan_block(cfg: RunConfig) -> dict:
    b = cfg.lan
    kinds = b.get("kinds", ["overlap", "counting", "homodyne"])
    if not isinstance(kinds, list) or not kinds:
        raise ValidationError("lan.kinds must be a non-empty list")
    for k in kinds:
        if k not in DEFAULT_ARG_GRIDS:
            raise ValidationError(f"unknown lan kind {k!r}")
    grids = {}
    per_kind = b.get("arg_grids", {}) or {}
    for k in kinds:
        source = per_kind.get(k, b.get("arg_grid", DEFAULT_ARG_GRIDS[k]))
        grids[k] = _grid(source, f"lan arg grid for {k}")
    t_grid = _grid(b.get("t_grid", [1e2, 1e3, 1e4]), "lan.t_grid")
    return {"kinds": kinds, "u": _finite(b.get("u", 1.0), "lan.u"), "t_grid": t_grid,
            "arg_grids": grids, "phi": _finite(b.get("phi", 0.0), "lan.phi"),
            "channel": _int(b.get("channel", 0), "lan.channel")}


def simulate_block(cfg: RunConfig) -> dict:
    b = cfg.simulate
    scheme = b.get("scheme", "diffusive")
    if scheme not in ("jump", "diffusive"):
        raise ValidationError("simulate.scheme must be 'jump' or 'diffusive'")
    n_traj = _int(b.get("n_traj", 2000), "simulate.n_traj")
    if n_traj < 1:
        raise ValidationError("simulate.n_traj must be positive")
    t_final = _finite(b.get("t_final", 200.0), "simulate.t_final")
    dt = _finite(b.get("dt", 0.005), "simulate.dt")
    if t_final <= 0 or dt <= 0 or dt > t_final:
        raise ValidationError("simulate needs 0 < dt <= t_final")
    return {"scheme": scheme, "t_final": t_final, "dt": dt, "n_traj": n_traj,
            "u": _finite(b.get("u", 0.0), "simulate.u"),
            "phi": _finite(b.get("phi", 0.0), "simulate.phi"),
            "channel": _int(b.get("channel", 0), "simulate.channel"),
            "dump": bool(b.get("dump", True))}


def figdata_block(cfg: RunConfig) -> dict:
    preset = cfg.figdata.get("preset", "all")
    if preset not in ("homodyne", "maser", "all"):
        raise ValidationError(f"unknown figdata preset {preset!r}; expected homodyne, maser or all")
    return {"preset": preset}
