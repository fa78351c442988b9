"""Batch experiment runner.

A run reads a JSON config, resolves every ``"auto"``/preset field to a number,
executes trials in fixed-size chunks (optionally on a process pool), and writes
``records.csv``, ``summary.json`` and ``manifest.json`` into the output
directory.  Each trial draws only from streams keyed by ``(seed, trial, ...)``
and rows are sorted by task key before writing, so the CSV does not depend on
the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from . import rng as _rng
from .core import MARGIN_BITS, EnergyLevel
from .errors import ConfigError
from .instances import sample_instance
from .landscape import (
    ObstructionParams,
    aggregate,
    eps_preset,
    eta_for,
    implied_constant,
    obstruction_log2_leading,
    obstruction_trial,
    repel_trial,
    rounding_hardness_trial,
)
from .lowdeg import STABILITY_CHUNK, JuntaAlgorithm, stability_bound, stability_samples
from .solvers import get_solver

TASK_CHUNK = 32

CSV_COLUMNS = {
    "obstruction": ["trial", "s_diff", "s_solve_g", "s_solve_gp", "s_stable", "s_cond", "nearest_flips", "elapsed_ms"],
    "repel": ["trial", "pair_within_k"],
    "stability": ["trial", "sq_dist", "inner", "norm_sq"],
    "rounding": ["trial", "tilde_in_s", "hat_in_s", "star_in_s", "resampled"],
    "scaling": ["n", "trial", "disc_q", "energy"],
}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: Literal["obstruction", "repel", "stability", "rounding", "scaling"]
    n: Union[int, list[int]]
    scale_bits: int = Field(128, ge=16)
    dist: Literal["gaussian", "uniform_pm1"] = "gaussian"
    energy: Optional[int] = Field(None, ge=1)
    eps: Union[Literal["ldp", "lcd"], float, None] = None
    eta: Union[Literal["auto"], float] = "auto"
    mode: Literal["correlated", "resampled"] = "resampled"
    solver: str = "bf"
    trials: int = Field(ge=1)
    seed: int = Field(0, ge=0, le=_rng.MASK64)
    degree: int = Field(1, ge=1)
    k: int = Field(2, ge=1)
    radius: float = Field(2.0, ge=0)
    junta: Optional[dict] = None
    record_timing: bool = False

    @field_validator("n")
    @classmethod
    def _n_positive(cls, v):
        for m in v if isinstance(v, list) else [v]:
            if m < 1:
                raise ValueError("every n must be >= 1")
        if isinstance(v, list) and not v:
            raise ValueError("n list must be nonempty")
        return v

    @field_validator("solver")
    @classmethod
    def _solver_known(cls, v):
        get_solver(v)
        return v

    @field_validator("eps")
    @classmethod
    def _eps_range(cls, v):
        if isinstance(v, float) and not 0.0 <= v <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        return v

    @field_validator("eta")
    @classmethod
    def _eta_range(cls, v):
        if isinstance(v, float) and not 0.0 < v < 0.5:
            raise ValueError("eta must lie in (0, 1/2)")
        return v

    @field_validator("junta")
    @classmethod
    def _junta_parses(cls, v):
        if v is not None:
            JuntaAlgorithm.from_dict(v)
        return v

    @model_validator(mode="after")
    def _per_experiment(self):
        exp = self.experiment
        if exp == "scaling":
            if not isinstance(self.n, list):
                self.n = [self.n]
        elif isinstance(self.n, list):
            raise ValueError(f"n: {exp} takes a single integer")
        if exp in ("obstruction", "repel", "rounding"):
            if self.energy is None:
                raise ValueError(f"energy: required for {exp}")
            if self.energy + MARGIN_BITS > self.scale_bits:
                raise ValueError(f"energy: needs scale_bits >= energy + {MARGIN_BITS}")
        if exp in ("obstruction", "stability") and self.eps is None:
            raise ValueError(f"eps: required for {exp}")
        if exp == "stability" and isinstance(self.eps, str):
            raise ValueError("eps: stability needs a number")
        if exp == "obstruction" and self.energy > self.n:
            raise ValueError("energy: obstruction needs energy <= n for eta selection")
        if self.junta is not None and JuntaAlgorithm.from_dict(self.junta).n != self.n:
            raise ValueError("junta: output dimension must equal n")
        return self


def validate_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "config"
            msgs.append(f"{loc}: {err['msg']}")
        raise ConfigError("; ".join(msgs)) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def resolve(cfg: ExperimentConfig) -> dict:
    """Config with every preset replaced by its numeric value."""
    d = cfg.model_dump()
    exp = cfg.experiment
    if exp == "obstruction":
        d["eps"] = eps_preset(cfg.eps, cfg.energy, cfg.n, cfg.degree)
        if not 0.0 <= d["eps"] <= 1.0:
            raise ConfigError(f"eps: preset {cfg.eps!r} resolves outside [0, 1]")
        d["eta"] = eta_for(cfg.energy, cfg.n) if cfg.eta == "auto" else float(cfg.eta)
        try:
            _obstruction_params(d)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif exp == "stability":
        d["eps"] = float(cfg.eps)
    if exp in ("stability", "rounding") and d["junta"] is None:
        d["junta"] = json.loads(JuntaAlgorithm.sliding(cfg.n, cfg.degree).to_json())
    return d


# --- trial workers (module level so they pickle) ----------------------------------


def _bit(v: bool) -> int:
    return 1 if v else 0


def _obstruction_rows(cfg: dict, keys: list) -> list:
    p = _obstruction_params(cfg)
    rows = []
    for t in keys:
        rec = obstruction_trial(p, t)
        ms = format(rec.elapsed_ms, ".3f") if cfg["record_timing"] else ""
        rows.append((t, _bit(rec.s_diff), _bit(rec.s_solve_g), _bit(rec.s_solve_gp), _bit(rec.s_stable),
                     _bit(rec.s_cond), "" if rec.nearest_flips is None else rec.nearest_flips, ms))
    return rows


def _obstruction_params(cfg: dict) -> ObstructionParams:
    return ObstructionParams(cfg["n"], cfg["scale_bits"], cfg["dist"], cfg["energy"], cfg["eps"], cfg["eta"],
                             cfg["mode"], cfg["solver"], cfg["trials"], cfg["seed"])


def _repel_rows(cfg: dict, keys: list) -> list:
    lvl = EnergyLevel(cfg["energy"])
    rows = []
    for t in keys:
        g = sample_instance(cfg["n"], cfg["dist"], cfg["scale_bits"], _rng.derive_seed(cfg["seed"], t, "g"))
        rows.append((t, _bit(repel_trial(g, lvl, cfg["k"]))))
    return rows


def _stability_rows(cfg: dict, keys: list) -> list:
    A = JuntaAlgorithm.from_dict(cfg["junta"])
    sq, inn, nrm = stability_samples(A, cfg["eps"], cfg["mode"], cfg["trials"], cfg["seed"], chunks=keys)
    first = keys[0] * STABILITY_CHUNK if keys else 0
    # consecutive chunks only; callers hand out contiguous runs
    return [(first + i, repr(float(a)), repr(float(b)), repr(float(c))) for i, (a, b, c) in enumerate(zip(sq, inn, nrm))]


def _rounding_rows(cfg: dict, keys: list) -> list:
    A = JuntaAlgorithm.from_dict(cfg["junta"])
    lvl = EnergyLevel(cfg["energy"])
    rows = []
    for t in keys:
        g = sample_instance(cfg["n"], cfg["dist"], cfg["scale_bits"], _rng.derive_seed(cfg["seed"], t, "g"))
        rec = rounding_hardness_trial(A, g, lvl, cfg["radius"], _rng.derive_seed(cfg["seed"], t, "round"), t)
        rows.append((t, _bit(rec.tilde_in_s), _bit(rec.hat_in_s), _bit(rec.star_in_s), rec.resampled))
    return rows


def _scaling_rows(cfg: dict, keys: list) -> list:
    solve = get_solver(cfg["solver"])
    rows = []
    for n, t in keys:
        g = sample_instance(n, cfg["dist"], cfg["scale_bits"], _rng.derive_seed(cfg["seed"], n, t, "g"))
        res = solve(g)
        e = "inf" if math.isinf(res.energy) else repr(res.energy)
        rows.append((n, t, format(res.disc_q, "x"), e))
    return rows


_WORKERS = {
    "obstruction": _obstruction_rows,
    "repel": _repel_rows,
    "stability": _stability_rows,
    "rounding": _rounding_rows,
    "scaling": _scaling_rows,
}


def _tasks(cfg: dict) -> tuple[list, int]:
    exp = cfg["experiment"]
    if exp == "scaling":
        return [(n, t) for n in cfg["n"] for t in range(cfg["trials"])], TASK_CHUNK
    if exp == "stability":
        return list(range(-(-cfg["trials"] // STABILITY_CHUNK))), 1
    return list(range(cfg["trials"])), TASK_CHUNK


def execute(cfg: dict, workers: int = 1) -> list:
    """All CSV rows for a resolved config, in task order."""
    tasks, size = _tasks(cfg)
    chunks = [tasks[i : i + size] for i in range(0, len(tasks), size)]
    fn = _WORKERS[cfg["experiment"]]
    if workers <= 1 or len(chunks) <= 1:
        parts = [fn(cfg, c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, [cfg] * len(chunks), chunks))
    rows = [r for part in parts for r in part]
    if cfg["experiment"] == "scaling":
        rows.sort(key=lambda r: (r[0], r[1]))
    else:
        rows.sort(key=lambda r: r[0])
    return rows


def rows_to_csv(exp: str, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS[exp])
    w.writerows(rows)
    return buf.getvalue()


# --- summaries --------------------------------------------------------------------


class _Row:
    def __init__(self, d: dict):
        self.__dict__.update(d)


def _read_rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summarize(cfg: dict, rows: list[dict]) -> dict:
    """Estimates and measured constants from the CSV rows of a run."""
    return _SUMMARIES[cfg["experiment"]](cfg, rows)


def _flags(rows, names):
    return [_Row({k: (r[k] == "1") for k in names}) for r in rows]


def _obstruction_summary(cfg, rows):
    recs = _flags(rows, ["s_diff", "s_solve_g", "s_solve_gp", "s_stable", "s_cond"])
    out = {
        "p_diff": aggregate(recs, "s_diff").to_json(),
        "p_solve_g": aggregate(recs, "s_solve_g").to_json(),
        "eta": cfg["eta"],
        "eps": cfg["eps"],
        "ball_flips": math.floor(cfg["eta"] * cfg["n"]),
        "note": "conditional probabilities are over solver outputs only, not a max over all x",
    }
    if any(r.s_diff for r in recs):
        cond = aggregate(recs, "not s_cond", "s_diff")
        lead = obstruction_log2_leading(cfg["energy"], cfg["eta"], cfg["n"])
        out["p_not_cond_given_diff"] = cond.to_json()
        out["p_unstable_given_diff"] = aggregate(recs, "not s_stable", "s_diff").to_json()
        out["log2_leading"] = lead
        out["implied_constant"] = implied_constant(cond.point, lead)
        out["implied_constant_hi"] = implied_constant(cond.hi, lead)
    return out


def _repel_summary(cfg, rows):
    recs = _flags(rows, ["pair_within_k"])
    est = aggregate(recs, "pair_within_k")
    scale = cfg["k"] * math.log2(cfg["n"])
    c = implied_constant(est.point, -cfg["energy"]) / scale
    c_hi = implied_constant(est.hi, -cfg["energy"]) / scale
    return {"p_pair_within_k": est.to_json(), "implied_c": c, "implied_c_hi": c_hi, "k": cfg["k"]}


def _stability_summary(cfg, rows):
    sq = np.array([float(r["sq_dist"]) for r in rows])
    inn = np.array([float(r["inner"]) for r in rows])
    nrm = np.array([float(r["norm_sq"]) for r in rows])
    A = JuntaAlgorithm.from_dict(cfg["junta"])
    m = len(rows)

    def ci(a):
        return {"mean": float(np.mean(a)), "sigma": float(np.std(a, ddof=1) / math.sqrt(m)) if m > 1 else None}

    c_norm = float(np.mean(nrm)) / A.n
    out = {
        "trials": m,
        "mean_sq_dist": ci(sq),
        "mean_inner": ci(inn),
        "c_norm": c_norm,
        "bound_14": stability_bound(c_norm, A.degree, cfg["eps"], A.n),
    }
    if A.kind == "sign_product" and cfg["mode"] == "resampled":
        out["analytic_inner"] = sum((1 - cfg["eps"]) ** len(b) for b in A.blocks)
    return out


def _rounding_summary(cfg, rows):
    recs = _flags(rows, ["tilde_in_s", "hat_in_s", "star_in_s"])
    return {
        "p_tilde_in_s": aggregate(recs, "tilde_in_s").to_json(),
        "p_hat_in_s": aggregate(recs, "hat_in_s").to_json(),
        "p_tilde_in_s_hat_not": aggregate(recs, lambda r: r.tilde_in_s and not r.hat_in_s).to_json(),
        "mean_resampled": statistics.fmean(int(r["resampled"]) for r in rows),
    }


def _scaling_summary(cfg, rows):
    per_n = {}
    for r in rows:
        e = float(r["energy"])
        per_n.setdefault(int(r["n"]), []).append(e)
    ns = sorted(per_n)
    med = {n: statistics.median(per_n[n]) for n in ns}
    out = {"median_energy": {str(n): med[n] for n in ns}}
    finite = [n for n in ns if math.isfinite(med[n])]
    if len(finite) >= 2:
        # log2(disc) in g-units is -energy
        slope = float(np.polyfit(finite, [-med[n] for n in finite], 1)[0])
        out["slope_log2_disc_vs_n"] = slope
    return out


_SUMMARIES = {
    "obstruction": _obstruction_summary,
    "repel": _repel_summary,
    "stability": _stability_summary,
    "rounding": _rounding_summary,
    "scaling": _scaling_summary,
}


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    return v


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


# --- entry point --------------------------------------------------------------------


def load_config(raw: dict) -> tuple[dict, dict]:
    """``(submitted config, resolved config)``; a manifest replays its resolved block."""
    if isinstance(raw, dict) and "resolved" in raw and "config" in raw:
        submitted = raw["config"]
        raw = raw["resolved"]
    else:
        submitted = raw
    return submitted, resolve(validate_config(raw))


def run(raw: dict, out_dir, workers: int = 1, seed: int | None = None) -> dict:
    started = datetime.now(timezone.utc).isoformat()
    submitted, _ = load_config(raw)
    base = raw["resolved"] if isinstance(raw, dict) and "resolved" in raw else raw
    if seed is not None:
        base = dict(base, seed=seed)
    _, cfg = load_config(base)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = execute(cfg, workers)
    csv_path = out / "records.csv"
    csv_path.write_text(rows_to_csv(cfg["experiment"], rows))
    summary = summarize(cfg, _read_rows(csv_path))
    (out / "summary.json").write_text(dump_json(summary))
    manifest = {
        "config": submitted,
        "resolved": cfg,
        "artifact_version": __version__,
        "root_seed": cfg["seed"],
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": {"records": "records.csv", "summary": "summary.json"},
    }
    (out / "manifest.json").write_text(dump_json(manifest))
    return {"manifest": manifest, "summary": summary}


def summarize_dir(out_dir) -> dict:
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    return summarize(manifest["resolved"], _read_rows(out / manifest["outputs"]["records"]))
