"""Experiment orchestration: specs, multi-seed runs, CSV traces and summaries.

Seeding: repetition ``k`` of an experiment with base seed ``s`` uses seed
``s + k``.  Generated instances draw from ``default_rng(s + k)`` and the
solver's initial point from ``default_rng([1, s + k])``, so the two streams
never overlap and every run can be reproduced on its own.
"""
from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from . import solver as S
from .manifolds import Stiefel
from .metrics import TRACE_COLUMNS
from .penalty import make_penalized
from .problems import QuadraticInstance, generate_quadratic, make_problem, practical_L

PRESETS = ("practical", "mgda", "pl", "concave", "tikhonov", "rgda")
PROBLEM_KINDS = ("ncmc", "ncsc", "file")
SUMMARY_FORMAT = "smgda-summary"

_CONFIG_FIELDS = {f.name for f in fields(S.SolverConfig)}
_PRESET_EXTRA = {
    "pl": {"mu", "zeta", "alpha"},
    "concave": {"b"},
    "tikhonov": {"eps"},
    "rgda": set(),
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    m: int = 50
    n: int = 50
    L: float = 5.0
    mu_y: float = 1.0
    path: Optional[str] = None

    def instance(self, seed: int) -> QuadraticInstance:
        if self.kind == "file":
            return QuadraticInstance.load(self.path)
        mu = self.mu_y if self.kind == "ncsc" else 0.0
        return generate_quadratic(self.m, self.n, self.L, mu, seed=seed)


@dataclass(frozen=True)
class SolverSpec:
    name: str
    preset: str = "practical"
    max_iters: int = 20000
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentSpec:
    problem: ProblemSpec
    solvers: tuple
    repetitions: int = 1
    seed: int = 0
    record_every: int = 100
    tol: float = 0.0
    output_dir: str = "runs"

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if self.tol < 0:
            raise ConfigError("tol must be nonnegative")
        names = [s.name for s in self.solvers]
        if not names:
            raise ConfigError("at least one solver is required")
        if len(set(names)) != len(names):
            raise ConfigError("solver names must be unique")

    def seeds(self) -> list[int]:
        return [self.seed + k for k in range(self.repetitions)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["solvers"] = [asdict(s) for s in self.solvers]
        return d


def _problem_from(d: Any) -> ProblemSpec:
    if not isinstance(d, dict):
        raise ConfigError("'problem' must be a mapping")
    d = dict(d)
    kind = str(d.pop("kind", "")).lower()
    if kind not in PROBLEM_KINDS:
        raise ConfigError(f"problem.kind must be one of {PROBLEM_KINDS}")
    unknown = set(d) - {"m", "n", "L", "mu_y", "path"}
    if unknown:
        raise ConfigError(f"unknown problem keys: {sorted(unknown)}")
    try:
        spec = ProblemSpec(kind=kind, m=int(d.get("m", 50)), n=int(d.get("n", 50)),
                           L=float(d.get("L", 5.0)), mu_y=float(d.get("mu_y", 1.0)),
                           path=d.get("path"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad problem value: {exc}") from None
    if kind == "file" and not spec.path:
        raise ConfigError("problem.path is required for kind 'file'")
    if kind != "file" and (spec.m < 1 or spec.n < 1 or spec.L <= 0):
        raise ConfigError("problem needs m, n >= 1 and L > 0")
    if kind == "ncsc" and spec.mu_y <= 0:
        raise ConfigError("ncsc needs mu_y > 0")
    return spec


def _solver_from(d: Any) -> SolverSpec:
    if not isinstance(d, dict) or "name" not in d:
        raise ConfigError("each solver needs a 'name'")
    d = dict(d)
    name = str(d.pop("name"))
    preset = str(d.pop("preset", "practical"))
    if preset not in PRESETS:
        raise ConfigError(f"solver {name}: preset must be one of {PRESETS}")
    max_iters = d.pop("max_iters", 20000)
    if not isinstance(max_iters, int) or max_iters < 1:
        raise ConfigError(f"solver {name}: max_iters must be a positive integer")
    allowed = (_CONFIG_FIELDS - {"max_iters", "record_every", "tol", "seed", "label"}
               | _PRESET_EXTRA.get(preset, set()))
    if preset == "rgda":
        allowed = {"tau1", "tau2"}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"solver {name}: unknown keys {sorted(unknown)}")
    return SolverSpec(name=name, preset=preset, max_iters=max_iters, params=d)


def spec_from_dict(d: dict, overrides: Optional[dict] = None) -> ExperimentSpec:
    """Validate a parsed config; ``overrides`` (from CLI flags) win over file values."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping")
    d = {**d, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    unknown = set(d) - {"problem", "solvers", "repetitions", "seed", "record_every",
                        "tol", "output_dir"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    solvers = d.get("solvers") or [{"name": "smgda"}]
    if not isinstance(solvers, list):
        raise ConfigError("'solvers' must be a list")
    try:
        return ExperimentSpec(
            problem=_problem_from(d.get("problem")),
            solvers=tuple(_solver_from(s) for s in solvers),
            repetitions=int(d.get("repetitions", 1)),
            seed=int(d.get("seed", 0)),
            record_every=int(d.get("record_every", 100)),
            tol=float(d.get("tol", 0.0)),
            output_dir=str(d.get("output_dir", "runs")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_spec(path, overrides: Optional[dict] = None) -> ExperimentSpec:
    try:
        d = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return spec_from_dict(d or {}, overrides)


# -- single runs ---------------------------------------------------------------

def build_config(sv: SolverSpec, inst: QuadraticInstance, pp, seed: int,
                 record_every: int, tol: float) -> S.SolverConfig:
    """Solver config for one (solver, instance) pair."""
    params = dict(sv.params)
    common = dict(max_iters=sv.max_iters, record_every=record_every, tol=tol, seed=seed,
                  label=sv.name)
    L = practical_L(inst)
    if sv.preset == "practical":
        return S.practical_config(L, **params, **common)
    if sv.preset == "mgda":
        return S.mgda_config(L, **params, **common)
    if sv.preset == "tikhonov":
        eps = params.pop("eps", 1e-2)
        return S.tikhonov_config(S.practical_config(L, **params, **common), eps)
    if sv.preset == "pl":
        if pp.lconst is None:
            raise ConfigError("pl preset needs the penalized Lipschitz constants")
        mu = params.pop("mu", inst.mu_y)
        zeta = params.pop("zeta", 0.0)
        alpha = params.pop("alpha", 1.0 / 4612)
        return S.pl_config(pp.lconst.l, mu, zeta=zeta, alpha=alpha, **params, **common)
    if sv.preset == "concave":
        if pp.lconst is None:
            raise ConfigError("concave preset needs the penalized Lipschitz constants")
        b = params.pop("b", None)
        return S.concave_config(pp.lconst.l, pp.lconst.l_yy, b=b, **params, **common)
    raise ConfigError(f"no config for preset {sv.preset}")


def run_single(spec: ExperimentSpec, solver_index: int, rep: int) -> dict:
    """Execute one (solver, repetition) pair; returns plain data safe to pickle.

    Invalid solver parameters surface as ``ConfigError``.
    """
    sv = spec.solvers[solver_index]
    seed = spec.seed + rep
    inst = spec.problem.instance(seed)
    problem = make_problem(inst)
    kit = Stiefel(inst.m, 1)
    try:
        pp = make_penalized(problem, kit, float(sv.params.get("rho", 10.0)),
                            float(sv.params.get("C", 1000.0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver {sv.name}: {exc}") from None
    out = {"solver": sv.name, "rep": rep, "seed": seed, "F_star": inst.F_star}
    if sv.preset == "rgda":
        tau1, tau2 = S.rgda_steps(practical_L(inst), inst.mu_y)
        tau1 = float(sv.params.get("tau1", tau1))
        tau2 = float(sv.params.get("tau2", tau2))
        state = S.initial_state(pp, S.practical_config(1.0, seed=seed))
        res = S.run_rgda(problem, kit, tau1, tau2, sv.max_iters, state, spec.record_every)
        out.update(rows=[r.as_tuple() for r in res.trace], status=S.STATUS_DONE,
                   iters=res.iters, config={"tau1": tau1, "tau2": tau2, "preset": "rgda"})
        return out
    try:
        cfg = build_config(sv, inst, pp, seed, spec.record_every, spec.tol)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver {sv.name}: {exc}") from None
    res = S.run(pp, cfg, raise_on_failure=False)
    cfg_d = asdict(cfg)
    cfg_d["preset"] = sv.preset
    out.update(rows=[r.as_tuple() for r in res.trace], status=res.status, iters=res.iters,
               config=cfg_d, backend=res.backend)
    return out


def _run_task(args):
    spec, i, rep = args
    return run_single(spec, i, rep)


# -- files ---------------------------------------------------------------------

def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_trace(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)  # default dialect: comma, CRLF, minimal quoting
        w.writerow(TRACE_COLUMNS)
        for row in rows:
            w.writerow([format_value(v) for v in row])


def read_trace(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected header")
        data = [[float(v) for v in row] for row in r]
    arr = np.array(data, dtype=float).reshape(-1, len(TRACE_COLUMNS))
    return {c: arr[:, i] for i, c in enumerate(TRACE_COLUMNS)}


def trace_path(out_dir, solver: str, rep: int, seed: int) -> Path:
    return Path(out_dir) / solver / f"rep{rep:03d}_seed{seed}.csv"


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, np.generic):
        return _json_safe(v.item())
    return v


def aggregate(traces: list[dict[str, np.ndarray]]) -> dict:
    """Per-iteration mean and population std of every metric over ``traces``.

    Traces that stopped early only contribute to the iterations they recorded.
    """
    by_t = defaultdict(list)
    for tr in traces:
        for i, t in enumerate(tr["t"]):
            by_t[int(t)].append((tr, i))
    ts = sorted(by_t)
    metrics = {}
    for c in TRACE_COLUMNS[1:]:
        mean, std = [], []
        for t in ts:
            vals = np.array([tr[c][i] for tr, i in by_t[t]], dtype=float)
            with np.errstate(invalid="ignore", over="ignore"):
                mean.append(float(np.mean(vals)))
                std.append(float(np.std(vals)))
        metrics[c] = {"mean": mean, "std": std}
    return {"t": ts, "count": [len(by_t[t]) for t in ts], "metrics": metrics}


def run_experiment(spec: ExperimentSpec, out_dir=None, jobs: int = 1) -> tuple[dict, list]:
    """Run every (solver, repetition); write traces and ``summary.json``.

    Returns the summary and the list of runs that hit a non-finite iterate.
    Results are reduced in (solver, repetition) order so the output does not
    depend on ``jobs``.
    """
    out_dir = Path(out_dir or spec.output_dir)
    tasks = [(spec, i, rep) for i in range(len(spec.solvers)) for rep in range(spec.repetitions)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    results.sort(key=lambda r: (r["solver"], r["rep"]))

    failures = []
    per_solver = defaultdict(list)
    for r in results:
        path = trace_path(out_dir, r["solver"], r["rep"], r["seed"])
        write_trace(path, r["rows"])
        if r["status"] == S.STATUS_NONFINITE:
            failures.append(str(path))
        per_solver[r["solver"]].append(r)

    summary = {"format": SUMMARY_FORMAT, "version": 1, "spec": spec.to_dict(),
               "seeds": spec.seeds(), "solvers": {}}
    for name, runs in per_solver.items():
        traces = [read_trace(trace_path(out_dir, name, r["rep"], r["seed"])) for r in runs]
        entry = aggregate(traces)
        entry.update(
            config=runs[0]["config"], max_iters=next(s.max_iters for s in spec.solvers
                                                     if s.name == name),
            iters=[r["iters"] for r in runs], status=[r["status"] for r in runs],
            F_star=[r["F_star"] for r in runs],
        )
        summary["solvers"][name] = entry
    (out_dir / "summary.json").write_text(json.dumps(_json_safe(summary), indent=1) + "\n")
    return summary, failures


# -- reporting -------------------------------------------------------------------

REPORT_METRICS = ("rel_grad", "c_norm", "manifold_residual", "dual_residual", "primal_gap")


def collect_traces(run_dir) -> dict[str, list[dict[str, np.ndarray]]]:
    run_dir = Path(run_dir)
    out = {}
    for sub in sorted(p for p in run_dir.iterdir() if p.is_dir()):
        files = sorted(sub.glob("rep*.csv"))
        if files:
            out[sub.name] = [read_trace(f) for f in files]
    return out


def report(run_dirs, out_csv=None) -> list[dict]:
    """Comparison table from the traces of one or more run directories.

    Per-iteration means are recomputed from the CSV files.  With ``out_csv``
    the full per-iteration table is written; the returned rows hold the
    final recorded iteration of each solver.
    """
    long_rows, final = [], []
    for d in run_dirs:
        for name, traces in collect_traces(d).items():
            agg = aggregate(traces)
            for k, t in enumerate(agg["t"]):
                row = {"source": str(d), "solver": name, "t": t, "runs": agg["count"][k]}
                for c in REPORT_METRICS:
                    row[f"{c}_mean"] = agg["metrics"][c]["mean"][k]
                    row[f"{c}_std"] = agg["metrics"][c]["std"][k]
                long_rows.append(row)
            if agg["t"]:
                final.append(long_rows[-1])
    if out_csv is not None:
        cols = ["source", "solver", "t", "runs"] + [f"{c}_{s}" for c in REPORT_METRICS
                                                    for s in ("mean", "std")]
        Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
        with Path(out_csv).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in long_rows:
                w.writerow([row[c] if c in ("source", "solver") else format_value(row[c])
                            for c in cols])
    return final


def format_report(final: list[dict]) -> str:
    head = f"{'solver':<16} {'t':>8} " + " ".join(f"{c:>24}" for c in REPORT_METRICS)
    lines = [head]
    for row in final:
        cells = " ".join(f"{row[c + '_mean']:>11.3e} ± {row[c + '_std']:<10.2e}"
                         for c in REPORT_METRICS)
        lines.append(f"{row['solver']:<16} {row['t']:>8} {cells}")
    return "\n".join(lines)
