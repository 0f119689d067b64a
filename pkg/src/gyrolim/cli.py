"""Command line: ``run`` one trajectory, ``sweep`` a table, ``selftest``.

Configuration is one JSON object whose keys are the ``RunConfig`` fields;
command-line flags override values read from ``--config``. A run summary
embeds the full config under "config", so it can be fed back with
``--config summary.json``.

Exit codes: 0 success, 2 config error, 3 solver non-convergence,
4 model domain error.
"""

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from typing import List, Optional

import numpy as np

from . import harness
from .gyrocenter import (BANANA_Y0, DIPOLE_ELECTRIC_Y0, DIPOLE_Y0, TRANSIT_Y0, DipoleField,
                         GyrocenterModel, QuadraticPotential, TokamakField, cylindrical_coords)
from .legendre import build_tableau
from .poisson import ModelDomainError
from .selftest import run_groups
from .solvers import SolverConfig, SolverError, solver_kind

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_DOMAIN = 4

PROBLEM_NAMES = ("dipole", "tokamak_transit", "tokamak_banana", "dipole_electric", "custom")
TABLES = ("energy", "convergence", "spectral", "robustness")

_DEFAULT_Y0 = {
    "dipole": DIPOLE_Y0,
    "tokamak_transit": TRANSIT_Y0,
    "tokamak_banana": BANANA_Y0,
    "dipole_electric": DIPOLE_ELECTRIC_Y0,
}

# per-table defaults, applied before the config file and flags
TABLE_DEFAULTS = {
    "energy": {"problem": "dipole", "h": 0.4, "t_end": 1e3, "s_list": [1, 2, 3, 4, 5],
               "k_list": list(range(1, 10)), "tol": 1e-16, "max_iters": 200},
    "convergence": {"problem": "dipole", "h": 0.4, "t_end": 40.0, "halvings": 4,
                    "methods": [[1, 1, 7], [2, 2, 8], [3, 3, 9], [4, 4, 9], [5, 5, 9]],
                    "tol": 1e-16, "max_iters": 200},
    "spectral": {"problem": "tokamak_transit", "h": 8e3, "t_end": 1e6,
                 "s_list": list(range(1, 17)), "k2": 20, "tol": 1e-16, "max_iters": 500},
    "robustness": {"problem": "dipole_electric", "t_end": 100.0,
                   "methods": [[1, 1, 7], [2, 2, 8], [3, 3, 9], [4, 4, 9], [5, 5, 9]],
                   "solvers": ["fixed_point", "blended"], "tol": 1e-12, "max_iters": 100},
}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass
class RunConfig:
    problem: str = "dipole"
    # field / potential parameters; None means the problem's default
    field: Optional[str] = None          # dipole | tokamak, only for problem "custom"
    M: float = 1e3
    mu: Optional[float] = None
    B0: float = 1.0
    R0: float = 1.0
    q: float = 2.0
    G: Optional[List[float]] = None
    y0: Optional[List[float]] = None
    # method
    s: int = 1
    k1: Optional[int] = None
    k2: Optional[int] = None
    # stepping
    h: float = 0.4
    t_end: float = 1e3
    sample_every: Optional[int] = None
    compensated: bool = True
    # solver
    solver: str = "fixed_point"
    tol: float = 1e-12
    max_iters: int = 100
    divergence_factor: float = 1e4
    warm_start: bool = False
    # sweeps
    table: Optional[str] = None
    s_list: Optional[List[int]] = None
    k_list: Optional[List[int]] = None
    methods: Optional[List[List[int]]] = None
    solvers: Optional[List[str]] = None
    halvings: int = 4
    reference: Optional[list] = None     # [[s, k1, k2], h]
    s_ref: Optional[int] = None
    grid: Optional[List[float]] = None
    out: str = "out"

    @property
    def k1_eff(self):
        return self.k1 if self.k1 is not None else self.s

    @property
    def k2_eff(self):
        return self.k2 if self.k2 is not None else self.s

    def solver_config(self, kind=None):
        return SolverConfig(kind=kind or self.solver, tol=self.tol, max_iters=self.max_iters,
                            divergence_factor=self.divergence_factor, warm_start=self.warm_start)

    def n_steps(self):
        return harness.steps_for(self.t_end, self.h) if self.t_end > 0 else 0

    def sampling(self):
        if self.sample_every is not None:
            return self.sample_every
        return 100 if self.n_steps() > 100_000 else 1


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _finite(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def validate(cfg, command="run"):
    """Collect every violated constraint; raise ConfigError listing them all."""
    p = []
    if cfg.problem not in PROBLEM_NAMES:
        p.append(f"problem: {cfg.problem!r} is not one of {', '.join(PROBLEM_NAMES)}")
    if cfg.problem == "custom":
        if cfg.field not in ("dipole", "tokamak"):
            p.append("field: custom problems need field 'dipole' or 'tokamak'")
        if cfg.y0 is None:
            p.append("y0: custom problems need an initial state")
    for name in ("M", "B0", "R0", "q"):
        v = getattr(cfg, name)
        if not _finite(v) or v == 0:
            p.append(f"{name}: must be a finite non-zero number")
    if _finite(cfg.R0) and cfg.R0 < 0:
        p.append("R0: must be positive")
    if cfg.mu is not None and (not _finite(cfg.mu) or cfg.mu < 0):
        p.append("mu: must be finite and >= 0")
    if cfg.G is not None and (len(cfg.G) != 3 or not all(_finite(g) for g in cfg.G)):
        p.append("G: must be 3 finite diagonal entries")
    if cfg.y0 is not None and (len(cfg.y0) != 4 or not all(_finite(v) for v in cfg.y0)):
        p.append("y0: must be 4 finite numbers (x1, x2, x3, u)")
    if not _is_int(cfg.s) or cfg.s < 1:
        p.append("s: must be an integer >= 1")
    else:
        for name in ("k1", "k2"):
            v = getattr(cfg, name)
            if v is not None and (not _is_int(v) or v < cfg.s):
                p.append(f"{name}: must be an integer >= s = {cfg.s}")
    if not _finite(cfg.h) or cfg.h <= 0:
        p.append("h: must be a positive finite number")
    if not _finite(cfg.t_end) or cfg.t_end < 0:
        p.append("t_end: must be a finite number >= 0")
    if cfg.sample_every is not None and (not _is_int(cfg.sample_every) or cfg.sample_every < 1):
        p.append("sample_every: must be an integer >= 1")
    try:
        solver_kind(cfg.solver)
    except ValueError as exc:
        p.append(f"solver: {exc}")
    if not _finite(cfg.tol) or cfg.tol <= 0:
        p.append("tol: must be positive")
    if not _is_int(cfg.max_iters) or cfg.max_iters < 1:
        p.append("max_iters: must be an integer >= 1")
    if not _finite(cfg.divergence_factor) or cfg.divergence_factor <= 1:
        p.append("divergence_factor: must be > 1")
    if command == "sweep":
        p.extend(_validate_sweep(cfg))
    if p:
        raise ConfigError(p)


def _validate_sweep(cfg):
    p = []
    if cfg.table not in TABLES:
        return [f"table: must be one of {', '.join(TABLES)}"]
    needs = {"energy": ("s_list", "k_list"), "convergence": ("methods",),
             "spectral": ("s_list",), "robustness": ("methods", "solvers")}[cfg.table]
    for name in needs:
        v = getattr(cfg, name)
        if v is None or len(v) == 0:
            p.append(f"{name}: axis list must not be empty")
    for name in ("s_list", "k_list"):
        v = getattr(cfg, name)
        if v and not all(_is_int(x) and x >= 1 for x in v):
            p.append(f"{name}: entries must be integers >= 1")
    if cfg.methods:
        for m in cfg.methods:
            if (len(m) != 3 or not all(_is_int(x) for x in m) or m[0] < 1
                    or m[1] < m[0] or m[2] < m[0]):
                p.append(f"methods: {m!r} is not [s, k1, k2] with k1, k2 >= s >= 1")
    if cfg.solvers:
        for k in cfg.solvers:
            try:
                solver_kind(k)
            except ValueError as exc:
                p.append(f"solvers: {exc}")
    if cfg.table == "convergence":
        if not _is_int(cfg.halvings) or cfg.halvings < 1:
            p.append("halvings: must be an integer >= 1")
        elif cfg.t_end > 0 and cfg.h > 0 and not math.isclose(
                round(cfg.t_end / cfg.h) * cfg.h, cfg.t_end, rel_tol=1e-12):
            p.append("t_end: must be a multiple of h for the convergence table")
    if cfg.reference is not None:
        ok = (isinstance(cfg.reference, list) and len(cfg.reference) == 2
              and isinstance(cfg.reference[0], list) and len(cfg.reference[0]) == 3
              and all(_is_int(x) for x in cfg.reference[0])
              and 1 <= cfg.reference[0][0] <= min(cfg.reference[0][1:])
              and _finite(cfg.reference[1]) and cfg.reference[1] > 0)
        if not ok:
            p.append("reference: must be [[s, k1, k2], h_ref] with k1, k2 >= s >= 1, h_ref > 0")
    if cfg.table in ("energy", "spectral", "convergence", "robustness") and not cfg.t_end > 0:
        p.append("t_end: sweeps need t_end > 0")
    if cfg.table == "spectral" and cfg.s_list and cfg.k2 is not None:
        if max(cfg.s_list) > cfg.k2:
            p.append("s_list: every s must be <= k2")
        s_ref = cfg.s_ref if cfg.s_ref is not None else max(cfg.s_list) + 2
        if s_ref > cfg.k2:
            p.append(f"s_ref: reference degree {s_ref} exceeds k2 = {cfg.k2}")
    if cfg.table == "spectral" and cfg.k2 is None:
        p.append("k2: the spectral table needs k2 (the common k)")
    if cfg.grid is not None and (not cfg.grid or not all(_finite(g) and g > 0 for g in cfg.grid)):
        p.append("grid: must be a non-empty list of positive stepsizes")
    return p


def build_problem(cfg):
    """The harness Problem described by ``cfg``."""
    name = cfg.problem
    if name == "custom":
        kind = cfg.field
    else:
        kind = "tokamak" if name.startswith("tokamak") else "dipole"
    if kind == "tokamak":
        field_model = TokamakField(cfg.B0, cfg.R0, cfg.q)
        mu = 2.25e-6 if cfg.mu is None else cfg.mu
    else:
        field_model = DipoleField(cfg.M)
        mu = 1e-2 if cfg.mu is None else cfg.mu
    G = cfg.G
    if G is None and name == "dipole_electric":
        G = [1.0, 1.0, 1e4]
    potential = QuadraticPotential(G) if G is not None else None
    model = GyrocenterModel(field_model, potential, mu, name=name)
    y0 = cfg.y0 if cfg.y0 is not None else _DEFAULT_Y0[name]
    return harness.Problem(name, model.as_poisson_system(), tuple(float(v) for v in y0), model)


def _fmt(x):
    return "%.17e" % x


def write_trajectory_csv(path, record, problem):
    H = problem.system.H_batch(record.states)
    R, x3 = cylindrical_coords(record.states[:, :3])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "y1", "y2", "y3", "y4", "R", "x3", "H", "H_drift"])
        for i, t in enumerate(record.times):
            y = record.states[i]
            w.writerow([_fmt(t)] + [_fmt(v) for v in y]
                       + [_fmt(R[i]), _fmt(x3[i]), _fmt(H[i]),
                          _fmt(record.energy_drift[i])])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError(["config file must contain a JSON object"])
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]          # a run/sweep summary
    unknown = sorted(set(data) - _FIELD_NAMES)
    if unknown:
        raise ConfigError([f"unknown config key {k!r}" for k in unknown])
    return data


_FLAG_MAP = {
    "problem": "problem", "s": "s", "k1": "k1", "k2": "k2", "h": "h", "t_end": "t_end",
    "solver": "solver", "tol": "tol", "max_iters": "max_iters", "out": "out",
    "table": "table", "sample_every": "sample_every",
}


def make_config(args, command):
    values = {}
    table = getattr(args, "table", None)
    file_values = load_config(args.config) if args.config else {}
    if command == "sweep":
        table = table or file_values.get("table")
        values.update(TABLE_DEFAULTS.get(table, {}))
    values.update(file_values)
    for attr, key in _FLAG_MAP.items():
        v = getattr(args, attr, None)
        if v is not None:
            values[key] = v
    if command == "sweep":
        # a single value on the command line narrows the matching axis
        if args.s is not None:
            values["s_list"] = [args.s]
            if values.get("methods") is not None:
                values["methods"] = [m for m in values["methods"] if m[0] == args.s]
        if args.k2 is not None and table == "energy":
            values["k_list"] = [args.k2]
        if args.solver is not None and table == "robustness":
            values["solvers"] = [args.solver]
    if "solver" in values:
        try:
            values["solver"] = solver_kind(values["solver"])
        except ValueError:
            pass  # reported by validate
    cfg = RunConfig(**values)
    validate(cfg, command)
    return cfg


def _domain_precheck(problem):
    y0 = np.asarray(problem.y0, dtype=float)
    problem.system.S_batch(y0[None])
    problem.system.grad_H_batch(y0[None])


def cmd_run(cfg):
    """Integrate one trajectory; write trajectory.csv and summary.json under cfg.out."""
    problem = build_problem(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    tableau = build_tableau(cfg.s, cfg.k1_eff, cfg.k2_eff)
    n_steps = cfg.n_steps()
    summary = {"config": asdict(cfg), "n_steps": n_steps,
               "method": [cfg.s, tableau.k1, tableau.k2]}
    code = EXIT_OK
    try:
        _domain_precheck(problem)
        record = harness.integrate(problem.system, problem.y0, cfg.h, n_steps, tableau,
                                   cfg.solver_config(), sample_every=cfg.sampling(),
                                   compensated=cfg.compensated)
        summary["status"] = "ok"
    except harness.StepFailed as exc:
        record = exc.record
        code = EXIT_SOLVER if isinstance(exc.cause, SolverError) else EXIT_DOMAIN
        summary["status"] = "failed"
        summary["failed_step"] = exc.step
        summary["error"] = str(exc.cause)
        print(f"error: step {exc.step} (t = {exc.step * cfg.h:.17g}): {exc.cause}", file=sys.stderr)
    except ModelDomainError as exc:
        print(f"error: initial state: {exc}", file=sys.stderr)
        summary.update(status="failed", failed_step=0, error=str(exc))
        write_json(os.path.join(cfg.out, "summary.json"), summary)
        return EXIT_DOMAIN
    write_trajectory_csv(os.path.join(cfg.out, "trajectory.csv"), record, problem)
    summary.update(
        final_state=record.final_state,
        final_time=record.times[-1],
        max_abs_drift=record.max_abs_drift,
        solver_stats=record.solver_stats,
        wall_time=record.wall_time,
    )
    write_json(os.path.join(cfg.out, "summary.json"), summary)
    return code


_CELL_COLUMNS = ("status", "max_energy_drift", "final_error", "empirical_rate", "iterations",
                 "h_max")


def _cell_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return _fmt(v)
    return str(v)


def write_report_csv(path, report):
    keys = []
    for c in report.cells:
        keys.extend(k for k in c.params if k not in keys)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys + list(_CELL_COLUMNS))
        for c in report.cells:
            w.writerow([_cell_value(c.params.get(k)) for k in keys]
                       + [_cell_value(getattr(c, col)) for col in _CELL_COLUMNS])


def cmd_sweep(cfg):
    """Run one table; write <table>.csv and <table>.json under cfg.out."""
    problem = build_problem(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    try:
        _domain_precheck(problem)
    except ModelDomainError as exc:
        print(f"error: initial state: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    solver = cfg.solver_config()
    interval = (0.0, cfg.t_end)
    start = time.perf_counter()
    if cfg.table == "energy":
        report = harness.hamiltonian_error_table(problem, cfg.h, interval, cfg.s_list,
                                                 cfg.k_list, solver)
    elif cfg.table == "convergence":
        ref = None
        if cfg.reference is not None:
            ref = (tuple(cfg.reference[0]), float(cfg.reference[1]))
        report = harness.convergence_table(problem, cfg.h, cfg.halvings, interval,
                                           [tuple(m) for m in cfg.methods], ref, solver)
    elif cfg.table == "spectral":
        report = harness.spectral_run(problem, cfg.h, interval, cfg.s_list, cfg.k2, solver,
                                      s_ref=cfg.s_ref)
    else:
        grid = cfg.grid if cfg.grid is not None else harness.DEFAULT_H_GRID
        report = harness.solver_robustness_table(problem, interval,
                                                 [tuple(m) for m in cfg.methods],
                                                 cfg.solvers, grid, solver)
    elapsed = time.perf_counter() - start
    write_report_csv(os.path.join(cfg.out, f"{cfg.table}.csv"), report)
    write_json(os.path.join(cfg.out, f"{cfg.table}.json"), {
        "config": asdict(cfg),
        "table": report.table,
        "axes": report.axes,
        "meta": report.meta,
        "cells": [asdict(c) for c in report.cells],
        "wall_time": elapsed,
    })
    for c in report.cells:
        print(_describe_cell(c))
    return EXIT_OK


def _describe_cell(c):
    params = " ".join(f"{k}={v}" for k, v in c.params.items())
    vals = [f"{col}={getattr(c, col):.3e}" if isinstance(getattr(c, col), float)
            else f"{col}={getattr(c, col)}"
            for col in _CELL_COLUMNS[1:] if getattr(c, col) is not None]
    return f"{params}: {c.status} " + " ".join(vals)


def cmd_selftest(corrupt_xi1=None):
    start = time.perf_counter()
    failed = 0
    for name, fails in run_groups(xi1=corrupt_xi1):
        print(f"[{'PASS' if not fails else 'FAIL'}] {name}")
        for msg in fails[:5]:
            print(f"    {msg}")
        if len(fails) > 5:
            print(f"    ... {len(fails) - 5} more")
        failed += bool(fails)
    print(f"{failed} group(s) failed in {time.perf_counter() - start:.1f} s")
    return 1 if failed else EXIT_OK


def _parser():
    ap = argparse.ArgumentParser(prog="gyrolim", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="JSON config (or a previous summary)")
        p.add_argument("--problem", choices=PROBLEM_NAMES, help="test problem")
        p.add_argument("--s", type=int, help="polynomial degree s")
        p.add_argument("--k1", type=int, help="nodes for the S(y) coefficients (default s)")
        p.add_argument("--k2", type=int, help="nodes for the grad H coefficients (default s)")
        p.add_argument("--h", type=float, help="stepsize")
        p.add_argument("--t-end", dest="t_end", type=float, help="integrate over [0, t_end]")
        p.add_argument("--solver", choices=("fp", "newton", "blended", "fixed_point",
                                            "simplified_newton"),
                       help="nonlinear solver for the stage equations")
        p.add_argument("--tol", type=float, help="relative solver tolerance")
        p.add_argument("--max-iters", dest="max_iters", type=int, help="solver iteration cap")
        p.add_argument("--out", metavar="DIR", help="output directory (default ./out)")
        p.add_argument("--sample-every", dest="sample_every", type=int,
                       help="write every n-th step")
        if name == "sweep":
            p.add_argument("--table", choices=TABLES, help="which study to run")
    st = sub.add_parser("selftest")
    st.add_argument("--corrupt-xi1", dest="corrupt_xi1", type=float, help=argparse.SUPPRESS)
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "selftest":
        return cmd_selftest(args.corrupt_xi1)
    try:
        cfg = make_config(args, args.command)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"error: cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run":
        return cmd_run(cfg)
    return cmd_sweep(cfg)


if __name__ == "__main__":
    sys.exit(main())
