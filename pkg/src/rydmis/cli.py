"""Command-line entry point ``rydmis``.

Configuration is resolved as command-line flags over a JSON config file
(``--config``) over built-in defaults.  Every table written starts with
``#`` comment lines holding a format version and the resolved configuration,
so an output file documents the run that produced it.  Apart from the
columns in :data:`WALL_TIME_COLUMNS`, output bytes depend only on that
configuration.

Exit codes: 0 success, 2 invalid input, 3 resource cap hit, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .anneal import (
    DEFAULT_T_MAX,
    MODES,
    SweepRecord,
    TMaxExceeded,
    extract_t_lz,
    hardness_sweep,
    run_qaa,
)
from .evolve import PropagatorConfig
from .exactmis import TooManySetsError, branch_and_bound_mis, brute_force_mis
from .measure import (
    experiment_rngs,
    run_noisy_qaa_experiment,
    run_noisy_qaoa_experiment,
    write_history_csv,
)
from .parallel import default_workers, run_parallel
from .qaoa import OptimizerConfig, heuristic_schedule_optimize
from .subspace import (
    DEFAULT_DIM_CAP,
    DimensionCapExceeded,
    build_is_basis,
    build_projected_hamiltonian,
)
from .udgraph import Graph, generate_random_udgraph, graph_to_json, load_graph

__all__ = ["COMMANDS", "RunConfig", "WALL_TIME_COLUMNS", "dispatch", "main", "parse_config",
           "run_parallel"]

FORMAT_VERSION = "rydmis-csv/1"
COMMANDS = ("gen", "solve", "anneal", "lz", "sweep", "qaoa", "qaoa-noisy", "qaa-noisy")
WALL_TIME_COLUMNS = ("wall_time_s",)

EXIT_OK, EXIT_INVALID, EXIT_CAP, EXIT_INTERNAL = 0, 2, 3, 4

NOISELESS_TOL = 1e-6
NOISY_TOL = 0.2

# keys that do not influence the numbers and so are left out of headers
_NOT_ECHOED = ("output", "workers", "emit_plot_script", "config")


class UsageError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    # graph
    n: int | None = None
    rho: float | None = None
    seed: int | None = None
    graph: str | None = None
    # annealing
    omega0: float = 1.0
    delta0: float | None = None  # resolved to 6 * omega0
    T: float = 10.0
    t_min: float = 5.0
    t_max: float = DEFAULT_T_MAX
    step_tol: float = 1e-8
    max_step: float = 0.01
    scheme: str = "magnus4"
    # sweeps
    n_list: tuple[int, ...] = ()
    rho_list: tuple[float, ...] = ()
    seeds_per_cell: int = 30
    mode: str = "t_lz"
    # qaoa
    p_max: int | None = None  # 10 for qaoa, p_start for qaoa-noisy
    p_start: int = 3
    eps: float | None = None  # objective tolerance, resolved per command
    delta: float | None = None  # step tolerance, resolved per command
    eps_m: float = 0.05
    optimizer: str | None = None
    seed_mode: str = "heuristic"
    budget: int = 10_000
    experiments: int = 20
    repeats: int = 1000
    # caps and plumbing
    dim_cap: int = DEFAULT_DIM_CAP
    solver: str = "branch_and_bound"
    time_limit: float | None = None
    master_seed: int = 0
    workers: int = 1
    output: str | None = None
    emit_plot_script: bool = False
    config: str | None = None

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        for k in _NOT_ECHOED:
            d.pop(k)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
            elif isinstance(v, float) and math.isinf(v):
                d[k] = "inf"
        return d

    def propagator(self) -> PropagatorConfig:
        return PropagatorConfig(step_tol=self.step_tol, max_step=self.max_step, scheme=self.scheme)

    def optimizer_config(self) -> OptimizerConfig:
        if self.command == "qaoa-noisy":
            return OptimizerConfig.noisy(step_tol=self.delta, objective_tol=self.eps,
                                         algorithm=self.optimizer)
        return OptimizerConfig(step_tol=self.delta, objective_tol=self.eps, algorithm=self.optimizer)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _list_of(kind):
    def conv(text):
        if isinstance(text, (list, tuple)):
            return tuple(kind(x) for x in text)
        return tuple(kind(x) for x in str(text).split(",") if x.strip())
    return conv


_CONVERTERS = {
    "n": int, "seed": int, "seeds_per_cell": int, "p_max": int, "p_start": int, "budget": int,
    "experiments": int, "repeats": int, "dim_cap": int, "master_seed": int, "workers": int,
    "rho": float, "omega0": float, "delta0": float, "T": float, "t_min": float, "t_max": float,
    "step_tol": float, "max_step": float, "eps": float, "delta": float, "eps_m": float,
    "time_limit": float,
    "n_list": _list_of(int), "rho_list": _list_of(float),
    "graph": str, "scheme": str, "mode": str, "optimizer": str, "seed_mode": str, "solver": str,
    "output": str, "emit_plot_script": bool, "config": str,
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rydmis", description=__doc__.split("\n\n")[0],
                                 argument_default=argparse.SUPPRESS)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON file of option values (flags take precedence)")
    g = ap.add_argument_group("graph")
    g.add_argument("--n", type=int, help="number of vertices")
    g.add_argument("--rho", type=float, help="vertex density")
    g.add_argument("--seed", type=int, help="graph seed")
    g.add_argument("--graph", help="graph file (instead of --n/--rho/--seed)")
    a = ap.add_argument_group("annealing")
    a.add_argument("--omega0", type=float, help="peak Rabi frequency (default 1)")
    a.add_argument("--delta0", type=float, help="detuning amplitude (default 6 * omega0)")
    a.add_argument("--T", type=float, help="anneal time in units of 1/omega0 (default 10)")
    a.add_argument("--t-min", dest="t_min", type=float, help="first trial time of the LZ search")
    a.add_argument("--t-max", dest="t_max", type=float, help="give up the LZ search beyond this")
    a.add_argument("--step-tol", dest="step_tol", type=float)
    a.add_argument("--max-step", dest="max_step", type=float)
    a.add_argument("--scheme", choices=("magnus4", "midpoint"))
    s = ap.add_argument_group("sweep")
    s.add_argument("--n-list", dest="n_list", type=_list_of(int), help="comma-separated sizes")
    s.add_argument("--rho-list", dest="rho_list", type=_list_of(float), help="comma-separated densities")
    s.add_argument("--seeds-per-cell", dest="seeds_per_cell", type=int)
    s.add_argument("--mode", choices=MODES)
    q = ap.add_argument_group("qaoa")
    q.add_argument("--p-max", dest="p_max", type=int)
    q.add_argument("--p-start", dest="p_start", type=int)
    q.add_argument("--eps", type=float, help="objective tolerance")
    q.add_argument("--delta", type=float, help="step tolerance")
    q.add_argument("--eps-m", dest="eps_m", type=float, help="measurement precision")
    q.add_argument("--optimizer", choices=("nelder_mead", "quasi_newton_fd"))
    q.add_argument("--seed-mode", dest="seed_mode", choices=("heuristic", "random"))
    q.add_argument("--budget", type=int, help="measurements per noisy QAOA experiment")
    q.add_argument("--experiments", type=int, help="independent noisy experiments")
    q.add_argument("--repeats", type=int, help="measurements of the annealed state")
    r = ap.add_argument_group("resources and output")
    r.add_argument("--dim-cap", dest="dim_cap", type=int)
    r.add_argument("--solver", choices=("branch_and_bound", "brute_force"))
    r.add_argument("--time-limit", dest="time_limit", type=float)
    r.add_argument("--master-seed", dest="master_seed", type=int)
    r.add_argument("--workers", type=int, help="default from $RYDMIS_WORKERS")
    r.add_argument("--output", "-o", help="output file (default stdout)")
    r.add_argument("--emit-plot-script", dest="emit_plot_script", action="store_true")
    return ap


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        return None
    try:
        if key == "emit_plot_script":
            if not isinstance(value, bool):
                raise TypeError("expected true/false")
            return value
        return _CONVERTERS[key](value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{key}: invalid value {value!r} ({exc})") from None


def _check(cond: bool, key: str, msg: str) -> None:
    if not cond:
        raise UsageError(f"{key}: {msg}")


def parse_config(argv: Sequence[str]) -> RunConfig:
    """Resolve flags, config file and defaults into a validated RunConfig.

    Raises :class:`UsageError` for invalid values and unknown file keys.
    """
    parser = _build_parser()
    ns = vars(parser.parse_args(list(argv)))
    values: dict[str, Any] = {}
    if "config" in ns:
        try:
            doc = json.loads(Path(ns["config"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"config: cannot read {ns['config']!r} ({exc})") from None
        if not isinstance(doc, dict):
            raise UsageError("config: top level must be a JSON object")
        for k, v in doc.items():
            key = k.replace("-", "_")
            if key not in _FIELDS or key in ("command", "config"):
                raise UsageError(f"{k}: unknown configuration key")
            values[key] = _coerce(key, v)
    values.update(ns)
    if "workers" not in values:
        values["workers"] = default_workers()

    cmd = values["command"]
    noisy = cmd == "qaoa-noisy"
    values.setdefault("eps", NOISY_TOL if noisy else NOISELESS_TOL)
    values.setdefault("delta", NOISY_TOL if noisy else NOISELESS_TOL)
    values.setdefault("optimizer", "nelder_mead" if noisy else "quasi_newton_fd")
    values.setdefault("p_max", values.get("p_start", 3) if noisy else 10)
    cfg = RunConfig(**values)
    if cfg.delta0 is None:
        cfg = dataclasses.replace(cfg, delta0=6.0 * cfg.omega0)
    _validate(cfg)
    return cfg


def _validate(c: RunConfig) -> None:
    needs_graph = c.command not in ("sweep",)
    if needs_graph:
        if c.graph is None:
            for k in ("n", "rho", "seed"):
                _check(getattr(c, k) is not None, k, "required unless --graph is given")
        else:
            _check(c.command != "gen", "graph", "gen creates a graph; give --n/--rho/--seed")
            for k in ("n", "rho", "seed"):
                _check(getattr(c, k) is None, k, "conflicts with --graph")
    if c.n is not None:
        _check(c.n >= 1, "n", "must be >= 1")
    if c.rho is not None:
        _check(c.rho > 0, "rho", "must be positive")
    if c.n is not None and c.rho is not None:
        _check(c.n / c.rho >= 1.0, "rho", f"box side sqrt(n/rho) < 1 for n={c.n}")
    if c.seed is not None:
        _check(c.seed >= 0, "seed", "must be non-negative")
    _check(c.omega0 > 0, "omega0", "must be positive")
    _check(math.isfinite(c.delta0), "delta0", "must be finite")
    _check(c.T > 0, "T", "must be positive")
    _check(c.t_min > 0, "t_min", "must be positive")
    _check(c.t_max >= c.t_min, "t_max", "must be >= t_min")
    _check(c.step_tol > 0, "step_tol", "must be positive")
    _check(c.max_step > 0, "max_step", "must be positive")
    _check(c.seeds_per_cell >= 1, "seeds_per_cell", "must be >= 1")
    if c.command == "sweep":
        _check(all(n >= 1 for n in c.n_list), "n_list", "sizes must be >= 1")
        _check(all(r > 0 for r in c.rho_list), "rho_list", "densities must be positive")
    _check(c.p_start >= 1, "p_start", "must be >= 1")
    if c.command == "qaoa":
        _check(c.p_max >= 3, "p_max", "must be >= 3")
    if c.command == "qaoa-noisy":
        _check(c.p_start <= c.p_max, "p_max", "must be >= p_start")
        _check(c.seed_mode == "random" or c.p_start >= 3, "p_start",
               "heuristic seeding starts at p = 3")
    _check(c.eps > 0, "eps", "must be positive")
    _check(c.delta > 0, "delta", "must be positive")
    _check(c.eps_m > 0, "eps_m", "must be positive")
    _check(c.budget >= 1, "budget", "must be >= 1")
    _check(c.experiments >= 1, "experiments", "must be >= 1")
    _check(c.repeats >= 1, "repeats", "must be >= 1")
    _check(c.dim_cap >= 1, "dim_cap", "must be >= 1")
    _check(c.time_limit is None or c.time_limit > 0, "time_limit", "must be positive")
    _check(c.master_seed >= 0, "master_seed", "must be non-negative")
    _check(c.workers >= 1, "workers", "must be >= 1")
    _check(c.scheme in ("magnus4", "midpoint"), "scheme", "must be magnus4 or midpoint")
    _check(c.mode in MODES, "mode", f"must be one of {', '.join(MODES)}")
    _check(c.optimizer in ("nelder_mead", "quasi_newton_fd"), "optimizer", "unknown algorithm")
    _check(c.seed_mode in ("heuristic", "random"), "seed_mode", "must be heuristic or random")
    _check(c.solver in ("branch_and_bound", "brute_force"), "solver", "unknown solver")


# -- output helpers ------------------------------------------------------------


def _fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _header(cfg: RunConfig) -> str:
    return (f"# format: {FORMAT_VERSION}\n"
            f"# command: {cfg.command}\n"
            f"# config: {json.dumps(cfg.echo(), sort_keys=True)}\n")


def _table(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _emit(cfg: RunConfig, text: str, out) -> None:
    if cfg.output is None:
        out.write(text)
    else:
        Path(cfg.output).write_text(text)


def _graph(cfg: RunConfig) -> Graph:
    if cfg.graph is not None:
        return load_graph(cfg.graph)
    return generate_random_udgraph(cfg.n, cfg.rho, cfg.seed)


SWEEP_COLUMNS = tuple(f.name for f in dataclasses.fields(SweepRecord))
CELL_COLUMNS = ("n", "rho", "n_seeds", "n_used", "n_skipped", "median")

_PLOT_SCRIPTS = {
    "sweep": """\
import csv, sys
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {csv!r}
rows = list(csv.DictReader(l for l in open(path) if not l.startswith("#")))
cells = {{}}
for r in rows:
    if r["status"] == "ok" and (r["mode"] != "t_lz" or r["accepted"] == "true"):
        cells.setdefault(float(r["rho"]), []).append((int(r["n"]), float(r[{col!r}])))
for rho, pts in sorted(cells.items()):
    ns = sorted({{n for n, _ in pts}})
    med = [sorted(v for m, v in pts if m == n)[len([1 for m, _ in pts if m == n]) // 2] for n in ns]
    plt.plot(ns, med, "o-", label=f"rho={{rho:g}}")
plt.xlabel("n"); plt.ylabel({col!r}); plt.legend(); plt.savefig(path + ".png", dpi=150)
""",
    "history": """\
import csv, sys
from collections import defaultdict
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {csv!r}
rows = list(csv.DictReader(l for l in open(path) if not l.startswith("#")))
curves = defaultdict(list)
for r in rows:
    curves[r["experiment_id"]].append(int(r["best_so_far"]))
length = max(len(c) for c in curves.values())
avg = [sum(c[min(i, len(c) - 1)] for c in curves.values()) / len(curves) for i in range(length)]
plt.semilogx(range(1, length + 1), avg)
plt.xlabel("measurements m"); plt.ylabel("mean best IS size"); plt.savefig(path + ".png", dpi=150)
""",
    "trace": """\
import csv, sys
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {csv!r}
rows = list(csv.DictReader(l for l in open(path) if not l.startswith("#")))
plt.plot([int(r["p"]) for r in rows], [float(r["P_MIS"]) for r in rows], "o-")
plt.xlabel("p"); plt.ylabel("P_MIS"); plt.savefig(path + ".png", dpi=150)
""",
}


def _plot_script(cfg: RunConfig, kind: str, col: str = "value") -> None:
    if not cfg.emit_plot_script:
        return
    if cfg.output is None:
        raise UsageError("emit_plot_script: needs --output")
    text = _PLOT_SCRIPTS[kind].format(csv=cfg.output, col=col)
    Path(cfg.output + ".plot.py").write_text(text)


# -- commands ------------------------------------------------------------------


def _cmd_gen(cfg, out):
    g = _graph(cfg)
    _emit(cfg, graph_to_json(g, {"format": FORMAT_VERSION, **cfg.echo()}), out)


def _cmd_solve(cfg, out):
    g = _graph(cfg)
    if cfg.solver == "brute_force":
        res = brute_force_mis(g)
    else:
        res = branch_and_bound_mis(g, cfg.time_limit)
    row = (g.n, "" if g.rho is None else g.rho, "" if g.seed is None else g.seed, len(g.edges),
           res.size, format(res.witness, "x"), " ".join(map(str, res.vertices)),
           res.nodes_explored, res.optimal, res.wall_time)
    cols = ("n", "rho", "seed", "n_edges", "mis_size", "witness_hex", "witness", "nodes_explored",
            "optimal", "wall_time_s")
    _emit(cfg, _header(cfg) + _table(cols, [row]), out)


def _basis(cfg):
    g = _graph(cfg)
    basis = build_is_basis(g, cfg.dim_cap)
    return g, basis, build_projected_hamiltonian(basis)


def _cmd_anneal(cfg, out):
    g, basis, h = _basis(cfg)
    res = run_qaa(basis, h, cfg.omega0, cfg.delta0, cfg.T / cfg.omega0, cfg.propagator())
    cols = ("n", "dim_is", "mis_size", "T", "p_mis", "approx_ratio")
    row = (g.n, basis.dim, basis.mis_size, cfg.T, res.p_mis, res.approx_ratio)
    _emit(cfg, _header(cfg) + _table(cols, [row]), out)


def _cmd_lz(cfg, out):
    g, basis, h = _basis(cfg)
    fit = extract_t_lz(basis, h, cfg.omega0, cfg.delta0, cfg.propagator(), cfg.t_min, cfg.t_max)
    cols = ("n", "dim_is", "mis_size", "t_lz", "a", "r_squared", "accepted", "clamped", "t_star",
            "n_sweeps", "fit_T", "fit_p_mis")
    row = (g.n, basis.dim, basis.mis_size, fit.t_lz, fit.a, fit.r_squared, fit.accepted,
           fit.clamped, fit.t_star, fit.n_sweeps,
           ";".join(_fmt(t) for t, _ in fit.fit_points),
           ";".join(_fmt(p) for _, p in fit.fit_points))
    _emit(cfg, _header(cfg) + _table(cols, [row]), out)


def _cmd_sweep(cfg, out):
    table = hardness_sweep(cfg.n_list, cfg.rho_list, cfg.seeds_per_cell, cfg.mode, cfg.T,
                           cfg.master_seed, cfg.omega0, cfg.delta0, cfg.propagator(),
                           cfg.dim_cap, cfg.t_max, cfg.workers)
    rows = [dataclasses.astuple(r) for r in table.records]
    cells = [dataclasses.astuple(c) for c in table.cells]
    text = _header(cfg) + _table(SWEEP_COLUMNS, rows)
    cell_text = _header(cfg) + _table(CELL_COLUMNS, cells)
    if cfg.output is None:
        out.write(text + "\n" + cell_text)
    else:
        Path(cfg.output).write_text(text)
        Path(cfg.output).with_suffix(".cells.csv").write_text(cell_text)
    col = {"t_lz": "t_lz", "p_mis_at_fixed_T": "p_mis"}.get(cfg.mode, "approx_ratio")
    _plot_script(cfg, "sweep", col)


def _cmd_qaoa(cfg, out):
    g, basis, h = _basis(cfg)
    trace = heuristic_schedule_optimize(basis, h, cfg.p_max, cfg.optimizer_config())
    cols = ("p", "seed_source", "start", "F_p", "P_MIS", "evals", "converged", "wall_time_s",
            "params")
    rows = [(lv.p, "heuristic", lv.start, lv.f_p, lv.p_mis, lv.evals, lv.converged,
             lv.wall_time_s, ";".join(_fmt(x) for x in lv.params.to_vector()))
            for lv in trace]
    _emit(cfg, _header(cfg) + _table(cols, rows), out)
    _plot_script(cfg, "trace")


def _noisy_qaoa_task(g, basis, h, rng, cfg):
    return run_noisy_qaoa_experiment(
        g, rng, cfg.budget, p_start=cfg.p_start, p_max=cfg.p_max,
        optimizer_cfg=cfg.optimizer_config(), eps_m=cfg.eps_m, seed_mode=cfg.seed_mode,
        basis=basis, h=h)


def _cmd_qaoa_noisy(cfg, out):
    g, basis, h = _basis(cfg)
    results = [_noisy_qaoa_task(g, basis, h, rng, cfg)
               for rng in experiment_rngs(cfg.master_seed, cfg.experiments)]
    buf = io.StringIO()
    write_history_csv(buf, results)
    _emit(cfg, _header(cfg) + buf.getvalue(), out)
    _plot_script(cfg, "history")


def _cmd_qaa_noisy(cfg, out):
    g, basis, h = _basis(cfg)
    results = [run_noisy_qaa_experiment(g, cfg.T / cfg.omega0, cfg.repeats, rng, cfg.omega0,
                                        cfg.delta0, cfg.propagator(), basis, h)
               for rng in experiment_rngs(cfg.master_seed, cfg.experiments)]
    buf = io.StringIO()
    write_history_csv(buf, results)
    _emit(cfg, _header(cfg) + buf.getvalue(), out)
    _plot_script(cfg, "history")


_DISPATCH = {
    "gen": _cmd_gen, "solve": _cmd_solve, "anneal": _cmd_anneal, "lz": _cmd_lz,
    "sweep": _cmd_sweep, "qaoa": _cmd_qaoa, "qaoa-noisy": _cmd_qaoa_noisy,
    "qaa-noisy": _cmd_qaa_noisy,
}


def dispatch(cfg: RunConfig, out=None, err=None) -> int:
    """Run one command; returns the process exit code."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        _DISPATCH[cfg.command](cfg, out)
    except (DimensionCapExceeded, TMaxExceeded, TooManySetsError) as exc:
        err.write(f"rydmis: resource cap: {exc}\n")
        return EXIT_CAP
    except (UsageError, ValueError, OSError) as exc:
        err.write(f"rydmis: invalid input: {exc}\n")
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - map everything else to one code
        err.write(f"rydmis: internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        sys.stderr.write(f"rydmis: invalid input: {exc}\n")
        return EXIT_INVALID
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
