"""Command-line experiment runner.

    localredfield <command> --config run.ini [--out DIR] [--format csv|json]

Commands: evolve, steady-state, error-sweep, scaling, trajectories, compare.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (current_operator, eigenbasis_populations_coherences, expectation, gibbs_state,
                       min_eigenvalue, purity, time_averaged_distance, trace_norm_distance)
from .bath import BathError
from .config import ConfigError, ExperimentConfig, MethodEntry, build_system, load_config
from .experiments import Method, OpenSystem, build_generator, loglog_slope, timescale_ratio
from .expansion import ExpansionDivergenceWarning, ExpansionMode, expansion_term_norms
from .models import build_initial_state
from .operators import DimensionError, projector
from .redfield import IntegrationError, SteadyStateError, evolve, steady_state
from .trajectories import EigenstatePopulations, TrajectoryConfig, mcwf_run

logger = logging.getLogger("localredfield")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
NUMERICAL_ERRORS = (IntegrationError, SteadyStateError, BathError, DimensionError,
                    ExpansionDivergenceWarning, np.linalg.LinAlgError)


# output ----------------------------------------------------------------------

def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_table(path: Path, columns: list, rows: list, meta: dict, fmt: str) -> Path:
    path = path.with_suffix("." + fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        data = {"metadata": meta, "columns": columns,
                "rows": [[float(v) if isinstance(v, (float, np.floating)) else v for v in r] for r in rows]}
        path.write_text(json.dumps(data, indent=1) + "\n")
        return path
    with open(path, "w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(x) for x in r])
    return path


def read_table(path) -> tuple:
    """(columns, rows as float array where possible, metadata) of a result file."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        return data["columns"], data["rows"], data.get("metadata", {})
    meta, lines = {}, []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition(":")
            meta[k.strip()] = v.strip()
        elif line.strip():
            lines.append(line)
    reader = list(csv.reader(lines))
    return reader[0], reader[1:], meta


def _metadata(cfg: ExperimentConfig, command: str, seed=None) -> dict:
    return {"command": command, "config_sha256": cfg.digest(),
            "seed": "none" if seed is None else seed, "version": __version__,
            "energy_unit": cfg.energy_unit}


# observables -----------------------------------------------------------------

def _density_label(system: OpenSystem) -> str:
    return "sz" if system.model.kind == "xxz" else "n"


def observable_columns(system: OpenSystem, names) -> list:
    cols = []
    dim, L = system.model.lattice.dim, system.model.L
    lab = _density_label(system)
    for name in names:
        if name == "populations":
            cols += [f"pop_{k}" for k in range(dim)]
        elif name == "coherences":
            cols += [f"coh_{k}_{part}" for k in range(dim - 1) for part in ("re", "im")]
        elif name == "magnetization":
            cols += [f"{lab}_{i}" for i in range(L)]
        elif name == "currents":
            cols += [f"j_{i}" for i in range(L - 1)]
        else:
            cols.append(name)
    return cols


def density_observables(system: OpenSystem, names, rho) -> list:
    out = []
    model = system.model
    for name in names:
        if name in ("populations", "coherences"):
            pops, cohs = eigenbasis_populations_coherences(rho, system.eigen_cache)
            out += list(pops) if name == "populations" else [x for c in cohs for x in (c.real, c.imag)]
        elif name == "magnetization":
            dens = model.number_like()
            out += [expectation(rho, model.site_op(i, dens)) for i in range(model.L)]
        elif name == "currents":
            dens = model.number_like()
            out += [expectation(rho, current_operator(b, model.site_op(i, dens)))
                    for i, b in enumerate(model.bond_terms)]
        elif name == "purity":
            out.append(purity(rho))
        elif name == "energy":
            out.append(expectation(rho, model.h_s))
        elif name == "min_eig":
            out.append(min_eigenvalue(rho))
        elif name == "trace":
            out.append(float(np.real(np.trace(rho))))
    return out


def trajectory_observables(system: OpenSystem, names) -> dict:
    model = system.model
    obs = {}
    dens = model.number_like()
    lab = _density_label(system)
    for name in names:
        if name == "populations":
            obs["pop"] = EigenstatePopulations(system.eigen_cache[1])
        elif name == "magnetization":
            for i in range(model.L):
                obs[f"{lab}_{i}"] = model.site_op(i, dens)
        elif name == "currents":
            for i, b in enumerate(model.bond_terms):
                obs[f"j_{i}"] = current_operator(b, model.site_op(i, dens))
        elif name == "energy":
            obs["energy"] = model.h_s
        else:
            raise ConfigError(f"[run] observables: {name!r} is not available for trajectories")
    return obs


def _initial_psi(cfg: ExperimentConfig, system: OpenSystem) -> np.ndarray:
    kind = cfg.run.initial_state
    try:
        if kind.startswith("fock:"):
            occ = [int(x) for x in kind[5:].split(",")]
            return build_initial_state(system.model.lattice, "fock", occ)
        return build_initial_state(system.model.lattice, kind)
    except ValueError as exc:
        raise ConfigError(f"[run] initial_state: {exc}") from None


def _generator(system, entry: MethodEntry, strict: bool):
    if entry.method == Method.STANDARD_LOCAL_LINDBLAD and not system.channels:
        raise ConfigError("[method] standard-local-lindblad needs coupled baths")
    if entry.method in (Method.LOCAL_REDFIELD, Method.LOCAL_LINDBLAD,
                        Method.ADHOC_REDFIELD, Method.ADHOC_LINDBLAD):
        mode = ExpansionMode.ADHOC if entry.method.startswith("adhoc") else ExpansionMode.LOCAL
        eps0 = (0.0 if entry.eps0 is None else entry.eps0) if mode is ExpansionMode.ADHOC else None
        with warnings.catch_warnings():
            warnings.simplefilter("error" if strict else "default", ExpansionDivergenceWarning)
            for ch in system.channels:
                expansion_term_norms(system.h_s, ch, max(entry.order, 2), mode, eps0)
    return build_generator(system, entry.method, entry.order, entry.eps0)


def _tag(entry: MethodEntry) -> str:
    return entry.label().replace(":", "_")


# commands --------------------------------------------------------------------

def run_evolve(cfg: ExperimentConfig, out: Path, fmt: str, strict: bool = False, threads: int = 1) -> list:
    system = build_system(cfg)
    rho0 = projector(_initial_psi(cfg, system))
    t = cfg.t_grid()
    cols = ["time"] + observable_columns(system, cfg.run.observables)
    files = []
    for entry in cfg.methods:
        gen = _generator(system, entry, strict)
        snaps = evolve(gen, rho0, t, rtol=cfg.run.rtol, atol=cfg.run.atol)
        rows = [[ti] + density_observables(system, cfg.run.observables, r) for ti, r in zip(t, snaps)]
        meta = _metadata(cfg, "evolve") | {"method": entry.label()}
        files.append(write_table(out / f"{cfg.output.prefix}evolve_{_tag(entry)}", cols, rows, meta, fmt))
    return files


def _steady(system, entry, cfg, strict):
    gen = _generator(system, entry, strict)
    return steady_state(gen, cfg.run.ss_method, tol=cfg.run.ss_tol)


def run_steady_state(cfg: ExperimentConfig, out: Path, fmt: str, strict: bool = False, threads: int = 1) -> list:
    system = build_system(cfg)
    if not system.channels:
        raise ConfigError("steady-state needs at least one bath with gamma > 0")
    ref = _steady(system, MethodEntry("exact-redfield", 0), cfg, strict)
    gibbs = gibbs_state(system.h_s, system.channels[0].bath.T, system.eigen_cache)
    cols = ["method", "order", "eps0", "d_exact", "d_gibbs"] + observable_columns(system, cfg.run.observables)
    rows = []
    for entry in cfg.methods:
        rho = ref if entry.method == Method.EXACT_REDFIELD else _steady(system, entry, cfg, strict)
        rows.append([entry.method, entry.order, "" if entry.eps0 is None else entry.eps0,
                     trace_norm_distance(rho, ref), trace_norm_distance(rho, gibbs)]
                    + density_observables(system, cfg.run.observables, rho))
    return [write_table(out / f"{cfg.output.prefix}steady_state", cols, rows, _metadata(cfg, "steady-state"), fmt)]


def _sweep_point(args):
    cfg, value, strict = args
    point = cfg.with_parameter(cfg.sweep.parameter, value)
    system = build_system(point)
    ref = _steady(system, MethodEntry("exact-redfield", 0), point, strict)
    return [[value, e.method, e.order, "" if e.eps0 is None else e.eps0,
             trace_norm_distance(_steady(system, e, point, strict), ref)] for e in point.methods]


def _scaling_point(args):
    cfg, value, strict = args
    point = cfg.with_parameter("T", value)
    system = build_system(point)
    rho0 = projector(_initial_psi(point, system))
    tau_r = point.tau_r()
    t = np.linspace(0.0, tau_r, point.run.n_times)
    kw = dict(rtol=point.run.rtol, atol=point.run.atol)
    exact = evolve(build_generator(system, Method.EXACT_REDFIELD), rho0, t, **kw)
    ratio = timescale_ratio(system)
    rows = []
    for e in point.methods:
        if e.method == Method.EXACT_REDFIELD:
            continue
        snaps = evolve(_generator(system, e, strict), rho0, t, **kw)
        rows.append([value, ratio, e.method, e.order, time_averaged_distance(exact, snaps, t, tau_r)])
    return rows


def _map_points(func, cfg, strict, threads):
    if cfg.sweep is None:
        raise ConfigError("this command needs a [sweep] section")
    jobs = [(cfg, v, strict) for v in cfg.sweep.values]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(func, jobs))  # map keeps sweep order
    else:
        results = [func(j) for j in jobs]
    return [row for rows in results for row in rows]


def run_error_sweep(cfg: ExperimentConfig, out: Path, fmt: str, strict: bool = False, threads: int = 1) -> list:
    rows = _map_points(_sweep_point, cfg, strict, threads)
    cols = [cfg.sweep.parameter, "method", "order", "eps0", "d"]
    return [write_table(out / f"{cfg.output.prefix}error_sweep", cols, rows, _metadata(cfg, "error-sweep"), fmt)]


def run_scaling(cfg: ExperimentConfig, out: Path, fmt: str, strict: bool = False, threads: int = 1) -> list:
    if cfg.sweep is None or cfg.sweep.parameter != "T":
        raise ConfigError("[sweep] scaling needs parameter = T")
    if len(cfg.sweep.values) < 4:
        raise ConfigError("[sweep] a power-law fit needs at least 4 temperatures")
    if any(b.family == "reservoir" for b in cfg.baths):
        raise ConfigError("[bath] scaling needs ohmic or Drude baths (tau_B undefined for reservoirs)")
    rows = _map_points(_scaling_point, cfg, strict, threads)
    meta = _metadata(cfg, "scaling") | {"tau_S": "1/J", "tau_B": "longest bath correlation time"}
    files = [write_table(out / f"{cfg.output.prefix}scaling",
                         ["T", "tau_B_over_tau_S", "method", "order", "d_tauR"], rows, meta, fmt)]
    fits = []
    for e in cfg.methods:
        pts = [(r[1], r[4]) for r in rows if r[2] == e.method and r[3] == e.order]
        if not pts:
            continue
        x, y = zip(*pts)
        slope = loglog_slope(x, y) if min(y) > 0 else float("nan")
        fits.append([e.method, e.order, slope, e.order + 1])
    files.append(write_table(out / f"{cfg.output.prefix}scaling_fit",
                             ["method", "order", "slope", "expected_slope"], fits, meta, fmt))
    return files


def run_trajectories(cfg: ExperimentConfig, out: Path, fmt: str, strict: bool = False, threads: int = 1) -> list:
    system = build_system(cfg)
    psi0 = _initial_psi(cfg, system)
    obs = trajectory_observables(system, [o for o in cfg.run.observables if o not in ("purity", "min_eig", "trace")])
    if not obs:
        raise ConfigError("[run] observables: none of the requested observables work for trajectories")
    topt = cfg.trajectories
    files = []
    for entry in cfg.methods:
        if not Method(entry.method).is_lindblad:
            raise ConfigError(f"[method] trajectories need a Lindblad method, got {entry.method}")
        gen = _generator(system, entry, strict)
        tcfg = TrajectoryConfig(topt.n_traj, topt.seed, tuple(cfg.t_grid()), topt.dt_max, topt.jump_tol,
                                topt.refine_jumps, cfg.run.rtol, cfg.run.atol, topt.record_jumps)
        res = mcwf_run(gen, psi0, tcfg, obs, threads=threads)
        cols, series = ["time"], []
        for name in obs:
            mean, err = res.mean[name], res.stderr[name]
            if mean.ndim == 1:
                cols += [name, f"{name}_stderr"]
                series += [mean, err]
            else:
                for k in range(mean.shape[1]):
                    cols += [f"{name}_{k}", f"{name}_{k}_stderr"]
                    series += [mean[:, k], err[:, k]]
        rows = [[t] + [s[i] for s in series] for i, t in enumerate(res.t_grid)]
        meta = _metadata(cfg, "trajectories", topt.seed) | {"method": entry.label(), "n_traj": res.n_traj}
        base = out / f"{cfg.output.prefix}trajectories_{_tag(entry)}"
        files.append(write_table(base, cols, rows, meta, fmt))
        if topt.record_jumps:
            log = base.with_name(base.name + "_jumps.jsonl")
            res.write_jump_log(log)
            files.append(log)
    return files


def run_compare(file_a, file_b, out: Path, fmt: str) -> list:
    ca, ra, _ = read_table(file_a)
    cb, rb, _ = read_table(file_b)
    if len(ra) != len(rb):
        raise ConfigError(f"compare: {file_a} has {len(ra)} rows, {file_b} has {len(rb)}")
    common = [c for c in ca if c in cb]
    rows = []
    for c in common:
        try:
            xa = np.array([float(r[ca.index(c)]) for r in ra])
            xb = np.array([float(r[cb.index(c)]) for r in rb])
        except ValueError:
            continue
        if c == "time":
            if not np.allclose(xa, xb, rtol=1e-12, atol=0):
                raise ConfigError("compare: the two files use different time grids")
            continue
        diff = np.abs(xa - xb)
        rows.append([c, float(diff.max()), float(diff.mean())])
    meta = {"command": "compare", "file_a": str(file_a), "file_b": str(file_b), "version": __version__}
    pops = [r for r in rows if r[0].startswith("pop_")]
    if pops:
        rows.append(["populations_l1_max", float(sum(r[1] for r in pops)), float(sum(r[2] for r in pops))])
    return [write_table(out / "compare", ["column", "max_abs_diff", "mean_abs_diff"], rows, meta, fmt)]


COMMANDS = {
    "evolve": run_evolve,
    "steady-state": run_steady_state,
    "error-sweep": run_error_sweep,
    "scaling": run_scaling,
    "trajectories": run_trajectories,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="localredfield", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="experiment config (INI)")
        s.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        s.add_argument("--seed", type=int, default=None, help="override [trajectories] seed")
        s.add_argument("--out", default=None, help="output directory (default from config)")
        s.add_argument("--format", choices=("csv", "json"), default=None)
        s.add_argument("--strict", action="store_true", help="treat divergence warnings as failures")
        s.add_argument("-v", "--verbose", action="store_true")
    c = sub.add_parser("compare")
    c.add_argument("file_a")
    c.add_argument("file_b")
    c.add_argument("--out", default=".")
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "compare":
            files = run_compare(args.file_a, args.file_b, Path(args.out), args.format)
        else:
            cfg = load_config(args.config)
            if args.seed is not None:
                if not 0 <= args.seed < 2**64:
                    raise ConfigError("--seed must be an unsigned 64-bit integer")
                cfg = replace(cfg, trajectories=replace(cfg.trajectories, seed=args.seed))
            out = Path(args.out if args.out is not None else cfg.output.directory)
            fmt = args.format or cfg.output.format
            files = COMMANDS[args.command](cfg, out, fmt, strict=args.strict, threads=max(1, args.threads))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
