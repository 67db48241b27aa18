"""Batch front end: config parsing, subcommands, persistence.

Config format: ``[section]`` headers, ``key = value`` lines, ``#``
comments.  Unknown sections, unknown keys and duplicate keys are errors
carrying the offending line number.  Exit codes: 0 success, 1 solver
non-convergence, 2 config or file-format error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import potentials as pot
from .energy import (
    ProblemParams,
    energy_breakdown,
    j_v,
    lagrange_multiplier,
    pohozaev,
    pohozaev_alt,
)
from .fieldio import FieldFormatError, load_field, save_field
from .mesh import BoxGrid, Field, RadialGrid
from .potentials import PotentialSpec
from .solver import (
    HomotopyLeg,
    HomotopySchedule,
    Solution,
    SolverError,
    continuation,
    ground_state,
)
from . import verify as verify_mod

__all__ = ["RunConfig", "ConfigError", "parse_config", "run_command", "main"]


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


_SCHEMA = {
    "problem": {"p", "a", "s", "a_list"},
    "potential": {"kind", "c", "alpha", "beta", "q", "sigma"},
    "grid": {"kind", "n", "r_max", "half_width"},
    "solver": {"tol_newton", "max_newton", "descent_step", "legs"},
    "output": {"directory", "emit_svg", "seed"},
}


@dataclass
class RunConfig:
    problem: ProblemParams
    potential: PotentialSpec
    grid: RadialGrid | BoxGrid
    schedule: HomotopySchedule
    a_list: list[float] | None = None
    tol_newton: float = 1e-10
    max_newton: int = 60
    descent_step: float = 0.4
    directory: str = "out"
    emit_svg: bool = False
    seed: int = 0


def _tokenize(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SCHEMA:
                raise ConfigError(f"unknown section [{name}]", lineno)
            if name in sections:
                raise ConfigError(f"duplicate section [{name}]", lineno)
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SCHEMA[current]:
            raise ConfigError(f"unknown key {key!r} in section [{current}]", lineno)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        sections[current][key] = (value, lineno)
    return sections


def _get(sections, sec: str, key: str, conv, default=None, required=False):
    entry = sections.get(sec, {}).get(key)
    if entry is None:
        if required:
            raise ConfigError(f"missing required key {key!r} in section [{sec}]")
        return default
    value, lineno = entry
    try:
        return conv(value)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}", lineno) from exc


def _to_bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_legs(s: str) -> HomotopySchedule:
    kinds = {"s": "s_strength", "r": "r_radius", "v": "v_strength"}
    legs = []
    for chunk in s.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        head, _, body = chunk.partition(":")
        kind = kinds.get(head.strip())
        if kind is None:
            raise ValueError(f"unknown leg kind {head.strip()!r} (use s, r or v)")
        if "," in body:
            pts = [float(x) for x in body.split(",")]
            legs.append(HomotopyLeg.from_points(kind, pts))
        else:
            parts = body.split(":")
            if len(parts) != 3:
                raise ValueError(f"leg {chunk!r} needs kind:from:to:steps or kind:p1,p2,...")
            legs.append(HomotopyLeg(kind, float(parts[0]), float(parts[1]), int(parts[2])))
    return HomotopySchedule(tuple(legs))


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a run config; first error wins."""
    sections = _tokenize(text)

    p = _get(sections, "problem", "p", float, required=True)
    a = _get(sections, "problem", "a", float, required=True)
    s = _get(sections, "problem", "s", float, default=1.0)
    _, p_line = sections["problem"]["p"]
    try:
        params = ProblemParams(p=p, a=a, s=s)
    except ValueError as exc:
        raise ConfigError(str(exc), p_line) from exc

    a_list = _get(sections, "problem", "a_list",
                  lambda v: [float(x) for x in v.split(",")])

    kind = _get(sections, "potential", "kind", str, default="zero")
    known = {"zero", "power_decay", "piecewise_power", "gaussian_well"}
    if kind not in known:
        _, line = sections["potential"]["kind"]
        raise ConfigError(
            f"unknown potential kind {kind!r} (expected one of {sorted(known)})", line)
    try:
        if kind == "zero":
            V = PotentialSpec.zero()
        elif kind == "power_decay":
            V = PotentialSpec.power_decay(
                _get(sections, "potential", "c", float, required=True),
                _get(sections, "potential", "alpha", float, required=True))
        elif kind == "piecewise_power":
            V = PotentialSpec.piecewise_power(
                _get(sections, "potential", "c", float, required=True),
                _get(sections, "potential", "alpha", float, required=True),
                _get(sections, "potential", "beta", float, required=True),
                _get(sections, "potential", "q", float, required=True))
        else:
            V = PotentialSpec.gaussian_well(
                _get(sections, "potential", "c", float, required=True),
                _get(sections, "potential", "sigma", float, default=1.0))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    gkind = _get(sections, "grid", "kind", str, default="radial")
    n = _get(sections, "grid", "n", int, required=True)
    try:
        if gkind == "radial":
            grid = RadialGrid(_get(sections, "grid", "r_max", float, required=True), n)
        elif gkind == "box":
            grid = BoxGrid(_get(sections, "grid", "half_width", float, required=True), n)
        else:
            raise ConfigError(f"unknown grid kind {gkind!r} (radial or box)")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    schedule = _get(sections, "solver", "legs", _parse_legs, default=HomotopySchedule())
    return RunConfig(
        problem=params,
        potential=V,
        grid=grid,
        schedule=schedule,
        a_list=a_list,
        tol_newton=_get(sections, "solver", "tol_newton", float, default=1e-10),
        max_newton=_get(sections, "solver", "max_newton", int, default=60),
        descent_step=_get(sections, "solver", "descent_step", float, default=0.4),
        directory=_get(sections, "output", "directory", str, default="out"),
        emit_svg=_get(sections, "output", "emit_svg", _to_bool, default=False),
        seed=_get(sections, "output", "seed", int, default=0),
    )


def _load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_diagnostics(path, items: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in items.items():
            fh.write(f"{key} = {_fmt(value)}\n")


def _write_trace_csv(path, trace) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("leg,value,level,lambda\n")
        for row in trace:
            fh.write(f"{row.leg},{_fmt(row.value)},{_fmt(row.level)},{_fmt(row.lam)}\n")


def _solution_items(sol: Solution, extra: dict | None = None) -> dict:
    b = sol.breakdown
    items = {
        "p": sol.params.p,
        "a": sol.params.a,
        "s": sol.params.s,
        "converged": sol.converged,
        "lambda": sol.lam,
        "level": sol.level,
        "residual_norm": sol.residual_norm,
        "pohozaev_residual": sol.pohozaev_residual,
        "A": b.A, "Bh": b.Bh, "C": b.C, "D": b.D, "E": b.E, "mass": b.mass,
        "iterations": sol.iterations,
    }
    if sol.message:
        items["message"] = sol.message
    if extra:
        items.update(extra)
    return items


def _cmd_solve(cfg: RunConfig) -> int:
    os.makedirs(cfg.directory, exist_ok=True)
    kwargs = dict(tol_newton=cfg.tol_newton, max_newton=cfg.max_newton)
    if cfg.schedule.legs:
        if not isinstance(cfg.grid, RadialGrid):
            raise ConfigError("continuation legs need a radial grid")
        sol = continuation(cfg.schedule, cfg.problem, cfg.potential, cfg.grid, **kwargs)
    elif cfg.potential.is_zero:
        if not isinstance(cfg.grid, RadialGrid):
            raise ConfigError("ground_state needs a radial grid")
        sol = ground_state(cfg.problem, cfg.grid,
                           descent_step=cfg.descent_step, **kwargs)
    else:
        # no legs given: ramp the potential in from the autonomous state
        sched = HomotopySchedule.of(HomotopyLeg("v_strength", 0.0, 1.0, 4))
        sol = continuation(sched, cfg.problem, cfg.potential, cfg.grid, **kwargs)

    save_field(os.path.join(cfg.directory, "solution.spsf"), sol.u)
    _write_diagnostics(os.path.join(cfg.directory, "solution_diagnostics.txt"),
                       _solution_items(sol))
    _write_trace_csv(os.path.join(cfg.directory, "solution_trace.csv"),
                     sol.homotopy_trace)
    if cfg.emit_svg:
        from . import plots

        plots.plot_radial_profile(sol.u, os.path.join(cfg.directory, "profile.svg"))
        plots.plot_fiber_profile(sol.u, cfg.potential, sol.params,
                                 os.path.join(cfg.directory, "fiber_profile.svg"))
    print(f"solve: converged={_fmt(sol.converged)} lambda={_fmt(sol.lam)} "
          f"level={_fmt(sol.level)}")
    return 0 if sol.converged else 1


def _cmd_sweep(cfg: RunConfig) -> int:
    if cfg.a_list is None:
        raise ConfigError("sweep needs a_list in [problem]")
    if not isinstance(cfg.grid, RadialGrid):
        raise ConfigError("sweep needs a radial grid")
    os.makedirs(cfg.directory, exist_ok=True)
    table = _run_sweep(cfg)
    path = os.path.join(cfg.directory, "sweep.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table.to_csv())
    if cfg.emit_svg:
        from . import plots

        a_vals = [row[0] for row in table.rows if row[-1]]
        c_vals = [row[1] for row in table.rows if row[-1]]
        plots.plot_mass_sweep(a_vals, c_vals, os.path.join(cfg.directory, "c_a_vs_a.svg"))
    ok = all(row[-1] for row in table.rows)
    print(f"sweep: rows={len(table.rows)} c_a_nonincreasing={_fmt(table.c_a_nonincreasing)}")
    return 0 if ok else 1


def _run_sweep(cfg: RunConfig) -> verify_mod.SweepTable:
    workers = int(os.environ.get("SPS_THREADS", "1"))
    kwargs = dict(tol_newton=cfg.tol_newton, max_newton=cfg.max_newton,
                  descent_step=cfg.descent_step)
    if workers <= 1 or cfg.a_list is None or len(cfg.a_list) < 2:
        return verify_mod.sweep_mass(cfg.a_list, cfg.problem, cfg.grid, **kwargs)
    # fan out worker solves; rows are reassembled in ladder order
    from concurrent.futures import ThreadPoolExecutor
    from dataclasses import replace

    def one(a: float):
        sol = ground_state(replace(cfg.problem, a=a), cfg.grid, **kwargs)
        b = sol.breakdown
        return (a, sol.level, sol.lam, b.A, b.Bh, b.E,
                sol.pohozaev_residual, sol.converged)

    with ThreadPoolExecutor(max_workers=min(workers, len(cfg.a_list))) as pool:
        rows = list(pool.map(one, cfg.a_list))
    levels = [row[1] for row in rows if row[-1]]
    mono = all(l2 <= l1 + 1e-9 * abs(l1) for l1, l2 in zip(levels, levels[1:]))
    return verify_mod.SweepTable(verify_mod.SWEEP_COLUMNS, rows, mono)


def _cmd_verify(cfg: RunConfig, field_path: str) -> int:
    u = load_field(field_path)
    if not u.is_radial:
        raise ConfigError("verify currently audits radial solution fields")
    params = cfg.problem
    lam = lagrange_multiplier(u, cfg.potential, params)
    from .solver import _System, _residual_scale

    system = _System(u.grid, cfg.potential, params, None)
    r, m, _ = system.residual(u.values, lam)
    rn = system.residual_norm(r, m) / _residual_scale(lam, params.a)
    converged = rn <= max(1e-6, 1e3 * cfg.tol_newton)
    b = energy_breakdown(u, cfg.potential, params)
    sol = Solution(u=u, lam=lam, params=params, breakdown=b,
                   residual_norm=rn, pohozaev_residual=pohozaev(b, cfg.potential, params),
                   converged=converged, level=j_v(b, cfg.potential, params))
    if not converged:
        print(f"verify: field is not a converged solution (residual {rn:.3e})")
        return 1
    ref = ground_state(params, u.grid, tol_newton=cfg.tol_newton)
    rep = verify_mod.diagnostics(sol, cfg.potential, ref.level)
    items = _solution_items(sol, {
        "pohozaev_alt_residual": rep.pohozaev_alt_residual,
        "ibp_gap": rep.ibp_gap,
        "lambda_sign": rep.lambda_sign,
        "energy_r1": rep.energy_system_residuals[0],
        "energy_r2": rep.energy_system_residuals[1],
        "energy_r3": rep.energy_system_residuals[2],
        "min_value": rep.min_value,
        "tail_slope": rep.tail_slope,
        "moser_ratio": rep.moser_ratio,
        "level_vs_ca": rep.level_vs_ca,
    })
    for key, value in items.items():
        print(f"{key} = {_fmt(value)}")
    return 0


def _cmd_check_potential(cfg: RunConfig, c_a: float | None) -> int:
    V = cfg.potential
    grid = cfg.grid
    norms = pot.potential_norms(V, grid)
    params = cfg.problem
    if c_a is None:
        if not isinstance(grid, RadialGrid):
            raise ConfigError("check-potential needs a radial grid to compute c_a "
                              "(or pass --c-a)")
        c_a = ground_state(params, grid, tol_newton=cfg.tol_newton).level
    reports = [
        pot.check_v1(norms, params.a, c_a, theta=0.2, eta=0.2, p=params.p),
        pot.check_v1prime(norms, params.p, norms["q"],
                          pot.embedding_constant_cq(norms["q"])),
        pot.check_v2_sampled(V, radii=(4.0, 8.0, 16.0, 32.0), alpha=0.5,
                             delta=0.25, seed=cfg.seed)
        if V.has_gradient and not V.is_zero else None,
        pot.check_v3(V),
        pot.check_v4(norms, params.p),
    ]
    print(f"c_a = {_fmt(c_a)}")
    for rep in reports:
        if rep is None:
            continue
        print(f"{rep.name}: verdict={_fmt(rep.verdict)} margin={_fmt(rep.margin)}")
    return 0


def _cmd_constants(cfg: RunConfig, t: float, c_hat: float, delta: float) -> int:
    params = cfg.problem
    norms = pot.potential_norms(cfg.potential, cfg.grid)
    q = norms["q"]
    cq = pot.embedding_constant_cq(q)
    s_const = pot.aubin_talenti()
    print(f"S = {_fmt(s_const)}")
    print(f"C_q(q={q}) = {_fmt(cq)}")
    try:
        eta_t = pot.eta_tilde(params.p, norms)
        print(f"eta_tilde = {_fmt(eta_t)}")
        print(f"a_star = {_fmt(pot.a_star(params.p, c_hat, delta, eta_t))}")
    except ValueError as exc:
        print(f"eta_tilde = undefined ({exc})")
    print(f"Lambda_pq = {_fmt(pot.lambda_pq(params.p, cq))}")
    tv = t if t is not None else (norms["V_q"] if math.isfinite(norms["V_q"]) else 0.0)
    print(f"theta({_fmt(tv)}) = {_fmt(pot.theta_v1prime(tv, params.p, q, cq))}")
    return 0


def _cmd_plot(cfg: RunConfig) -> int:
    from . import plots

    made = []
    sol_path = os.path.join(cfg.directory, "solution.spsf")
    if os.path.exists(sol_path):
        u = load_field(sol_path)
        out = os.path.join(cfg.directory, "profile.svg")
        plots.plot_radial_profile(u, out)
        made.append(out)
        out = os.path.join(cfg.directory, "fiber_profile.svg")
        plots.plot_fiber_profile(u, cfg.potential, cfg.problem, out)
        made.append(out)
    sweep_path = os.path.join(cfg.directory, "sweep.csv")
    if os.path.exists(sweep_path):
        rows = _read_sweep_csv(sweep_path)
        out = os.path.join(cfg.directory, "c_a_vs_a.svg")
        plots.plot_mass_sweep([r[0] for r in rows], [r[1] for r in rows], out)
        made.append(out)
    if not made:
        raise ConfigError(
            f"nothing to plot in {cfg.directory!r}: run solve or sweep first")
    for path in made:
        print(f"wrote {path}")
    return 0


def _read_sweep_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        ia, ic = header.index("a"), header.index("c_a")
        for line in fh:
            parts = line.strip().split(",")
            if parts and parts[0]:
                rows.append((float(parts[ia]), float(parts[ic])))
    return rows


def run_command(argv) -> int:
    parser = argparse.ArgumentParser(
        prog="spnorm",
        description="Normalized Schrodinger-Poisson ground states: solve, "
                    "sweep, verify, and check potentials.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep", "check-potential", "constants", "plot"):
        sp = sub.add_parser(name)
        sp.add_argument("config")
        if name == "check-potential":
            sp.add_argument("--c-a", type=float, default=None,
                            help="autonomous level; computed if omitted")
        if name == "constants":
            sp.add_argument("--t", type=float, default=None)
            sp.add_argument("--c-hat", type=float, default=1.0)
            sp.add_argument("--delta", type=float, default=1.0)
    sp = sub.add_parser("verify")
    sp.add_argument("config")
    sp.add_argument("field")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    try:
        cfg = _load_config(args.config)
        if args.command == "solve":
            return _cmd_solve(cfg)
        if args.command == "sweep":
            return _cmd_sweep(cfg)
        if args.command == "verify":
            return _cmd_verify(cfg, args.field)
        if args.command == "check-potential":
            return _cmd_check_potential(cfg, args.c_a)
        if args.command == "constants":
            return _cmd_constants(cfg, args.t, args.c_hat, args.delta)
        if args.command == "plot":
            return _cmd_plot(cfg)
        raise AssertionError(args.command)
    except (ConfigError, FieldFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
