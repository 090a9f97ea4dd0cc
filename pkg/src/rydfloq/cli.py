"""Command-line front end: archivable configs in, hashed tables out.

Runs are described by an INI file (sections and key=value pairs) so a scan
that took hours can be rerun from the artifact it produced. Every emitted
file and every stdout report starts with a ``# config <hash>`` line; the
hash covers the command and all physics and solver values, but neither the
output directory nor the worker count, which by the determinism contract
cannot influence content. Nothing in the pipeline draws random numbers, so
the reserved --seedless flag is an assertion that always holds.

Exit codes: 0 success, 1 usage or config error, 2 numerical failure
(non-convergence, missing threshold, short spectral capture), 3 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass

from .basis import SturmianBasis, build_operators
from .eigensolve import EigenRequest, shift_invert_eigs
from .errors import (
    AccuracyError,
    ConvergenceError,
    InsufficientSpectrumError,
    NoThresholdError,
    SingularShiftError,
    StepSizeError,
)
from .floquet import FloquetConfig, assemble, block_count_heuristic, embed_initial
from .observables import ionization_probability, regime_classify, rotated_initial_state
from .oracle import GridSpec, propagate
from .threshold import (
    ScanPlan,
    SolverSettings,
    auto_basis_size,
    find_threshold,
    initial_state_decomposition,
    run_scan,
    write_csv,
)
from .units import TWO_PI, AtomicParams

WORKERS_ENV = "RYDFLOQ_WORKERS"


class ConfigError(Exception):
    """Config file rejected before any computation started."""


def _int_list(text: str) -> list[int]:
    parts = [p for chunk in text.split(",") for p in chunk.split()]
    if not parts:
        raise ValueError("empty list")
    return [int(p) for p in parts]


# Schema: every key a section may carry, with its parser. Unknown sections
# and keys are rejected outright; a typo must not silently fall back to a
# default in a run that takes hours.
_SECTION_KEYS: dict[str, dict] = {
    "run": {"command": str},
    "drive": {"n0": int, "omega": float, "omega0": float, "F0": float,
              "t_cycles": float, "n_eff": float, "f0_max": float},
    "solver": {"theta": float, "basis_size": int, "block_margin": int,
               "block_cap": int, "ring_windows": int, "n_eigs": int,
               "tol": float, "max_iter": int, "inner_solver": str,
               "capture_target": float},
    "spectrum": {"sigma": float, "k_min": int, "k_max": int},
    "grid": {"x_max": float, "n_points": int, "absorber_start": float,
             "absorber_strength": float, "dt": float, "snapshot": str},
    "scan": {"n0_values": _int_list, "omega": float, "omega0_fixed": float,
             "t_cycles": float, "n_eff": float, "f0_max": float,
             "workers": int},
}

_ALLOWED_SECTIONS = {
    "spectrum": ("run", "drive", "solver", "spectrum"),
    "pion": ("run", "drive", "solver"),
    "threshold": ("run", "drive", "solver"),
    "scan": ("run", "scan", "solver"),
    "oracle": ("run", "drive", "grid"),
}

_REQUIRED = {
    "spectrum": (("drive", "n0"), ("drive", "F0")),
    "pion": (("drive", "n0"), ("drive", "F0"), ("drive", "t_cycles")),
    "threshold": (("drive", "n0"), ("drive", "t_cycles")),
    "scan": (("scan", "n0_values"), ("scan", "t_cycles")),
    "oracle": (("drive", "n0"), ("drive", "F0"), ("drive", "t_cycles"),
               ("grid", "x_max"), ("grid", "n_points"),
               ("grid", "absorber_start"), ("grid", "absorber_strength"),
               ("grid", "dt")),
}

# Keys that are well-typed but contradict the command: a threshold search
# determines F0, a fixed-field run has no field ceiling, a spectrum no clock.
_FORBIDDEN = {
    "spectrum": (("drive", "t_cycles"), ("drive", "f0_max")),
    "pion": (("drive", "f0_max"),),
    "threshold": (("drive", "F0"),),
    "scan": (),
    "oracle": (("drive", "f0_max"),),
}


@dataclass(frozen=True)
class RunConfig:
    """One validated run: the command, its parsed values, and where to write."""

    command: str
    values: dict
    out_dir: str
    workers: int


def config_hash(cfg: RunConfig) -> str:
    payload = {"command": cfg.command, "values": cfg.values}
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _parse_sections(cp: configparser.ConfigParser) -> dict:
    parsed = {}
    for section in cp.sections():
        spec = _SECTION_KEYS.get(section)
        if spec is None:
            raise ConfigError(f"unknown section [{section}]")
        values = {}
        for key in cp[section]:
            if key not in spec:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            try:
                values[key] = spec[key](cp[section][key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key} in [{section}]: {exc}")
        parsed[section] = values
    return parsed


def _check_shape(command: str, parsed: dict) -> None:
    allowed = _ALLOWED_SECTIONS[command]
    for section in parsed:
        if section not in allowed:
            raise ConfigError(f"section [{section}] does not apply to {command!r}")
    for section, key in _REQUIRED[command]:
        if key not in parsed.get(section, {}):
            raise ConfigError(f"{command!r} requires {key} in [{section}]")
    for section, key in _FORBIDDEN[command]:
        if key in parsed.get(section, {}):
            raise ConfigError(f"{command!r} forbids {key} in [{section}]")
    if command == "scan":
        pair = ("omega", "omega0_fixed")
        section = "scan"
    else:
        pair = ("omega", "omega0")
        section = "drive"
    given = [k for k in pair if k in parsed.get(section, {})]
    if len(given) != 1:
        raise ConfigError(f"[{section}] needs exactly one of {pair[0]} and {pair[1]}")


def _resolve_workers(flag: int | None, parsed: dict) -> int:
    # flag beats config beats environment; each stage must be a positive int
    if flag is not None:
        if flag < 1:
            raise ConfigError(f"--workers must be at least 1, got {flag}")
        return flag
    from_config = parsed.get("scan", {}).get("workers")
    if from_config is not None:
        if from_config < 1:
            raise ConfigError(f"workers in [scan] must be at least 1, got {from_config}")
        return from_config
    from_env = os.environ.get(WORKERS_ENV)
    if from_env is not None:
        try:
            n = int(from_env)
        except ValueError:
            n = 0
        if n < 1:
            raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {from_env!r}")
        return n
    return 1


def load_run_config(path, command: str, out_dir: str = ".",
                    workers_flag: int | None = None) -> RunConfig:
    """Read, type-check, and shape-check an INI file for one command.

    With command="validate-config" the file's own [run] command selects the
    schema; otherwise a [run] command, if present, must match the subcommand
    actually invoked, so an archived config cannot be replayed as something
    it never was.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case-sensitive, like the dataclass fields they feed
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc))
    parsed = _parse_sections(cp)

    declared = parsed.get("run", {}).get("command")
    if command == "validate-config":
        if declared is None:
            raise ConfigError("validate-config requires command in [run]")
        target = declared
    else:
        if declared is not None and declared != command:
            raise ConfigError(f"[run] says command = {declared}, but {command!r} was invoked")
        target = command
    if target not in _ALLOWED_SECTIONS:
        raise ConfigError(f"unknown command {target!r} in [run]")

    _check_shape(target, parsed)
    workers = _resolve_workers(workers_flag, parsed)
    values = {s: v for s, v in parsed.items() if s != "run"}
    return RunConfig(command=target, values=values, out_dir=out_dir, workers=workers)


def _num(x: float) -> str:
    return repr(float(x))


def _write_table(path, comment: str, header: str, rows) -> None:
    lines = [f"# {comment}", header]
    lines.extend(",".join(row) for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _drive_params(cfg: RunConfig, time_known: bool = True) -> AtomicParams:
    drive = cfg.values["drive"]
    n0 = drive["n0"]
    omega = drive["omega"] if "omega" in drive else drive["omega0"] / n0**3
    time = drive["t_cycles"] * TWO_PI / omega if time_known else 0.0
    try:
        return AtomicParams(omega=omega, time=time,
                            field=drive.get("F0", 0.0) / n0**4, n0=n0,
                            n_eff=drive.get("n_eff", math.inf))
    except ValueError as exc:
        raise ConfigError(str(exc))


def _solver_settings(cfg: RunConfig) -> SolverSettings:
    try:
        return SolverSettings(**cfg.values.get("solver", {}))
    except ValueError as exc:
        raise ConfigError(str(exc))


def cmd_spectrum(cfg: RunConfig) -> int:
    """Quasi-energy window near the initial state, as a residual-audited CSV."""
    params = _drive_params(cfg, time_known=False)
    settings = _solver_settings(cfg)
    window = cfg.values.get("spectrum", {})
    if ("k_min" in window) != ("k_max" in window):
        raise ConfigError("[spectrum] needs k_min and k_max together")

    size = settings.basis_size or auto_basis_size(params.n0, params.omega)
    ops = build_operators(SturmianBasis(size, float(params.n0)))
    if "k_min" in window:
        k_min, k_max = window["k_min"], window["k_max"]
    else:
        scaled_f0 = params.field * params.n0**4
        k_min, k_max = block_count_heuristic(
            params.n0, params.omega * params.n0**3, scaled_f0, params.n_eff,
            margin=settings.block_margin, cap=settings.block_cap)
    try:
        fcfg = FloquetConfig(theta=settings.theta, k_min=k_min, k_max=k_max,
                             F=params.field, omega=params.omega)
    except ValueError as exc:
        raise ConfigError(str(exc))
    problem = assemble(ops, fcfg)
    initial = embed_initial(problem, rotated_initial_state(ops, params.n0, settings.theta))

    eps0 = -0.5 / params.n0**2
    sigma = complex(window.get("sigma", eps0 * (1.0 + 1e-6)))
    req = EigenRequest(sigma=sigma, n_eigs=settings.n_eigs, tol=settings.tol,
                       max_iter=settings.max_iter, start_vector=initial,
                       inner_solver=settings.inner_solver)
    pairs = shift_invert_eigs(problem, req)
    pairs = sorted(pairs, key=lambda p: (abs(p.epsilon - sigma),
                                         p.epsilon.real, p.epsilon.imag))

    tag = f"config {config_hash(cfg)}"
    path = os.path.join(cfg.out_dir, "spectrum.csv")
    # + 0.0 keeps a signed zero out of the printed gamma column
    rows = ([_num(p.epsilon.real), _num(p.epsilon.imag),
             _num(-2.0 * p.epsilon.imag + 0.0), _num(p.residual)] for p in pairs)
    _write_table(path, tag, "re_eps,im_eps,gamma,residual", rows)
    print(f"# {tag}")
    print(f"wrote {path} ({len(pairs)} eigenpairs)")
    return 0


def cmd_pion(cfg: RunConfig) -> int:
    """Ionization probability plus the spectral decomposition behind it."""
    params = _drive_params(cfg)
    settings = _solver_settings(cfg)
    dec = initial_state_decomposition(params, settings)
    p = 0.0 if params.field == 0.0 else ionization_probability(dec, params.time)

    tag = f"config {config_hash(cfg)}"
    path = os.path.join(cfg.out_dir, "decomposition.csv")
    entries = sorted(dec.entries, key=lambda e: (-e.w2, e.epsilon.real))
    rows = ([_num(e.epsilon.real), _num(e.epsilon.imag), _num(e.gamma), _num(e.w2)]
            for e in entries)
    _write_table(path, tag, "re_eps,im_eps,gamma,weight", rows)
    print(f"# {tag}")
    print(_num(p))
    return 0


def cmd_threshold(cfg: RunConfig) -> int:
    """10%-yield field for one n0, written as a single-row scan CSV."""
    drive = cfg.values["drive"]
    params = _drive_params(cfg)
    record = find_threshold(params.n0, params.omega, drive["t_cycles"],
                            _solver_settings(cfg), n_eff=params.n_eff,
                            f0_max=drive.get("f0_max", 1.0))
    tag = f"config {config_hash(cfg)}"
    path = os.path.join(cfg.out_dir, "threshold.csv")
    write_csv([record], path, comment=tag)
    print(f"# {tag}")
    print(_num(record.F0_threshold))
    return 0


def cmd_scan(cfg: RunConfig) -> int:
    """Threshold scan over n0 with journaling, plus regime-labelled plot data."""
    scan = dict(cfg.values["scan"])
    scan.pop("workers", None)  # already resolved into cfg.workers
    try:
        plan = ScanPlan(settings=_solver_settings(cfg), workers=cfg.workers, **scan)
    except ValueError as exc:
        raise ConfigError(str(exc))

    journal = os.path.join(cfg.out_dir, "scan.jsonl")
    records = run_scan(plan, journal_path=journal)

    tag = f"config {config_hash(cfg)}"
    write_csv(records, os.path.join(cfg.out_dir, "scan.csv"), comment=tag)
    kept = [r for r in records if r.converged]
    for name, column in (("threshold_vs_omega0.csv", lambda r: r.F0_threshold),
                         ("xi_ratio_vs_omega0.csv", lambda r: r.xi_over_n),
                         ("shannon_vs_omega0.csv", lambda r: r.shannon)):
        rows = ([_num(r.omega0), _num(column(r)),
                 regime_classify(r.omega0, r.N_photons)] for r in kept)
        _write_table(os.path.join(cfg.out_dir, name), tag,
                     "omega0,value,regime", rows)
    print(f"# {tag}")
    print(f"wrote {os.path.join(cfg.out_dir, 'scan.csv')} "
          f"({len(kept)} of {len(records)} points converged)")
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    """Grid-propagation cross-check of the ionization probability."""
    drive = cfg.values["drive"]
    params = _drive_params(cfg)
    gridvals = dict(cfg.values["grid"])
    snapshot = gridvals.pop("snapshot", None)
    try:
        grid = GridSpec(**gridvals)
    except ValueError as exc:
        raise ConfigError(str(exc))

    tag = f"config {config_hash(cfg)}"
    snap_path = os.path.join(cfg.out_dir, snapshot) if snapshot else None
    p = propagate(params.n0, params.field, params.omega, drive["t_cycles"],
                  grid, n_eff=drive.get("n_eff"), snapshot_path=snap_path)
    if snap_path is not None:
        with open(snap_path, encoding="utf-8") as fh:
            body = fh.read()
        with open(snap_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# {tag}\n" + body)
    print(f"# {tag}")
    print(_num(p))
    return 0


def cmd_validate_config(cfg: RunConfig) -> int:
    print(f"# config {config_hash(cfg)}")
    print(f"ok {cfg.command}")
    return 0


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "pion": cmd_pion,
    "threshold": cmd_threshold,
    "scan": cmd_scan,
    "oracle": cmd_oracle,
    "validate-config": cmd_validate_config,
}

_NUMERICAL_ERRORS = (ConvergenceError, NoThresholdError, InsufficientSpectrumError,
                     AccuracyError, StepSizeError, SingularShiftError)


class _Parser(argparse.ArgumentParser):
    # usage problems are exit code 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    shared = _Parser(add_help=False)
    shared.add_argument("--config", required=True, help="INI run description")
    shared.add_argument("--out", default=".", help="output directory (default: .)")
    shared.add_argument("--workers", type=int, default=None,
                        help="worker processes for scans; overrides config and "
                             f"the {WORKERS_ENV} environment variable")
    shared.add_argument("--seedless", action="store_true",
                        help="assert that the run draws no random numbers "
                             "(always true; reserved)")
    parser = _Parser(prog="rydfloq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "spectrum": "quasi-energy window as CSV",
        "pion": "ionization probability and decomposition dump",
        "threshold": "ten-percent-yield field for one n0",
        "scan": "threshold scan over n0 with checkpoint journal",
        "oracle": "grid-propagation ionization probability",
        "validate-config": "schema-check a config and print its hash",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[shared], help=text)
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        cfg = load_run_config(args.config, args.command,
                              out_dir=args.out, workers_flag=args.workers)
        os.makedirs(cfg.out_dir, exist_ok=True)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"rydfloq: config error: {exc}", file=sys.stderr)
        return 1
    except _NUMERICAL_ERRORS as exc:
        print(f"rydfloq: numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"rydfloq: i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
