"""Command-line interface: ``tmss {params,evolve,fig2,xcheck}``.

Configuration is a flat UTF-8 file of ``key = value`` lines with ``#``
comments, overridden by repeated ``--set key=value`` options. Exit codes:
0 success, 2 configuration or regime error, 3 numerical failure (including
a failed cross-check).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import __version__
from .analytic import evolve_analytic
from .errors import InvalidArgument, NumericalFailure, OutOfRange, TMSSError, UnsupportedRegime
from .evolution import EvolutionConfig, TimeSeries, default_dt, max_abs_difference, snap_dt
from .fock import BlockDensity, basis_state, make_space
from .gaussian import (cavity_loss_drift, evolve_gaussian, evolve_moments, thermal_cavity_state,
                       vacuum_state)
from .master import default_cutoffs, evolve_me
from .mcwf import TrajectoryConfig, evolve_ensemble
from .model import (ModelParams, PhysicalParams, RegimeWarning, build_hamiltonian, derive_couplings,
                    make_model, model_from_ratio, stark_balance)
from .observables import COLUMNS

HEADER = ("t", "t_over_Tpi") + COLUMNS
METHODS = ("master", "mcwf", "gaussian", "analytic")
FIG2_RATIO = 1.5
FIG2_KAPPAS = ((0.1, "k01"), (0.5, "k05"), (1.0, "k10"))
PHYSICAL_KEYS = ("N1", "N2", "Omega0", "g1", "g2", "Delta0", "Omega1", "lambda1", "lambda2",
                 "Delta_r", "Delta_s", "dispersive_factor")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(InvalidArgument):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Parsed run configuration; ``None`` means not supplied."""

    xi1: Optional[complex] = None
    xi2: Optional[complex] = None
    r: Optional[float] = None
    theta: Optional[float] = None
    theta_over_2pi_hz: Optional[float] = None
    kappa: Optional[float] = None
    kappa_over_theta: Optional[float] = None
    kappa_over_2pi_hz: Optional[float] = None
    kappa_convention: str = "lifetime"
    N1: Optional[float] = None
    N2: Optional[float] = None
    Omega0: Optional[float] = None
    g1: Optional[float] = None
    g2: Optional[float] = None
    Delta0: Optional[float] = None
    Omega1: Optional[float] = None
    lambda1: Optional[float] = None
    lambda2: Optional[float] = None
    Delta_r: Optional[float] = None
    Delta_s: Optional[float] = None
    dispersive_factor: Optional[float] = None
    t_max_over_tpi: float = 2.0
    n_outputs: int = 201
    dt_policy: str = "default"
    cutoffs: Optional[tuple[int, int, int]] = None
    max_jumps: Optional[int] = None
    initial_cavity: str = "vacuum"
    method: Optional[str] = None
    n_traj: int = 500
    master_seed: int = 0
    output_path: Optional[str] = None


def _complex(text: str) -> complex:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) == 1:
        return complex(float(parts[0]), 0.0)
    if len(parts) == 2:
        return complex(float(parts[0]), float(parts[1]))
    raise ValueError(f"expected 're,im', got {text!r}")


def _cutoffs(text: str) -> tuple[int, int, int]:
    parts = tuple(int(p) for p in text.split(","))
    if len(parts) != 3 or min(parts) < 1:
        raise ValueError(f"expected three positive integers, got {text!r}")
    return parts


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise ValueError("master_seed must be a 64-bit unsigned integer")
    return value


_PARSERS = {"xi1": _complex, "xi2": _complex, "cutoffs": _cutoffs, "master_seed": _seed,
            "n_outputs": int, "n_traj": int, "max_jumps": int,
            "kappa_convention": str, "dt_policy": str, "initial_cavity": str, "method": str,
            "output_path": str}
KEYS = tuple(f.name for f in fields(RunConfig))


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into typed values (duplicates rejected)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = _convert(key, value, f"{source}:{lineno}")
    return out


def _convert(key: str, value: str, where: str):
    if key not in KEYS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        return _PARSERS.get(key, float)(value)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key}: {exc}") from None


def load_config(path: Optional[str] = None, overrides: tuple[str, ...] = ()) -> RunConfig:
    values = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                values = parse_config(fh.read(), path)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        values[key] = _convert(key, value, "--set")
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def config_from_footer(path: str) -> RunConfig:
    """Rebuild the run configuration from the provenance footer of a CSV."""
    lines = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# ") and " = " in line and not line.startswith("# run."):
                lines.append(line[2:])
    cfg = RunConfig(**parse_config("".join(lines), path))
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.method is not None and cfg.method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {cfg.method!r}")
    if cfg.n_outputs < 2:
        raise ConfigError("n_outputs must be >= 2")
    if cfg.n_traj < 1:
        raise ConfigError("n_traj must be >= 1")
    if not cfg.t_max_over_tpi > 0:
        raise ConfigError("t_max_over_tpi must be positive")
    if cfg.dt_policy != "default":
        try:
            ok = float(cfg.dt_policy) > 0
        except ValueError:
            ok = False
        if not ok:
            raise ConfigError("dt_policy must be 'default' or a positive dt/T_pi")
    _initial(cfg)


def _initial(cfg: RunConfig) -> tuple[str, float]:
    kind, _, arg = cfg.initial_cavity.partition(":")
    if kind == "vacuum" and not arg:
        return "fock", 0
    try:
        if kind == "fock":
            n = int(arg)
            if n >= 0:
                return "fock", n
        if kind == "thermal":
            nbar = float(arg)
            if nbar >= 0:
                return "thermal", nbar
    except ValueError:
        pass
    raise ConfigError(f"initial_cavity must be vacuum, fock:<n> or thermal:<nbar>, got {cfg.initial_cavity!r}")


def _set(cfg: RunConfig, *names) -> list[str]:
    return [n for n in names if getattr(cfg, n) is not None]


def physical_units(cfg: RunConfig) -> bool:
    return bool(_set(cfg, "theta_over_2pi_hz", "kappa_over_2pi_hz", *PHYSICAL_KEYS))


def physical_params(cfg: RunConfig) -> Optional[PhysicalParams]:
    given = _set(cfg, *PHYSICAL_KEYS)
    if not given:
        return None
    missing = [k for k in PHYSICAL_KEYS[:6] if getattr(cfg, k) is None]
    if missing:
        raise ConfigError(f"physical parameters incomplete, missing {missing}")
    return PhysicalParams(**{k: getattr(cfg, k) for k in given})


def build_model(cfg: RunConfig) -> ModelParams:
    """Exactly one coupling source: (xi1, xi2), r with a scale, or chip parameters."""
    sources = []
    if _set(cfg, "xi1", "xi2"):
        sources.append("xi1/xi2")
    if _set(cfg, "r", "theta", "theta_over_2pi_hz"):
        sources.append("r")
    if _set(cfg, *PHYSICAL_KEYS[:6]):
        sources.append("physical")
    if len(sources) != 1:
        raise ConfigError(f"specify couplings by exactly one of xi1/xi2, r (+ theta or "
                          f"theta_over_2pi_hz), or physical parameters; got {sources or 'none'}")
    kappa_keys = _set(cfg, "kappa", "kappa_over_theta", "kappa_over_2pi_hz")
    if len(kappa_keys) > 1:
        raise ConfigError(f"ambiguous decay rate: {kappa_keys}")
    conv = cfg.kappa_convention
    if sources[0] == "xi1/xi2":
        if cfg.xi1 is None or cfg.xi2 is None:
            raise ConfigError("both xi1 and xi2 are required")
        m = ModelParams(cfg.xi1, cfg.xi2, 0.0, conv)
    elif sources[0] == "r":
        if cfg.r is None:
            raise ConfigError("r is required with theta or theta_over_2pi_hz")
        scales = _set(cfg, "theta", "theta_over_2pi_hz")
        if len(scales) > 1:
            raise ConfigError("give theta or theta_over_2pi_hz, not both")
        theta = cfg.theta if cfg.theta is not None else (
            2 * math.pi * cfg.theta_over_2pi_hz if cfg.theta_over_2pi_hz is not None else 1.0)
        m = model_from_ratio(cfg.r, theta, 0.0, conv)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            c = derive_couplings(physical_params(cfg))
        m = make_model(c.beta1, c.beta2, 0.0, conv)
    kappa = 0.0
    if cfg.kappa is not None:
        kappa = cfg.kappa
    elif cfg.kappa_over_theta is not None:
        kappa = cfg.kappa_over_theta * m.theta
    elif cfg.kappa_over_2pi_hz is not None:
        kappa = 2 * math.pi * cfg.kappa_over_2pi_hz
    return m.with_kappa(kappa)


def evolution_config(cfg: RunConfig, m: ModelParams) -> EvolutionConfig:
    t_max = cfg.t_max_over_tpi * m.T_pi
    spacing = t_max / (cfg.n_outputs - 1)
    if cfg.dt_policy == "default":
        dt = default_dt(m.theta, m.loss_rate, spacing)
    else:
        dt = snap_dt(float(cfg.dt_policy) * m.T_pi, spacing)
    return EvolutionConfig(t_max, cfg.n_outputs, dt)


# ---------------------------------------------------------------- running

def run_method(cfg: RunConfig, m: ModelParams, method: str) -> TimeSeries:
    config = evolution_config(cfg, m)
    target = (m.r, m.squeeze_phase)
    kind, value = _initial(cfg)
    if method == "analytic":
        if m.loss_rate > 0:
            raise UnsupportedRegime("method analytic requires kappa = 0")
        if (kind, value) != ("fock", 0):
            raise UnsupportedRegime("method analytic requires the vacuum initial state")
        return evolve_analytic(m, config, target=target)
    if method == "gaussian":
        if kind == "fock" and value != 0:
            raise UnsupportedRegime("a cavity Fock state is not Gaussian; use master or mcwf")
        s0 = thermal_cavity_state(value) if kind == "thermal" else vacuum_state()
        return evolve_gaussian(m, s0, config, target=target)
    cutoffs = cfg.cutoffs or default_cutoffs(m.r)
    space = make_space(cutoffs)
    if kind == "fock" and value > cutoffs[0]:
        raise ConfigError(f"initial cavity Fock state {value} exceeds cutoff {cutoffs[0]}")
    H = build_hamiltonian(m, space)
    if method == "master":
        rho0 = (BlockDensity.thermal_cavity(space, value) if kind == "thermal"
                else basis_state(space, (int(value), 0, 0)))
        return evolve_me(H, m.loss_rate, rho0, config, space=space, target=target,
                         max_jumps=cfg.max_jumps)
    if method == "mcwf":
        if kind == "thermal":
            raise UnsupportedRegime("mcwf needs a pure initial state")
        tc = TrajectoryConfig(config, cfg.n_traj, cfg.master_seed)
        return evolve_ensemble(H, m.loss_rate, basis_state(space, (int(value), 0, 0)), tc,
                               space=space, target=target)
    raise ConfigError(f"unknown method {method!r}")


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def footer_lines(cfg: RunConfig, ts: TimeSeries, extra: Optional[dict] = None) -> list[str]:
    """``# key = value`` lines: the full configuration, then ``run.*`` metadata."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if f.name in ("xi1", "xi2"):
            value = f"{value.real!r},{value.imag!r}"
        elif f.name == "cutoffs":
            value = ",".join(str(c) for c in value)
        lines.append(f"# {f.name} = {value}")
    info = {"code_version": f"tmss {__version__}", "method": ts.method,
            "params_hash": ts.params_hash}
    for key in ("dt", "cutoffs", "n_traj", "master_seed", "jumps", "stepper"):
        if key in ts.meta:
            value = ts.meta[key]
            info[key] = ",".join(map(str, value)) if isinstance(value, tuple) else value
    info.update(extra or {})
    lines += [f"# run.{k} = {v}" for k, v in info.items()]
    return lines


def write_csv(ts: TimeSeries, m: ModelParams, cfg: RunConfig, out) -> None:
    """CSV body plus footer; ``t`` is in seconds for physical input, else in units of 1/Theta."""
    seconds = physical_units(cfg)
    scale = 1.0 if seconds else m.theta
    header = list(HEADER)
    if ts.errors is not None:
        header += [f"{c}_se" for c in COLUMNS]
    out.write(",".join(header) + "\n")
    cols = [ts.column(c) for c in COLUMNS]
    errs = [np.asarray(ts.errors[c], dtype=float) for c in COLUMNS] if ts.errors is not None else []
    for i, t in enumerate(ts.times):
        row = [_fmt(t * scale), _fmt(t / m.T_pi)] + [_fmt(c[i]) for c in cols] + [_fmt(e[i]) for e in errs]
        out.write(",".join(row) + "\n")
    for line in footer_lines(cfg, ts, {"time_unit": "s" if seconds else "1/Theta"}):
        out.write(line + "\n")


def _open_output(path: Optional[str]):
    if path is None or path == "-":
        return sys.stdout, False
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="\n"), True


# ---------------------------------------------------------------- commands

def cmd_params(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    m = build_model(cfg)
    seconds = physical_units(cfg)
    unit = "s" if seconds else "(1/[xi])"
    rate = "rad/s" if seconds else "[xi]"

    def line(key, value, note=""):
        out.write(f"{key:<22} = {value}{('  ' + note) if note else ''}\n")

    def c(z):
        return f"{z.real:.6g}{z.imag:+.6g}j"

    line("beta1", c(1j * m.xi1), rate)
    line("beta2", c(1j * m.xi2), rate)
    line("xi1", c(m.xi1), rate)
    line("xi2", c(m.xi2), rate)
    line("Theta", f"{m.theta:.6g}", rate)
    line("Theta_over_2pi", f"{m.theta / (2 * math.pi):.6g}", "Hz" if seconds else "")
    line("T_pi", f"{m.T_pi:.6g}", unit)
    line("r", f"{m.r:.6g}")
    line("epsilon", f"{m.epsilon:.6g}")
    line("nbar", f"{m.mean_pair_occupation:.6g}", "sinh^2(epsilon)")
    line("kappa", f"{m.kappa:.6g}", rate)
    line("loss_rate", f"{m.loss_rate:.6g}", f"{rate} ({m.kappa_convention} convention)")
    if m.kappa > 0:
        line("kappa_over_2pi", f"{m.kappa / (2 * math.pi):.6g}", "Hz" if seconds else "")
        line("photon_lifetime", f"{1 / m.loss_rate:.6g}", f"{unit} (1/loss_rate)")
        line("kappa_over_Theta", f"{m.kappa / m.theta:.6g}")
    p = physical_params(cfg)
    if p is None:
        line("stark_residual_g", "n/a", "(effective parameters supplied)")
        line("dispersive_ratios", "n/a")
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            res = stark_balance(p)
        line("stark_residual_g", f"{res.residual_g:.6g}", rate)
        line("stark_residual_h", ", ".join(f"{v:.6g}" for v in res.residual_h), rate)
        line("stark_balanced", str(res.balanced))
        ratios = p.dispersive_ratios()
        line("dispersive_ratios", ", ".join(f"{k}:{v:.4g}" for k, v in ratios.items()))
        line("dispersive", str(p.dispersive))
    return EXIT_OK


def cmd_evolve(cfg: RunConfig) -> int:
    m = build_model(cfg)
    method = cfg.method or "master"
    ts = run_method(cfg, m, method)
    out, close = _open_output(cfg.output_path)
    try:
        write_csv(ts, m, cfg, out)
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_fig2(cfg: RunConfig) -> int:
    """Three curves at r = 1.5 plus a combined plot-data file."""
    if cfg.r is not None and cfg.r != FIG2_RATIO or _set(cfg, "xi1", "xi2", *PHYSICAL_KEYS):
        raise ConfigError("fig2 fixes r = 1.5; give only a scale (theta or theta_over_2pi_hz)")
    if _set(cfg, "kappa", "kappa_over_theta", "kappa_over_2pi_hz"):
        raise ConfigError("fig2 fixes kappa/Theta in {0.1, 0.5, 1}")
    method = cfg.method or "gaussian"
    if method == "analytic":
        raise ConfigError("fig2 needs a dissipative method: master, mcwf or gaussian")
    outdir = cfg.output_path or "."
    os.makedirs(outdir, exist_ok=True)
    curves = []
    for kot, tag in FIG2_KAPPAS:
        run_cfg = replace(cfg, r=FIG2_RATIO, kappa_over_theta=kot, method=method, output_path=None)
        m = build_model(run_cfg)
        ts = run_method(run_cfg, m, method)
        with open(os.path.join(outdir, f"fig2_{tag}.csv"), "w", encoding="utf-8", newline="\n") as fh:
            write_csv(ts, m, run_cfg, fh)
        curves.append((tag, ts, m))
    with open(os.path.join(outdir, "fig2_combined.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t_over_Tpi," + ",".join(f"zeta12_{tag}" for tag, _, _ in curves) + "\n")
        m0 = curves[0][2]
        cols = [ts.column("zeta12") for _, ts, _ in curves]
        for i, t in enumerate(curves[0][1].times):
            fh.write(",".join([_fmt(t / m0.T_pi)] + [_fmt(c[i]) for c in cols]) + "\n")
        fh.write(f"# run.code_version = tmss {__version__}\n# run.method = {method}\n")
        fh.write(f"# r = {FIG2_RATIO}\n# kappa_over_theta = " + ",".join(str(k) for k, _ in FIG2_KAPPAS) + "\n")
    for tag, ts, m in curves:
        sys.stdout.write(f"{tag}: zeta12(T_pi) = {_fmt(ts.at(m.T_pi).zeta12)}\n")
    return EXIT_OK


# ---------------------------------------------------------------- cross-checks

@dataclass
class Check:
    name: str
    delta: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.delta <= self.tolerance


def _pairwise(series: dict[str, TimeSeries], columns, tol) -> list[Check]:
    names = list(series)
    out = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            for c in columns:
                out.append(Check(f"{a} vs {b}: {c}", max_abs_difference(series[a], series[b], c), tol))
    return out


def xcheck_closed_tmsv_r2(cfg: RunConfig) -> list[Check]:
    run = replace(cfg, r=2.0, kappa=None, kappa_over_theta=None, kappa_over_2pi_hz=None,
                  xi1=None, xi2=None, initial_cavity="vacuum")
    m = build_model(run)
    series = {method: run_method(run, m, method) for method in ("master", "gaussian", "analytic")}
    return _pairwise(series, ("zeta12", "n_cav", "n_1", "n_2"), 1e-3)


def xcheck_decay_smoke(cfg: RunConfig) -> list[Check]:
    """H = 0, cavity |1> (master) and thermal nbar = 1 (gaussian): n_cav = exp(-kappa t)."""
    kappa = 1.0
    config = EvolutionConfig(5.0, 51, 0.01)
    exact = np.exp(-kappa * config.times)
    space = make_space((1, 1, 1))
    H = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    me = evolve_me(H, kappa, basis_state(space, (1, 0, 0)), config, space=space)
    A, D = cavity_loss_drift(kappa)
    g = evolve_moments(A, D, thermal_cavity_state(1.0), config)
    return [Check("master n_cav vs exp(-kappa t)", float(np.max(np.abs(me.column("n_cav") - exact))), 1e-8),
            Check("gaussian n_cav vs exp(-kappa t)", float(np.max(np.abs(g.column("n_cav") - exact))), 1e-8)]


def mcwf_agreement(mc: TimeSeries, me: TimeSeries, column: str = "zeta12",
                   floor: float = 1e-5) -> tuple[float, np.ndarray]:
    """Fraction of grid points with |mcwf - master| <= 3 SE + floor (defined points only)."""
    x, y = mc.column(column), me.column(column)
    se = np.asarray(mc.errors[column], dtype=float)
    ok = ~(np.isnan(x) | np.isnan(y))
    within = np.abs(x[ok] - y[ok]) <= 3 * se[ok] + floor
    return float(np.mean(within)), within


def xcheck_mcwf_consistency(cfg: RunConfig) -> list[Check]:
    run = replace(cfg, r=1.5, kappa=None, kappa_over_theta=0.5, kappa_over_2pi_hz=None,
                  xi1=None, xi2=None, initial_cavity="vacuum")
    m = build_model(run)
    me = run_method(run, m, "master")
    mc = run_method(run, m, "mcwf")
    frac, _ = mcwf_agreement(mc, me)
    return [Check(f"mcwf ({run.n_traj} traj) vs master: zeta12 points outside 3 SE (fraction)",
                  1.0 - frac, 0.05)]


SCENARIOS = {"closed-tmsv-r2": xcheck_closed_tmsv_r2, "decay-smoke": xcheck_decay_smoke,
             "mcwf-consistency": xcheck_mcwf_consistency}


def cmd_xcheck(cfg: RunConfig, scenario: str) -> int:
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}")
    checks = SCENARIOS[scenario](cfg)
    for c in checks:
        sys.stdout.write(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.delta:.3e} (tol {c.tolerance:.1e})\n")
    ok = all(c.passed for c in checks)
    summary = {"scenario": scenario, "passed": ok,
               "checks": [{"name": c.name, "delta": c.delta, "tolerance": c.tolerance,
                           "passed": c.passed} for c in checks]}
    sys.stdout.write("SUMMARY " + json.dumps(summary, sort_keys=True) + "\n")
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
    return EXIT_OK if ok else EXIT_NUMERICAL


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tmss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tmss {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("params", "print derived model parameters"),
                       ("evolve", "run one evolution and write a CSV"),
                       ("fig2", "ζ12 curves at r = 1.5 for κ/Θ = 0.1, 0.5, 1"),
                       ("xcheck", "cross-check solvers on a built-in scenario")):
        p = sub.add_parser(name, help=text)
        if name == "xcheck":
            p.add_argument("scenario", help=", ".join(SCENARIOS))
        p.add_argument("-c", "--config", help="key = value configuration file")
        p.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration key (repeatable)")
        p.add_argument("-o", "--output", help="output path (same as output_path)")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = list(args.set) + ([f"output_path={args.output}"] if args.output else [])
        cfg = load_config(args.config, tuple(overrides))
        if args.command == "params":
            return cmd_params(cfg)
        if args.command == "evolve":
            return cmd_evolve(cfg)
        if args.command == "fig2":
            return cmd_fig2(cfg)
        return cmd_xcheck(cfg, args.scenario)
    except (InvalidArgument, UnsupportedRegime, OutOfRange) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except NumericalFailure as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except TMSSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
