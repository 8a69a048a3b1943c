"""Command-line interface.

Physical inputs are dimensionless by default: beta, Omega, Gamma and delta-beta
in units of U, times in units of 1/U.  With ``--absolute-units`` the same flags
are read as absolute energies and times for the given ``--interaction``.

Settings may also come from a JSON file (``--config``) whose keys are the flag
names with underscores; flags given on the command line take precedence.

Exit status: 0 success, 1 output not writable, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

import numpy as np

from . import analysis, exact, perturbation, rabi
from .dynamics import ProbabilityTrace, propagate, propagate_spectral, spectral_amplitudes
from .errors import NumericalError
from .model import CouplingSchedule, SystemParams, resonant_pairs, unpaired_state

EXIT_OK = 0
EXIT_OUTPUT = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

WORKERS_ENV = "BHDIMER_WORKERS"
SWEEPABLE = ("omega_over_u", "beta_over_u", "gamma_over_u", "delta_beta_over_u", "n_atoms")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass(frozen=True)
class RunConfig:
    command: str = "propagate"
    n_atoms: int = 2
    interaction: float = 1.0
    beta_over_u: float = 0.0
    omega_over_u: float = 0.1
    gamma_over_u: Optional[float] = None
    delta_beta_over_u: float = 0.0
    schedule: str = "const"
    initial: int = 0
    t_end: Optional[float] = None
    dt: Optional[float] = None
    sample_stride: Optional[int] = None
    propagator: str = "rk4"
    n_samples: int = 2001
    fit_state: Optional[int] = None
    t_count: int = 50
    absolute_units: bool = False
    output: Optional[str] = None
    summary: Optional[str] = None
    sweep_param: Optional[str] = None
    sweep_start: Optional[float] = None
    sweep_stop: Optional[float] = None
    sweep_count: int = 1

    # -- unit conversion -------------------------------------------------
    def _energy(self, value: float) -> float:
        return value if self.absolute_units else value * self.interaction

    def _time(self, value: float) -> float:
        return value if self.absolute_units else value / self.interaction

    def time_out(self, t):
        """Times as reported: t*U unless absolute units were requested."""
        return t if self.absolute_units else np.asarray(t) * self.interaction

    @property
    def params(self) -> SystemParams:
        return SystemParams(self.n_atoms, self.interaction, self._energy(self.beta_over_u))

    @property
    def omega(self) -> float:
        return self._energy(self.omega_over_u)

    @property
    def delta_beta(self) -> float:
        return self._energy(self.delta_beta_over_u)

    @property
    def coupling(self) -> CouplingSchedule:
        if self.schedule == "const":
            return CouplingSchedule.constant(self.omega)
        return CouplingSchedule.exponential(self.omega, self._energy(self.gamma_over_u))

    @property
    def t_end_abs(self) -> float:
        return self._time(self.t_end)

    @property
    def dt_abs(self) -> Optional[float]:
        return None if self.dt is None else self._time(self.dt)

    @property
    def detuned_params(self) -> SystemParams:
        p = self.params
        return replace(p, asymmetry=p.asymmetry + self.delta_beta)

    def validate(self) -> "RunConfig":
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ConfigError("n_atoms", f"must be a positive integer, got {self.n_atoms}")
        if not self.interaction > 0:
            raise ConfigError("interaction", f"must be > 0, got {self.interaction}")
        if self.beta_over_u < 0:
            raise ConfigError("beta_over_u", f"must be >= 0, got {self.beta_over_u}")
        if self.omega_over_u < 0:
            raise ConfigError("omega_over_u", f"must be >= 0, got {self.omega_over_u}")
        if self.schedule not in ("const", "exp"):
            raise ConfigError("schedule", f"must be 'const' or 'exp', got {self.schedule!r}")
        if self.schedule == "exp" and (self.gamma_over_u is None or not self.gamma_over_u > 0):
            raise ConfigError("gamma_over_u", "an exponential schedule needs gamma_over_u > 0")
        if self.propagator not in ("rk4", "spectral"):
            raise ConfigError("propagator", f"must be 'rk4' or 'spectral', got {self.propagator!r}")
        if self.propagator == "spectral" and self.schedule != "const":
            raise ConfigError("propagator", "the spectral propagator needs a constant schedule")
        if int(self.initial) != self.initial or not 0 <= self.initial <= self.n_atoms:
            raise ConfigError("initial", f"must be an integer in [0, {self.n_atoms}], got {self.initial}")
        if self.command in ("propagate", "scenarios", "oracle-compare", "sweep"):
            if self.t_end is None or not self.t_end > 0:
                raise ConfigError("t_end", f"must be > 0, got {self.t_end}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("dt", f"must be > 0, got {self.dt}")
        if self.sample_stride is not None and (int(self.sample_stride) != self.sample_stride or self.sample_stride < 1):
            raise ConfigError("sample_stride", f"must be a positive integer, got {self.sample_stride}")
        if self.n_samples < 2:
            raise ConfigError("n_samples", f"must be >= 2, got {self.n_samples}")
        if self.t_count < 1:
            raise ConfigError("t_count", f"must be >= 1, got {self.t_count}")
        if self.fit_state is not None and not 0 <= self.fit_state <= self.n_atoms:
            raise ConfigError("fit_state", f"must be in [0, {self.n_atoms}], got {self.fit_state}")
        if self.command == "sweep":
            if self.sweep_param not in SWEEPABLE:
                raise ConfigError("sweep_param", f"must be one of {', '.join(SWEEPABLE)}, got {self.sweep_param!r}")
            if self.sweep_start is None or self.sweep_stop is None:
                raise ConfigError("sweep_start", "sweep_start and sweep_stop are required")
            if int(self.sweep_count) != self.sweep_count or self.sweep_count < 1:
                raise ConfigError("sweep_count", f"must be an integer >= 1, got {self.sweep_count}")
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, value):
    kind = _FIELD_TYPES[name]
    if value is None:
        return None
    try:
        if "bool" in kind:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if "int" in kind:
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise TypeError
            return int(float(value))
        if "float" in kind:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if "str" in kind:
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        raise ConfigError(name, f"invalid value {value!r}") from None
    return value


def _load_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must hold a JSON object")
    return data


def resolve_config(command: str, flags: dict, config_path: Optional[str] = None) -> RunConfig:
    """Defaults, then the JSON file, then explicit flags."""
    merged: dict = {}
    if config_path:
        for key, value in _load_file(config_path).items():
            key = key.replace("-", "_")
            if key not in _FIELD_TYPES or key == "command":
                raise ConfigError(key, "unknown configuration field")
            merged[key] = value
    merged.update({k: v for k, v in flags.items() if v is not None})
    merged = {k: _coerce(k, v) for k, v in merged.items()}
    return RunConfig(command=command, **merged).validate()


# -- output ---------------------------------------------------------------


def _fmt(x: float) -> str:
    return "%.12g" % x


def trace_csv(trace: ProbabilityTrace, cfg: RunConfig) -> str:
    buf = io.StringIO()
    n = trace.params.n_atoms
    buf.write(",".join(["t"] + [f"p{k}" for k in range(n + 1)] + ["norm_error"]) + "\n")
    times = cfg.time_out(trace.times)
    for t, row, err in zip(times, trace.probabilities, trace.norm_error):
        buf.write(",".join([_fmt(t)] + [_fmt(v) for v in row] + [_fmt(err)]) + "\n")
    return buf.getvalue()


def _emit(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=False, allow_nan=True) + "\n"


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return {"abs": abs(value), "real": value.real, "imag": value.imag}
    return value


# -- subcommands ------------------------------------------------------------


def _run_trace(cfg: RunConfig) -> ProbabilityTrace:
    if cfg.propagator == "spectral":
        return propagate_spectral(cfg.params, cfg.omega, cfg.initial, cfg.t_end_abs, cfg.n_samples)
    return propagate(cfg.params, cfg.coupling, cfg.initial, cfg.t_end_abs, cfg.dt_abs, cfg.sample_stride)


def _fit_summary(trace: ProbabilityTrace, cfg: RunConfig, state: int) -> dict:
    fit = analysis.fit_rabi_frequency(trace, state)
    scale = 1.0 if cfg.absolute_units else 1.0 / cfg.interaction
    return {"state": state, "omega_fit": fit.omega_fit * scale, "amplitude_fit": fit.amplitude_fit, "residual": fit.residual}


def cmd_propagate(cfg: RunConfig) -> dict:
    trace = _run_trace(cfg)
    _emit(trace_csv(trace, cfg), cfg.output)
    summary = {
        "config": asdict(cfg),
        "samples": len(trace),
        "final_norm_error": float(trace.norm_error[-1]),
        "max_norm_error": trace.max_norm_error,
        "final_probabilities": [float(x) for x in trace.probabilities[-1]],
    }
    if cfg.fit_state is not None:
        summary["fit"] = _fit_summary(trace, cfg, cfg.fit_state)
    return summary


def _energy_out(cfg: RunConfig, value: float) -> float:
    return value if cfg.absolute_units else value / cfg.interaction


def cmd_predict(cfg: RunConfig) -> dict:
    params = cfg.params
    pairs = []
    for pair in resonant_pairs(params) if params.is_resonant() else []:
        w = rabi.omega_asymmetric(params, pair.lower, cfg.omega)
        entry = {"lower": pair.lower, "upper": pair.upper, "transferred": pair.transferred, "omega_n": _energy_out(cfg, w)}
        if cfg.delta_beta:
            spec = rabi.detuning(params, pair.lower, cfg.omega, cfg.delta_beta)
            entry["detuned"] = {
                "omega_effective": _energy_out(cfg, spec.effective_omega),
                "transfer_amplitude": spec.transfer_amplitude,
            }
        pairs.append(entry)
    return {
        "config": asdict(cfg),
        "nu": params.nu,
        "resonant": params.is_resonant(),
        "unpaired_state": unpaired_state(params),
        "pairs": pairs,
    }


def cmd_scenarios(cfg: RunConfig) -> dict:
    params, schedule = cfg.params, cfg.coupling
    if not params.is_resonant():
        raise ConfigError("beta_over_u", "scenario amplitudes need a resonant configuration")
    two_nu = round(2 * params.nu)
    n = cfg.initial
    if not 2 * n < two_nu:
        raise ConfigError("initial", f"must be below nu = {params.nu:g} to start a transfer")
    m = two_nu - 2 * n
    grid = np.linspace(cfg.t_end_abs / cfg.t_count, cfg.t_end_abs, cfg.t_count)
    decomposition = None
    if params.asymmetry == 0 and n == 0 and params.n_atoms == 2:
        decomposition = perturbation.scenario_amplitudes_two_atom
    elif params.asymmetry == 0 and n == 0 and params.n_atoms == 3:
        decomposition = perturbation.scenario_amplitudes_three_atom
    nested = None
    if m <= 3:
        t_nested, a_nested = perturbation.nested_amplitude_curve(params, schedule, n, m, cfg.t_end_abs)
        nested = np.interp(grid, t_nested, np.abs(a_nested))
    rows = []
    for k, t in enumerate(grid):
        row = {"T": float(cfg.time_out(t))}
        if decomposition is not None:
            for name, value in decomposition(params, schedule, t).as_dict().items():
                row[name] = abs(value)
        else:
            row["coordinated"] = abs(perturbation.coordinated_amplitude(params, schedule, n, m, t))
        if nested is not None:
            row["nested"] = float(nested[k])
        rows.append(row)
    return {"config": asdict(cfg), "pair": [n, n + m], "rows": rows}


def cmd_oracle_compare(cfg: RunConfig) -> dict:
    if cfg.schedule != "const":
        raise ConfigError("schedule", "oracle comparison needs a constant schedule")
    params = cfg.params
    rk4 = propagate(params, cfg.coupling, cfg.initial, cfg.t_end_abs, cfg.dt_abs, cfg.sample_stride)
    b0 = np.eye(params.n_atoms + 1)[cfg.initial]
    ref = np.abs(spectral_amplitudes(params, cfg.omega, b0, rk4.times)) ** 2
    report = {
        "config": asdict(cfg),
        "max_norm_error_rk4": rk4.max_norm_error,
        "max_norm_error_spectral": float(np.max(np.abs(1 - ref.sum(axis=1)))),
        "max_dev_rk4_spectral": float(np.max(np.abs(rk4.probabilities - ref))),
    }
    if params.asymmetry == 0 and params.n_atoms in (2, 3) and cfg.initial in (0, 1):
        closed = np.abs(exact.closed_form_amplitudes(params, cfg.omega, cfg.initial, rk4.times)) ** 2
        report["max_dev_rk4_exact"] = float(np.max(np.abs(rk4.probabilities - closed)))
        report["max_dev_spectral_exact"] = float(np.max(np.abs(ref - closed)))
    return report


SWEEP_COLUMNS = (
    "value", "n_atoms", "beta_over_u", "omega_over_u", "initial", "fit_state",
    "omega_pred", "omega_fit", "amplitude_fit", "max_norm_error", "status",
)


def _sweep_point(cfg: RunConfig) -> dict:
    row = {
        "value": getattr(cfg, cfg.sweep_param), "n_atoms": cfg.n_atoms, "beta_over_u": cfg.beta_over_u,
        "omega_over_u": cfg.omega_over_u, "initial": cfg.initial, "fit_state": cfg.fit_state,
        "omega_pred": math.nan, "omega_fit": math.nan, "amplitude_fit": math.nan,
        "max_norm_error": math.nan, "status": "ok",
    }
    params = cfg.params
    state = cfg.fit_state
    if params.is_resonant() and 2 * cfg.initial < round(2 * params.nu):
        pair_top = round(2 * params.nu) - cfg.initial
        state = pair_top if state is None else state
        if cfg.delta_beta:
            w = rabi.detuning(params, cfg.initial, cfg.omega, cfg.delta_beta).effective_omega
        else:
            w = rabi.omega_asymmetric(params, cfg.initial, cfg.omega)
        row["omega_pred"] = _energy_out(cfg, w)
    if state is None:
        row["status"] = "no resonant partner"
        return row
    row["fit_state"] = state
    run_cfg = replace(cfg, beta_over_u=cfg.beta_over_u + cfg.delta_beta_over_u, delta_beta_over_u=0.0)
    try:
        trace = _run_trace(run_cfg)
        row["max_norm_error"] = trace.max_norm_error
        fit = _fit_summary(trace, cfg, state)
        row["omega_fit"], row["amplitude_fit"] = fit["omega_fit"], fit["amplitude_fit"]
    except (NumericalError, ValueError) as exc:
        row["status"] = f"failed: {exc}"
    return row


def _worker_count(points: int) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return max(1, min(points, os.cpu_count() or 1))
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(WORKERS_ENV, f"must be an integer, got {raw!r}") from None
    if count < 1:
        raise ConfigError(WORKERS_ENV, f"must be >= 1, got {count}")
    return count


def sweep_points(cfg: RunConfig) -> list[RunConfig]:
    values = np.linspace(cfg.sweep_start, cfg.sweep_stop, cfg.sweep_count)
    points = []
    for v in values:
        v = int(round(v)) if cfg.sweep_param == "n_atoms" else float(v)
        try:
            points.append(replace(cfg, **{cfg.sweep_param: v}).validate())
        except ConfigError as exc:
            raise ConfigError(cfg.sweep_param, f"sweep value {v}: {exc}") from None
    return points


def cmd_sweep(cfg: RunConfig) -> dict:
    points = sweep_points(cfg)
    workers = _worker_count(len(points))
    if workers == 1:
        rows = [_sweep_point(p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, points))  # map keeps axis order
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, float) else ("" if v is None else v) for v in (row[c] for c in SWEEP_COLUMNS)])
    _emit(buf.getvalue(), cfg.output)
    return {"config": asdict(cfg), "points": len(rows), "failed": sum(r["status"] != "ok" for r in rows)}


COMMANDS = {
    "propagate": cmd_propagate,
    "predict": cmd_predict,
    "scenarios": cmd_scenarios,
    "oracle-compare": cmd_oracle_compare,
    "sweep": cmd_sweep,
}


# -- argument parsing ---------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    p.add_argument("--config", default=None, help="JSON file with settings (flags override)")
    p.add_argument("--n-atoms", type=int, default=s)
    p.add_argument("--interaction", type=float, default=s, help="U (default 1)")
    p.add_argument("--beta-over-u", type=float, default=s)
    p.add_argument("--omega-over-u", type=float, default=s)
    p.add_argument("--gamma-over-u", type=float, default=s, help="switch-on rate for --schedule exp")
    p.add_argument("--delta-beta-over-u", type=float, default=s, help="extra detuning of the asymmetry")
    p.add_argument("--schedule", choices=("const", "exp"), default=s)
    p.add_argument("--initial", type=int, default=s, help="initial Fock state n")
    p.add_argument("--absolute-units", action="store_true", default=s,
                   help="read energies and times as absolute values instead of units of U and 1/U")
    p.add_argument("--summary", default=s, help="JSON summary path (default: stdout)")


def _add_time(p: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    p.add_argument("--t-end", type=float, default=s)
    p.add_argument("--dt", type=float, default=s)
    p.add_argument("--sample-stride", type=int, default=s)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bhdimer", description="Collective tunnelling in a Bose-Hubbard dimer")
    sub = parser.add_subparsers(dest="command", required=True)
    s = argparse.SUPPRESS

    p = sub.add_parser("propagate", help="propagate amplitudes, write a CSV trace")
    _add_common(p)
    _add_time(p)
    p.add_argument("--propagator", choices=("rk4", "spectral"), default=s)
    p.add_argument("--n-samples", type=int, default=s, help="samples for the spectral propagator")
    p.add_argument("--fit-state", type=int, default=s, help="fit a Rabi frequency to this state")
    p.add_argument("--output", default=s, help="CSV path (default: stdout)")

    p = sub.add_parser("predict", help="resonant pairs and collective Rabi frequencies")
    _add_common(p)

    p = sub.add_parser("scenarios", help="jump-scenario amplitude magnitudes versus T")
    _add_common(p)
    p.add_argument("--t-end", type=float, default=s)
    p.add_argument("--t-count", type=int, default=s)

    p = sub.add_parser("oracle-compare", help="RK4 against spectral and closed-form references")
    _add_common(p)
    _add_time(p)

    p = sub.add_parser("sweep", help="fit Rabi frequencies over a parameter axis")
    _add_common(p)
    _add_time(p)
    p.add_argument("--propagator", choices=("rk4", "spectral"), default=s)
    p.add_argument("--n-samples", type=int, default=s)
    p.add_argument("--fit-state", type=int, default=s)
    p.add_argument("--sweep-param", choices=SWEEPABLE, default=s)
    p.add_argument("--sweep-start", type=float, default=s)
    p.add_argument("--sweep-stop", type=float, default=s)
    p.add_argument("--sweep-count", type=int, default=s)
    p.add_argument("--output", default=s, help="CSV path (default: stdout)")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        cfg = resolve_config(command, args, config_path)
        summary = COMMANDS[command](cfg)
        if command in ("propagate", "sweep") and cfg.summary is None and cfg.output in (None, "-"):
            return EXIT_OK
        _emit(_json({k: _jsonable(v) for k, v in summary.items()}), cfg.summary)
    except ConfigError as exc:
        print(f"bhdimer: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"bhdimer: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"bhdimer: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"bhdimer: cannot write output: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    return EXIT_OK
