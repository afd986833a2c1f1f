"""Command-line front end: check, simulate, sweep and gait pipelines.

Exit codes: 0 success, 1 usage error, 2 input diagnostics (netlist or
config problems), 3 numerical failure.  All output files are written
atomically (temp file then rename) so interrupted runs never leave
truncated CSVs, and a fixed seed makes every output byte-identical
across reruns on one platform.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, example_path
from .analysis import analyze, sweep, wave_direction
from .dynamics import (
    AssemblyError,
    Perturbation,
    SolverConfig,
    SolverError,
    assemble,
    initial_state,
    integrate,
    read_trace_csv,
)
from .electromech import PullInError
from .locomotion import FootModel, simulate_gait, speed
from .netlist import parse, parse_quantity, print_canonical, validate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; this CLI reserves 2 for
    # input diagnostics, so route parser errors through UsageError.
    def error(self, message):
        raise UsageError(message)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _quantity(text: str) -> float:
    try:
        return parse_quantity(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _parse_range(spec: str) -> tuple[str, list[float]]:
    """``NAME=lo:hi:count`` with unit suffixes, inclusive linear grid."""
    if "=" not in spec:
        raise UsageError(f"range {spec!r} must look like NAME=lo:hi:count")
    name, _, body = spec.partition("=")
    name = name.strip().upper()
    if name not in ("RS", "VS"):
        raise UsageError(f"unknown sweep axis {name!r} (use RS or VS)")
    parts = body.split(":")
    if len(parts) != 3 or not all(p.strip() for p in parts):
        raise UsageError(f"range {spec!r} must look like NAME=lo:hi:count")
    lo = _quantity(parts[0])
    hi = _quantity(parts[1])
    try:
        count = int(parts[2])
    except ValueError:
        raise UsageError(f"range count in {spec!r} must be an integer") from None
    if count < 1:
        raise UsageError("range count must be at least 1")
    if count == 1:
        if lo != hi:
            raise UsageError("a single-point range needs lo == hi")
        return name, [lo]
    if hi <= lo:
        raise UsageError("range must be strictly increasing")
    return name, [float(v) for v in np.linspace(lo, hi, count)]


def _load_config(path: Path) -> dict[str, list[str]]:
    if not path.is_file():
        raise InputError(f"{path}: config file not found")
    out: dict[str, list[str]] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        out.setdefault(key.strip().lower(), []).append(value.strip())
    return out

_CONFIG_KEYS = {
    "netlist", "out", "vs", "duration", "rtol", "atol-charge", "atol-strain",
    "max-step", "sample-interval", "method", "perturb", "seed", "vary",
    "workers", "rest-length", "stride-gain", "engage", "release", "trace",
}


@dataclass
class RunConfig:
    netlist: str | None = None
    netlist_base: Path = field(default_factory=Path.cwd)
    out: Path = field(default_factory=Path.cwd)
    vs: float | None = None
    duration: float = 40.0
    rtol: float = 1e-6
    atol_charge: float = 1e-12
    atol_strain: float = 1e-9
    max_step: float = 0.05
    sample_interval: float = 1e-3
    method: str = "Radau"
    perturb: str = "auto"
    seed: int = 0
    vary: list[tuple[str, list[float]]] = field(default_factory=list)
    workers: int = 1
    foot_overrides: dict[str, float] = field(default_factory=dict)
    trace: str | None = None

    def solver_config(self, perturbation: Perturbation) -> SolverConfig:
        return SolverConfig(
            rtol=self.rtol,
            atol_charge=self.atol_charge,
            atol_strain=self.atol_strain,
            max_step=self.max_step,
            sample_interval=self.sample_interval,
            t_end=self.duration,
            perturbation=perturbation,
            method=self.method,
        )


def _apply_config_file(cfg: RunConfig, path: Path):
    values = _load_config(path)
    unknown = sorted(set(values) - _CONFIG_KEYS)
    if unknown:
        raise InputError(f"{path}: unknown config keys: {', '.join(unknown)}")
    base = path.parent

    def last(key):
        return values[key][-1]

    if "netlist" in values:
        cfg.netlist = last("netlist")
        cfg.netlist_base = base
    if "trace" in values:
        cfg.trace = str((base / last("trace")))
    if "out" in values:
        cfg.out = base / last("out")
    if "vs" in values:
        cfg.vs = _quantity(last("vs"))
    if "duration" in values:
        cfg.duration = _quantity(last("duration"))
    if "rtol" in values:
        cfg.rtol = _quantity(last("rtol"))
    if "atol-charge" in values:
        cfg.atol_charge = _quantity(last("atol-charge"))
    if "atol-strain" in values:
        cfg.atol_strain = _quantity(last("atol-strain"))
    if "max-step" in values:
        cfg.max_step = _quantity(last("max-step"))
    if "sample-interval" in values:
        cfg.sample_interval = _quantity(last("sample-interval"))
    if "method" in values:
        cfg.method = last("method")
    if "perturb" in values:
        cfg.perturb = last("perturb")
    if "seed" in values:
        cfg.seed = int(last("seed"))
    if "workers" in values:
        cfg.workers = int(last("workers"))
    if "vary" in values:
        cfg.vary = [_parse_range(v) for v in values["vary"]]
    for key, attr in (
        ("rest-length", "length"),
        ("stride-gain", "gain"),
        ("engage", "engage"),
        ("release", "release"),
    ):
        if key in values:
            cfg.foot_overrides[attr] = _quantity(last(key))


def _apply_args(cfg: RunConfig, args: argparse.Namespace):
    if getattr(args, "netlist", None) is not None:
        cfg.netlist = args.netlist
        cfg.netlist_base = Path.cwd()
    if getattr(args, "trace", None) is not None:
        cfg.trace = args.trace
    if getattr(args, "out", None) is not None:
        cfg.out = Path(args.out)
    for flag, attr in (
        ("vs", "vs"),
        ("duration", "duration"),
        ("rtol", "rtol"),
        ("atol_charge", "atol_charge"),
        ("atol_strain", "atol_strain"),
        ("max_step", "max_step"),
        ("sample_interval", "sample_interval"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, _quantity(value))
    if getattr(args, "method", None) is not None:
        cfg.method = args.method
    if getattr(args, "perturb", None) is not None:
        cfg.perturb = args.perturb
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "vary", None):
        cfg.vary = [_parse_range(v) for v in args.vary]
    for flag, attr in (
        ("rest_length", "length"),
        ("stride_gain", "gain"),
        ("engage", "engage"),
        ("release", "release"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            cfg.foot_overrides[attr] = _quantity(value)


def _resolve_netlist(cfg: RunConfig) -> tuple[str, str]:
    """Return (source text, display name); bare names fall back to the
    bundled examples."""
    if not cfg.netlist:
        raise InputError("no netlist given (use --netlist or a config file)")
    candidate = Path(cfg.netlist)
    if not candidate.is_absolute():
        candidate = cfg.netlist_base / candidate
    if candidate.is_file():
        return candidate.read_text(), str(cfg.netlist)
    if os.sep not in cfg.netlist:
        try:
            return example_path(cfg.netlist).read_text(), cfg.netlist
        except FileNotFoundError:
            pass
    raise InputError(f"{cfg.netlist}: netlist file not found")


def _load_circuit(cfg: RunConfig):
    text, name = _resolve_netlist(cfg)
    parsed = parse(text)
    result = validate(parsed.ast) if parsed.ok else None
    diagnostics = parsed.diagnostics + (result.diagnostics if result else [])
    if not parsed.ok or result.model is None:
        for diag in diagnostics:
            print(diag.render(name), file=sys.stderr)
        raise InputError(f"{name}: netlist has errors")
    model = result.model
    if cfg.vs is not None:
        model = model.with_supply_voltage(cfg.vs)
    if cfg.foot_overrides:
        feet = []
        for foot in model.feet:
            feet.append(
                FootModel(
                    dea_left=foot.dea_left,
                    dea_right=foot.dea_right,
                    rest_length=cfg.foot_overrides.get("length", foot.rest_length),
                    stride_gain=cfg.foot_overrides.get("gain", foot.stride_gain),
                    engage_strain=cfg.foot_overrides.get("engage", foot.engage_strain),
                    release_strain=cfg.foot_overrides.get(
                        "release", foot.release_strain
                    ),
                    name=foot.name,
                )
            )
        model.feet = feet
    return model, name


def _perturbation(cfg: RunConfig, model) -> Perturbation:
    spec = cfg.perturb.strip()
    if spec in ("", "auto"):
        return Perturbation(seed=cfg.seed)
    if spec == "none":
        return Perturbation(charge_fractions={}, seed=cfg.seed)
    if spec.startswith("jitter="):
        return Perturbation(jitter=_quantity(spec[len("jitter="):]), seed=cfg.seed)
    fractions = {}
    for item in spec.split(","):
        if "=" not in item:
            raise UsageError(
                f"--perturb expects 'auto', 'none', 'jitter=<frac>' or "
                f"'DEA=<frac>[,...]', got {cfg.perturb!r}"
            )
        name, _, value = item.partition("=")
        fractions[name.strip()] = _quantity(value)
    return Perturbation(charge_fractions=fractions, seed=cfg.seed)


# --------------------------------------------------------------------------
# Subcommands


def cmd_check(args) -> int:
    path = Path(args.netlist)
    if path.is_file():
        text, name = path.read_text(), str(path)
    elif os.sep not in args.netlist:
        try:
            text, name = example_path(args.netlist).read_text(), args.netlist
        except FileNotFoundError:
            print(f"{args.netlist}: netlist file not found", file=sys.stderr)
            return EXIT_INPUT
    else:
        print(f"{args.netlist}: netlist file not found", file=sys.stderr)
        return EXIT_INPUT
    parsed = parse(text)
    diagnostics = list(parsed.diagnostics)
    model = None
    if parsed.ok:
        result = validate(parsed.ast)
        diagnostics += result.diagnostics
        model = result.model
    for diag in diagnostics:
        print(diag.render(name), file=sys.stderr)
    if not parsed.ok or model is None:
        return EXIT_INPUT
    sys.stdout.write(print_canonical(parsed.ast))
    return EXIT_OK


def _report_lines(cfg: RunConfig, name: str, report, trace, gait_speed, wave) -> list[str]:
    lines = [
        f"netlist = {name}",
        f"duration_s = {cfg.duration!r}",
        f"seed = {cfg.seed}",
        f"backend = {trace.backend}",
    ]
    lines += report.to_kv_lines()
    if gait_speed is not None:
        lines.append(f"speed_mps = {gait_speed!r}")
    if wave is not None:
        lines.append(f"wave_direction = {wave:+d}")
        lines.append("travel_direction = +1")
    return lines


def cmd_simulate(cfg: RunConfig) -> int:
    model, name = _load_circuit(cfg)
    perturbation = _perturbation(cfg, model)
    system = assemble(model)
    trace = integrate(system, cfg.solver_config(perturbation),
                      initial_state(model, perturbation))
    report = analyze(trace)

    gait_speed = None
    wave = None
    gait = None
    if model.feet:
        gait = simulate_gait(trace, model.feet)
        window_start = report.settling_time_s if report.oscillating else 0.0
        gait_speed = speed(gait, t_start=window_start)
        if report.oscillating:
            chain = [model.feet[0].dea_left] + [f.dea_right for f in model.feet]
            wave = wave_direction(trace, chain, window_start)

    _atomic_write(cfg.out / "trace.csv", trace.to_csv())
    if gait is not None:
        _atomic_write(cfg.out / "gait.csv", gait.to_csv())
    _atomic_write(
        cfg.out / "report.txt",
        "\n".join(_report_lines(cfg, name, report, trace, gait_speed, wave)) + "\n",
    )
    verdict = "oscillating" if report.oscillating else "not oscillating"
    print(f"{name}: {verdict}; outputs in {cfg.out}")
    return EXIT_OK


def _sweep_plot(result, primary: str, path: Path):
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "deasim"
    import matplotlib.pyplot as plt

    rs_axis = result.rs_values
    vs_axis = result.vs_values
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if primary == "RS":
        x_values, series, x_label, s_label = rs_axis, vs_axis, "R_S (ohm)", "V_S"
    else:
        x_values, series, x_label, s_label = vs_axis, rs_axis, "V_S (V)", "R_S"
    for j, s_value in enumerate(series):
        xs, ys = [], []
        for i, x in enumerate(x_values):
            cell = (
                result.cell(i, j) if primary == "RS" else result.cell(j, i)
            )
            if cell.freq_hz is not None:
                xs.append(x)
                ys.append(cell.freq_hz)
        label = "netlist" if s_value is None else f"{s_label}={s_value:g}"
        ax.plot(xs, ys, marker="o", label=label)
    ax.set_xlabel(x_label)
    ax.set_ylabel("frequency (Hz)")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_sweep(cfg: RunConfig) -> int:
    if not cfg.vary:
        raise UsageError("sweep requires at least one --vary axis")
    axes = dict(cfg.vary)
    if len(axes) != len(cfg.vary):
        raise UsageError("each axis may be given only once")
    model, name = _load_circuit(cfg)
    perturbation = _perturbation(cfg, model)
    result = sweep(
        model,
        rs_values=axes.get("RS"),
        vs_values=axes.get("VS"),
        config=cfg.solver_config(perturbation),
        workers=cfg.workers,
    )
    _atomic_write(cfg.out / "sweep.csv", result.to_csv())
    primary = cfg.vary[0][0]
    _sweep_plot(result, primary, cfg.out / "sweep.svg")
    n_osc = sum(1 for c in result.cells if c.oscillating)
    print(
        f"{name}: swept {len(result.cells)} cells "
        f"({n_osc} oscillating); outputs in {cfg.out}"
    )
    return EXIT_OK


def cmd_gait(cfg: RunConfig) -> int:
    model, name = _load_circuit(cfg)
    if not model.feet:
        raise InputError(f"{name}: netlist defines no feet")
    if not cfg.trace:
        raise UsageError("gait requires --trace pointing at a trace CSV")
    trace_path = Path(cfg.trace)
    if not trace_path.is_file():
        raise InputError(f"{cfg.trace}: trace file not found")
    trace = read_trace_csv(trace_path.read_text())
    gait = simulate_gait(trace, model.feet)
    _atomic_write(cfg.out / "gait.csv", gait.to_csv())
    print(f"{name}: gait derived from {cfg.trace}; outputs in {cfg.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Argument wiring


def _add_common(sub: argparse.ArgumentParser, with_netlist: bool = True):
    if with_netlist:
        sub.add_argument("--netlist", help="netlist file (bare names resolve "
                                           "to bundled examples)")
    sub.add_argument("--config", help="flat key=value config file; explicit "
                                      "flags win on conflict")
    sub.add_argument("--out", help="output directory (default: current)")
    sub.add_argument("--vs", help="override every supply voltage, e.g. 3kV")
    sub.add_argument("--duration", help="simulated time span, e.g. 30s")
    sub.add_argument("--rtol", help="relative tolerance (default 1e-6)")
    sub.add_argument("--atol-charge", dest="atol_charge",
                     help="absolute charge tolerance (default 1p)")
    sub.add_argument("--atol-strain", dest="atol_strain",
                     help="absolute strain tolerance (default 1n)")
    sub.add_argument("--max-step", dest="max_step",
                     help="largest solver step in seconds (default 50m)")
    sub.add_argument("--sample-interval", dest="sample_interval",
                     help="trace sample spacing (default 1m)")
    sub.add_argument("--method", choices=("Radau", "BDF", "LSODA"),
                     help="stiff integrator (default Radau)")
    sub.add_argument("--perturb", help="self-start seed: auto, none, "
                                       "jitter=<frac>, or DEA=<frac>[,...]")
    sub.add_argument("--seed", type=int, help="random seed for jitter "
                                              "perturbations (default 0)")
    sub.add_argument("--rest-length", dest="rest_length",
                     help="override every foot's segment rest length")
    sub.add_argument("--stride-gain", dest="stride_gain",
                     help="override every foot's stride gain")
    sub.add_argument("--engage", help="override every foot's engage strain")
    sub.add_argument("--release", help="override every foot's release strain")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="deasim",
        description="Simulate dielectric-elastomer oscillator networks "
                    "and crawling robots from a netlist and one DC supply.",
    )
    parser.add_argument("--version", action="version",
                        version=f"deasim {__version__}")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    p_check = commands.add_parser(
        "check", help="parse and validate a netlist, print its canonical form"
    )
    p_check.add_argument("netlist", help="netlist file to check")

    p_sim = commands.add_parser(
        "simulate", help="integrate a netlist and write trace.csv, gait.csv "
                         "and report.txt"
    )
    _add_common(p_sim)

    p_sweep = commands.add_parser(
        "sweep", help="run a grid of simulations over RS and/or VS and write "
                      "sweep.csv plus an SVG frequency plot"
    )
    _add_common(p_sweep)
    p_sweep.add_argument("--vary", action="append",
                         help="axis as NAME=lo:hi:count (NAME is RS or VS); "
                              "repeat for a second axis")
    p_sweep.add_argument("--workers", type=int,
                         help="parallel worker processes (default 1)")

    p_gait = commands.add_parser(
        "gait", help="re-derive gait.csv from an existing trace CSV"
    )
    _add_common(p_gait)
    p_gait.add_argument("--trace", help="trace.csv produced by simulate")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"deasim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "check":
            return cmd_check(args)
        cfg = RunConfig()
        if getattr(args, "config", None):
            _apply_config_file(cfg, Path(args.config))
        _apply_args(cfg, args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "gait":
            return cmd_gait(cfg)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"deasim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"deasim: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (AssemblyError,) as exc:
        print(f"deasim: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, PullInError) as exc:
        print(f"deasim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
