"""Simulator for dielectric-elastomer oscillator networks and crawling robots.

Given a netlist of coupled electro-mechanical components and one DC
supply, the package predicts self-primed oscillation, its phase
structure, frequency control through the serial resistors and the
supply voltage, and the resulting forward locomotion.
"""

from importlib.resources import files as _files
from pathlib import Path

from .electromech import (
    ActuatorState,
    DesCurve,
    MembraneParams,
    PullInError,
    capacitance,
    des_resistance,
    equilibrium_strain,
    inverter_static_output,
    strain_rate,
)
from .netlist import (
    CircuitModel,
    Diagnostic,
    Netlist,
    NetlistError,
    load_model,
    parse,
    print_canonical,
    validate,
)
from .dynamics import (
    AssemblyError,
    Perturbation,
    SimState,
    SolverConfig,
    SolverError,
    Trace,
    assemble,
    initial_state,
    integrate,
)
from .analysis import OscillationReport, SweepResult, analyze, sweep
from .locomotion import FootModel, GaitTrace, simulate_gait, speed

__version__ = "0.1.0"

__all__ = [
    "ActuatorState",
    "AssemblyError",
    "CircuitModel",
    "DesCurve",
    "Diagnostic",
    "FootModel",
    "GaitTrace",
    "MembraneParams",
    "Netlist",
    "NetlistError",
    "OscillationReport",
    "Perturbation",
    "PullInError",
    "SimState",
    "SolverConfig",
    "SolverError",
    "SweepResult",
    "Trace",
    "analyze",
    "assemble",
    "capacitance",
    "des_resistance",
    "equilibrium_strain",
    "example_path",
    "initial_state",
    "integrate",
    "inverter_static_output",
    "load_model",
    "parse",
    "print_canonical",
    "simulate_gait",
    "speed",
    "strain_rate",
    "sweep",
    "validate",
]


def example_path(name: str) -> Path:
    """Filesystem path of a bundled example asset such as ``trevor.net``."""
    path = Path(str(_files("deasim").joinpath("examples", name)))
    if not path.exists():
        raise FileNotFoundError(f"no bundled example named {name!r}")
    return path
